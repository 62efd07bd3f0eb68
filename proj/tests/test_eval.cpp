#include "cpnmf/eval.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

using namespace cpnmf;

namespace {

// Entropies straight from a contingency table keyed by label values.
double oracle_nmi(const Labeling& y, const Labeling& c) {
    const double n = static_cast<double>(y.size());
    std::map<std::int64_t, double> py, pc;
    std::map<std::pair<std::int64_t, std::int64_t>, double> joint;
    for (std::size_t i = 0; i < y.size(); ++i) {
        py[y[i]] += 1;
        pc[c[i]] += 1;
        joint[{y[i], c[i]}] += 1;
    }
    auto h = [n](const auto& counts) {
        double s = 0;
        for (const auto& [k, v] : counts)
            s -= v / n * std::log(v / n);
        return s;
    };
    const double hy = h(py), hc = h(pc);
    if (hy + hc == 0)
        return 1.0;
    double mi = 0;
    for (const auto& [k, v] : joint)
        mi += v / n * std::log((v / n) / ((py[k.first] / n) * (pc[k.second] / n)));
    return 2 * mi / (hy + hc);
}

}  // namespace

TEST_CASE("nmi: identical and independent labelings") {
    CHECK(nmi({0, 0, 1, 1}, {0, 0, 1, 1}) == doctest::Approx(1.0));
    CHECK(nmi({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("nmi: merged classes against the counting oracle") {
    const Labeling y{0, 0, 1, 1, 2, 2};
    const Labeling c{0, 0, 1, 1, 1, 1};
    // I = H(C) for a coarsening; H(Y) = log 3, H(C) = log 3 - (2/3) log 2.
    const double hy = std::log(3.0);
    const double hc = std::log(3.0) - (2.0 / 3.0) * std::log(2.0);
    const double expected = 2 * hc / (hy + hc);
    CHECK(oracle_nmi(y, c) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(nmi(y, c) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("nmi: single-class conventions") {
    CHECK(nmi({3, 3, 3}, {7, 7, 7}) == 1.0);
    CHECK(nmi({3, 3, 3}, {0, 1, 0}) == 0.0);
    CHECK(nmi({5}, {9}) == 1.0);
}

TEST_CASE("nmi: errors") {
    CHECK_THROWS_AS(nmi({0, 1}, {0}), std::invalid_argument);
    CHECK_THROWS_AS(nmi({}, {}), std::invalid_argument);
}

TEST_CASE("nmi: symmetric, permutation invariant and bounded on random labelings") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng() % 40;
        const auto ky = 1 + rng() % 5;
        const auto kc = 1 + rng() % 5;
        Labeling y(n), c(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<std::int64_t>(rng() % ky);
            c[i] = static_cast<std::int64_t>(rng() % kc);
        }
        const double v = nmi(y, c);
        CHECK(v == nmi(c, y));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);

        // Relabel y by a random bijection onto arbitrary ids.
        std::vector<std::int64_t> perm{-7, 100, 3, 42, 9};
        std::shuffle(perm.begin(), perm.end(), rng);
        Labeling y2(n);
        for (std::size_t i = 0; i < n; ++i)
            y2[i] = perm[static_cast<std::size_t>(y[i])];
        CHECK(nmi(y2, c) == doctest::Approx(v).epsilon(1e-12));
    }
}

TEST_CASE("nmi_cp") {
    const Labeling r{0, 0, 1, 1}, c{1, 0, 1, 0};
    CHECK(nmi_cp(r, r, c, c) == doctest::Approx(1.0));
    // Perfect pairs, core flags independent of the truth.
    CHECK(nmi_cp(r, r, c, {1, 1, 0, 0}) == doctest::Approx(0.5));
    const auto s = score_cp(r, {0, 0, 0, 0}, c, c);
    CHECK(s.nmi_pairs == 0.0);
    CHECK(s.nmi_core == doctest::Approx(1.0));
    CHECK(s.nmi_cp == doctest::Approx(0.5));
    CHECK_THROWS_AS(nmi_cp(r, r, c, {1}), std::invalid_argument);
}

TEST_CASE("ground truth: aligned to node order") {
    std::istringstream in("b 0 0\na 0 1\n");
    const auto t = parse_ground_truth(in, {"a", "b"});
    CHECK(t.pairs == Labeling{0, 0});
    CHECK(t.cores == Labeling{1, 0});
}

TEST_CASE("ground truth: errors") {
    auto parse = [](const std::string& text, const std::vector<std::string>& ids) {
        std::istringstream in(text);
        return parse_ground_truth(in, ids);
    };
    try {
        parse("a 0 1\n", {"a", "b"});
        FAIL("expected missing-node error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find('b') != std::string::npos);
    }
    try {
        parse("a 0 1\nb 0 2\n", {"a", "b"});
        FAIL("expected flag error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse("a 0 1\nz 0 0\n", {"a"}), ParseError);
    CHECK_THROWS_AS(parse("a 0 1\na 0 0\n", {"a"}), ParseError);
    CHECK_THROWS_AS(parse("a x 1\n", {"a"}), ParseError);
    CHECK_THROWS_AS(parse("a 0\n", {"a"}), ParseError);
}

TEST_CASE("ground truth: write then parse") {
    const std::vector<std::string> ids{"x", "y", "z"};
    const TruthLabels t{{2, 2, 5}, {1, 0, 1}};
    std::ostringstream out;
    write_ground_truth(out, ids, t);
    std::istringstream in(out.str());
    const auto back = parse_ground_truth(in, ids);
    CHECK(back.pairs == t.pairs);
    CHECK(back.cores == t.cores);
}
