#include "cpnmf/eval.hpp"
#include "cpnmf/masked_nmf.hpp"
#include "cpnmf/synthetic.hpp"

#include <doctest.h>

using namespace cpnmf;

namespace {

PlantedNetwork single_pair(std::uint64_t seed) {
    PlantedConfig cfg;
    cfg.pair_sizes = {40};
    cfg.p_core_core = cfg.p_core_periph = 0.9;
    cfg.p_periph_periph = 0.05;
    cfg.seed = seed;
    return generate(cfg);
}

}  // namespace

TEST_CASE("single planted pair: cores recovered") {
    // A seed succeeds when one column carries most of the W mass and the core
    // flags match the planted cores on at least 90% of the nodes.
    Hyperparameters hp;
    hp.k_init = 8;
    int recovered = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto net = single_pair(seed);
        hp.seed = seed;
        const auto res = fit(net.graph.adjacency(), hp);
        double agree = 0;
        for (std::size_t i = 0; i < res.core_flags.size(); ++i)
            agree += (res.core_flags[i] ? 1 : 0) == net.truth.core_flag[i] ? 1 : 0;
        const VectorXd mass = res.state.W.colwise().sum().transpose();
        const bool dominant = mass(res.active_pairs.front()) > 0.5 * mass.sum();
        recovered += dominant && agree / 40.0 >= 0.9 ? 1 : 0;
    }
    CHECK(recovered >= 4);
}

TEST_CASE("objective trace is non-increasing") {
    Hyperparameters hp;
    hp.n_iter = 60;
    hp.k_init = 6;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        PlantedConfig cfg;
        cfg.pair_sizes = {25, 25};
        cfg.seed = seed;
        hp.seed = seed;
        const auto res = fit(generate(cfg).graph.adjacency(), hp);
        REQUIRE(res.objective_trace.size() == static_cast<std::size_t>(res.iterations) + 1);
        for (std::size_t t = 1; t < res.objective_trace.size(); ++t)
            CHECK(res.objective_trace[t] <= res.objective_trace[t - 1] * (1 + 1e-9) + 1e-12);
        CHECK(res.state.feasible());
    }
}

TEST_CASE("tracked objective matches a fresh evaluation") {
    PlantedConfig cfg;
    cfg.pair_sizes = {30, 30};
    cfg.seed = 11;
    const MatrixXd V = generate(cfg).graph.adjacency();
    Hyperparameters hp;
    hp.k_init = 5;
    hp.n_iter = 80;
    hp.seed = 4;
    const auto res = fit(V, hp);
    const auto start = FactorState<double>::random(V.rows(), hp.k_init, hp.seed);
    CHECK(res.objective_trace.front() == doctest::Approx(objective(V, start, hp)).epsilon(1e-12));
    CHECK(res.objective_trace.back() == doctest::Approx(objective(V, res.state, hp)).epsilon(1e-9));
}

TEST_CASE("fit is deterministic") {
    const auto net = single_pair(3);
    Hyperparameters hp;
    hp.n_iter = 40;
    hp.k_init = 5;
    hp.seed = 12;
    const auto a = fit(net.graph.adjacency(), hp);
    const auto b = fit(net.graph.adjacency(), hp);
    CHECK(a.objective_trace == b.objective_trace);
    CHECK(a.state.W == b.state.W);
    CHECK(a.state.M == b.state.M);
    CHECK(a.pair_labels == b.pair_labels);
    CHECK(a.core_flags == b.core_flags);
}

TEST_CASE("single column gives a single pair") {
    const auto net = single_pair(1);
    Hyperparameters hp;
    hp.k_init = 1;
    hp.n_iter = 20;
    const auto res = fit(net.graph.adjacency(), hp);
    CHECK(res.active_pairs == std::vector<Index>{0});
    for (Index label : res.pair_labels)
        CHECK(label == 0);
    CHECK(res.core_scores.isApprox((1.0 - res.state.M.array()).matrix()));
}

TEST_CASE("tolerance stops the fit early") {
    const auto net = single_pair(2);
    Hyperparameters hp;
    hp.k_init = 4;
    hp.n_iter = 5000;
    hp.tol = 1e-4;
    const auto res = fit(net.graph.adjacency(), hp);
    CHECK(res.converged);
    CHECK(res.iterations < 5000);
}

TEST_CASE("input validation") {
    Hyperparameters hp;
    hp.n_iter = 1;
    CHECK_THROWS_AS(fit(MatrixXd::Zero(2, 3), hp), std::invalid_argument);
    CHECK_THROWS_AS(fit(MatrixXd::Zero(0, 0), hp), std::invalid_argument);
    MatrixXd asym = MatrixXd::Zero(2, 2);
    asym(0, 1) = 1;
    CHECK_THROWS_AS(fit(asym, hp), std::invalid_argument);
    MatrixXd neg = -MatrixXd::Ones(2, 2);
    CHECK_THROWS_AS(fit(neg, hp), std::invalid_argument);
    hp.n_iter = 0;
    CHECK_THROWS_AS(fit(MatrixXd::Zero(2, 2), hp), std::invalid_argument);
}

TEST_CASE("empty graph: every pair vanishes and the fit reports it") {
    Hyperparameters hp;
    hp.k_init = 3;
    hp.n_iter = 20;
    CHECK_THROWS_AS(fit(MatrixXd::Zero(6, 6), hp), std::runtime_error);
}
