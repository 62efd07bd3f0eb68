#include "cpnmf/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace cpnmf {

namespace {

// Relabels to dense 0..k-1 codes in first-appearance order.
std::vector<std::size_t> dense_codes(const Labeling& labels, std::size_t& n_classes) {
    std::unordered_map<std::int64_t, std::size_t> code;
    std::vector<std::size_t> out;
    out.reserve(labels.size());
    for (auto l : labels)
        out.push_back(code.emplace(l, code.size()).first->second);
    n_classes = code.size();
    return out;
}

double entropy(const std::vector<double>& counts, double n) {
    double h = 0.0;
    for (double c : counts)
        if (c > 0.0)
            h -= (c / n) * std::log(c / n);
    return h;
}

}  // namespace

double nmi(const Labeling& y, const Labeling& c) {
    if (y.size() != c.size())
        throw std::invalid_argument("nmi: labelings differ in length");
    if (y.empty())
        throw std::invalid_argument("nmi: labelings are empty");

    std::size_t ky = 0;
    std::size_t kc = 0;
    const auto yc = dense_codes(y, ky);
    const auto cc = dense_codes(c, kc);
    const auto n = static_cast<double>(y.size());

    std::vector<double> joint(ky * kc, 0.0);
    std::vector<double> py(ky, 0.0);
    std::vector<double> pc(kc, 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        joint[yc[i] * kc + cc[i]] += 1.0;
        py[yc[i]] += 1.0;
        pc[cc[i]] += 1.0;
    }

    const double hy = entropy(py, n);
    const double hc = entropy(pc, n);
    if (hy + hc == 0.0)
        return 1.0;

    // Terms are summed in sorted order so that nmi(y, c) == nmi(c, y) bit for bit.
    std::vector<double> terms;
    for (std::size_t a = 0; a < ky; ++a) {
        for (std::size_t b = 0; b < kc; ++b) {
            const double nab = joint[a * kc + b];
            if (nab > 0.0)
                terms.push_back((nab / n) * std::log(nab * n / (py[a] * pc[b])));
        }
    }
    std::sort(terms.begin(), terms.end());
    double mi = 0.0;
    for (double t : terms)
        mi += t;
    return std::clamp(2.0 * mi / (hy + hc), 0.0, 1.0);
}

double nmi_cp(const Labeling& pairs, const Labeling& pairs_hat, const Labeling& cores, const Labeling& cores_hat) {
    return score_cp(pairs, pairs_hat, cores, cores_hat).nmi_cp;
}

CpScores score_cp(const Labeling& pairs, const Labeling& pairs_hat, const Labeling& cores, const Labeling& cores_hat) {
    if (pairs.size() != cores.size() || pairs.size() != pairs_hat.size() || pairs.size() != cores_hat.size())
        throw std::invalid_argument("nmi_cp: labelings differ in length");
    CpScores s;
    s.nmi_pairs = nmi(pairs, pairs_hat);
    s.nmi_core = nmi(cores, cores_hat);
    s.nmi_cp = 0.5 * (s.nmi_pairs + s.nmi_core);
    return s;
}

TruthLabels parse_ground_truth(std::istream& in, const std::vector<std::string>& node_ids) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < node_ids.size(); ++i)
        index.emplace(node_ids[i], i);

    TruthLabels truth;
    truth.pairs.assign(node_ids.size(), 0);
    truth.cores.assign(node_ids.size(), 0);
    std::vector<bool> seen(node_ids.size(), false);

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#' || line[start] == '%')
            continue;
        std::istringstream tokens(line);
        std::vector<std::string> f;
        for (std::string tok; tokens >> tok;)
            f.push_back(std::move(tok));
        if (f.size() != 3)
            throw ParseError("expected 'node_id pair_id core_flag'", line_no);

        auto it = index.find(f[0]);
        if (it == index.end())
            throw ParseError("unknown node id '" + f[0] + "'", line_no);
        if (seen[it->second])
            throw ParseError("duplicate node id '" + f[0] + "'", line_no);
        seen[it->second] = true;

        std::int64_t pair = 0;
        auto [pp, pec] = std::from_chars(f[1].data(), f[1].data() + f[1].size(), pair);
        if (pec != std::errc() || pp != f[1].data() + f[1].size())
            throw ParseError("pair id must be an integer, got '" + f[1] + "'", line_no);
        if (f[2] != "0" && f[2] != "1")
            throw ParseError("core flag must be 0 or 1, got '" + f[2] + "'", line_no);

        truth.pairs[it->second] = pair;
        truth.cores[it->second] = f[2] == "1" ? 1 : 0;
    }

    std::string missing;
    for (std::size_t i = 0; i < node_ids.size(); ++i) {
        if (!seen[i])
            missing += (missing.empty() ? "" : ", ") + node_ids[i];
    }
    if (!missing.empty())
        throw ParseError("ground truth is missing nodes: " + missing, 0);
    return truth;
}

TruthLabels load_ground_truth(const std::filesystem::path& path, const std::vector<std::string>& node_ids) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open ground truth '" + path.string() + "'");
    return parse_ground_truth(in, node_ids);
}

void write_ground_truth(std::ostream& out, const std::vector<std::string>& node_ids, const TruthLabels& truth) {
    if (truth.pairs.size() != node_ids.size() || truth.cores.size() != node_ids.size())
        throw std::invalid_argument("ground truth does not match node count");
    for (std::size_t i = 0; i < node_ids.size(); ++i)
        out << node_ids[i] << ' ' << truth.pairs[i] << ' ' << (truth.cores[i] ? 1 : 0) << '\n';
}

}  // namespace cpnmf
