#include "cpnmf/result_io.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace cpnmf {

using nlohmann::json;

json hyperparameters_to_json(const Hyperparameters& hp) {
    return json{{"a", hp.a},
                {"b", hp.b},
                {"sigma_bar", hp.sigma_bar},
                {"sigma_hat", hp.sigma_hat},
                {"mu_hat", hp.mu_hat},
                {"k", hp.k_init},
                {"iters", hp.n_iter},
                {"tol", hp.tol},
                {"eps", hp.eps},
                {"prune_threshold", hp.prune_threshold}};
}

json result_to_json(const DetectionResult<double>& res, const std::vector<std::string>& node_ids,
                    const Hyperparameters& hp) {
    const auto& s = res.state;
    if (static_cast<Index>(node_ids.size()) != s.n())
        throw std::invalid_argument("result_to_json: node id count differs from N");

    json nodes = json::array();
    for (Index i = 0; i < s.n(); ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const Index pos = res.pair_labels[ui];
        const Index k = res.active_pairs[static_cast<std::size_t>(pos)];
        json memberships = json::array();
        for (Index a : res.active_pairs)
            memberships.push_back(s.W(i, a));
        nodes.push_back(json{{"id", node_ids[ui]},
                             {"pair", pos},
                             {"core", static_cast<bool>(res.core_flags[ui])},
                             {"core_score", res.core_scores(i, k)},
                             {"low_confidence", static_cast<bool>(res.low_confidence[ui])},
                             {"memberships", std::move(memberships)}});
    }
    return json{{"nodes", std::move(nodes)},
                {"active_pairs", res.active_pairs},
                {"objective_trace", res.objective_trace},
                {"iterations", res.iterations},
                {"converged", res.converged},
                {"hyperparameters", hyperparameters_to_json(hp)},
                {"seed", hp.seed}};
}

ResultLabels labels_from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("nodes") || !doc["nodes"].is_array())
        throw std::runtime_error("result document has no 'nodes' array");
    ResultLabels out;
    for (const auto& node : doc["nodes"]) {
        out.node_ids.push_back(node.at("id").get<std::string>());
        out.pairs.push_back(node.at("pair").get<std::int64_t>());
        out.cores.push_back(node.at("core").get<bool>() ? 1 : 0);
    }
    return out;
}

ResultLabels load_result_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open result '" + path.string() + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("malformed result JSON '" + path.string() + "': " + e.what());
    }
    return labels_from_json(doc);
}

std::vector<Index> display_order(const DetectionResult<double>& res) {
    const auto n = res.pair_labels.size();
    std::vector<Index> size(res.active_pairs.size(), 0);
    for (Index p : res.pair_labels)
        ++size[static_cast<std::size_t>(p)];

    auto score = [&](std::size_t i) {
        const Index k = res.active_pairs[static_cast<std::size_t>(res.pair_labels[i])];
        return res.core_scores(static_cast<Index>(i), k);
    };
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) {
        const auto ux = static_cast<std::size_t>(x);
        const auto uy = static_cast<std::size_t>(y);
        const Index px = res.pair_labels[ux];
        const Index py = res.pair_labels[uy];
        if (px != py) {
            const Index sx = size[static_cast<std::size_t>(px)];
            const Index sy = size[static_cast<std::size_t>(py)];
            return sx != sy ? sx > sy : px < py;
        }
        if (res.core_flags[ux] != res.core_flags[uy])
            return static_cast<bool>(res.core_flags[ux]);
        return score(ux) > score(uy);
    });
    return order;
}

void write_reordered_adjacency(std::ostream& out, const Graph& g, const DetectionResult<double>& res) {
    if (g.n() != res.state.n())
        throw std::invalid_argument("graph and result sizes differ");
    const auto order = display_order(res);
    const auto& ids = g.node_ids();
    out << "node,pair,core";
    for (Index j : order)
        out << ',' << ids[static_cast<std::size_t>(j)];
    out << '\n';
    const auto& v = g.adjacency();
    for (Index i : order) {
        const auto ui = static_cast<std::size_t>(i);
        out << ids[ui] << ',' << res.pair_labels[ui] << ',' << (res.core_flags[ui] ? 1 : 0);
        for (Index j : order)
            out << ',' << v(i, j);
        out << '\n';
    }
}

void write_factor_csv(std::ostream& out, const std::vector<std::string>& node_ids, const MatrixXd& node_by_pair) {
    if (static_cast<Index>(node_ids.size()) != node_by_pair.rows())
        throw std::invalid_argument("factor rows differ from node count");
    out << "node";
    for (Index k = 0; k < node_by_pair.cols(); ++k)
        out << ',' << k;
    out << '\n';
    std::ostringstream cell;
    cell.precision(17);
    for (Index i = 0; i < node_by_pair.rows(); ++i) {
        out << node_ids[static_cast<std::size_t>(i)];
        for (Index k = 0; k < node_by_pair.cols(); ++k) {
            cell.str({});
            cell << node_by_pair(i, k);
            out << ',' << cell.str();
        }
        out << '\n';
    }
}

void write_file_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer) {
    auto tmp = path;
    tmp += ".tmp";
    try {
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out)
                throw std::runtime_error("cannot write '" + path.string() + "'");
            writer(out);
            out.flush();
            if (!out)
                throw std::runtime_error("failed writing '" + path.string() + "'");
        }
        std::filesystem::rename(tmp, path);
    } catch (...) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        throw;
    }
}

}  // namespace cpnmf
