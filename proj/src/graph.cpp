#include "cpnmf/graph.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace cpnmf {

Graph::Graph(std::vector<std::string> node_ids, MatrixXd adjacency)
    : node_ids_(std::move(node_ids)), adjacency_(std::move(adjacency)) {
    const auto n = static_cast<Index>(node_ids_.size());
    if (adjacency_.rows() != n || adjacency_.cols() != n)
        throw std::invalid_argument("adjacency must be N x N with N = number of node ids");
    for (Index i = 0; i < n; ++i) {
        if (!index_.emplace(node_ids_[static_cast<std::size_t>(i)], i).second)
            throw std::invalid_argument("duplicate node id '" + node_ids_[static_cast<std::size_t>(i)] + "'");
    }
    if ((adjacency_.array() < 0.0).any() || !adjacency_.allFinite())
        throw std::invalid_argument("adjacency entries must be finite and non-negative");
    if ((adjacency_.diagonal().array() != 0.0).any())
        throw std::invalid_argument("adjacency diagonal must be zero");
}

Index Graph::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end())
        throw std::out_of_range("unknown node id '" + id + "'");
    return it->second;
}

namespace {

double parse_weight(const std::string& token, std::size_t line_no) {
    double w = 0.0;
    const char* first = token.data();
    const char* last = first + token.size();
    auto [ptr, ec] = std::from_chars(first, last, w);
    if (ec != std::errc() || ptr != last || !std::isfinite(w))
        throw ParseError("non-numeric weight '" + token + "'", line_no);
    if (w < 0.0)
        throw ParseError("negative weight '" + token + "'", line_no);
    return w;
}

}  // namespace

Graph parse_edge_list(std::istream& in, Directedness directedness) {
    std::vector<std::string> ids;
    std::unordered_map<std::string, Index> index;
    std::map<std::pair<Index, Index>, double> edges;

    auto intern = [&](const std::string& id) {
        auto [it, inserted] = index.emplace(id, static_cast<Index>(ids.size()));
        if (inserted)
            ids.push_back(id);
        return it->second;
    };

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#' || line[start] == '%')
            continue;
        std::istringstream tokens(line);
        std::vector<std::string> fields;
        for (std::string tok; tokens >> tok;)
            fields.push_back(std::move(tok));
        if (fields.size() != 2 && fields.size() != 3)
            throw ParseError("expected 'src dst [weight]', got " + std::to_string(fields.size()) + " tokens",
                             line_no);
        const double w = fields.size() == 3 ? parse_weight(fields[2], line_no) : 1.0;
        const Index u = intern(fields[0]);
        const Index v = intern(fields[1]);
        if (u == v)
            continue;
        auto [it, inserted] = edges.emplace(std::pair{u, v}, w);
        if (!inserted)
            it->second = std::max(it->second, w);
    }
    if (ids.empty())
        throw ParseError("edge list is empty", 0);

    const auto n = static_cast<Index>(ids.size());
    MatrixXd adjacency = MatrixXd::Zero(n, n);
    for (const auto& [uv, w] : edges)
        adjacency(uv.first, uv.second) = std::max(adjacency(uv.first, uv.second), w);
    if (directedness == Directedness::Undirected)
        adjacency = adjacency.cwiseMax(adjacency.transpose()).eval();
    return Graph(std::move(ids), std::move(adjacency));
}

Graph load_edge_list(const std::filesystem::path& path, Directedness directedness) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open edge list '" + path.string() + "'");
    return parse_edge_list(in, directedness);
}

void write_edge_list(std::ostream& out, const Graph& g, Directedness directedness) {
    const auto& v = g.adjacency();
    const auto& ids = g.node_ids();
    for (Index i = 0; i < g.n(); ++i) {
        // A self-loop line keeps an isolated node in the file; loading drops the loop.
        if (v.row(i).isZero(0.0) && v.col(i).isZero(0.0))
            out << ids[static_cast<std::size_t>(i)] << ' ' << ids[static_cast<std::size_t>(i)] << '\n';
        const Index j0 = directedness == Directedness::Undirected ? i + 1 : 0;
        for (Index j = j0; j < g.n(); ++j) {
            const double w = v(i, j);
            if (w == 0.0)
                continue;
            out << ids[static_cast<std::size_t>(i)] << ' ' << ids[static_cast<std::size_t>(j)];
            if (w != 1.0) {
                std::ostringstream ws;
                ws.precision(17);
                ws << w;
                out << ' ' << ws.str();
            }
            out << '\n';
        }
    }
}

void save_edge_list(const std::filesystem::path& path, const Graph& g, Directedness directedness) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write edge list '" + path.string() + "'");
    write_edge_list(out, g, directedness);
    if (!out)
        throw std::runtime_error("failed writing '" + path.string() + "'");
}

double density(const Graph& g) {
    const Index n = g.n();
    if (n < 2)
        throw std::invalid_argument("density requires at least 2 nodes");
    const auto nonzero = (g.adjacency().array() != 0.0).count();
    return static_cast<double>(nonzero) / static_cast<double>(n * (n - 1));
}

VectorXd degrees(const Graph& g) { return g.adjacency().rowwise().sum(); }

}  // namespace cpnmf
