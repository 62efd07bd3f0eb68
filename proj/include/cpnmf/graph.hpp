#pragma once

#include "cpnmf/types.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace cpnmf {

/// Error raised for malformed input files; carries the offending line number
/// (1-based, 0 when the error is not tied to a line).
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

enum class Directedness { Undirected, Directed };

/// Node-indexed network with a dense adjacency view.
///
/// Node identifiers are arbitrary strings mapped to 0..N-1 in order of first
/// appearance. The adjacency is non-negative with a zero diagonal and, for
/// undirected input, symmetric. A Graph is immutable once built.
class Graph {
  public:
    Graph() = default;

    /// Takes ownership of an adjacency matrix. Throws std::invalid_argument if
    /// the ids are duplicated, the matrix is not N x N, has negative entries
    /// or a nonzero diagonal.
    Graph(std::vector<std::string> node_ids, MatrixXd adjacency);

    Index n() const noexcept { return adjacency_.rows(); }
    const std::vector<std::string>& node_ids() const noexcept { return node_ids_; }
    const MatrixXd& adjacency() const noexcept { return adjacency_; }

    /// Dense index of a node id; throws std::out_of_range for unknown ids.
    Index index_of(const std::string& id) const;
    bool contains(const std::string& id) const { return index_.count(id) != 0; }

    bool is_symmetric() const { return adjacency_ == adjacency_.transpose(); }

  private:
    std::vector<std::string> node_ids_;
    std::unordered_map<std::string, Index> index_;
    MatrixXd adjacency_;
};

/// Parses "src dst [weight]" lines. '#' and '%' start comment lines.
/// Duplicate edges keep the maximum weight, self-loops are dropped and
/// undirected input is symmetrized with max(V, V^T).
Graph parse_edge_list(std::istream& in, Directedness directedness = Directedness::Undirected);
Graph load_edge_list(const std::filesystem::path& path, Directedness directedness = Directedness::Undirected);

/// Writes the upper triangle (undirected) or every nonzero entry (directed).
/// Weights equal to 1 are omitted. Isolated nodes are written as a self-loop
/// line so that they survive a reload.
void write_edge_list(std::ostream& out, const Graph& g, Directedness directedness = Directedness::Undirected);
void save_edge_list(const std::filesystem::path& path, const Graph& g,
                    Directedness directedness = Directedness::Undirected);

/// Fraction of nonzero off-diagonal entries, in [0, 1]. Requires N >= 2.
double density(const Graph& g);

/// Row sums of the adjacency (weighted degree).
VectorXd degrees(const Graph& g);

}  // namespace cpnmf
