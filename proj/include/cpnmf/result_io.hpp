#pragma once

#include "cpnmf/graph.hpp"
#include "cpnmf/masked_nmf.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace cpnmf {

/// Result document:
///   {nodes: [{id, pair, core, core_score, low_confidence, memberships}],
///    active_pairs, objective_trace, iterations, converged, hyperparameters, seed}
/// `pair` indexes active_pairs, `core_score` is 1 - M for the assigned pair and
/// `memberships` is the W row restricted to active pairs.
nlohmann::json result_to_json(const DetectionResult<double>& res, const std::vector<std::string>& node_ids,
                              const Hyperparameters& hp);

nlohmann::json hyperparameters_to_json(const Hyperparameters& hp);

/// Node ids with hard labels, as read back from a result document.
struct ResultLabels {
    std::vector<std::string> node_ids;
    Labeling pairs;
    Labeling cores;
};

ResultLabels labels_from_json(const nlohmann::json& doc);
ResultLabels load_result_labels(const std::filesystem::path& path);

/// Node ids ordered for display: pairs by descending size (ties: lower pair
/// position), cores before periphery, then by descending core score.
std::vector<Index> display_order(const DetectionResult<double>& res);

/// CSV "node,pair,core,<ids...>" whose rows and adjacency columns follow display_order().
void write_reordered_adjacency(std::ostream& out, const Graph& g, const DetectionResult<double>& res);

/// CSV with header "node,0,1,...,K-1"; one row per node. H is written transposed.
void write_factor_csv(std::ostream& out, const std::vector<std::string>& node_ids, const MatrixXd& node_by_pair);

/// Writes through a sibling temporary file renamed into place on success, so a
/// failure never leaves a partial file behind.
void write_file_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer);

}  // namespace cpnmf
