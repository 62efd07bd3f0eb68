#pragma once

#include "cpnmf/graph.hpp"
#include "cpnmf/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace cpnmf {

/// Normalized mutual information 2 I(Y;C) / (H(Y) + H(C)) with natural logs
/// over empirical joint counts. Returns 1 when both labelings are a single
/// class. Throws std::invalid_argument on length mismatch or empty input.
double nmi(const Labeling& y, const Labeling& c);

/// Mean of the pair-label NMI and the core-flag NMI.
double nmi_cp(const Labeling& pairs, const Labeling& pairs_hat, const Labeling& cores, const Labeling& cores_hat);

struct CpScores {
    double nmi_pairs = 0.0;
    double nmi_core = 0.0;
    double nmi_cp = 0.0;
};

CpScores score_cp(const Labeling& pairs, const Labeling& pairs_hat, const Labeling& cores, const Labeling& cores_hat);

/// Pair and core labels aligned to a node order.
struct TruthLabels {
    Labeling pairs;
    Labeling cores;
};

/// Reads "node_id pair_id core_flag" lines ('#' comments allowed) and aligns
/// them to `node_ids`. Unknown ids, duplicates, bad flags and missing nodes
/// are errors; ParseError carries the line number where one applies.
TruthLabels parse_ground_truth(std::istream& in, const std::vector<std::string>& node_ids);
TruthLabels load_ground_truth(const std::filesystem::path& path, const std::vector<std::string>& node_ids);

void write_ground_truth(std::ostream& out, const std::vector<std::string>& node_ids, const TruthLabels& truth);

}  // namespace cpnmf
