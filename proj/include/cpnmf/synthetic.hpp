#pragma once

#include "cpnmf/eval.hpp"
#include "cpnmf/graph.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace cpnmf {

/// Block-model parameters for planted core-periphery pairs.
struct PlantedConfig {
    std::vector<Index> pair_sizes{100, 100};
    double core_fraction = 0.5;
    double p_core_core = 0.6;
    double p_core_periph = 0.6;
    double p_periph_periph = 0.05;
    double p_cross = 0.05;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

/// Splits n nodes into `pairs` nearly equal sizes (earlier pairs take the remainder).
std::vector<Index> even_pair_sizes(Index n, Index pairs);

/// Secondary membership of a node that belongs to two pairs.
struct Membership {
    std::int64_t pair = 0;
    bool core = false;
};

struct GroundTruth {
    Labeling pair_label;
    Labeling core_flag;
    /// Set only for nodes with a second pair membership.
    std::vector<std::optional<Membership>> secondary;

    TruthLabels labels() const { return {pair_label, core_flag}; }
};

struct PlantedNetwork {
    Graph graph;
    GroundTruth truth;
};

/// Samples an undirected 0/1 network: within pair k the first
/// ceil(core_fraction * size) nodes are cores, and every unordered node pair
/// gets an edge independently with the probability of its block.
/// Node ids are "0".."N-1". Deterministic in cfg.seed.
PlantedNetwork generate(const PlantedConfig& cfg);

/// Two pairs where the last `overlap` nodes of pair 0 are also core members of
/// pair 1 (while periphery in pair 0). A node pair sharing several memberships
/// gets an edge if any membership samples one. overlap == 0 reproduces generate().
PlantedNetwork generate_overlapping(const PlantedConfig& cfg, Index overlap);

}  // namespace cpnmf
