#pragma once

#include "cpnmf/graph.hpp"
#include "cpnmf/types.hpp"

namespace cpnmf {

struct BaselineLabels {
    Labeling pairs;
    Labeling cores;
};

/// Sanity baseline: one pair for the whole network, and the
/// ceil(core_fraction * N) highest-degree nodes are cores (ties by index).
BaselineLabels degree_rank_baseline(const Graph& g, double core_fraction = 0.5);

}  // namespace cpnmf
