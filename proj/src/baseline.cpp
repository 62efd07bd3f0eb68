#include "cpnmf/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cpnmf {

BaselineLabels degree_rank_baseline(const Graph& g, double core_fraction) {
    if (!(core_fraction > 0.0 && core_fraction < 1.0))
        throw std::invalid_argument("core_fraction must lie in (0, 1)");
    const auto n = static_cast<std::size_t>(g.n());
    const VectorXd deg = degrees(g);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return deg(static_cast<Index>(x)) > deg(static_cast<Index>(y));
    });

    const auto n_core = static_cast<std::size_t>(std::ceil(core_fraction * static_cast<double>(n)));
    BaselineLabels out;
    out.pairs.assign(n, 0);
    out.cores.assign(n, 0);
    for (std::size_t r = 0; r < std::min(n_core, n); ++r)
        out.cores[order[r]] = 1;
    return out;
}

}  // namespace cpnmf
