#include "cpnmf/synthetic.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace cpnmf {

namespace {

void check_probability(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
}

Index core_count(Index size, double core_fraction) {
    return static_cast<Index>(std::ceil(core_fraction * static_cast<double>(size)));
}

// Uniform double in [0, 1) from the top 53 bits; stable across standard libraries.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct NodeRoles {
    // Up to two (pair, core) memberships per node.
    std::vector<Membership> primary;
    std::vector<std::optional<Membership>> secondary;
};

double edge_probability(const NodeRoles& roles, const PlantedConfig& cfg, std::size_t i, std::size_t j) {
    auto block = [&](const Membership& a, const Membership& b) {
        if (a.core && b.core)
            return cfg.p_core_core;
        if (a.core || b.core)
            return cfg.p_core_periph;
        return cfg.p_periph_periph;
    };
    double miss = 1.0;
    bool shared = false;
    auto consider = [&](const Membership& a, const std::optional<Membership>& a2, const Membership& b,
                        const std::optional<Membership>& b2) {
        for (const Membership* x : {&a, a2 ? &*a2 : nullptr}) {
            if (!x)
                continue;
            for (const Membership* y : {&b, b2 ? &*b2 : nullptr}) {
                if (y && x->pair == y->pair) {
                    shared = true;
                    miss *= 1.0 - block(*x, *y);
                }
            }
        }
    };
    consider(roles.primary[i], roles.secondary[i], roles.primary[j], roles.secondary[j]);
    return shared ? 1.0 - miss : cfg.p_cross;
}

PlantedNetwork sample(const PlantedConfig& cfg, const NodeRoles& roles) {
    const auto n = static_cast<Index>(roles.primary.size());
    std::mt19937_64 rng(cfg.seed);
    MatrixXd adjacency = MatrixXd::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            const double p = edge_probability(roles, cfg, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            if (uniform01(rng) < p) {
                adjacency(i, j) = 1.0;
                adjacency(j, i) = 1.0;
            }
        }
    }

    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(n));
    GroundTruth truth;
    for (Index i = 0; i < n; ++i) {
        ids.push_back(std::to_string(i));
        truth.pair_label.push_back(roles.primary[static_cast<std::size_t>(i)].pair);
        truth.core_flag.push_back(roles.primary[static_cast<std::size_t>(i)].core ? 1 : 0);
    }
    truth.secondary = roles.secondary;
    return {Graph(std::move(ids), std::move(adjacency)), std::move(truth)};
}

NodeRoles plant_roles(const PlantedConfig& cfg) {
    NodeRoles roles;
    for (std::size_t k = 0; k < cfg.pair_sizes.size(); ++k) {
        const Index size = cfg.pair_sizes[k];
        const Index cores = core_count(size, cfg.core_fraction);
        for (Index i = 0; i < size; ++i)
            roles.primary.push_back({static_cast<std::int64_t>(k), i < cores});
    }
    roles.secondary.assign(roles.primary.size(), std::nullopt);
    return roles;
}

}  // namespace

void PlantedConfig::validate() const {
    check_probability(p_core_core, "p_core_core");
    check_probability(p_core_periph, "p_core_periph");
    check_probability(p_periph_periph, "p_periph_periph");
    check_probability(p_cross, "p_cross");
    if (!(core_fraction > 0.0 && core_fraction < 1.0))
        throw std::invalid_argument("core_fraction must lie in (0, 1)");
    if (pair_sizes.empty())
        throw std::invalid_argument("at least one pair is required");
    for (Index size : pair_sizes) {
        if (size < 2)
            throw std::invalid_argument("every pair needs at least 2 nodes");
        const Index cores = core_count(size, core_fraction);
        if (cores < 1 || cores >= size)
            throw std::invalid_argument("pair of size " + std::to_string(size) +
                                        " has no core or no periphery node at this core_fraction");
    }
}

std::vector<Index> even_pair_sizes(Index n, Index pairs) {
    if (pairs < 1 || n < pairs)
        throw std::invalid_argument("need 1 <= pairs <= n");
    std::vector<Index> sizes(static_cast<std::size_t>(pairs), n / pairs);
    for (Index k = 0; k < n % pairs; ++k)
        ++sizes[static_cast<std::size_t>(k)];
    return sizes;
}

PlantedNetwork generate(const PlantedConfig& cfg) {
    cfg.validate();
    return sample(cfg, plant_roles(cfg));
}

PlantedNetwork generate_overlapping(const PlantedConfig& cfg, Index overlap) {
    cfg.validate();
    if (cfg.pair_sizes.size() != 2)
        throw std::invalid_argument("overlapping generator needs exactly 2 pairs");
    if (overlap < 0 || overlap >= std::min(cfg.pair_sizes[0], cfg.pair_sizes[1]))
        throw std::invalid_argument("overlap must be in [0, min pair size)");

    NodeRoles roles = plant_roles(cfg);
    const Index first = cfg.pair_sizes[0];
    for (Index i = first - overlap; i < first; ++i) {
        auto& primary = roles.primary[static_cast<std::size_t>(i)];
        primary.core = false;
        roles.secondary[static_cast<std::size_t>(i)] = Membership{1, true};
    }
    return sample(cfg, roles);
}

}  // namespace cpnmf
