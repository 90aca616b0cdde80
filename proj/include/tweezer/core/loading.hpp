#pragma once

#include <cmath>
#include <random>
#include <variant>

#include "tweezer/core/error.hpp"
#include "tweezer/core/grid.hpp"
#include "tweezer/core/random.hpp"

namespace tweezer {

struct BernoulliLoading {
    double p_fill = 0.5;
};

// Poisson(mean) atoms per trap followed by pairwise ejection: a site keeps
// one atom iff the loaded number is odd.
struct ParityProjectedLoading {
    double mean = 1.0;
};

using LoadingModel = std::variant<BernoulliLoading, ParityProjectedLoading>;

inline double expected_fill(const LoadingModel& model) {
    if (const auto* b = std::get_if<BernoulliLoading>(&model)) {
        return b->p_fill;
    }
    const double mu = std::get<ParityProjectedLoading>(model).mean;
    return 0.5 * (1.0 - std::exp(-2.0 * mu));
}

inline void validate_loading(const LoadingModel& model) {
    if (const auto* b = std::get_if<BernoulliLoading>(&model)) {
        if (!(b->p_fill >= 0.0 && b->p_fill <= 1.0)) {
            fail(Errc::InvalidProbability, "p_fill must lie in [0, 1]");
        }
    } else if (!(std::get<ParityProjectedLoading>(model).mean >= 0.0)) {
        fail(Errc::NegativeMean, "parity-projected loading needs a non-negative mean");
    }
}

// Each site draws from its own substream keyed by (seed, "load", site), so the
// result is independent of the order in which sites are visited.
inline Occupancy sample_loading(const TrapArray& array, const LoadingModel& model, SeedSpec seed) {
    validate_loading(model);
    Occupancy occ(array);
    for (std::size_t site = 0; site < array.size(); ++site) {
        Rng rng = make_stream(seed, "load", site);
        bool filled = false;
        if (const auto* b = std::get_if<BernoulliLoading>(&model)) {
            filled = std::bernoulli_distribution(b->p_fill)(rng);
        } else {
            const double mu = std::get<ParityProjectedLoading>(model).mean;
            if (mu > 0.0) {
                filled = (std::poisson_distribution<long>(mu)(rng) % 2) == 1;
            }
        }
        occ.set(site, filled);
    }
    return occ;
}

}  // namespace tweezer
