#pragma once

#include <boost/math/distributions/poisson.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "tweezer/core/error.hpp"
#include "tweezer/core/random.hpp"
#include "tweezer/spin/state.hpp"

namespace tweezer::readout {

struct ImagingModel {
    double bright_mean = 200.0;  // photons from a fluorescing atom over the full exposure
    double dark_mean = 20.0;     // background for an empty or shelved site
    double image_duration = 0.05;
    double p_loss_per_image = 0.0;
    double clock_lifetime = std::numeric_limits<double>::infinity();
    double shelve_error = 0.0;  // probability a |down> atom fails to shelve
    std::optional<std::uint32_t> threshold;  // bright iff counts > threshold
};

inline void validate_imaging(const ImagingModel& m) {
    if (!(m.bright_mean > m.dark_mean) || !(m.dark_mean >= 0.0)) {
        fail(Errc::InvalidArgument, "imaging needs bright_mean > dark_mean >= 0");
    }
    for (double p : {m.p_loss_per_image, m.shelve_error}) {
        if (!(p >= 0.0 && p <= 1.0)) fail(Errc::InvalidProbability, "imaging probabilities must lie in [0, 1]");
    }
    if (!(m.clock_lifetime > 0.0)) fail(Errc::InvalidArgument, "clock lifetime must be positive");
    if (!(m.image_duration > 0.0)) fail(Errc::InvalidArgument, "image duration must be positive");
}

// Integer threshold minimising P(dark > t) + P(bright <= t) for the model's
// two Poisson means.
inline std::uint32_t optimal_threshold(double dark_mean, double bright_mean) {
    namespace bm = boost::math;
    const bm::poisson_distribution<double> bright(bright_mean);
    const auto lo = static_cast<std::uint32_t>(std::floor(dark_mean));
    const auto hi = static_cast<std::uint32_t>(std::ceil(bright_mean));
    std::uint32_t best = lo;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::uint32_t t = lo; t <= hi; ++t) {
        const double dark_err = dark_mean > 0.0 ? bm::cdf(bm::complement(bm::poisson_distribution<double>(dark_mean), t)) : 0.0;
        const double err = dark_err + bm::cdf(bright, t);
        if (err < best_err) {
            best_err = err;
            best = t;
        }
    }
    return best;
}

inline std::uint32_t classification_threshold(const ImagingModel& m) {
    return m.threshold ? *m.threshold : optimal_threshold(m.dark_mean, m.bright_mean);
}

struct SiteImages {
    std::uint32_t image1 = 0;
    std::uint32_t image2 = 0;
};

// Reusable samplers for one imaging model; draws go through a caller-owned
// engine so a whole shot can share one substream.
class ImagingSampler {
  public:
    explicit ImagingSampler(const ImagingModel& model)
        : model_(model), bright_(model.bright_mean), dark_(model.dark_mean > 0.0 ? model.dark_mean : 1.0) {
        validate_imaging(model);
    }

    const ImagingModel& model() const noexcept { return model_; }

    // Projective measurement in the {down, up, L} basis followed by the
    // shelving pulse on a |down> outcome.
    void shelve(spin::SiteState& s, Rng& rng) const {
        if (s.lost) return;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double r = u(rng);
        const double pd = std::max(0.0, s.p_down());
        const double pu = std::max(0.0, s.p_up());
        int level = spin::kLeak;
        if (r < pd) level = spin::kDown;
        else if (r < pd + pu) level = spin::kUp;
        s.rho = spin::Matrix3::Zero();
        s.rho(level, level) = 1.0;
        s.shelved = level == spin::kDown && u(rng) >= model_.shelve_error;
    }

    std::uint32_t dark_counts(Rng& rng) const {
        return model_.dark_mean > 0.0 ? static_cast<std::uint32_t>(dark_(rng)) : 0u;
    }

    // First image (state selective), loss, repump, second image. `present`
    // is false for an empty trap. After the call the atom is unshelved and
    // may be marked lost.
    SiteImages image(spin::SiteState& s, bool present, Rng& rng) const {
        SiteImages out;
        if (!present || s.lost) {
            out.image1 = dark_counts(rng);
            out.image2 = dark_counts(rng);
            return out;
        }
        if (!s.shelved) {
            out.image1 = static_cast<std::uint32_t>(bright_(rng));
        } else {
            const double t = model_.image_duration;
            double fraction = 0.0;
            if (std::isfinite(model_.clock_lifetime)) {
                const double decay = std::exponential_distribution<double>(1.0 / model_.clock_lifetime)(rng);
                if (decay < t) fraction = (t - decay) / t;
            }
            if (fraction > 0.0) {
                const double mean = model_.dark_mean + (model_.bright_mean - model_.dark_mean) * fraction;
                out.image1 = static_cast<std::uint32_t>(std::poisson_distribution<long>(mean)(rng));
            } else {
                out.image1 = dark_counts(rng);
            }
        }
        std::uniform_real_distribution<double> u(0.0, 1.0);
        if (u(rng) < model_.p_loss_per_image) s.lost = true;
        if (s.shelved) {
            s.shelved = false;
            s.rho = spin::Matrix3::Zero();
            s.rho(spin::kDown, spin::kDown) = 1.0;
        }
        if (s.lost) {
            out.image2 = dark_counts(rng);
        } else {
            out.image2 = static_cast<std::uint32_t>(bright_(rng));
            if (u(rng) < model_.p_loss_per_image) s.lost = true;
        }
        return out;
    }

  private:
    ImagingModel model_;
    mutable std::poisson_distribution<long> bright_;
    mutable std::poisson_distribution<long> dark_;
};

using SiteCounts = std::vector<std::uint32_t>;

// Shelves every present atom and takes the state-selective image and the
// post-selection image. Sites holding std::nullopt are empty traps. Each site
// draws from the substream (seed, "readout", site).
inline std::pair<SiteCounts, SiteCounts> shelve_and_image(const std::vector<std::optional<spin::SiteState>>& states,
                                                          const ImagingModel& model, SeedSpec seed) {
    const ImagingSampler sampler(model);
    SiteCounts first(states.size()), second(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        Rng rng = make_stream(seed, "readout", i);
        spin::SiteState s = states[i].value_or(spin::SiteState::down());
        if (states[i]) sampler.shelve(s, rng);
        const SiteImages img = sampler.image(s, states[i].has_value(), rng);
        first[i] = img.image1;
        second[i] = img.image2;
    }
    return {std::move(first), std::move(second)};
}

}  // namespace tweezer::readout
