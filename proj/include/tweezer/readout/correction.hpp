#pragma once

#include <boost/math/distributions/poisson.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "tweezer/core/error.hpp"
#include "tweezer/spin/propagate.hpp"

namespace tweezer::readout {

struct MixtureFit {
    double dark_mean = 0.0;
    double bright_mean = 0.0;
    double bright_weight = 0.0;
    std::uint32_t threshold = 0;
};

// Two-Poisson mixture fitted by EM on a count histogram (histogram[c] is the
// number of images that recorded c photons). The threshold minimises the
// fitted misclassification w0 P0(X > t) + w1 P1(X <= t).
inline MixtureFit fit_count_mixture(const std::vector<std::size_t>& histogram) {
    double total = 0.0;
    for (auto h : histogram) total += static_cast<double>(h);
    if (total == 0.0) fail(Errc::EmptySample, "count histogram is empty");

    auto quantile = [&](double q) {
        double acc = 0.0;
        for (std::size_t c = 0; c < histogram.size(); ++c) {
            acc += static_cast<double>(histogram[c]);
            if (acc >= q * total) return static_cast<double>(c);
        }
        return static_cast<double>(histogram.size() - 1);
    };
    // A zero starting mean would pin the dark component at zero for good.
    double mu0 = quantile(0.1) + 0.5, mu1 = quantile(0.9), w1 = 0.5;
    if (mu1 <= mu0) mu1 = mu0 + 1.0;

    auto log_pmf = [](double mu, double c) {
        if (mu <= 0.0) return c == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
        return c * std::log(mu) - mu - std::lgamma(c + 1.0);
    };
    for (int it = 0; it < 1000; ++it) {
        double n0 = 0.0, n1 = 0.0, s0 = 0.0, s1 = 0.0;
        for (std::size_t c = 0; c < histogram.size(); ++c) {
            if (!histogram[c]) continue;
            const double x = static_cast<double>(c);
            const double l0 = std::log(1.0 - w1) + log_pmf(mu0, x);
            const double l1 = std::log(w1) + log_pmf(mu1, x);
            const double m = std::max(l0, l1);
            const double r1 = std::isinf(m) ? 0.5 : std::exp(l1 - m) / (std::exp(l0 - m) + std::exp(l1 - m));
            const double h = static_cast<double>(histogram[c]);
            n1 += h * r1;
            n0 += h * (1.0 - r1);
            s1 += h * r1 * x;
            s0 += h * (1.0 - r1) * x;
        }
        const double nmu0 = n0 > 0.0 ? s0 / n0 : mu0;
        const double nmu1 = n1 > 0.0 ? s1 / n1 : mu1;
        const double nw1 = std::clamp(n1 / total, 1e-12, 1.0 - 1e-12);
        const bool done = std::abs(nmu0 - mu0) < 1e-9 * (1.0 + mu0) && std::abs(nmu1 - mu1) < 1e-9 * (1.0 + mu1) &&
                          std::abs(nw1 - w1) < 1e-12;
        mu0 = nmu0;
        mu1 = nmu1;
        w1 = nw1;
        if (done) break;
    }
    if (mu1 < mu0) {
        std::swap(mu0, mu1);
        w1 = 1.0 - w1;
    }
    const double sigma = std::sqrt(std::max(mu1, 1e-300));
    if (!(mu1 - mu0 >= 3.0 * sigma) || w1 < 1e-9 || w1 > 1.0 - 1e-9) {
        fail(Errc::UnimodalHistogram, "count histogram does not separate into two Poisson peaks");
    }

    namespace bm = boost::math;
    const bm::poisson_distribution<double> bright(mu1);
    MixtureFit fit{mu0, mu1, w1, 0};
    double best = std::numeric_limits<double>::infinity();
    const auto lo = static_cast<std::uint32_t>(std::floor(mu0));
    const auto hi = static_cast<std::uint32_t>(std::ceil(mu1));
    for (std::uint32_t t = lo; t <= hi; ++t) {
        const double dark_err = mu0 > 0.0 ? bm::cdf(bm::complement(bm::poisson_distribution<double>(mu0), t)) : 0.0;
        const double err = (1.0 - w1) * dark_err + w1 * bm::cdf(bright, t);
        if (err < best) {
            best = err;
            fit.threshold = t;
        }
    }
    return fit;
}

inline std::uint32_t choose_threshold(const std::vector<std::size_t>& histogram) {
    return fit_count_mixture(histogram).threshold;
}

inline std::vector<std::size_t> histogram_of(const std::vector<std::uint32_t>& counts) {
    std::vector<std::size_t> h;
    for (auto c : counts) {
        if (c >= h.size()) h.resize(c + 1, 0);
        ++h[c];
    }
    return h;
}

inline bool is_bright(std::uint32_t counts, std::uint32_t threshold) { return counts > threshold; }

struct ReferenceObservation {
    bool bright = false;         // first (state-selective) image
    bool post_selected = false;  // atom confirmed by the second image
};

// Fraction of post-selected undriven |down> reference observations that
// were read as bright.
inline double estimate_p_reference(std::size_t bright_post_selected, std::size_t post_selected) {
    if (post_selected == 0) fail(Errc::NoReferenceAtoms, "no post-selected reference observations");
    if (bright_post_selected > post_selected) fail(Errc::InvalidArgument, "more bright than observed references");
    return static_cast<double>(bright_post_selected) / static_cast<double>(post_selected);
}

inline double estimate_p_reference(const std::vector<ReferenceObservation>& refs) {
    std::size_t bright = 0, kept = 0;
    for (const auto& r : refs) {
        if (!r.post_selected) continue;
        ++kept;
        bright += r.bright;
    }
    return estimate_p_reference(bright, kept);
}

struct CorrectedValue {
    double value = 0.0;
    bool clamped = false;
};

// m_corr = (m - p) / (1 - p - q), clamped to [0, 1].
inline CorrectedValue povm_correct(double m, double p, double q = 0.0) {
    if (!(p + q < 1.0)) fail(Errc::DegenerateConfusion, "p + q must be below 1");
    const double raw = (m - p) / (1.0 - p - q);
    const double v = std::clamp(raw, 0.0, 1.0);
    return {v, v != raw};
}

enum class Prepared { Down, Up };

struct ClockDrive {
    double rabi_hz = 500.0;
    double duration_s = 1e-3;          // resonant pi time 1 / (2 rabi_hz) by default
    double zeeman_splitting_hz = 1e4;  // |up> line sits this far above the |down> line
};

// Shelved fraction after a clock pulse detuned by `clock_detuning_hz` from the
// |down> line, treated as an isolated two-level transition.
inline double shelving_spectrum(Prepared prepared, double clock_detuning_hz, const ClockDrive& drive) {
    spin::DriveParams d;
    d.rabi_hz = drive.rabi_hz;
    d.leakage_ratio = 0.0;
    d.stark_beam_on = false;
    d.detuning_hz = prepared == Prepared::Down ? clock_detuning_hz : clock_detuning_hz - drive.zeeman_splitting_hz;
    return spin::propagate_pulse(spin::SiteState::down(), d, drive.duration_s).p_up();
}

}  // namespace tweezer::readout
