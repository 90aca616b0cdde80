#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <cstddef>
#include <numbers>
#include <random>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "tweezer/core/error.hpp"
#include "tweezer/core/random.hpp"
#include "tweezer/hologram/fft.hpp"

namespace tweezer::hologram {

// SLM phase per pixel, row-major, radians in [-pi, pi).
struct PhaseMask {
    std::size_t grid_size = 0;
    std::vector<double> phase;
};

struct Spot {
    std::size_t x = 0;  // focal column
    std::size_t y = 0;  // focal row
    double amplitude = 1.0;
};

using TargetSpots = std::vector<Spot>;

// Focal-plane intensity, row-major, with zero spatial frequency at pixel
// (N/2, N/2).
struct IntensityMap {
    std::size_t grid_size = 0;
    std::vector<double> intensity;

    double at(std::size_t x, std::size_t y) const { return intensity.at(y * grid_size + x); }
};

struct SpotMetrics {
    double uniformity = 0.0;
    double efficiency = 0.0;
};

struct WgsReport {
    std::size_t iterations_run = 0;
    double uniformity = 0.0;
    double efficiency = 0.0;
    std::vector<double> uniformity_trace;  // entry i: mask after i+1 iterations
    double max_parseval_error = 0.0;       // relative, over every forward transform
};

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline double wrap_phase(double phi) {
    constexpr double pi = std::numbers::pi;
    double w = std::remainder(phi, 2.0 * pi);  // [-pi, pi]
    if (w >= pi) w -= 2.0 * pi;
    return w;
}

inline void validate_mask(const PhaseMask& mask) {
    if (!is_power_of_two(mask.grid_size)) {
        fail(Errc::InvalidMask, "grid size must be a power of two");
    }
    if (mask.phase.size() != mask.grid_size * mask.grid_size) {
        fail(Errc::InvalidMask, "phase array does not match the grid size");
    }
    for (double p : mask.phase) {
        if (!std::isfinite(p)) {
            fail(Errc::InvalidMask, "phase mask contains a non-finite value");
        }
    }
}

inline void validate_targets(const TargetSpots& targets, std::size_t n) {
    if (targets.empty()) {
        fail(Errc::EmptyTargets, "no target spots given");
    }
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& s : targets) {
        if (s.x >= n || s.y >= n) {
            fail(Errc::GridTooSmall, "target spot lies outside the focal grid");
        }
        if (!(s.amplitude > 0.0)) {
            fail(Errc::InvalidArgument, "target amplitudes must be positive");
        }
        if (!seen.emplace(s.x, s.y).second) {
            fail(Errc::InvalidArgument, "duplicate target spot");
        }
    }
}

// rows x cols spots spaced by `spacing` focal pixels, centred on the
// zero-frequency pixel.
inline TargetSpots spot_grid(std::size_t rows, std::size_t cols, std::size_t spacing,
                             std::size_t grid_size) {
    TargetSpots out;
    const double cx = static_cast<double>(grid_size / 2) - 0.5 * static_cast<double>((cols - 1) * spacing);
    const double cy = static_cast<double>(grid_size / 2) - 0.5 * static_cast<double>((rows - 1) * spacing);
    const auto x0 = static_cast<long>(std::floor(cx));
    const auto y0 = static_cast<long>(std::floor(cy));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const long x = x0 + static_cast<long>(c * spacing);
            const long y = y0 + static_cast<long>(r * spacing);
            if (x < 0 || y < 0) {
                fail(Errc::GridTooSmall, "spot grid does not fit inside the focal plane");
            }
            out.push_back({static_cast<std::size_t>(x), static_cast<std::size_t>(y), 1.0});
        }
    }
    validate_targets(out, grid_size);
    return out;
}

namespace detail {

inline std::size_t shifted(std::size_t i, std::size_t n) { return (i + n / 2) % n; }

// Index into the unshifted transform for focal pixel (x, y).
inline std::size_t focal_index(std::size_t x, std::size_t y, std::size_t n) {
    return shifted(y, n) * n + shifted(x, n);
}

inline std::vector<std::complex<double>> unit_field(const PhaseMask& mask) {
    std::vector<std::complex<double>> field(mask.phase.size());
    for (std::size_t i = 0; i < field.size(); ++i) {
        field[i] = std::polar(1.0, mask.phase[i]);
    }
    return field;
}

// True when every spot has a partner of equal amplitude at the point
// reflection through the zero-frequency pixel.
inline bool inversion_symmetric(const TargetSpots& targets, std::size_t n) {
    std::map<std::pair<std::size_t, std::size_t>, double> amp;
    for (const auto& s : targets) amp[{s.x, s.y}] = s.amplitude;
    for (const auto& s : targets) {
        const auto it = amp.find({(n - s.x) % n, (n - s.y) % n});
        if (it == amp.end() || it->second != s.amplitude) return false;
    }
    return true;
}

}  // namespace detail

// Fraction of power on target pixels, and 1 - (Imax - Imin)/(Imax + Imin)
// over target intensities normalised by their requested amplitude squared.
inline SpotMetrics spot_metrics(const IntensityMap& map, const TargetSpots& targets) {
    validate_targets(targets, map.grid_size);
    double total = 0.0;
    for (double v : map.intensity) total += v;
    double on_target = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& s : targets) {
        const double i = map.at(s.x, s.y);
        on_target += i;
        const double rel = i / (s.amplitude * s.amplitude);
        lo = std::min(lo, rel);
        hi = std::max(hi, rel);
    }
    SpotMetrics m;
    m.efficiency = total > 0.0 ? on_target / total : 0.0;
    m.uniformity = (hi + lo) > 0.0 ? 1.0 - (hi - lo) / (hi + lo) : 0.0;
    return m;
}

inline IntensityMap simulate_focal(const PhaseMask& mask, Fft2d& fft) {
    validate_mask(mask);
    const std::size_t n = mask.grid_size;
    auto field = detail::unit_field(mask);
    fft.forward(field);
    IntensityMap map{n, std::vector<double>(n * n)};
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            map.intensity[y * n + x] = std::norm(field[detail::focal_index(x, y, n)]);
        }
    }
    return map;
}

inline IntensityMap simulate_focal(const PhaseMask& mask) {
    validate_mask(mask);
    Fft2d fft(mask.grid_size);
    return simulate_focal(mask, fft);
}

// Weighted Gerchberg-Saxton under flat illumination. Each iteration
// transforms the unit-amplitude field, updates the per-spot weights toward
// equal normalised amplitude, imposes w_k * a_k on the targets (keeping the
// computed phase, zeroing every other focal pixel), transforms back and keeps
// only the SLM-plane phase.
inline std::pair<PhaseMask, WgsReport> wgs_phase(const TargetSpots& targets, std::size_t grid_size,
                                                 std::size_t iterations, SeedSpec seed) {
    if (!is_power_of_two(grid_size)) {
        fail(Errc::InvalidMask, "grid size must be a power of two");
    }
    validate_targets(targets, grid_size);
    if (iterations == 0) {
        fail(Errc::InvalidArgument, "at least one WGS iteration is required");
    }
    constexpr double pi = std::numbers::pi;
    const std::size_t n = grid_size;
    const double input_power = static_cast<double>(n * n);

    PhaseMask mask{n, std::vector<double>(n * n)};
    {
        Rng rng = make_stream(seed, "wgs_initial_phase");
        std::uniform_real_distribution<double> uni(-pi, pi);
        // An inversion-symmetric target set gets an even starting phase. The
        // focal field then stays even, so mirror spots remain exactly balanced;
        // from a generic start the weight update can lock into a two-cycle.
        const bool even = detail::inversion_symmetric(targets, n);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < n; ++c) {
                const std::size_t i = r * n + c;
                const std::size_t mirror = ((n - r) % n) * n + (n - c) % n;
                mask.phase[i] = even && mirror < i ? mask.phase[mirror] : uni(rng);
            }
        }
    }

    Fft2d fft(n);
    WgsReport report;
    std::vector<double> weights(targets.size(), 1.0);
    std::vector<double> ratio(targets.size());
    std::vector<std::complex<double>> field(n * n);

    auto track_parseval = [&](const std::vector<std::complex<double>>& f) {
        double total = 0.0;
        for (const auto& v : f) total += std::norm(v);
        report.max_parseval_error =
            std::max(report.max_parseval_error, std::abs(total - input_power) / input_power);
    };

    for (std::size_t it = 0; it < iterations; ++it) {
        field = detail::unit_field(mask);
        fft.forward(field);
        track_parseval(field);
        if (it > 0) {
            IntensityMap map{n, std::vector<double>(n * n)};
            for (std::size_t y = 0; y < n; ++y) {
                for (std::size_t x = 0; x < n; ++x) {
                    map.intensity[y * n + x] = std::norm(field[detail::focal_index(x, y, n)]);
                }
            }
            report.uniformity_trace.push_back(spot_metrics(map, targets).uniformity);
        }

        double mean_ratio = 0.0;
        for (std::size_t k = 0; k < targets.size(); ++k) {
            const double amp = std::abs(field[detail::focal_index(targets[k].x, targets[k].y, n)]);
            ratio[k] = std::max(amp, 1e-300) / targets[k].amplitude;
            mean_ratio += ratio[k];
        }
        mean_ratio /= static_cast<double>(targets.size());

        std::vector<std::complex<double>> constrained(n * n, {0.0, 0.0});
        for (std::size_t k = 0; k < targets.size(); ++k) {
            weights[k] *= mean_ratio / ratio[k];
            const std::size_t idx = detail::focal_index(targets[k].x, targets[k].y, n);
            const double phase = std::arg(field[idx]);
            constrained[idx] = std::polar(weights[k] * targets[k].amplitude, phase);
        }
        fft.inverse(constrained);
        for (std::size_t i = 0; i < n * n; ++i) {
            mask.phase[i] = wrap_phase(std::arg(constrained[i]));
        }
    }

    const IntensityMap final_map = simulate_focal(mask, fft);
    double total = 0.0;
    for (double v : final_map.intensity) total += v;
    report.max_parseval_error = std::max(report.max_parseval_error, std::abs(total - input_power) / input_power);
    const SpotMetrics metrics = spot_metrics(final_map, targets);
    report.uniformity_trace.push_back(metrics.uniformity);
    report.iterations_run = iterations;
    report.uniformity = metrics.uniformity;
    report.efficiency = metrics.efficiency;
    return {std::move(mask), std::move(report)};
}

}  // namespace tweezer::hologram
