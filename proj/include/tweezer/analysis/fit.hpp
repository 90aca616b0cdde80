#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "tweezer/core/error.hpp"

namespace tweezer::analysis {

// Parameter slots shared by both fit models.
enum class Param : std::size_t { Amplitude = 0, Offset = 1, Frequency = 2, Phase = 3, Tau = 4 };
inline constexpr std::size_t kParamCount = 5;

struct SinusoidParams {
    double amplitude = 0.0;
    double offset = 0.0;
    double frequency = 0.0;  // hertz, or oscillations per decade for the echo model
    double phase = 0.0;
    double tau = std::numeric_limits<double>::infinity();
};

using FixedMask = std::array<bool, kParamCount>;

inline FixedMask fixed_params(std::initializer_list<Param> ps) {
    FixedMask m{};
    for (auto p : ps) m[static_cast<std::size_t>(p)] = true;
    return m;
}

struct DataPoint {
    double t = 0.0;
    double y = 0.0;
    double weight = 1.0;
};

struct FitResult {
    SinusoidParams params;
    SinusoidParams sigmas;  // 1-sigma; zero for fixed parameters
    FixedMask fixed{};
    double residual = 0.0;  // sqrt of the weighted sum of squared residuals
    bool converged = false;
    std::size_t iterations = 0;
    double decay_rate = 0.0;  // 1 / tau
    double decay_rate_sigma = 0.0;
    bool tau_undetermined = false;  // relative uncertainty on tau of 100% or more

    bool is_fixed(Param p) const { return fixed[static_cast<std::size_t>(p)]; }
};

struct FitOptions {
    FixedMask fixed{};
    SinusoidParams initial;    // fixed values, and starting values when seeded
    bool seed_from_initial = false;  // otherwise free parameters are estimated from the data
    double tolerance = 1e-10;        // on the relative change of the objective
    std::size_t max_iterations = 1000;
};

namespace detail {

using Vec = std::array<double, kParamCount>;  // a, b, f, phi, gamma = 1/tau

inline Vec to_vec(const SinusoidParams& p) {
    return {p.amplitude, p.offset, p.frequency, p.phase, std::isinf(p.tau) ? 0.0 : 1.0 / p.tau};
}

inline SinusoidParams from_vec(const Vec& v) {
    return {v[0], v[1], v[2], v[3], v[4] == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / v[4]};
}

// y = b + a e^{-gamma t} cos(2 pi f t + phi)
struct DecayingCosine {
    static double value(double t, const Vec& p) {
        return p[1] + p[0] * std::exp(-p[4] * t) * std::cos(2.0 * std::numbers::pi * p[2] * t + p[3]);
    }
    static Vec gradient(double t, const Vec& p) {
        const double e = std::exp(-p[4] * t);
        const double arg = 2.0 * std::numbers::pi * p[2] * t + p[3];
        const double c = std::cos(arg), s = std::sin(arg);
        return {e * c, 1.0, -p[0] * e * s * 2.0 * std::numbers::pi * t, -p[0] * e * s, -t * p[0] * e * c};
    }
};

// y = b + a e^{-gamma t} sin(phi + 2 pi n log10 t)
struct LogPhaseSine {
    static double value(double t, const Vec& p) {
        return p[1] + p[0] * std::exp(-p[4] * t) * std::sin(p[3] + 2.0 * std::numbers::pi * p[2] * std::log10(t));
    }
    static Vec gradient(double t, const Vec& p) {
        const double e = std::exp(-p[4] * t);
        const double lg = std::log10(t);
        const double arg = p[3] + 2.0 * std::numbers::pi * p[2] * lg;
        const double c = std::cos(arg), s = std::sin(arg);
        return {e * s, 1.0, p[0] * e * c * 2.0 * std::numbers::pi * lg, p[0] * e * c, -t * p[0] * e * s};
    }
};

struct LmOutcome {
    Vec params{};
    Vec sigmas{};
    double cost = 0.0;  // weighted sum of squared residuals
    bool converged = false;
    std::size_t iterations = 0;
};

template <typename Model>
double cost_of(const std::vector<DataPoint>& pts, const Vec& p) {
    double c = 0.0;
    for (const auto& d : pts) {
        const double r = d.y - Model::value(d.t, p);
        c += d.weight * r * r;
    }
    return c;
}

// Damped Gauss-Newton (Levenberg-Marquardt) over the free parameters, with
// covariance scaled by the reduced chi-square at the optimum.
template <typename Model>
LmOutcome levenberg_marquardt(const std::vector<DataPoint>& pts, Vec start, const FixedMask& fixed,
                              double tolerance, std::size_t max_iterations) {
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < kParamCount; ++i) {
        if (!fixed[i]) free.push_back(i);
    }
    const auto m = static_cast<Eigen::Index>(free.size());
    LmOutcome out;
    out.params = start;
    double cost = cost_of<Model>(pts, start);
    double lambda = 1e-3;

    auto normal_equations = [&](const Vec& p, Eigen::MatrixXd& a, Eigen::VectorXd& g) {
        a.setZero(m, m);
        g.setZero(m);
        for (const auto& d : pts) {
            const Vec grad = Model::gradient(d.t, p);
            const double r = d.y - Model::value(d.t, p);
            for (Eigen::Index i = 0; i < m; ++i) {
                const double gi = grad[free[static_cast<std::size_t>(i)]];
                g(i) += d.weight * gi * r;
                for (Eigen::Index j = 0; j <= i; ++j) {
                    a(i, j) += d.weight * gi * grad[free[static_cast<std::size_t>(j)]];
                }
            }
        }
        a = a.selfadjointView<Eigen::Lower>();
    };

    Eigen::MatrixXd a;
    Eigen::VectorXd g;
    std::size_t it = 0;
    for (; it < max_iterations && m > 0; ++it) {
        normal_equations(out.params, a, g);
        const double scale = std::max(a.diagonal().maxCoeff(), 1e-300);
        bool accepted = false;
        while (lambda < 1e16) {
            Eigen::MatrixXd damped = a;
            for (Eigen::Index i = 0; i < m; ++i) damped(i, i) += lambda * (a(i, i) + 1e-12 * scale);
            const Eigen::VectorXd step = damped.ldlt().solve(g);
            Vec trial = out.params;
            for (Eigen::Index i = 0; i < m; ++i) trial[free[static_cast<std::size_t>(i)]] += step(i);
            const double trial_cost = cost_of<Model>(pts, trial);
            if (std::isfinite(trial_cost) && trial_cost <= cost) {
                const double change = cost - trial_cost;
                out.params = trial;
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                if (change <= tolerance * std::max(cost, 1e-300) || trial_cost == 0.0) {
                    cost = trial_cost;
                    out.converged = true;
                } else {
                    cost = trial_cost;
                }
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted) {
            // No descent direction left at any damping: a stationary point.
            out.converged = true;
        }
        if (out.converged) break;
    }
    if (m == 0) out.converged = true;
    out.iterations = it;
    out.cost = cost;

    out.sigmas.fill(0.0);
    if (m > 0) {
        normal_equations(out.params, a, g);
        const double dof = static_cast<double>(pts.size()) - static_cast<double>(m);
        const double s2 = dof > 0.0 ? cost / dof : 0.0;
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
        const Eigen::MatrixXd cov = cod.pseudoInverse() * s2;
        for (Eigen::Index i = 0; i < m; ++i) {
            const bool singular = cod.rank() < m;
            out.sigmas[free[static_cast<std::size_t>(i)]] =
                singular && a(i, i) <= 1e-14 * std::max(a.diagonal().maxCoeff(), 1e-300)
                    ? std::numeric_limits<double>::infinity()
                    : std::sqrt(std::max(cov(i, i), 0.0));
        }
    }
    return out;
}

inline double wrap_angle(double phi) {
    const double w = std::remainder(phi, 2.0 * std::numbers::pi);
    return w <= -std::numbers::pi ? w + 2.0 * std::numbers::pi : w;
}

inline FitResult finish(const LmOutcome& best, const FixedMask& fixed) {
    FitResult r;
    Vec v = best.params;
    const bool a_free = !fixed[0], phi_free = !fixed[3];
    // cos(-2 pi f t + phi) = cos(2 pi f t - phi): report the positive frequency.
    if (!fixed[2] && phi_free && v[2] < 0.0) {
        v[2] = -v[2];
        v[3] = -v[3];
    }
    if (a_free && phi_free && v[0] < 0.0) {
        v[0] = -v[0];
        v[3] += std::numbers::pi;
    }
    if (phi_free) v[3] = wrap_angle(v[3]);
    r.params = from_vec(v);
    r.fixed = fixed;
    r.residual = std::sqrt(best.cost);
    r.converged = best.converged;
    r.iterations = best.iterations;
    r.decay_rate = v[4];
    r.decay_rate_sigma = best.sigmas[4];
    r.sigmas.amplitude = best.sigmas[0];
    r.sigmas.offset = best.sigmas[1];
    r.sigmas.frequency = best.sigmas[2];
    r.sigmas.phase = best.sigmas[3];
    if (fixed[4]) {
        r.sigmas.tau = 0.0;
    } else {
        r.sigmas.tau = v[4] == 0.0 ? std::numeric_limits<double>::infinity() : best.sigmas[4] / (v[4] * v[4]);
        r.tau_undetermined = !(best.sigmas[4] < std::abs(v[4]));
    }
    return r;
}

inline void check_points(const std::vector<DataPoint>& pts, const FixedMask& fixed) {
    std::size_t n_free = 0;
    for (bool f : fixed) n_free += !f;
    if (pts.size() < n_free + 2) {
        fail(Errc::Underdetermined, "need at least two more points than free parameters");
    }
    for (const auto& d : pts) {
        if (!std::isfinite(d.t) || !std::isfinite(d.y) || !(d.weight > 0.0) || !std::isfinite(d.weight)) {
            fail(Errc::InvalidArgument, "fit points need finite values and positive weights");
        }
    }
}

// Peak of the weighted periodogram of the mean-subtracted data.
inline double periodogram_peak(const std::vector<DataPoint>& pts, double mean) {
    double tmin = pts.front().t, tmax = pts.front().t;
    for (const auto& d : pts) {
        tmin = std::min(tmin, d.t);
        tmax = std::max(tmax, d.t);
    }
    const double span = tmax - tmin;
    if (!(span > 0.0)) return 0.0;
    const double df = 1.0 / (8.0 * span);
    const double fmax = 0.5 * static_cast<double>(pts.size()) / span;
    double best_f = 0.0, best_power = -1.0;
    for (double f = df; f <= fmax; f += df) {
        std::complex<double> acc{0.0, 0.0};
        for (const auto& d : pts) {
            acc += d.weight * (d.y - mean) * std::exp(std::complex<double>(0.0, -2.0 * std::numbers::pi * f * d.t));
        }
        const double power = std::norm(acc);
        if (power > best_power) {
            best_power = power;
            best_f = f;
        }
    }
    return best_f;
}

}  // namespace detail

// Weighted least squares on y = b + a e^{-t/tau} cos(2 pi f t + phi), any
// subset of {a, b, f, phi, tau} held fixed at options.initial. A free phase
// is multi-started from {0, pi/2, pi, 3 pi/2} and the lowest objective kept.
inline FitResult fit_decaying_sinusoid(const std::vector<DataPoint>& pts, const FitOptions& options = {}) {
    detail::check_points(pts, options.fixed);
    const auto& fx = options.fixed;
    detail::Vec start = detail::to_vec(options.initial);

    if (!options.seed_from_initial) {
        double wsum = 0.0, mean = 0.0, lo = pts.front().y, hi = pts.front().y;
        for (const auto& d : pts) {
            wsum += d.weight;
            mean += d.weight * d.y;
            lo = std::min(lo, d.y);
            hi = std::max(hi, d.y);
        }
        mean /= wsum;
        if (!fx[1]) start[1] = mean;
        if (!fx[0]) start[0] = 0.5 * (hi - lo);
        if (!fx[2]) start[2] = detail::periodogram_peak(pts, mean);
        if (!fx[4]) start[4] = 0.0;
    }

    std::vector<double> phases{start[3]};
    if (!fx[3]) {
        phases = {0.0, 0.5 * std::numbers::pi, std::numbers::pi, 1.5 * std::numbers::pi};
        if (options.seed_from_initial) phases.insert(phases.begin(), start[3]);
    }
    std::optional<detail::LmOutcome> best;
    for (double phi0 : phases) {
        detail::Vec s = start;
        s[3] = phi0;
        auto out = detail::levenberg_marquardt<detail::DecayingCosine>(pts, s, fx, options.tolerance,
                                                                        options.max_iterations);
        if (!best || (out.converged && !best->converged) ||
            (out.converged == best->converged && out.cost < best->cost)) {
            best = out;
        }
    }
    if (!best->converged) {
        fail(Errc::NoConvergence, "no start converged within the iteration limit");
    }
    return detail::finish(*best, fx);
}

// Echo fit y = b + a e^{-t/tau} sin(phi + 2 pi n log10(t)) with n and phi
// fixed; only a, b and tau are adjusted.
inline FitResult fit_log_echo(const std::vector<DataPoint>& pts, double oscillations_per_decade, double phase,
                              std::optional<SinusoidParams> guess = std::nullopt) {
    for (const auto& d : pts) {
        if (!(d.t > 0.0)) fail(Errc::NonPositiveTime, "echo fit needs strictly positive times");
    }
    const FixedMask fx = fixed_params({Param::Frequency, Param::Phase});
    detail::check_points(pts, fx);

    detail::Vec base{0.0, 0.0, oscillations_per_decade, phase, 0.0};
    if (guess) {
        base[0] = guess->amplitude;
        base[1] = guess->offset;
        base[4] = std::isinf(guess->tau) ? 0.0 : 1.0 / guess->tau;
    } else {
        // a and b are linear once the decay is fixed at zero.
        Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
        Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
        for (const auto& d : pts) {
            const double s = std::sin(phase + 2.0 * std::numbers::pi * oscillations_per_decade * std::log10(d.t));
            const Eigen::Vector2d row(s, 1.0);
            a += d.weight * row * row.transpose();
            rhs += d.weight * d.y * row;
        }
        const Eigen::Vector2d ab = a.completeOrthogonalDecomposition().solve(rhs);
        base[0] = ab(0);
        base[1] = ab(1);
    }

    double tmax = 0.0;
    for (const auto& d : pts) tmax = std::max(tmax, d.t);
    std::optional<detail::LmOutcome> best;
    for (double gamma0 : {base[4], 1.0 / tmax}) {
        detail::Vec s = base;
        s[4] = gamma0;
        auto out = detail::levenberg_marquardt<detail::LogPhaseSine>(pts, s, fx, 1e-10, 1000);
        if (!best || (out.converged && !best->converged) ||
            (out.converged == best->converged && out.cost < best->cost)) {
            best = out;
        }
    }
    if (!best->converged) fail(Errc::NoConvergence, "echo fit did not converge");
    return detail::finish(*best, fx);
}

}  // namespace tweezer::analysis
