#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tweezer/analysis/fit.hpp"
#include "tweezer/analysis/wilson.hpp"
#include "tweezer/core/grid.hpp"
#include "tweezer/harness/config.hpp"
#include "tweezer/readout/correction.hpp"
#include "tweezer/spin/sequence.hpp"

namespace tweezer::harness {

struct PointSpec {
    double value = 0.0;
    spin::PulseSequence sequence;
};

struct SiteGroup {
    std::string name;
    std::vector<std::size_t> sites;
};

struct ExperimentPlan {
    Kind kind = Kind::RabiScan;
    std::vector<PointSpec> points;
    std::vector<std::size_t> data_sites;  // register sites, row-major
    std::vector<SiteGroup> groups;
};

namespace detail {

// One Rotate per register column over the selected sites of that column.
inline void rotate_columns(spin::PulseSequence& seq, const TrapArray& array, const RegisterSpec& reg, double theta,
                           double phase, const spin::DriveParams& drive,
                           const std::function<bool(std::size_t)>& select = {}) {
    const TargetRect rect = target_rect(reg);
    for (std::size_t c = rect.col0; c < rect.col0 + rect.cols; ++c) {
        std::vector<std::size_t> sites;
        for (std::size_t r = rect.row0; r < rect.row0 + rect.rows; ++r) {
            const std::size_t s = array.index(r, c);
            if (!select || select(s)) sites.push_back(s);
        }
        if (!sites.empty()) seq.rotate(std::move(sites), theta, phase, drive);
    }
}

inline bool is_checkerboard(const TrapArray& array, std::size_t site) {
    const auto c = array.coord(site);
    return (c.row + c.col) % 2 == 0;
}

}  // namespace detail

inline std::vector<double> default_ramsey_phases(std::size_t rows) {
    std::vector<double> out(rows);
    for (std::size_t k = 0; k < rows; ++k) {
        out[k] = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(rows);
    }
    return out;
}

// Abscissae of the T2* sampling grid: evenly spaced points covering each
// window, windows starting at the configured offsets.
inline std::vector<double> t2star_times(const T2Star& t) {
    std::vector<double> out;
    for (double offset : t.offsets_s.values) {
        for (std::size_t j = 0; j < t.points_per_window; ++j) {
            const double frac = t.points_per_window == 1
                                    ? 0.0
                                    : static_cast<double>(j) / static_cast<double>(t.points_per_window - 1);
            out.push_back(offset + frac * t.window_s);
        }
    }
    return out;
}

// Echo readout phase referenced to a 1 s hold.
inline double echo_phase(const Echo& e, double hold_s) {
    return e.phase + 2.0 * std::numbers::pi * e.oscillations_per_decade * std::log10(hold_s);
}

inline ExperimentPlan build_experiment(const ExperimentConfig& cfg) {
    const TrapArray array = cfg.array();
    const RegisterSpec reg = cfg.register_spec();
    const spin::DriveParams& drive = cfg.drive;
    const double half_pi = 0.5 * std::numbers::pi;

    ExperimentPlan plan;
    plan.kind = cfg.kind;
    plan.data_sites = reg.target_sites();
    plan.groups.push_back({"all", plan.data_sites});

    switch (cfg.kind) {
        case Kind::ResonanceScan: {
            const double theta = 2.0 * std::numbers::pi * drive.rabi_hz * cfg.resonance.duration_s;
            for (double delta : cfg.resonance.detunings_hz.values) {
                spin::DriveParams d = drive;
                d.detuning_hz = delta;
                PointSpec p{delta, {}};
                detail::rotate_columns(p.sequence, array, reg, theta, 0.0, d);
                plan.points.push_back(std::move(p));
            }
            break;
        }
        case Kind::RabiScan: {
            for (double t : cfg.rabi.durations_s.values) {
                PointSpec p{t, {}};
                detail::rotate_columns(p.sequence, array, reg, 2.0 * std::numbers::pi * drive.rabi_hz * t, 0.0,
                                       drive);
                plan.points.push_back(std::move(p));
            }
            break;
        }
        case Kind::T1Checkerboard: {
            auto driven = [&](std::size_t s) { return detail::is_checkerboard(array, s); };
            SiteGroup on{"driven", {}}, off{"undriven", {}};
            for (auto s : plan.data_sites) (driven(s) ? on : off).sites.push_back(s);
            plan.groups = {on, off};
            for (double hold : cfg.t1.holds_s.values) {
                PointSpec p{hold, {}};
                detail::rotate_columns(p.sequence, array, reg, std::numbers::pi, 0.0, drive, driven);
                p.sequence.wait(hold);
                plan.points.push_back(std::move(p));
            }
            break;
        }
        case Kind::RamseyGrid: {
            const TargetRect rect = target_rect(reg);
            const auto phases =
                cfg.ramsey.phases.empty() ? default_ramsey_phases(rect.rows) : cfg.ramsey.phases;
            for (double t : cfg.ramsey.holds_s.values) {
                PointSpec p{t, {}};
                detail::rotate_columns(p.sequence, array, reg, half_pi, 0.0, drive);
                p.sequence.wait(t);
                for (std::size_t c = 0; c < rect.cols; ++c) {
                    for (std::size_t r = 0; r < rect.rows; ++r) {
                        const double theta = 2.0 * std::numbers::pi * cfg.ramsey.detunings_hz[c] * t + phases[r];
                        p.sequence.rotate({array.index(rect.row0 + r, rect.col0 + c)}, half_pi, theta, drive);
                    }
                }
                plan.points.push_back(std::move(p));
            }
            break;
        }
        case Kind::T2Star: {
            for (double t : t2star_times(cfg.t2star)) {
                PointSpec p{t, {}};
                detail::rotate_columns(p.sequence, array, reg, half_pi, 0.0, drive);
                p.sequence.wait(t);
                const double theta = 2.0 * std::numbers::pi * cfg.t2star.artificial_detuning_hz * t + cfg.t2star.phase;
                detail::rotate_columns(p.sequence, array, reg, half_pi, theta, drive);
                plan.points.push_back(std::move(p));
            }
            break;
        }
        case Kind::Echo: {
            for (double t : cfg.echo.holds_s.values) {
                PointSpec p{t, {}};
                detail::rotate_columns(p.sequence, array, reg, half_pi, 0.0, drive);
                p.sequence.wait(0.5 * t);
                detail::rotate_columns(p.sequence, array, reg, std::numbers::pi, half_pi, drive);
                p.sequence.wait(0.5 * t);
                detail::rotate_columns(p.sequence, array, reg, half_pi, echo_phase(cfg.echo, t), drive);
                plan.points.push_back(std::move(p));
            }
            break;
        }
    }
    for (auto& p : plan.points) p.sequence.shelve().image("main");
    return plan;
}

// ---------------------------------------------------------------------------
// Per-point statistics

struct Estimate {
    std::size_t k = 0;
    std::size_t n = 0;
    double m = 0.0;
    double m_corr = 0.0;
    double m_affine = 0.0;  // corrected value before clamping to [0, 1]
    bool clamped = false;
    analysis::Interval interval;  // Wilson bounds mapped through the correction
    double weight = 0.0;          // inverse squared half-width of the corrected interval, unclamped
};

// Raw fraction, corrected value and Wilson interval for k of n, with the
// interval bounds passed through the same affine correction.
inline Estimate estimate(std::size_t k, std::size_t n, double p, double q) {
    Estimate e{k, n, 0.0, 0.0, 0.0, false, {}, 0.0};
    e.m = static_cast<double>(k) / static_cast<double>(n);
    const auto corr = readout::povm_correct(e.m, p, q);
    e.m_corr = corr.value;
    e.m_affine = (e.m - p) / (1.0 - p - q);
    e.clamped = corr.clamped;
    const auto raw = analysis::wilson_interval(k, n);
    e.interval = {readout::povm_correct(raw.lo, p, q).value, readout::povm_correct(raw.hi, p, q).value};
    const double hw = raw.half_width() / (1.0 - p - q);
    e.weight = 1.0 / (hw * hw);
    return e;
}

struct SitePoint {
    std::size_t site = 0;
    Estimate est;
};

struct GroupPoint {
    std::string group;
    Estimate est;
};

struct PointResult {
    std::size_t index = 0;
    double value = 0.0;
    std::vector<SitePoint> sites;   // data sites with at least one post-selected shot
    std::vector<GroupPoint> groups;  // pooled k and n over each group's sites
};

// ---------------------------------------------------------------------------
// Fits

inline nlohmann::ordered_json fit_json(const analysis::FitResult& r) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
    const char* names[] = {"a", "b", "f", "phi", "tau"};
    const double vals[] = {r.params.amplitude, r.params.offset, r.params.frequency, r.params.phase, r.params.tau};
    const double sig[] = {r.sigmas.amplitude, r.sigmas.offset, r.sigmas.frequency, r.sigmas.phase, r.sigmas.tau};
    nlohmann::ordered_json params, sigmas, fixed = nlohmann::ordered_json::array();
    for (int i = 0; i < 5; ++i) {
        params[names[i]] = num(vals[i]);
        sigmas[names[i]] = num(sig[i]);
        if (r.fixed[static_cast<std::size_t>(i)]) fixed.push_back(names[i]);
    }
    nlohmann::ordered_json j;
    j["params"] = params;
    j["sigmas"] = sigmas;
    j["fixed"] = fixed;
    j["residual"] = num(r.residual);
    j["converged"] = r.converged;
    j["decay_rate"] = num(r.decay_rate);
    j["decay_rate_sigma"] = num(r.decay_rate_sigma);
    j["tau_undetermined"] = r.tau_undetermined;
    return j;
}

inline std::vector<analysis::DataPoint> group_series(const std::vector<PointResult>& pts, const std::string& group,
                                                     bool clamped = true) {
    std::vector<analysis::DataPoint> out;
    for (const auto& p : pts) {
        for (const auto& g : p.groups) {
            if (g.group == group && g.est.n > 0) {
                out.push_back({p.value, clamped ? g.est.m_corr : g.est.m_affine, g.est.weight});
            }
        }
    }
    return out;
}

inline std::vector<analysis::DataPoint> site_series(const std::vector<PointResult>& pts, std::size_t site) {
    std::vector<analysis::DataPoint> out;
    for (const auto& p : pts) {
        for (const auto& s : p.sites) {
            if (s.site == site) out.push_back({p.value, s.est.m_corr, s.est.weight});
        }
    }
    return out;
}

// Echo analysis: a decay-free sinusoid in log10(t) on the early holds fixes
// the oscillations per decade and the phase, then only a, b and tau are fit.
struct EchoFit {
    analysis::FitResult preliminary;
    analysis::FitResult final;
};

inline EchoFit fit_echo_series(const std::vector<analysis::DataPoint>& pts, double early_cutoff_s) {
    std::vector<analysis::DataPoint> early;
    for (const auto& d : pts) {
        if (!(d.t > 0.0)) fail(Errc::NonPositiveTime, "echo holds must be positive");
        if (d.t <= early_cutoff_s) early.push_back({std::log10(d.t), d.y, d.weight});
    }
    analysis::FitOptions opt;
    opt.fixed = analysis::fixed_params({analysis::Param::Tau});
    EchoFit out;
    out.preliminary = analysis::fit_decaying_sinusoid(early, opt);
    const double n_osc = out.preliminary.params.frequency;
    const double phi = out.preliminary.params.phase + 0.5 * std::numbers::pi;  // cos(x) = sin(x + pi/2)
    out.final = analysis::fit_log_echo(pts, n_osc, phi);
    return out;
}

// Fits for one kind; keys name the fitted series. Failures are recorded as
// {"error": ...} rather than aborting the run.
inline nlohmann::ordered_json fit_experiment(const ExperimentConfig& cfg, const ExperimentPlan& plan,
                                             const std::vector<PointResult>& pts) {
    using analysis::Param;
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    auto guarded = [&](const std::string& key, auto&& fn) {
        try {
            out[key] = fn();
        } catch (const Error& e) {
            out[key] = {{"error", std::string(errc_name(e.code()))}, {"message", e.what()}};
        }
    };
    if (pts.empty()) return out;

    switch (cfg.kind) {
        case Kind::ResonanceScan:
            break;
        case Kind::RabiScan:
            guarded("all", [&] {
                analysis::FitOptions opt;
                opt.fixed = analysis::fixed_params({Param::Tau});
                return fit_json(analysis::fit_decaying_sinusoid(group_series(pts, "all"), opt));
            });
            break;
        case Kind::T1Checkerboard:
            guarded("contrast", [&] {
                // Clamping each group before the difference would bend the decay.
                const auto on = group_series(pts, "driven", false);
                const auto off = group_series(pts, "undriven", false);
                std::vector<analysis::DataPoint> c;
                for (std::size_t i = 0; i < std::min(on.size(), off.size()); ++i) {
                    c.push_back({on[i].t, on[i].y - off[i].y, 1.0 / (1.0 / on[i].weight + 1.0 / off[i].weight)});
                }
                analysis::FitOptions opt;
                opt.fixed = analysis::fixed_params({Param::Offset, Param::Frequency, Param::Phase});
                return fit_json(analysis::fit_decaying_sinusoid(c, opt));
            });
            break;
        case Kind::RamseyGrid: {
            const TrapArray array = cfg.array();
            for (auto s : plan.data_sites) {
                const auto c = array.coord(s);
                guarded(fmt::format("r{}c{}", c.row, c.col), [&] {
                    analysis::FitOptions opt;
                    opt.fixed = analysis::fixed_params({Param::Tau});
                    return fit_json(analysis::fit_decaying_sinusoid(site_series(pts, s), opt));
                });
            }
            break;
        }
        case Kind::T2Star:
            guarded("all", [&] {
                analysis::FitOptions opt;
                opt.fixed = analysis::fixed_params({Param::Frequency, Param::Phase});
                opt.initial.frequency = cfg.t2star.artificial_detuning_hz;
                opt.initial.phase = cfg.t2star.phase;
                return fit_json(analysis::fit_decaying_sinusoid(group_series(pts, "all"), opt));
            });
            break;
        case Kind::Echo:
            guarded("all", [&] {
                const auto f = fit_echo_series(group_series(pts, "all"), cfg.echo.early_cutoff_s);
                nlohmann::ordered_json j;
                j["preliminary_log10"] = fit_json(f.preliminary);
                j["echo"] = fit_json(f.final);
                return j;
            });
            break;
    }
    return out;
}

}  // namespace tweezer::harness
