#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <variant>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tweezer/core/error.hpp"
#include "tweezer/core/random.hpp"
#include "tweezer/harness/config.hpp"
#include "tweezer/harness/cycle.hpp"

namespace tweezer::harness {

inline constexpr const char* kCodeVersion = "0.3.1";

using Json = nlohmann::ordered_json;

inline Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json("inf"); }

// Everything that influences results. Thread count and output location are
// left out on purpose: they must not change any file.
inline Json config_json(const ExperimentConfig& c) {
    Json j;
    j["seed"] = c.seed;
    j["shots"] = c.shots;
    j["array"] = {{"rows", c.array_rows}, {"cols", c.array_cols}, {"pitch_um", c.pitch_um}};
    const auto rect = target_rect(c.register_spec());
    j["register"] = {{"rows", rect.rows},
                     {"cols", rect.cols},
                     {"row0", rect.row0},
                     {"col0", rect.col0},
                     {"magnetic_field_gauss", c.magnetic_field_gauss},
                     {"qubit_freq_hz", c.qubit_freq_hz}};
    if (const auto* b = std::get_if<BernoulliLoading>(&c.loading)) {
        j["loading"] = {{"model", "bernoulli"}, {"p_fill", b->p_fill}};
    } else {
        j["loading"] = {{"model", "parity"}, {"mean", std::get<ParityProjectedLoading>(c.loading).mean}};
    }
    j["loss"] = {{"p_pickup", c.loss.p_pickup},
                 {"p_transit_per_site", c.loss.p_transit_per_site},
                 {"p_dropoff", c.loss.p_dropoff}};
    j["noise"] = {{"t1_s", json_number(c.noise.t1)},
                  {"t_phi_s", json_number(c.noise.t_phi)},
                  {"rabi_miscalibration", c.noise.rabi_miscalibration},
                  {"frequency_jitter_hz", c.noise.frequency_jitter_hz},
                  {"detuning_offset_hz", c.noise.detuning_offset_hz}};
    j["imaging"] = {{"bright_mean", c.imaging.bright_mean},
                    {"dark_mean", c.imaging.dark_mean},
                    {"image_duration_s", c.imaging.image_duration},
                    {"p_loss_per_image", c.imaging.p_loss_per_image},
                    {"clock_lifetime_s", json_number(c.imaging.clock_lifetime)},
                    {"shelve_error", c.imaging.shelve_error},
                    {"threshold", readout::classification_threshold(c.imaging)}};
    j["drive"] = {{"rabi_hz", c.drive.rabi_hz},
                  {"detuning_hz", c.drive.detuning_hz},
                  {"leakage_ratio", c.drive.leakage_ratio},
                  {"stark_shift_hz", c.drive.stark_shift_hz},
                  {"stark_beam_on", c.drive.stark_beam_on},
                  {"stark_scatter_hz", c.drive.stark_scatter_hz}};
    j["correction"] = {{"p", c.correction_p ? Json(*c.correction_p) : Json("reference")}, {"q", c.correction_q}};
    j["kind"] = std::string(kind_name(c.kind));
    switch (c.kind) {
        case Kind::ResonanceScan:
            j["resonance_scan"] = {{"duration_s", c.resonance.duration_s},
                                   {"detunings_hz", c.resonance.detunings_hz.values}};
            break;
        case Kind::RabiScan: j["rabi_scan"] = {{"durations_s", c.rabi.durations_s.values}}; break;
        case Kind::T1Checkerboard: j["t1_checkerboard"] = {{"holds_s", c.t1.holds_s.values}}; break;
        case Kind::RamseyGrid:
            j["ramsey_grid"] = {{"detunings_hz", c.ramsey.detunings_hz},
                                {"phases", c.ramsey.phases.empty() ? default_ramsey_phases(c.register_rows)
                                                                   : c.ramsey.phases},
                                {"holds_s", c.ramsey.holds_s.values}};
            break;
        case Kind::T2Star:
            j["t2star"] = {{"artificial_detuning_hz", c.t2star.artificial_detuning_hz},
                           {"phase", c.t2star.phase},
                           {"window_s", c.t2star.window_s},
                           {"points_per_window", c.t2star.points_per_window},
                           {"offsets_s", c.t2star.offsets_s.values}};
            break;
        case Kind::Echo:
            j["echo"] = {{"oscillations_per_decade", c.echo.oscillations_per_decade},
                         {"phase", c.echo.phase},
                         {"holds_s", c.echo.holds_s.values},
                         {"early_cutoff_s", c.echo.early_cutoff_s}};
            break;
    }
    return j;
}

inline std::string config_hash(const ExperimentConfig& c) {
    return fmt::format("{:016x}", tweezer::detail::fnv1a(config_json(c).dump()));
}

inline void write_points_csv(std::ostream& out, const CycleResult& r, std::size_t cols) {
    out << "point_value,site_row,site_col,k,n,m,m_corr,wilson_lo,wilson_hi\n";
    for (const auto& p : r.points) {
        for (const auto& s : p.sites) {
            const auto& e = s.est;
            out << fmt::format("{},{},{},{},{},{},{},{},{}\n", p.value, s.site / cols, s.site % cols, e.k, e.n, e.m,
                               e.m_corr, e.interval.lo, e.interval.hi);
        }
    }
}

inline void write_array_average_csv(std::ostream& out, const CycleResult& r) {
    out << "point_value,group,k,n,m,m_corr,wilson_lo,wilson_hi\n";
    for (const auto& p : r.points) {
        for (const auto& g : p.groups) {
            const auto& e = g.est;
            out << fmt::format("{},{},{},{},{},{},{},{}\n", p.value, g.group, e.k, e.n, e.m, e.m_corr, e.interval.lo,
                               e.interval.hi);
        }
    }
}

inline void write_rearrangements_csv(std::ostream& out, const CycleResult& r) {
    out << "point_index,reason,atoms_before,empty_targets,moves,parking_moves,losses,atoms_after\n";
    for (const auto& e : r.events) {
        out << fmt::format("{},{},{},{},{},{},{},{}\n", e.point, e.reason, e.atoms_before, e.empty_targets, e.moves,
                           e.parking_moves, e.losses, e.atoms_after);
    }
}

namespace detail {

template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& fn) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::IoError, fmt::format("cannot write '{}'", path.string()));
    fn(out);
    if (!out) fail(Errc::IoError, fmt::format("error while writing '{}'", path.string()));
}

inline std::string shots_file(std::size_t point) { return fmt::format("shots/point_{:04}.csv", point); }

}  // namespace detail

// Runs the configured experiment and writes every result file into `dir`.
// All files except timing.json are a pure function of the config.
inline CycleResult run_and_write(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const auto started = std::chrono::steady_clock::now();
    fs::create_directories(dir);
    if (cfg.write_shots) fs::create_directories(dir / "shots");

    ShotsCallback on_shots;
    if (cfg.write_shots) {
        on_shots = [&](std::size_t i, const spin::ShotRecords& rec) {
            detail::write_file(dir / detail::shots_file(i), [&](std::ostream& o) { spin::write_shots_csv(o, rec, "main"); });
        };
    }
    const CycleResult r = run_cycle(cfg, on_shots);

    detail::write_file(dir / "points.csv", [&](std::ostream& o) { write_points_csv(o, r, cfg.array_cols); });
    detail::write_file(dir / "array_average.csv", [&](std::ostream& o) { write_array_average_csv(o, r); });
    detail::write_file(dir / "rearrangements.csv", [&](std::ostream& o) { write_rearrangements_csv(o, r); });
    detail::write_file(dir / "fits.json", [&](std::ostream& o) { o << r.fits.dump(2) << '\n'; });

    Json m;
    m["config_hash"] = config_hash(cfg);
    m["code_version"] = kCodeVersion;
    m["kind"] = std::string(kind_name(cfg.kind));
    m["config"] = config_json(cfg);
    m["loads"] = r.loads;
    m["rearrangements"] = r.events.size();
    m["reference"] = {{"p", r.p},
                      {"source", r.p_estimated ? "reference_atoms" : "config"},
                      {"bright", r.reference_bright},
                      {"kept", r.reference_kept}};
    m["files"] = {"points.csv", "array_average.csv", "rearrangements.csv", "fits.json"};
    Json pts = Json::array();
    for (std::size_t i = 0; i < r.points.size(); ++i) {
        Json p;
        p["index"] = i;
        p["value"] = r.points[i].value;
        p["atoms"] = r.occupancies[i].count();
        if (cfg.write_shots) p["shots_file"] = detail::shots_file(i);
        pts.push_back(std::move(p));
    }
    m["points"] = std::move(pts);
    detail::write_file(dir / "manifest.json", [&](std::ostream& o) { o << m.dump(2) << '\n'; });

    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    detail::write_file(dir / "timing.json", [&](std::ostream& o) {
        o << Json{{"wall_clock_s", seconds}, {"threads", cfg.threads}}.dump(2) << '\n';
    });
    return r;
}

}  // namespace tweezer::harness
