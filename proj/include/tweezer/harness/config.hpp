#pragma once

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "tweezer/core/error.hpp"
#include "tweezer/core/grid.hpp"
#include "tweezer/core/loading.hpp"
#include "tweezer/core/random.hpp"
#include "tweezer/readout/imaging.hpp"
#include "tweezer/rearrange/execute.hpp"
#include "tweezer/spin/propagate.hpp"
#include "tweezer/spin/state.hpp"

namespace tweezer::harness {

// A list of abscissa values, either given explicitly or as
// {start, stop, count, spacing: linear|log}.
struct Scan {
    std::vector<double> values;
};

inline std::vector<double> linear_values(double start, double stop, std::size_t count) {
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) {
        v[i] = count == 1 ? start
                          : start + (stop - start) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    return v;
}

inline std::vector<double> log_values(double start, double stop, std::size_t count) {
    if (!(start > 0.0) || !(stop > 0.0)) fail(Errc::ConfigError, "log spacing needs positive endpoints");
    auto v = linear_values(std::log10(start), std::log10(stop), count);
    for (auto& x : v) x = std::pow(10.0, x);
    if (count > 0) {
        v.front() = start;
        v.back() = count == 1 ? start : stop;
    }
    return v;
}

struct ResonanceScan {
    double duration_s = 446e-6;
    Scan detunings_hz{linear_values(-5000.0, 5000.0, 101)};
};

struct RabiScan {
    Scan durations_s{linear_values(0.0, 5e-3, 101)};
};

struct T1Checkerboard {
    Scan holds_s{{0.1, 1.0, 5.0, 10.0}};
};

struct RamseyGrid {
    std::vector<double> detunings_hz{700.0, 1000.0, 1300.0};  // one per register column
    std::vector<double> phases;                               // one per register row; default 2 pi k / rows
    Scan holds_s{linear_values(0.0, 3e-3, 101)};
};

struct T2Star {
    double artificial_detuning_hz = 1000.0;
    double phase = 0.0;
    double window_s = 3e-3;
    std::size_t points_per_window = 10;
    Scan offsets_s{{0.0, 0.0125, 0.025, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2}};
};

struct Echo {
    double oscillations_per_decade = 2.0;
    double phase = 0.0;
    Scan holds_s{log_values(0.01, 30.0, 30)};
    double early_cutoff_s = 1.0;  // preliminary no-decay fit uses holds up to this
};

enum class Kind { ResonanceScan, RabiScan, T1Checkerboard, RamseyGrid, T2Star, Echo };

inline constexpr std::string_view kind_name(Kind k) {
    switch (k) {
        case Kind::ResonanceScan: return "resonance_scan";
        case Kind::RabiScan: return "rabi_scan";
        case Kind::T1Checkerboard: return "t1_checkerboard";
        case Kind::RamseyGrid: return "ramsey_grid";
        case Kind::T2Star: return "t2star";
        case Kind::Echo: return "echo";
    }
    return "?";
}

inline Kind parse_kind(const std::string& s) {
    for (Kind k : {Kind::ResonanceScan, Kind::RabiScan, Kind::T1Checkerboard, Kind::RamseyGrid, Kind::T2Star,
                   Kind::Echo}) {
        if (kind_name(k) == s) return k;
    }
    fail(Errc::ConfigError, fmt::format("unknown experiment kind '{}'", s));
}

struct HologramConfig {
    std::size_t grid_size = 256;
    std::size_t iterations = 100;
    std::size_t spot_spacing_px = 8;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::size_t shots = 500;
    std::size_t threads = 1;

    std::size_t array_rows = 10;
    std::size_t array_cols = 11;
    double pitch_um = 4.0;

    std::size_t register_rows = 7;
    std::size_t register_cols = 3;
    std::optional<std::size_t> register_row0;  // centred when absent
    std::optional<std::size_t> register_col0;
    double magnetic_field_gauss = 11.0;
    double qubit_freq_hz = 2100.0;

    LoadingModel loading = BernoulliLoading{0.5};
    rearrange::LossModel loss;
    spin::NoiseModel noise;
    readout::ImagingModel imaging;
    spin::DriveParams drive;
    double correction_q = 0.0;
    std::optional<double> correction_p;  // estimated from reference atoms when absent

    HologramConfig hologram;

    Kind kind = Kind::RabiScan;
    ResonanceScan resonance;
    RabiScan rabi;
    T1Checkerboard t1;
    RamseyGrid ramsey;
    T2Star t2star;
    Echo echo;

    std::string output_dir = "out";
    bool write_shots = false;

    TrapArray array() const { return make_grid(array_rows, array_cols, pitch_um); }

    RegisterSpec register_spec() const {
        const TrapArray a = array();
        if (!register_row0 && !register_col0) {
            return centered_register(a, register_rows, register_cols, magnetic_field_gauss, qubit_freq_hz);
        }
        const std::size_t r0 = register_row0.value_or((a.rows() - std::min(register_rows, a.rows())) / 2);
        const std::size_t c0 = register_col0.value_or((a.cols() - std::min(register_cols, a.cols())) / 2);
        return make_register(a, {r0, c0, register_rows, register_cols}, magnetic_field_gauss, qubit_freq_hz);
    }
};

namespace detail {

// Rejects keys outside `allowed`, naming the section.
inline void check_keys(const YAML::Node& node, const std::string& section, std::initializer_list<const char*> allowed) {
    if (!node) return;
    if (!node.IsMap()) fail(Errc::ConfigError, fmt::format("'{}' must be a mapping", section));
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!ok.count(key)) {
            fail(Errc::ConfigError, fmt::format("unknown key '{}' in {}", key, section.empty() ? "top level" : section));
        }
    }
}

inline double to_double(const YAML::Node& n, const std::string& where) {
    const auto s = n.as<std::string>();
    if (s == "inf" || s == ".inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    try {
        return n.as<double>();
    } catch (const YAML::Exception&) {
        fail(Errc::ConfigError, fmt::format("{}: expected a number, got '{}'", where, s));
    }
}

template <typename T>
void read(const YAML::Node& parent, const char* key, T& out, const std::string& where) {
    const YAML::Node n = parent[key];
    if (!n) return;
    const std::string path = where.empty() ? key : where + "." + key;
    try {
        if constexpr (std::is_same_v<T, double>) {
            out = to_double(n, path);
        } else if constexpr (std::is_same_v<T, std::optional<double>>) {
            out = to_double(n, path);
        } else if constexpr (std::is_same_v<T, std::optional<std::size_t>>) {
            out = n.as<std::size_t>();
        } else if constexpr (std::is_same_v<T, std::optional<std::uint32_t>>) {
            out = n.as<std::uint32_t>();
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            if (!n.IsSequence()) fail(Errc::ConfigError, fmt::format("{}: expected a list", path));
            out.clear();
            for (const auto& x : n) out.push_back(to_double(x, path));
        } else {
            out = n.as<T>();
        }
    } catch (const YAML::Exception& e) {
        fail(Errc::ConfigError, fmt::format("{}: {}", path, e.what()));
    }
}

inline void read_scan(const YAML::Node& parent, const char* key, Scan& out, const std::string& where) {
    const YAML::Node n = parent[key];
    if (!n) return;
    const std::string path = where + "." + key;
    if (n.IsSequence()) {
        out.values.clear();
        for (const auto& x : n) out.values.push_back(to_double(x, path));
        return;
    }
    check_keys(n, path, {"start", "stop", "count", "spacing"});
    double start = 0.0, stop = 0.0;
    std::size_t count = 0;
    std::string spacing = "linear";
    if (!n["start"] || !n["stop"] || !n["count"]) {
        fail(Errc::ConfigError, fmt::format("{}: a range needs start, stop and count", path));
    }
    read(n, "start", start, path);
    read(n, "stop", stop, path);
    read(n, "count", count, path);
    read(n, "spacing", spacing, path);
    if (spacing == "linear") out.values = linear_values(start, stop, count);
    else if (spacing == "log") out.values = log_values(start, stop, count);
    else fail(Errc::ConfigError, fmt::format("{}: spacing must be linear or log", path));
}

}  // namespace detail

inline void validate_config(const ExperimentConfig& c);

// Parses a YAML experiment description; see README for the grammar.
inline ExperimentConfig parse_config(const YAML::Node& root) {
    using detail::check_keys;
    using detail::read;
    ExperimentConfig c;
    if (!root || root.IsNull()) return c;
    check_keys(root, "", {"seed", "shots", "threads", "array", "register", "loading", "loss", "noise", "imaging",
                          "drive", "correction", "hologram", "experiment", "output"});
    read(root, "seed", c.seed, "");
    read(root, "shots", c.shots, "");
    read(root, "threads", c.threads, "");

    if (auto n = root["array"]) {
        check_keys(n, "array", {"rows", "cols", "pitch_um"});
        read(n, "rows", c.array_rows, "array");
        read(n, "cols", c.array_cols, "array");
        read(n, "pitch_um", c.pitch_um, "array");
    }
    if (auto n = root["register"]) {
        check_keys(n, "register", {"rows", "cols", "row0", "col0", "magnetic_field_gauss", "qubit_freq_hz"});
        read(n, "rows", c.register_rows, "register");
        read(n, "cols", c.register_cols, "register");
        read(n, "row0", c.register_row0, "register");
        read(n, "col0", c.register_col0, "register");
        read(n, "magnetic_field_gauss", c.magnetic_field_gauss, "register");
        read(n, "qubit_freq_hz", c.qubit_freq_hz, "register");
    }
    if (auto n = root["loading"]) {
        check_keys(n, "loading", {"model", "p_fill", "mean"});
        std::string model = "bernoulli";
        read(n, "model", model, "loading");
        if (model == "bernoulli") {
            BernoulliLoading b;
            read(n, "p_fill", b.p_fill, "loading");
            if (n["mean"]) fail(Errc::ConfigError, "loading.mean applies to the parity model only");
            c.loading = b;
        } else if (model == "parity") {
            ParityProjectedLoading p;
            read(n, "mean", p.mean, "loading");
            if (n["p_fill"]) fail(Errc::ConfigError, "loading.p_fill applies to the bernoulli model only");
            c.loading = p;
        } else {
            fail(Errc::ConfigError, fmt::format("loading.model must be bernoulli or parity, got '{}'", model));
        }
    }
    if (auto n = root["loss"]) {
        check_keys(n, "loss", {"p_pickup", "p_transit_per_site", "p_dropoff"});
        read(n, "p_pickup", c.loss.p_pickup, "loss");
        read(n, "p_transit_per_site", c.loss.p_transit_per_site, "loss");
        read(n, "p_dropoff", c.loss.p_dropoff, "loss");
    }
    if (auto n = root["noise"]) {
        check_keys(n, "noise", {"t1_s", "t_phi_s", "t2_s", "rabi_miscalibration", "frequency_jitter_hz",
                                "detuning_offset_hz"});
        read(n, "t1_s", c.noise.t1, "noise");
        read(n, "t_phi_s", c.noise.t_phi, "noise");
        if (n["t2_s"]) {
            if (n["t_phi_s"]) fail(Errc::ConfigError, "give noise.t2_s or noise.t_phi_s, not both");
            double t2 = 0.0;
            read(n, "t2_s", t2, "noise");
            c.noise.t_phi = spin::t_phi_for_t2(t2, c.noise.t1);
        }
        read(n, "rabi_miscalibration", c.noise.rabi_miscalibration, "noise");
        read(n, "frequency_jitter_hz", c.noise.frequency_jitter_hz, "noise");
        read(n, "detuning_offset_hz", c.noise.detuning_offset_hz, "noise");
    }
    if (auto n = root["imaging"]) {
        check_keys(n, "imaging", {"bright_mean", "dark_mean", "image_duration_s", "p_loss_per_image",
                                  "clock_lifetime_s", "shelve_error", "threshold"});
        read(n, "bright_mean", c.imaging.bright_mean, "imaging");
        read(n, "dark_mean", c.imaging.dark_mean, "imaging");
        read(n, "image_duration_s", c.imaging.image_duration, "imaging");
        read(n, "p_loss_per_image", c.imaging.p_loss_per_image, "imaging");
        read(n, "clock_lifetime_s", c.imaging.clock_lifetime, "imaging");
        read(n, "shelve_error", c.imaging.shelve_error, "imaging");
        read(n, "threshold", c.imaging.threshold, "imaging");
    }
    if (auto n = root["drive"]) {
        check_keys(n, "drive", {"rabi_hz", "detuning_hz", "leakage_ratio", "stark_shift_hz", "stark_beam_on",
                                "stark_scatter_hz"});
        read(n, "rabi_hz", c.drive.rabi_hz, "drive");
        read(n, "detuning_hz", c.drive.detuning_hz, "drive");
        read(n, "leakage_ratio", c.drive.leakage_ratio, "drive");
        read(n, "stark_shift_hz", c.drive.stark_shift_hz, "drive");
        read(n, "stark_beam_on", c.drive.stark_beam_on, "drive");
        read(n, "stark_scatter_hz", c.drive.stark_scatter_hz, "drive");
    }
    if (auto n = root["correction"]) {
        check_keys(n, "correction", {"p", "q"});
        read(n, "p", c.correction_p, "correction");
        read(n, "q", c.correction_q, "correction");
    }
    if (auto n = root["hologram"]) {
        check_keys(n, "hologram", {"grid_size", "iterations", "spot_spacing_px"});
        read(n, "grid_size", c.hologram.grid_size, "hologram");
        read(n, "iterations", c.hologram.iterations, "hologram");
        read(n, "spot_spacing_px", c.hologram.spot_spacing_px, "hologram");
    }
    if (auto n = root["experiment"]) {
        check_keys(n, "experiment", {"kind", "resonance_scan", "rabi_scan", "t1_checkerboard", "ramsey_grid",
                                     "t2star", "echo"});
        std::string kind = std::string(kind_name(c.kind));
        read(n, "kind", kind, "experiment");
        c.kind = parse_kind(kind);
        if (auto k = n["resonance_scan"]) {
            const std::string p = "experiment.resonance_scan";
            check_keys(k, p, {"duration_s", "detunings_hz"});
            read(k, "duration_s", c.resonance.duration_s, p);
            detail::read_scan(k, "detunings_hz", c.resonance.detunings_hz, p);
        }
        if (auto k = n["rabi_scan"]) {
            const std::string p = "experiment.rabi_scan";
            check_keys(k, p, {"durations_s"});
            detail::read_scan(k, "durations_s", c.rabi.durations_s, p);
        }
        if (auto k = n["t1_checkerboard"]) {
            const std::string p = "experiment.t1_checkerboard";
            check_keys(k, p, {"holds_s"});
            detail::read_scan(k, "holds_s", c.t1.holds_s, p);
        }
        if (auto k = n["ramsey_grid"]) {
            const std::string p = "experiment.ramsey_grid";
            check_keys(k, p, {"detunings_hz", "phases", "holds_s"});
            read(k, "detunings_hz", c.ramsey.detunings_hz, p);
            read(k, "phases", c.ramsey.phases, p);
            detail::read_scan(k, "holds_s", c.ramsey.holds_s, p);
        }
        if (auto k = n["t2star"]) {
            const std::string p = "experiment.t2star";
            check_keys(k, p, {"artificial_detuning_hz", "phase", "window_s", "points_per_window", "offsets_s"});
            read(k, "artificial_detuning_hz", c.t2star.artificial_detuning_hz, p);
            read(k, "phase", c.t2star.phase, p);
            read(k, "window_s", c.t2star.window_s, p);
            read(k, "points_per_window", c.t2star.points_per_window, p);
            detail::read_scan(k, "offsets_s", c.t2star.offsets_s, p);
        }
        if (auto k = n["echo"]) {
            const std::string p = "experiment.echo";
            check_keys(k, p, {"oscillations_per_decade", "phase", "holds_s", "early_cutoff_s"});
            read(k, "oscillations_per_decade", c.echo.oscillations_per_decade, p);
            read(k, "phase", c.echo.phase, p);
            detail::read_scan(k, "holds_s", c.echo.holds_s, p);
            read(k, "early_cutoff_s", c.echo.early_cutoff_s, p);
        }
    }
    if (auto n = root["output"]) {
        check_keys(n, "output", {"dir", "shots_csv"});
        read(n, "dir", c.output_dir, "output");
        read(n, "shots_csv", c.write_shots, "output");
    }
    validate_config(c);
    return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    try {
        return parse_config(YAML::Load(text));
    } catch (const YAML::Exception& e) {
        fail(Errc::ConfigError, e.what());
    }
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::IoError, fmt::format("cannot open config '{}'", path));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

inline void validate_config(const ExperimentConfig& c) {
    if (c.shots == 0) fail(Errc::ConfigError, "shots must be at least 1");
    if (c.threads == 0) fail(Errc::ConfigError, "threads must be at least 1");
    const TrapArray a = c.array();
    (void)c.register_spec();
    (void)a;
    validate_loading(c.loading);
    rearrange::validate_loss(c.loss);
    spin::validate_noise(c.noise);
    readout::validate_imaging(c.imaging);
    spin::validate_drive(c.drive);
    if (!(c.drive.rabi_hz > 0.0)) fail(Errc::ConfigError, "drive.rabi_hz must be positive");
    if (c.correction_p && !(*c.correction_p >= 0.0 && *c.correction_p < 1.0)) {
        fail(Errc::ConfigError, "correction.p must lie in [0, 1)");
    }
    if (!(c.correction_q >= 0.0 && c.correction_q < 1.0)) fail(Errc::ConfigError, "correction.q must lie in [0, 1)");
    switch (c.kind) {
        case Kind::ResonanceScan:
            if (!(c.resonance.duration_s > 0.0)) fail(Errc::ConfigError, "resonance_scan.duration_s must be positive");
            break;
        case Kind::RabiScan:
            for (double t : c.rabi.durations_s.values) {
                if (t < 0.0) fail(Errc::ConfigError, "rabi_scan durations must be non-negative");
            }
            break;
        case Kind::T1Checkerboard:
            for (double t : c.t1.holds_s.values) {
                if (t < 0.0) fail(Errc::ConfigError, "t1_checkerboard holds must be non-negative");
            }
            break;
        case Kind::RamseyGrid:
            if (c.ramsey.detunings_hz.size() != c.register_cols) {
                fail(Errc::ConfigError, "ramsey_grid.detunings_hz needs one value per register column");
            }
            if (!c.ramsey.phases.empty() && c.ramsey.phases.size() != c.register_rows) {
                fail(Errc::ConfigError, "ramsey_grid.phases needs one value per register row");
            }
            for (double t : c.ramsey.holds_s.values) {
                if (t < 0.0) fail(Errc::ConfigError, "ramsey_grid holds must be non-negative");
            }
            break;
        case Kind::T2Star:
            if (!(c.t2star.window_s > 0.0) || c.t2star.points_per_window < 1) {
                fail(Errc::ConfigError, "t2star needs a positive window and at least one point per window");
            }
            for (double t : c.t2star.offsets_s.values) {
                if (t < 0.0) fail(Errc::ConfigError, "t2star offsets must be non-negative");
            }
            break;
        case Kind::Echo:
            for (double t : c.echo.holds_s.values) {
                if (!(t > 0.0)) fail(Errc::ConfigError, "echo holds must be positive");
            }
            break;
    }
}

}  // namespace tweezer::harness
