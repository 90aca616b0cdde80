// Command-line front end: one subcommand per pipeline stage plus `run <kind>`.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tweezer/analysis/fit.hpp"
#include "tweezer/core/grid.hpp"
#include "tweezer/core/loading.hpp"
#include "tweezer/harness/config.hpp"
#include "tweezer/harness/experiments.hpp"
#include "tweezer/harness/output.hpp"
#include "tweezer/hologram/mask_io.hpp"
#include "tweezer/hologram/wgs.hpp"
#include "tweezer/rearrange/execute.hpp"
#include "tweezer/rearrange/plan.hpp"

namespace fs = std::filesystem;
using namespace tweezer;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> shots;
    std::optional<std::size_t> threads;
};

harness::ExperimentConfig effective_config(const Globals& g) {
    harness::ExperimentConfig cfg = g.config_path.empty() ? harness::ExperimentConfig{}
                                                          : harness::load_config(g.config_path);
    if (g.seed) cfg.seed = *g.seed;
    if (g.shots) cfg.shots = *g.shots;
    if (g.threads) cfg.threads = *g.threads;
    if (g.out) cfg.output_dir = *g.out;
    harness::validate_config(cfg);
    return cfg;
}

Occupancy occupancy_for(const harness::ExperimentConfig& cfg, const std::string& path) {
    if (path.empty()) return sample_loading(cfg.array(), cfg.loading, derive_seed(SeedSpec{cfg.seed}, "cycle_load", 0));
    std::ifstream in(path);
    if (!in) fail(Errc::IoError, fmt::format("cannot open occupancy '{}'", path));
    Occupancy occ = read_occupancy(in);
    if (!occ.matches(cfg.array())) fail(Errc::SizeMismatch, "occupancy file does not match the configured array");
    return occ;
}

template <typename Fn>
void write_to(const fs::path& path, Fn&& fn) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::IoError, fmt::format("cannot write '{}'", path.string()));
    fn(out);
}

std::vector<analysis::DataPoint> read_series(const std::string& path, const std::string& group) {
    std::ifstream in(path);
    if (!in) fail(Errc::IoError, fmt::format("cannot open '{}'", path));
    std::string line;
    std::getline(in, line);
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        for (std::string h; std::getline(ss, h, ',');) header.push_back(h);
    }
    auto col = [&](const std::string& name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        return std::nullopt;
    };
    const auto x = col("point_value"), y = col("m_corr"), lo = col("wilson_lo"), hi = col("wilson_hi"),
               g = col("group"), k = col("k"), n = col("n");
    if (!x || !y || !k || !n || !lo || !hi) fail(Errc::ParseError, "input lacks the result CSV columns");
    std::vector<analysis::DataPoint> pts;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string v; std::getline(ss, v, ',');) f.push_back(v);
        if (f.size() != header.size()) fail(Errc::ParseError, fmt::format("malformed row '{}'", line));
        if (g && f[*g] != group) continue;
        const auto kk = std::stoul(f[*k]), nn = std::stoul(f[*n]);
        // Weight from the Wilson half-width of the raw counts; the affine
        // correction scales every point alike and does not move the optimum.
        const double hw = analysis::wilson_interval(kk, nn).half_width();
        pts.push_back({std::stod(f[*x]), std::stod(f[*y]), 1.0 / (hw * hw)});
    }
    return pts;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optical-tweezer register simulator"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config_path, "YAML experiment config")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Master seed (overrides config)");
    app.add_option("--out", g.out, "Output directory (overrides config)");
    app.add_option("--shots", g.shots, "Shots per point (overrides config)");
    app.add_option("--threads", g.threads, "Worker threads for scan points");

    auto* wgs = app.add_subcommand("wgs", "Compute the hologram phase mask for the trap grid");
    auto* load = app.add_subcommand("load", "Sample one loading pattern");
    std::string occ_path;
    auto* plan = app.add_subcommand("plan", "Plan rearrangement moves for an occupancy");
    plan->add_option("--occupancy", occ_path, "Occupancy file (sampled from the seed when absent)");
    auto* exec = app.add_subcommand("exec", "Plan and execute rearrangement with loss");
    exec->add_option("--occupancy", occ_path, "Occupancy file (sampled from the seed when absent)");

    auto* run = app.add_subcommand("run", "Run an experiment kind through the full cycle");
    std::string kind;
    run->add_option("kind", kind, "resonance_scan | rabi_scan | t1_checkerboard | ramsey_grid | t2star | echo");

    auto* fit = app.add_subcommand("fit", "Fit a result CSV");
    std::string fit_input, fit_model = "sinusoid", fit_group = "all";
    std::vector<std::string> fixes;
    double cutoff = 1.0;
    fit->add_option("--input", fit_input, "array_average.csv or points.csv")->required()->check(CLI::ExistingFile);
    fit->add_option("--model", fit_model, "sinusoid | log_echo")->check(CLI::IsMember({"sinusoid", "log_echo"}));
    fit->add_option("--group", fit_group, "Group to fit from array_average.csv");
    fit->add_option("--fix", fixes, "Fixed parameter, name=value (a, b, f, phi, tau)");
    fit->add_option("--early-cutoff", cutoff, "log_echo: holds used by the preliminary fit");

    auto* report = app.add_subcommand("report", "Summarise a run directory");
    std::string report_dir;
    report->add_option("dir", report_dir, "Run output directory")->required()->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*fit) {
            const auto pts = read_series(fit_input, fit_group);
            nlohmann::ordered_json j;
            if (fit_model == "log_echo") {
                const auto f = harness::fit_echo_series(pts, cutoff);
                j["preliminary_log10"] = harness::fit_json(f.preliminary);
                j["echo"] = harness::fit_json(f.final);
            } else {
                analysis::FitOptions opt;
                for (const auto& fx : fixes) {
                    const auto eq = fx.find('=');
                    if (eq == std::string::npos) fail(Errc::ParseError, fmt::format("--fix expects name=value, got '{}'", fx));
                    const std::string name = fx.substr(0, eq);
                    const double v = name == "tau" && fx.substr(eq + 1) == "inf"
                                         ? std::numeric_limits<double>::infinity()
                                         : std::stod(fx.substr(eq + 1));
                    using analysis::Param;
                    Param p;
                    if (name == "a") { p = Param::Amplitude; opt.initial.amplitude = v; }
                    else if (name == "b") { p = Param::Offset; opt.initial.offset = v; }
                    else if (name == "f") { p = Param::Frequency; opt.initial.frequency = v; }
                    else if (name == "phi") { p = Param::Phase; opt.initial.phase = v; }
                    else if (name == "tau") { p = Param::Tau; opt.initial.tau = v; }
                    else fail(Errc::ParseError, fmt::format("unknown parameter '{}'", name));
                    opt.fixed[static_cast<std::size_t>(p)] = true;
                }
                j = harness::fit_json(analysis::fit_decaying_sinusoid(pts, opt));
            }
            const std::string text = j.dump(2) + "\n";
            if (g.out) write_to(*g.out, [&](std::ostream& o) { o << text; });
            else std::cout << text;
            return 0;
        }
        if (*report) {
            std::ifstream in(fs::path(report_dir) / "manifest.json");
            if (!in) fail(Errc::IoError, "run directory has no manifest.json");
            const auto m = nlohmann::json::parse(in);
            std::cout << fmt::format("kind        {}\nconfig hash {}\nversion     {}\npoints      {}\nloads       {}\n"
                                     "rearranged  {}\nreference p {} ({} of {})\n",
                                     m["kind"].get<std::string>(), m["config_hash"].get<std::string>(),
                                     m["code_version"].get<std::string>(), m["points"].size(),
                                     m["loads"].get<std::size_t>(), m["rearrangements"].get<std::size_t>(),
                                     m["reference"]["p"].get<double>(), m["reference"]["bright"].get<std::size_t>(),
                                     m["reference"]["kept"].get<std::size_t>());
            std::ifstream fin(fs::path(report_dir) / "fits.json");
            if (fin) {
                const auto fits = nlohmann::ordered_json::parse(fin);
                for (const auto& [name, f] : fits.items()) std::cout << "fit " << name << ": " << f.dump() << '\n';
            }
            return 0;
        }

        harness::ExperimentConfig cfg = effective_config(g);
        const fs::path out_dir = cfg.output_dir;
        if (*wgs) {
            const auto targets = hologram::spot_grid(cfg.array_rows, cfg.array_cols, cfg.hologram.spot_spacing_px,
                                                     cfg.hologram.grid_size);
            const auto [mask, rep] = hologram::wgs_phase(targets, cfg.hologram.grid_size, cfg.hologram.iterations,
                                                         derive_seed(SeedSpec{cfg.seed}, "wgs"));
            fs::create_directories(out_dir);
            hologram::save_phase_mask((out_dir / "mask.phmk").string(), mask);
            write_to(out_dir / "mask.json", [&](std::ostream& o) { o << hologram::to_json(rep).dump(2) << '\n'; });
            std::cout << fmt::format("uniformity {} efficiency {} after {} iterations\n", rep.uniformity,
                                     rep.efficiency, rep.iterations_run);
        } else if (*load) {
            const Occupancy occ = occupancy_for(cfg, "");
            write_to(out_dir / "occupancy.txt", [&](std::ostream& o) { write_occupancy(o, occ); });
            std::cout << fmt::format("{} atoms in {} sites\n", occ.count(), occ.size());
        } else if (*plan || *exec) {
            const Occupancy occ = occupancy_for(cfg, occ_path);
            const RegisterSpec reg = cfg.register_spec();
            const auto moves = rearrange::plan_moves(occ, reg);
            const auto violations = rearrange::validate_plan(occ, moves);
            write_to(out_dir / "plan.csv", [&](std::ostream& o) { rearrange::write_plan_csv(o, moves, cfg.array_cols); });
            std::cout << fmt::format("{} moves ({} parking), {} violations\n", moves.size(), moves.parking_count(),
                                     violations.size());
            if (*exec) {
                auto [after, log] = rearrange::execute_plan(occ, moves, cfg.loss,
                                                            derive_seed(SeedSpec{cfg.seed}, "cycle_rearrange", 0, 0));
                write_to(out_dir / "occupancy_after.txt", [&](std::ostream& o) { write_occupancy(o, after); });
                write_to(out_dir / "move_log.csv", [&](std::ostream& o) {
                    o << "step,event\n";
                    for (const auto& e : log.entries) o << e.step << ',' << rearrange::event_name(e.event) << '\n';
                });
                std::cout << fmt::format("{} atoms after execution, {} lost\n", after.count(), log.losses());
            }
            if (!violations.empty()) return 2;
        } else if (*run) {
            if (!kind.empty()) cfg.kind = harness::parse_kind(kind);
            harness::validate_config(cfg);
            const auto r = harness::run_and_write(cfg, out_dir);
            std::cout << fmt::format("{}: {} points, {} rearrangements, p = {}; results in {}\n",
                                     harness::kind_name(cfg.kind), r.points.size(), r.events.size(), r.p,
                                     out_dir.string());
        }
    } catch (const Error& e) {
        std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
