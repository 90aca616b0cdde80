#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tweezer/core/error.hpp"
#include "tweezer/core/loading.hpp"
#include "tweezer/core/random.hpp"
#include "tweezer/harness/config.hpp"
#include "tweezer/harness/experiments.hpp"
#include "tweezer/readout/correction.hpp"
#include "tweezer/rearrange/execute.hpp"
#include "tweezer/rearrange/plan.hpp"
#include "tweezer/spin/run.hpp"

namespace tweezer::harness {

// Runs fn(i) for i in [0, n) on `threads` workers. If any call throws, the
// exception from the lowest index is rethrown, so failures do not depend on
// scheduling either.
template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t failed_at = n;
    std::exception_ptr failure;
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (i < failed_at) {
                    failed_at = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(worker);
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

struct RearrangementEvent {
    std::size_t point = 0;
    std::string reason;  // "initial", "loss" or "reload"
    std::size_t atoms_before = 0;
    std::size_t empty_targets = 0;
    std::size_t moves = 0;
    std::size_t parking_moves = 0;
    std::size_t losses = 0;
    std::size_t atoms_after = 0;
};

struct CycleResult {
    ExperimentPlan plan;
    std::vector<Occupancy> occupancies;  // atoms present while each point ran
    std::vector<PointResult> points;
    std::vector<RearrangementEvent> events;
    std::size_t loads = 0;
    std::size_t reference_bright = 0;
    std::size_t reference_kept = 0;
    double p = 0.0;
    bool p_estimated = false;
    nlohmann::ordered_json fits;
};

namespace detail {

inline std::size_t empty_targets(const Occupancy& occ, const RegisterSpec& reg) {
    std::size_t n = 0;
    for (auto s : reg.target_sites()) n += !occ[s];
    return n;
}

// Sequential occupancy bookkeeping: the pattern each point runs with, plus
// every rearrangement it took to get there.
class OccupancyTracker {
  public:
    OccupancyTracker(const ExperimentConfig& cfg, CycleResult& result)
        : cfg_(cfg), result_(result), array_(cfg.array()), reg_(cfg.register_spec()), seed_{cfg.seed} {
        load();
    }

    // Fills the register before point `i`, reloading when too few atoms remain.
    const Occupancy& prepare(std::size_t i) {
        std::string reason = i == 0 ? "initial" : "loss";
        for (std::size_t attempt = 0; empty_targets(occ_, reg_) > 0; ++attempt) {
            if (attempt > 10000) fail(Errc::PlanningFailed, fmt::format("point {}: register never filled", i));
            if (occ_.count() < reg_.target_count()) {
                load();
                reason = "reload";
                continue;
            }
            RearrangementEvent ev{i, reason, occ_.count(), empty_targets(occ_, reg_), 0, 0, 0, 0};
            const auto plan = rearrange::plan_moves(occ_, reg_);
            auto [after, log] =
                rearrange::execute_plan(occ_, plan, cfg_.loss, derive_seed(seed_, "cycle_rearrange", i, attempt));
            ev.moves = plan.moves.size();
            ev.parking_moves = plan.parking_count();
            ev.losses = log.losses();
            ev.atoms_after = after.count();
            occ_ = std::move(after);
            result_.events.push_back(std::move(ev));
        }
        return occ_;
    }

    // Atoms lost to the two images of point `i` leave before the next point.
    void apply_imaging_loss(std::size_t i) {
        const double survive = std::pow(1.0 - cfg_.imaging.p_loss_per_image, 2.0);
        if (survive >= 1.0) return;
        Rng rng = make_stream(seed_, "cycle_loss", i);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::size_t s = 0; s < occ_.size(); ++s) {
            const double r = u(rng);
            if (occ_[s] && r >= survive) occ_.set(s, false);
        }
    }

  private:
    void load() {
        occ_ = sample_loading(array_, cfg_.loading, derive_seed(seed_, "cycle_load", result_.loads));
        ++result_.loads;
    }

    const ExperimentConfig& cfg_;
    CycleResult& result_;
    TrapArray array_;
    RegisterSpec reg_;
    SeedSpec seed_;
    Occupancy occ_;
};

}  // namespace detail

using ShotsCallback = std::function<void(std::size_t point, const spin::ShotRecords&)>;

// Load once, then per point: rearrange if any register site is empty, run
// the point's sequence for cfg.shots shots, image. Occupancies are fixed
// sequentially first; points then run on cfg.threads workers, each on its
// own substream (seed, "point", index).
inline CycleResult run_cycle(const ExperimentConfig& cfg, const ShotsCallback& on_shots = {}) {
    validate_config(cfg);
    CycleResult result;
    result.plan = build_experiment(cfg);
    const TrapArray array = cfg.array();
    const RegisterSpec reg = cfg.register_spec();
    const auto& specs = result.plan.points;

    {
        detail::OccupancyTracker tracker(cfg, result);
        for (std::size_t i = 0; i < specs.size(); ++i) {
            try {
                result.occupancies.push_back(tracker.prepare(i));
            } catch (const Error& e) {
                throw Error(e.code(), fmt::format("point {}: {}", i, e.what()));
            }
            tracker.apply_imaging_loss(i);
        }
    }

    std::vector<std::vector<spin::SiteTally>> tallies(specs.size());
    parallel_for(specs.size(), cfg.threads, [&](std::size_t i) {
        try {
            const auto rec = spin::run_sequence(array, result.occupancies[i], specs[i].sequence, cfg.noise,
                                                cfg.imaging, cfg.shots, derive_seed(SeedSpec{cfg.seed}, "point", i));
            tallies[i] = spin::tally(rec, "main");
            if (on_shots) on_shots(i, rec);
        } catch (const Error& e) {
            throw Error(e.code(), fmt::format("point {}: {}", i, e.what()));
        }
    });

    // Undriven atoms outside the register, pooled over the whole run.
    for (std::size_t i = 0; i < specs.size(); ++i) {
        for (std::size_t s = 0; s < array.size(); ++s) {
            if (reg.is_target(s) || !result.occupancies[i][s]) continue;
            result.reference_bright += tallies[i][s].bright;
            result.reference_kept += tallies[i][s].kept;
        }
    }
    if (cfg.correction_p) {
        result.p = *cfg.correction_p;
    } else if (!specs.empty()) {
        result.p = readout::estimate_p_reference(result.reference_bright, result.reference_kept);
        result.p_estimated = true;
    }
    const double q = cfg.correction_q;

    for (std::size_t i = 0; i < specs.size(); ++i) {
        PointResult pr;
        pr.index = i;
        pr.value = specs[i].value;
        for (auto s : result.plan.data_sites) {
            const auto& t = tallies[i][s];
            if (t.kept == 0) continue;
            pr.sites.push_back({s, estimate(t.bright, t.kept, result.p, q)});
        }
        for (const auto& g : result.plan.groups) {
            std::size_t k = 0, n = 0;
            for (auto s : g.sites) {
                k += tallies[i][s].bright;
                n += tallies[i][s].kept;
            }
            if (n > 0) pr.groups.push_back({g.name, estimate(k, n, result.p, q)});
        }
        result.points.push_back(std::move(pr));
    }
    result.fits = fit_experiment(cfg, result.plan, result.points);
    return result;
}

}  // namespace tweezer::harness
