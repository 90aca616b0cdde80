#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <utility>
#include <vector>

#include "tweezer/core/error.hpp"
#include "tweezer/core/grid.hpp"
#include "tweezer/core/random.hpp"
#include "tweezer/rearrange/plan.hpp"

namespace tweezer::rearrange {

struct LossModel {
    double p_pickup = 0.0;
    double p_transit_per_site = 0.0;  // per pitch travelled
    double p_dropoff = 0.0;
};

inline void validate_loss(const LossModel& loss) {
    for (double p : {loss.p_pickup, loss.p_transit_per_site, loss.p_dropoff}) {
        if (!(p >= 0.0 && p <= 1.0)) {
            fail(Errc::InvalidProbability, "loss probabilities must lie in [0, 1]");
        }
    }
}

// Probability that one atom survives a move of `length_sites` pitches.
inline double move_survival(const LossModel& loss, double length_sites) {
    return (1.0 - loss.p_pickup) * std::pow(1.0 - loss.p_transit_per_site, length_sites) *
           (1.0 - loss.p_dropoff);
}

inline double move_length_sites(const Move& m, std::size_t cols) {
    const double dr = static_cast<double>(m.from_site / cols) - static_cast<double>(m.to_site / cols);
    const double dc = static_cast<double>(m.from_site % cols) - static_cast<double>(m.to_site % cols);
    return std::sqrt(dr * dr + dc * dc);
}

enum class MoveEvent {
    TrapsLowered,  // static traps ramped to ~20% depth before the first move
    Moved,
    LostPickup,
    LostTransit,
    LostDropoff,
    SkippedSourceEmpty,
    SkippedTargetOccupied,
    TrapsRestored,
};

inline const char* event_name(MoveEvent e) {
    switch (e) {
    case MoveEvent::TrapsLowered: return "TrapsLowered";
    case MoveEvent::Moved: return "Moved";
    case MoveEvent::LostPickup: return "LostPickup";
    case MoveEvent::LostTransit: return "LostTransit";
    case MoveEvent::LostDropoff: return "LostDropoff";
    case MoveEvent::SkippedSourceEmpty: return "SkippedSourceEmpty";
    case MoveEvent::SkippedTargetOccupied: return "SkippedTargetOccupied";
    case MoveEvent::TrapsRestored: return "TrapsRestored";
    }
    return "Unknown";
}

struct MoveLogEntry {
    std::size_t step = 0;
    MoveEvent event = MoveEvent::Moved;
};

struct MoveLog {
    double static_depth_fraction = 0.2;
    std::vector<MoveLogEntry> entries;

    std::size_t losses() const {
        std::size_t n = 0;
        for (const auto& e : entries) {
            n += (e.event == MoveEvent::LostPickup || e.event == MoveEvent::LostTransit ||
                  e.event == MoveEvent::LostDropoff);
        }
        return n;
    }
};

// Runs the plan with stochastic loss. Each move draws from its own
// substream, so the outcome of step k never depends on earlier draws.
inline std::pair<Occupancy, MoveLog> execute_plan(const Occupancy& occ, const MovePlan& plan,
                                                  const LossModel& loss, SeedSpec seed) {
    validate_loss(loss);
    Occupancy out = occ;
    MoveLog log;
    if (plan.empty()) {
        return {out, log};
    }
    log.entries.push_back({0, MoveEvent::TrapsLowered});
    for (std::size_t step = 0; step < plan.moves.size(); ++step) {
        const Move& m = plan.moves[step];
        if (m.from_site >= out.size() || m.to_site >= out.size()) {
            fail(Errc::InvalidArgument, "move references a site outside the array");
        }
        if (!out[m.from_site]) {
            log.entries.push_back({step, MoveEvent::SkippedSourceEmpty});
            continue;
        }
        if (out[m.to_site]) {
            log.entries.push_back({step, MoveEvent::SkippedTargetOccupied});
            continue;
        }
        Rng rng = make_stream(seed, "move", step);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        out.set(m.from_site, false);
        if (u(rng) < loss.p_pickup) {
            log.entries.push_back({step, MoveEvent::LostPickup});
            continue;
        }
        const double transit_survival =
            std::pow(1.0 - loss.p_transit_per_site, move_length_sites(m, out.cols()));
        if (u(rng) >= transit_survival) {
            log.entries.push_back({step, MoveEvent::LostTransit});
            continue;
        }
        if (u(rng) < loss.p_dropoff) {
            log.entries.push_back({step, MoveEvent::LostDropoff});
            continue;
        }
        out.set(m.to_site, true);
        log.entries.push_back({step, MoveEvent::Moved});
    }
    log.entries.push_back({plan.moves.size(), MoveEvent::TrapsRestored});
    return {out, log};
}

}  // namespace tweezer::rearrange
