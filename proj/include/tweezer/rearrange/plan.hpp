#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tweezer/core/error.hpp"
#include "tweezer/core/grid.hpp"

namespace tweezer::rearrange {

// One dynamic-tweezer move along the straight segment between two sites.
struct Move {
    std::size_t from_site = 0;
    std::size_t to_site = 0;
    bool parking = false;

    friend bool operator==(const Move&, const Move&) = default;
};

struct MovePlan {
    std::vector<Move> moves;

    std::size_t size() const noexcept { return moves.size(); }
    bool empty() const noexcept { return moves.empty(); }

    std::size_t parking_count() const {
        return static_cast<std::size_t>(
            std::count_if(moves.begin(), moves.end(), [](const Move& m) { return m.parking; }));
    }

    friend bool operator==(const MovePlan&, const MovePlan&) = default;
};

// Clearance around a path, in units of the array pitch.
inline constexpr double kClearance = 0.5;

namespace detail {

// Squared distance from site `p` to segment a-b, all in (row, col) units,
// plus the projection parameter of `p` along the segment.
inline std::pair<double, double> segment_distance2(SiteCoord a, SiteCoord b, SiteCoord p) {
    const double ax = static_cast<double>(a.col), ay = static_cast<double>(a.row);
    const double dx = static_cast<double>(b.col) - ax, dy = static_cast<double>(b.row) - ay;
    const double px = static_cast<double>(p.col) - ax, py = static_cast<double>(p.row) - ay;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? (px * dx + py * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double ex = px - t * dx, ey = py - t * dy;
    return {ex * ex + ey * ey, t};
}

inline double distance2(SiteCoord a, SiteCoord b) {
    const double dr = static_cast<double>(a.row) - static_cast<double>(b.row);
    const double dc = static_cast<double>(a.col) - static_cast<double>(b.col);
    return dr * dr + dc * dc;
}

}  // namespace detail

// Occupied sites (other than the endpoints) within the clearance of the
// segment from -> to, ordered from the one nearest `to` to the one nearest
// `from`.
template <typename Occupied>
std::vector<std::size_t> path_blockers(std::size_t rows, std::size_t cols, const Occupied& occupied,
                                       std::size_t from, std::size_t to) {
    const SiteCoord a{from / cols, from % cols};
    const SiteCoord b{to / cols, to % cols};
    const std::size_t rlo = std::min(a.row, b.row), rhi = std::max(a.row, b.row);
    const std::size_t clo = std::min(a.col, b.col), chi = std::max(a.col, b.col);
    std::vector<std::pair<double, std::size_t>> found;
    // Sites further than half a pitch outside the bounding box cannot be
    // within the clearance, so one ring of margin is enough.
    const std::size_t r0 = rlo > 0 ? rlo - 1 : 0, r1 = std::min(rows - 1, rhi + 1);
    const std::size_t c0 = clo > 0 ? clo - 1 : 0, c1 = std::min(cols - 1, chi + 1);
    for (std::size_t r = r0; r <= r1; ++r) {
        for (std::size_t c = c0; c <= c1; ++c) {
            const std::size_t s = r * cols + c;
            if (s == from || s == to || !occupied[s]) continue;
            const auto [d2, t] = detail::segment_distance2(a, b, {r, c});
            if (d2 <= kClearance * kClearance + 1e-12) {
                found.emplace_back(-t, s);
            }
        }
    }
    std::sort(found.begin(), found.end());
    std::vector<std::size_t> out;
    out.reserve(found.size());
    for (const auto& f : found) out.push_back(f.second);
    return out;
}

// Greedy compression planner. Targets are taken in order of distance from
// the target centroid; occupied targets keep their atom and every empty
// target is assigned the nearest unassigned source outside the target
// (ties to the lower site index). Moves are emitted only when their path is
// clear; blocked moves are resolved by chain shifts (see push), which never
// deadlock, so no parking detours are produced.
class CompressionPlanner {
  public:
    MovePlan operator()(const Occupancy& occ, const RegisterSpec& target) const {
        if (occ.rows() != target.rows || occ.cols() != target.cols ||
            occ.size() != target.target_mask.size()) {
            fail(Errc::SizeMismatch, "occupancy and register have different shapes");
        }
        const std::size_t needed = target.target_count();
        const std::size_t have = occ.count();
        if (have < needed) {
            fail(Errc::InsufficientAtoms, "needed " + std::to_string(needed) + " atoms, have " +
                                              std::to_string(have));
        }
        State st(occ, target);
        st.assign();
        st.order();
        return std::move(st.plan);
    }

  private:
    enum class Role : unsigned char { Empty, Idle, Settled, Source };

    struct Pending {
        std::size_t src;
        std::size_t dst;
    };

    struct State {
        std::size_t rows, cols;
        const RegisterSpec& reg;
        std::vector<unsigned char> occupied;
        std::vector<Role> role;
        std::vector<Pending> pending;
        std::size_t active = 0;
        MovePlan plan;

        State(const Occupancy& occ, const RegisterSpec& target)
            : rows(occ.rows()), cols(occ.cols()), reg(target), occupied(occ.size()),
              role(occ.size(), Role::Empty) {
            for (std::size_t s = 0; s < occ.size(); ++s) {
                occupied[s] = occ[s] ? 1 : 0;
                if (occ[s]) role[s] = reg.is_target(s) ? Role::Settled : Role::Idle;
            }
        }

        SiteCoord at(std::size_t s) const { return {s / cols, s % cols}; }

        void assign() {
            auto targets = reg.target_sites();
            double cr = 0.0, cc = 0.0;
            for (auto s : targets) {
                cr += static_cast<double>(at(s).row);
                cc += static_cast<double>(at(s).col);
            }
            cr /= static_cast<double>(targets.size());
            cc /= static_cast<double>(targets.size());
            auto centroid_d2 = [&](std::size_t s) {
                const double dr = static_cast<double>(at(s).row) - cr;
                const double dc = static_cast<double>(at(s).col) - cc;
                return dr * dr + dc * dc;
            };
            std::stable_sort(targets.begin(), targets.end(), [&](std::size_t a, std::size_t b) {
                const double da = centroid_d2(a), db = centroid_d2(b);
                return da < db || (da == db && a < b);
            });
            for (auto t : targets) {
                if (occupied[t]) continue;
                std::optional<std::size_t> best;
                double best_d2 = 0.0;
                for (std::size_t s = 0; s < occupied.size(); ++s) {
                    if (role[s] != Role::Idle) continue;
                    const double d2 = detail::distance2(at(s), at(t));
                    if (!best || d2 < best_d2) {
                        best = s;
                        best_d2 = d2;
                    }
                }
                role[*best] = Role::Source;
                pending.push_back({*best, t});
            }
        }

        void emit(std::size_t from, std::size_t to) {
            plan.moves.push_back({from, to, false});
            occupied[from] = 0;
            occupied[to] = 1;
            role[from] = Role::Empty;
            role[to] = Role::Settled;
        }

        Pending* pending_from(std::size_t s) {
            for (auto& p : pending) {
                if (p.src == s) return &p;
            }
            return nullptr;
        }

        // Nearest idle atom with a clear path to `dst`.
        std::optional<std::size_t> clear_idle(std::size_t dst) const {
            std::optional<std::size_t> best;
            double best_d2 = 0.0;
            for (std::size_t s = 0; s < occupied.size(); ++s) {
                if (role[s] != Role::Idle) continue;
                const double d2 = detail::distance2(at(s), at(dst));
                if (best && d2 >= best_d2) continue;
                if (!path_blockers(rows, cols, occupied, s, dst).empty()) continue;
                best = s;
                best_d2 = d2;
            }
            return best;
        }

        // Makes the outside atom at `b` the one filling the current target.
        // If `b` was promised to another target, that target inherits the
        // previous active atom instead.
        void adopt(std::size_t b) {
            if (role[b] == Role::Source) {
                pending_from(b)->src = active;
            } else {
                role[active] = Role::Idle;
            }
            role[b] = Role::Source;
            active = b;
        }

        // Moves an atom into the empty target `dst`, starting from `src`
        // (the active outside atom or a settled target atom). The blocker
        // nearest `dst` is handled first: a settled atom is pushed into
        // `dst` and its site becomes the hole, an outside atom takes over the
        // move. Either way the segment being worked on gets strictly shorter,
        // so this terminates. Returns true once the active atom has landed.
        bool push(std::size_t src, std::size_t dst) {
            for (;;) {
                const auto blockers = path_blockers(rows, cols, occupied, src, dst);
                if (blockers.empty()) {
                    const bool landed = src == active;
                    emit(src, dst);
                    return landed;
                }
                const std::size_t b = blockers.front();
                if (role[b] == Role::Settled) {
                    // Disturbing a settled atom is the last resort: an idle
                    // atom with a clear path takes the move instead.
                    if (const auto alt = clear_idle(dst)) {
                        adopt(*alt);
                        src = *alt;
                        continue;
                    }
                    if (push(b, dst)) return true;
                    dst = b;
                } else {
                    adopt(b);
                    src = b;
                }
            }
        }

        // Pending moves with a clear path go first, in assignment order;
        // only when none is clear does the front one chain-shift.
        void order() {
            while (!pending.empty()) {
                std::size_t pick = 0;
                for (std::size_t i = 0; i < pending.size(); ++i) {
                    if (path_blockers(rows, cols, occupied, pending[i].src, pending[i].dst).empty()) {
                        pick = i;
                        break;
                    }
                }
                const Pending m = pending[pick];
                pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(pick));
                active = m.src;
                if (!push(m.src, m.dst)) {
                    fail(Errc::PlanningFailed, "active atom never reached its target");
                }
            }
        }
    };
};

inline MovePlan plan_moves(const Occupancy& occ, const RegisterSpec& target) {
    return CompressionPlanner{}(occ, target);
}

enum class ViolationKind { OutOfBounds, SameSite, SourceEmpty, TargetOccupied, PathBlocked };

inline const char* violation_name(ViolationKind k) {
    switch (k) {
    case ViolationKind::OutOfBounds: return "OutOfBounds";
    case ViolationKind::SameSite: return "SameSite";
    case ViolationKind::SourceEmpty: return "SourceEmpty";
    case ViolationKind::TargetOccupied: return "TargetOccupied";
    case ViolationKind::PathBlocked: return "PathBlocked";
    }
    return "Unknown";
}

struct Violation {
    std::size_t step = 0;
    ViolationKind kind = ViolationKind::SourceEmpty;
};

// Replays the plan on a copy of the occupancy and reports every step at
// which a move invariant fails. Violating moves are not applied.
inline std::vector<Violation> validate_plan(const Occupancy& occ, const MovePlan& plan) {
    std::vector<Violation> out;
    std::vector<unsigned char> occupied(occ.size());
    for (std::size_t s = 0; s < occ.size(); ++s) occupied[s] = occ[s] ? 1 : 0;
    for (std::size_t step = 0; step < plan.moves.size(); ++step) {
        const Move& m = plan.moves[step];
        if (m.from_site >= occ.size() || m.to_site >= occ.size()) {
            out.push_back({step, ViolationKind::OutOfBounds});
            continue;
        }
        if (m.from_site == m.to_site) {
            out.push_back({step, ViolationKind::SameSite});
            continue;
        }
        bool ok = true;
        if (!occupied[m.from_site]) {
            out.push_back({step, ViolationKind::SourceEmpty});
            ok = false;
        }
        if (occupied[m.to_site]) {
            out.push_back({step, ViolationKind::TargetOccupied});
            ok = false;
        }
        if (!path_blockers(occ.rows(), occ.cols(), occupied, m.from_site, m.to_site).empty()) {
            out.push_back({step, ViolationKind::PathBlocked});
            ok = false;
        }
        if (ok) {
            occupied[m.from_site] = 0;
            occupied[m.to_site] = 1;
        }
    }
    return out;
}

// CSV export: step, from_row, from_col, to_row, to_col, is_parking.
inline void write_plan_csv(std::ostream& out, const MovePlan& plan, std::size_t cols) {
    out << "step,from_row,from_col,to_row,to_col,is_parking\n";
    for (std::size_t i = 0; i < plan.moves.size(); ++i) {
        const Move& m = plan.moves[i];
        out << i << ',' << m.from_site / cols << ',' << m.from_site % cols << ',' << m.to_site / cols
            << ',' << m.to_site % cols << ',' << (m.parking ? 1 : 0) << '\n';
    }
}

}  // namespace tweezer::rearrange
