#pragma once

#include <cmath>

#include "tweezer/core/error.hpp"
#include "tweezer/core/grid.hpp"
#include "tweezer/rearrange/plan.hpp"

namespace tweezer::rearrange {

enum class RampShape { Linear, MinimumJerk };

// Crossed-deflector drive frequencies. Site (row, col) maps to
// (center_x + (col - cols/2) * scale, center_y + (row - rows/2) * scale).
struct DeflectorMap {
    double center_freq_mhz = 100.0;
    double mhz_per_site = 0.5;
};

struct ChirpSegment {
    double duration_ms = 0.0;
    double start_x_mhz = 0.0;
    double end_x_mhz = 0.0;
    double start_y_mhz = 0.0;
    double end_y_mhz = 0.0;

    // Linear in time between the endpoints.
    double x_at(double t_ms) const { return start_x_mhz + (end_x_mhz - start_x_mhz) * (t_ms / duration_ms); }
    double y_at(double t_ms) const { return start_y_mhz + (end_y_mhz - start_y_mhz) * (t_ms / duration_ms); }
};

struct IntensityRamp {
    double duration_ms = 0.0;
    RampShape shape = RampShape::Linear;
};

struct MoveWaveform {
    IntensityRamp ramp_up;
    ChirpSegment chirp;
    IntensityRamp ramp_down;

    double total_ms() const { return ramp_up.duration_ms + chirp.duration_ms + ramp_down.duration_ms; }
};

inline MoveWaveform waveform_for_move(const Move& m, const TrapArray& array, double speed_um_per_ms,
                                      double ramp_ms, DeflectorMap deflector = {},
                                      RampShape shape = RampShape::Linear) {
    if (!(speed_um_per_ms > 0.0)) fail(Errc::InvalidArgument, "move speed must be positive");
    if (!(ramp_ms > 0.0)) fail(Errc::InvalidArgument, "ramp duration must be positive");
    if (m.from_site >= array.size() || m.to_site >= array.size()) {
        fail(Errc::InvalidArgument, "move references a site outside the array");
    }
    if (m.from_site == m.to_site) fail(Errc::ZeroLengthMove, "move has identical endpoints");

    const double length_um = move_length_sites(m, array.cols()) * array.pitch();
    const auto a = array.coord(m.from_site);
    const auto b = array.coord(m.to_site);
    const double col_mid = 0.5 * static_cast<double>(array.cols() - 1);
    const double row_mid = 0.5 * static_cast<double>(array.rows() - 1);
    auto fx = [&](std::size_t col) {
        return deflector.center_freq_mhz + (static_cast<double>(col) - col_mid) * deflector.mhz_per_site;
    };
    auto fy = [&](std::size_t row) {
        return deflector.center_freq_mhz + (static_cast<double>(row) - row_mid) * deflector.mhz_per_site;
    };

    MoveWaveform w;
    w.ramp_up = {ramp_ms, shape};
    w.chirp = {length_um / speed_um_per_ms, fx(a.col), fx(b.col), fy(a.row), fy(b.row)};
    w.ramp_down = {ramp_ms, shape};
    return w;
}

}  // namespace tweezer::rearrange
