#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>
#include <sstream>

#include "tweezer/hologram/fft.hpp"
#include "tweezer/hologram/mask_io.hpp"
#include "tweezer/hologram/wgs.hpp"

using namespace tweezer;
using namespace tweezer::hologram;

namespace {

double total(const IntensityMap& m) {
    double t = 0.0;
    for (double v : m.intensity) t += v;
    return t;
}

PhaseMask random_mask(std::size_t n, std::uint64_t seed) {
    PhaseMask m{n, std::vector<double>(n * n)};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
    for (double& p : m.phase) p = u(rng);
    return m;
}

// Direct O(N^4) DFT of one focal pixel, as an oracle for the FFT path.
double dft_intensity(const PhaseMask& m, std::size_t x, std::size_t y) {
    const std::size_t n = m.grid_size;
    const long kx = static_cast<long>(x) - static_cast<long>(n / 2);
    const long ky = static_cast<long>(y) - static_cast<long>(n / 2);
    std::complex<double> acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const double arg = m.phase[r * n + c] -
                               2.0 * std::numbers::pi * static_cast<double>(kx * static_cast<long>(c) + ky * static_cast<long>(r)) /
                                   static_cast<double>(n);
            acc += std::polar(1.0, arg);
        }
    }
    return std::norm(acc) / static_cast<double>(n * n);
}

}  // namespace

TEST(Focal, ZeroPhaseGivesCentralPeak) {
    const std::size_t n = 32;
    const PhaseMask m{n, std::vector<double>(n * n, 0.0)};
    const auto map = simulate_focal(m);
    EXPECT_NEAR(map.at(n / 2, n / 2), static_cast<double>(n * n), 1e-9);
    EXPECT_NEAR(total(map), static_cast<double>(n * n), 1e-9);
}

TEST(Focal, OnePeriodRampShiftsByOnePixel) {
    const std::size_t n = 64;
    PhaseMask m{n, std::vector<double>(n * n)};
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            m.phase[r * n + c] = wrap_phase(2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(n));
    const auto map = simulate_focal(m);
    EXPECT_NEAR(map.at(n / 2 + 1, n / 2), static_cast<double>(n * n), 1e-8);
    EXPECT_LT(map.at(n / 2, n / 2), 1e-8);
}

TEST(Focal, MatchesDirectDft) {
    const auto m = random_mask(16, 3);
    const auto map = simulate_focal(m);
    for (auto [x, y] : {std::pair<std::size_t, std::size_t>{0, 0}, {8, 8}, {3, 11}, {15, 1}}) {
        EXPECT_NEAR(map.at(x, y), dft_intensity(m, x, y), 1e-9);
    }
}

TEST(Focal, ParsevalForRandomMasks) {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto m = random_mask(128, s);
        const double input = 128.0 * 128.0;
        EXPECT_LT(std::abs(total(simulate_focal(m)) - input) / input, 1e-9);
    }
}

TEST(Focal, InvalidMask) {
    PhaseMask m{48, std::vector<double>(48 * 48, 0.0)};
    EXPECT_THROW(simulate_focal(m), Error);
    PhaseMask nan_mask{4, std::vector<double>(16, 0.0)};
    nan_mask.phase[3] = std::nan("");
    EXPECT_THROW(simulate_focal(nan_mask), Error);
}

TEST(Wgs, SingleSpotIsUniform) {
    const auto [mask, rep] = wgs_phase({{32, 32, 1.0}}, 64, 10, SeedSpec{1});
    EXPECT_EQ(rep.uniformity, 1.0);
    EXPECT_EQ(rep.iterations_run, 10u);
    EXPECT_EQ(rep.uniformity_trace.size(), 10u);
}

TEST(Wgs, MirrorPairIsBalanced) {
    const std::size_t n = 128;
    const TargetSpots spots{{n / 2 - 10, n / 2, 1.0}, {n / 2 + 10, n / 2, 1.0}};
    const auto [mask, rep] = wgs_phase(spots, n, 30, SeedSpec{2});
    const auto map = simulate_focal(mask);
    const double a = map.at(spots[0].x, spots[0].y), b = map.at(spots[1].x, spots[1].y);
    EXPECT_LT(std::abs(a - b) / (a + b), 1e-6);
}

TEST(Wgs, Errors) {
    EXPECT_THROW(wgs_phase({}, 64, 5, SeedSpec{}), Error);
    try {
        wgs_phase({{64, 3, 1.0}}, 64, 5, SeedSpec{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::GridTooSmall);
    }
    try {
        wgs_phase({}, 64, 5, SeedSpec{});
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::EmptyTargets);
    }
    EXPECT_THROW(wgs_phase({{1, 1, 1.0}}, 64, 0, SeedSpec{}), Error);
}

class DefaultGrid : public ::testing::Test {
  protected:
    static void SetUpTestSuite() {
        spots_ = spot_grid(10, 11, 8, 256);
        auto [m, r] = wgs_phase(spots_, 256, 100, SeedSpec{2024});
        mask_ = std::move(m);
        report_ = std::move(r);
    }
    static TargetSpots spots_;
    static PhaseMask mask_;
    static WgsReport report_;
};
TargetSpots DefaultGrid::spots_;
PhaseMask DefaultGrid::mask_;
WgsReport DefaultGrid::report_;

TEST_F(DefaultGrid, ReachesUniformity) {
    EXPECT_EQ(spots_.size(), 110u);
    EXPECT_GE(report_.uniformity, 0.95);
    EXPECT_LT(report_.max_parseval_error, 1e-9);
}

TEST_F(DefaultGrid, TraceImproves) {
    ASSERT_EQ(report_.uniformity_trace.size(), 100u);
    EXPECT_GE(report_.uniformity_trace[49], report_.uniformity_trace[0]);
}

TEST_F(DefaultGrid, MetricsRecomputedFromMap) {
    const auto map = simulate_focal(mask_);
    double on = 0.0;
    for (const auto& s : spots_) on += map.at(s.x, s.y);
    EXPECT_NEAR(on / total(map), report_.efficiency, 1e-9);
    const auto m = spot_metrics(map, spots_);
    EXPECT_EQ(m.uniformity, report_.uniformity);
    EXPECT_EQ(m.efficiency, report_.efficiency);
}

TEST_F(DefaultGrid, MaskPhasesInRange) {
    for (double p : mask_.phase) {
        ASSERT_GE(p, -std::numbers::pi);
        ASSERT_LT(p, std::numbers::pi);
    }
}

TEST(MaskIo, RoundTripIsBitExact) {
    const auto m = random_mask(16, 9);
    std::stringstream buf;
    write_phase_mask(buf, m);
    const std::string bytes = buf.str();
    ASSERT_EQ(bytes.size(), 16u + 16u * 16u * 8u);
    EXPECT_EQ(bytes.substr(0, 4), "PHMK");
    EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 16u);
    const auto back = read_phase_mask(buf);
    EXPECT_EQ(back.grid_size, m.grid_size);
    EXPECT_EQ(back.phase, m.phase);

    std::stringstream junk("XXXX0000");
    EXPECT_THROW(read_phase_mask(junk), Error);
}

TEST(MaskIo, JsonSidecar) {
    WgsReport r;
    r.iterations_run = 3;
    r.uniformity = 0.5;
    r.uniformity_trace = {0.1, 0.2, 0.5};
    const auto j = to_json(r);
    EXPECT_EQ(j["iterations_run"], 3);
    EXPECT_EQ(j["uniformity_trace"].size(), 3u);
}
