#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "tweezer/analysis/wilson.hpp"
#include "tweezer/spin/propagate.hpp"
#include "tweezer/spin/run.hpp"
#include "tweezer/spin/sequence.hpp"

using namespace tweezer;
using namespace tweezer::spin;
using std::numbers::pi;

namespace {

DriveParams two_level(double rabi_hz, double detuning_hz = 0.0) {
    DriveParams d;
    d.rabi_hz = rabi_hz;
    d.detuning_hz = detuning_hz;
    d.leakage_ratio = 0.0;
    return d;
}

double generalized_rabi(double omega, double delta, double t) {
    const double w = std::sqrt(omega * omega + delta * delta);
    const double s = std::sin(pi * w * t);
    return omega * omega / (w * w) * s * s;
}

double fidelity(const SiteState& a, const SiteState& b) {
    // Both states pure in these tests: F = tr(rho_a rho_b).
    return (a.rho * b.rho).trace().real();
}

void expect_physical(const SiteState& s) {
    EXPECT_NEAR(s.rho.trace().real(), 1.0, 1e-9);
    EXPECT_NEAR(s.rho.trace().imag(), 0.0, 1e-12);
    EXPECT_LT((s.rho - s.rho.adjoint()).norm(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix3> eig(s.rho);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
}

readout::ImagingModel ideal_imaging() {
    readout::ImagingModel m;
    m.bright_mean = 200.0;
    m.dark_mean = 0.0;
    return m;
}

}  // namespace

TEST(Pulse, ZeroDurationIsBitExact) {
    const SiteState s = qubit_state(1.1, 0.3);
    const SiteState out = propagate_pulse(s, DriveParams{}, 0.0);
    EXPECT_TRUE(out.rho == s.rho);
}

TEST(Pulse, NegativeDurationRejected) {
    try {
        propagate_pulse(SiteState::down(), DriveParams{}, -1e-6);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NegativeDuration);
    }
}

TEST(Pulse, PiTimeAtPaperRabiFrequency) {
    const double t_pi = rotation_time(pi, 1160.0);
    EXPECT_NEAR(t_pi, 431.0e-6, 0.1e-6);
    const auto s = propagate_pulse(SiteState::down(), two_level(1160.0), 431.0e-6);
    EXPECT_NEAR(s.p_up(), generalized_rabi(1160.0, 0.0, 431.0e-6), 1e-9);
    EXPECT_NEAR(propagate_pulse(SiteState::down(), two_level(1160.0), t_pi).p_up(), 1.0, 1e-6);
}

TEST(Pulse, DetunedFlopMatchesClosedForm) {
    for (int k = 0; k < 20; ++k) {
        const double t = 37e-6 * (k + 1);
        const auto s = propagate_pulse(SiteState::down(), two_level(1000.0, 2000.0), t);
        EXPECT_NEAR(s.p_up(), generalized_rabi(1000.0, 2000.0, t), 1e-6) << t;
    }
}

TEST(Pulse, TwoLevelLimitOverGrid) {
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double omega = 200.0 + 150.0 * i;
        for (int j = 0; j < 20; ++j) {
            const double delta = -3000.0 + 300.0 * j;
            for (double t : {50e-6, 431e-6, 1.7e-3}) {
                const auto s = propagate_pulse(SiteState::down(), two_level(omega, delta), t);
                worst = std::max(worst, std::abs(s.p_up() - generalized_rabi(omega, delta, t)));
            }
        }
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(Pulse, BlochRotationConvention) {
    // A pi/2 about x from |down> points the Bloch vector along +y.
    DriveParams d = two_level(1000.0);
    auto s = rotate(SiteState::down(), pi / 2, 0.0, d);
    auto b = bloch(s);
    EXPECT_NEAR(b.x, 0.0, 1e-12);
    EXPECT_NEAR(b.y, 1.0, 1e-12);
    EXPECT_NEAR(b.z, 0.0, 1e-12);
    // About y it points along -x.
    s = rotate(SiteState::down(), pi / 2, pi / 2, d);
    b = bloch(s);
    EXPECT_NEAR(b.x, -1.0, 1e-12);
    EXPECT_NEAR(b.y, 0.0, 1e-12);
    // A negative angle undoes a positive one.
    s = rotate(rotate(SiteState::down(), 0.7, 0.4, d), -0.7, 0.4, d);
    EXPECT_NEAR(s.p_down(), 1.0, 1e-12);
}

TEST(Pulse, RotationComposition) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 2.0 * pi);
    const DriveParams d;  // full three-level drive
    for (int k = 0; k < 50; ++k) {
        const double t1 = u(rng) * (k % 2 ? 1 : -1), t2 = u(rng) * (k % 2 ? 1 : -1), phi = u(rng);
        const SiteState start = qubit_state(u(rng) / 2, u(rng));
        const auto a = rotate(rotate(start, t1, phi, d), t2, phi, d);
        const auto b = rotate(start, t1 + t2, phi, d);
        EXPECT_NEAR(fidelity(a, b), 1.0, 1e-9);
    }
}

TEST(Pulse, SuperoperatorMatchesDirectPropagation) {
    DriveParams d;
    d.phase = 0.9;
    d.stark_scatter_hz = 3.0;
    const SiteState s = qubit_state(0.8, 1.9);
    for (double scatter : {0.0, 3.0}) {
        d.stark_scatter_hz = scatter;
        const auto direct = propagate_pulse(s, d, 300e-6);
        const auto viaS = apply_superoperator(pulse_superoperator(d, 300e-6), s);
        EXPECT_LT((direct.rho - viaS.rho).norm(), 1e-12);
    }
}

TEST(Pulse, ScatterDephasesQubit) {
    DriveParams d = two_level(0.0);
    d.stark_scatter_hz = 2.0;
    const SiteState plus = qubit_state(pi / 2, 0.0);
    const auto out = propagate_pulse(plus, d, 0.5);
    EXPECT_NEAR(std::abs(out.coherence()), 0.5 * std::exp(-1.0), 1e-9);
    EXPECT_NEAR(out.p_up(), 0.5, 1e-12);
    d.stark_beam_on = false;
    EXPECT_NEAR(std::abs(propagate_pulse(plus, d, 0.5).coherence()), 0.5, 1e-12);
}

TEST(Leakage, StarkShiftIsolates) {
    DriveParams d;
    d.rabi_hz = 1160.0;
    d.leakage_ratio = 1.0;
    d.stark_shift_hz = 50.0 * d.rabi_hz;
    const double bound = std::pow(d.rabi_hz / d.stark_shift_hz, 2);
    EXPECT_LE(leakage_fraction(d, rotation_time(pi, d.rabi_hz)), bound);
    d.stark_shift_hz = 20000.0;
    EXPECT_LE(leakage_fraction(d, rotation_time(pi, d.rabi_hz)), std::pow(1160.0 / 20000.0, 2) + 1e-5);
}

TEST(Leakage, ResonantWithoutStarkBeam) {
    DriveParams d;
    d.rabi_hz = 1160.0;
    d.stark_beam_on = false;
    double peak = 0.0;
    const double period = 1.0 / d.rabi_hz;
    for (int k = 1; k <= 200; ++k) peak = std::max(peak, leakage_fraction(d, period * k / 200.0));
    EXPECT_GT(peak, 0.1);
    // Resonant cascade with equal couplings, starting in the middle level:
    // the L amplitude is sin(w)/sqrt(2) with w = pi sqrt(2) Omega t.
    const double t = 0.3e-3;
    const double w = pi * std::sqrt(2.0) * d.rabi_hz * t;  // half the frequency split
    EXPECT_NEAR(leakage_fraction(d, t), 0.5 * std::pow(std::sin(w), 2), 1e-9);
}

TEST(Leakage, DecoupledLevelNeverLeaks) {
    DriveParams d;
    d.leakage_ratio = 0.0;
    d.stark_beam_on = false;
    for (int k = 0; k < 50; ++k) EXPECT_EQ(leakage_fraction(d, 1e-5 * k), 0.0);
}

TEST(Leakage, LightShiftCompensation) {
    DriveParams d;
    // Second-order perturbation theory: -(c Omega)^2 / (4 delta_L).
    EXPECT_NEAR(light_shift_hz(d), -d.rabi_hz * d.rabi_hz / (4.0 * d.stark_shift_hz), 0.05);
    EXPECT_LT(light_shift_hz(d), 0.0);
    // Ramsey fringe phase P_up(theta) = b + a cos(theta + phi0), projected out.
    auto fringe_phase = [](const DriveParams& drive) {
        double cs = 0.0, sn = 0.0;
        for (int k = 0; k < 64; ++k) {
            const double th = 2.0 * pi * k / 64;
            const double p = rotate(rotate(SiteState::down(), pi / 2, 0.0, drive), pi / 2, th, drive).p_up();
            cs += p * std::cos(th);
            sn += p * std::sin(th);
        }
        return std::atan2(-sn, cs);
    };
    EXPECT_GT(fringe_phase(d), 0.02);
    d.detuning_hz = -light_shift_hz(d);
    EXPECT_LT(std::abs(fringe_phase(d)), 1e-4);
    d.stark_beam_on = false;
    EXPECT_EQ(light_shift_hz(d), 0.0);
}

TEST(FreeEvolve, NoNoiseNoDetuningIsIdentity) {
    const SiteState s = qubit_state(1.3, 0.2);
    EXPECT_LT((free_evolve(s, 10.0, 0.0, NoiseModel{}).rho - s.rho).norm(), 1e-12);
}

TEST(FreeEvolve, T2Coherence) {
    NoiseModel n;
    n.t_phi = t_phi_for_t2(21.0);
    const auto out = free_evolve(qubit_state(pi / 2, 0.0), 21.0, 0.0, n);
    EXPECT_NEAR(std::abs(out.coherence()), 0.5 * std::exp(-1.0), 1e-9);
    n.t1 = 100.0;
    n.t_phi = t_phi_for_t2(21.0, 100.0);
    EXPECT_NEAR(t2_of(n), 21.0, 1e-12);
    EXPECT_NEAR(std::abs(free_evolve(qubit_state(pi / 2, 0.0), 21.0, 0.0, n).coherence()), 0.5 * std::exp(-1.0), 1e-9);
}

TEST(FreeEvolve, T1Relaxation) {
    NoiseModel n;
    n.t1 = 100.0;
    EXPECT_NEAR(free_evolve(SiteState::up(), 100.0, 0.0, n).p_up(), 0.5 + 0.5 * std::exp(-1.0), 1e-9);
    EXPECT_NEAR(free_evolve(SiteState::down(), 100.0, 0.0, n).p_up(), 0.5 - 0.5 * std::exp(-1.0), 1e-9);
    const auto leak = free_evolve(SiteState::basis(kLeak), 100.0, 0.0, n);
    EXPECT_NEAR(leak.p_leak(), 1.0, 1e-12);
}

TEST(FreeEvolve, DetuningMatchesHamiltonian) {
    // Free precession must be the drive Hamiltonian with the Rabi term off.
    DriveParams d = two_level(0.0, 37.0);
    d.stark_beam_on = false;
    const SiteState s = qubit_state(1.0, 0.4);
    const auto a = free_evolve(s, 0.013, 37.0, NoiseModel{});
    const auto b = propagate_pulse(s, d, 0.013);
    EXPECT_LT((a.rho - b.rho).norm(), 1e-12);
}

TEST(FreeEvolve, TraceAndPositivityOverLongStreams) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    NoiseModel n;
    n.t1 = 0.8;
    n.t_phi = 0.3;
    DriveParams d;
    d.stark_scatter_hz = 5.0;
    SiteState s = SiteState::down();
    for (int k = 0; k < 1000; ++k) {
        if (u(rng) < 0.5) {
            d.phase = 2 * pi * u(rng);
            d.detuning_hz = 500.0 * (u(rng) - 0.5);
            s = propagate_pulse(s, d, 1e-3 * u(rng));
        } else {
            s = free_evolve(s, 0.05 * u(rng), 100.0 * (u(rng) - 0.5), n);
        }
        if (k % 50 == 0) expect_physical(s);
    }
    expect_physical(s);
}

TEST(Echo, StaticDetuningCancels) {
    const DriveParams d = two_level(1160.0);
    auto echo = [&](double delta) {
        NoiseModel n;
        n.detuning_offset_hz = delta;
        SiteState s = rotate(SiteState::down(), pi / 2, 0.0, d);
        s = free_evolve(s, 0.05, delta, n);
        s = rotate(s, pi, pi / 2, d);
        s = free_evolve(s, 0.05, delta, n);
        return rotate(s, pi / 2, 0.3, d).p_up();
    };
    const double ref = echo(0.0);
    for (double delta = -50.0; delta <= 50.0; delta += 5.0) EXPECT_NEAR(echo(delta), ref, 1e-6) << delta;
    // Ramsey without the echo is strongly detuning dependent.
    auto ramsey = [&](double delta) {
        NoiseModel n;
        SiteState s = rotate(SiteState::down(), pi / 2, 0.0, d);
        s = free_evolve(s, 0.1, delta, n);
        return rotate(s, pi / 2, 0.3, d).p_up();
    };
    EXPECT_GT(std::abs(ramsey(2.5) - ramsey(0.0)), 0.1);
}

TEST(Sequence, ParseAndWriteRoundTrip) {
    const auto array = make_grid(7, 3, 4.0);
    const std::string text =
        "# comment\n"
        "ROT cols=1 theta=pi/2 phi=0 omega=1160 delta=0\n"
        "WAIT 5.0s\n"
        "ROT rows=2 cols=0-2 theta=-(pi/4)*2 phi=pi/2\n"
        "WAIT 250us\n"
        "SHELVE\n"
        "IMAGE main\n";
    const auto seq = parse_sequence(text, array);
    ASSERT_EQ(seq.instructions.size(), 6u);
    const auto& r0 = std::get<Rotate>(seq.instructions[0]);
    EXPECT_EQ(r0.sites.size(), 7u);
    EXPECT_NEAR(r0.theta, pi / 2, 1e-15);
    EXPECT_DOUBLE_EQ(r0.drive.rabi_hz, 1160.0);
    const auto& r1 = std::get<Rotate>(seq.instructions[2]);
    EXPECT_EQ(r1.sites, (std::vector<std::size_t>{6, 7, 8}));
    EXPECT_NEAR(r1.theta, -pi / 2, 1e-15);
    EXPECT_DOUBLE_EQ(std::get<Wait>(seq.instructions[3]).seconds, 250e-6);
    EXPECT_EQ(std::get<Image>(seq.instructions[5]).tag, "main");

    std::ostringstream out;
    write_sequence(out, seq, array);
    const auto again = parse_sequence(out.str(), array);
    std::ostringstream out2;
    write_sequence(out2, again, array);
    EXPECT_EQ(out.str(), out2.str());
    ASSERT_EQ(again.instructions.size(), seq.instructions.size());
    EXPECT_EQ(std::get<Rotate>(again.instructions[2]).sites, r1.sites);
    EXPECT_EQ(std::get<Rotate>(again.instructions[2]).theta, r1.theta);
}

TEST(Sequence, RejectsMultiColumnRotate) {
    const auto array = make_grid(7, 3, 4.0);
    try {
        parse_sequence("ROT cols=0,1 theta=pi phi=0\n", array);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ConstraintViolation);
        EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
    }
    PulseSequence seq;
    seq.rotate({0, 4}, pi, 0.0, DriveParams{});  // (0,0) and (1,1)
    EXPECT_THROW(validate_sequence(seq, array), Error);
    EXPECT_THROW(parse_sequence("WAIT -1s\n", array), Error);
    EXPECT_THROW(parse_sequence("ROT cols=0 phi=0\n", array), Error);
    EXPECT_THROW(parse_sequence("JUMP\n", array), Error);
}

TEST(Run, EmptySequenceReadsDark) {
    const auto array = make_grid(3, 3, 4.0);
    Occupancy occ(array);
    for (std::size_t s : {0, 4, 8}) occ.set(s, true);
    const auto rec = run_sequence(array, occ, PulseSequence{}, NoiseModel{}, ideal_imaging(), 200, SeedSpec{1});
    const auto t = tally(rec);
    for (std::size_t s = 0; s < array.size(); ++s) {
        EXPECT_EQ(t[s].bright, 0u);
        EXPECT_EQ(t[s].kept, occ[s] ? 200u : 0u);
    }
}

TEST(Run, CheckerboardAfterFiveSeconds) {
    const auto array = make_grid(7, 3, 4.0);
    Occupancy occ(array);
    for (std::size_t s = 0; s < array.size(); ++s) occ.set(s, true);
    PulseSequence seq;
    for (std::size_t c = 0; c < 3; ++c) {
        std::vector<std::size_t> col;
        for (std::size_t r = 0; r < 7; ++r) {
            if ((r + c) % 2 == 0) col.push_back(array.index(r, c));
        }
        seq.rotate(col, pi, 0.0, DriveParams{});
    }
    seq.wait(5.0).shelve().image("main");
    const auto t = tally(run_sequence(array, occ, seq, NoiseModel{}, ideal_imaging(), 500, SeedSpec{3}), "main");
    const double leak = leakage_fraction(DriveParams{}, rotation_time(pi, 1160.0));
    for (std::size_t s = 0; s < array.size(); ++s) {
        const auto c = array.coord(s);
        const bool driven = (c.row + c.col) % 2 == 0;
        ASSERT_EQ(t[s].kept, 500u);
        // |L> is not shelved, so it reads bright like |up>.
        const double truth = driven ? 1.0 : 0.0;
        const auto iv = analysis::wilson_interval(t[s].bright, t[s].kept);
        EXPECT_TRUE(iv.contains(truth) || std::abs(truth - 1.0) < leak + 1e-3) << s;
        EXPECT_EQ(t[s].bright, driven ? 500u : 0u);
    }
}

TEST(Run, RamseyPhaseScan) {
    const auto array = make_grid(1, 1, 4.0);
    Occupancy occ(array);
    occ.set(0, true);
    const DriveParams d = two_level(1160.0);
    int inside = 0;
    for (int k = 0; k < 8; ++k) {
        const double theta = 2 * pi * k / 8;
        PulseSequence seq;
        seq.rotate({0}, pi / 2, 0.0, d).rotate({0}, pi / 2, theta, d).shelve().image();
        const auto t = tally(run_sequence(array, occ, seq, NoiseModel{}, ideal_imaging(), 500, SeedSpec{100u + k}))[0];
        const double truth = 0.5 * (1.0 + std::cos(theta));
        inside += analysis::wilson_interval(t.bright, t.kept).contains(truth);
        // The deterministic state must match the oracle exactly.
        const auto st = expected_states(array, occ, seq, NoiseModel{});
        EXPECT_NEAR(st[0]->p_up(), truth, 1e-12);
    }
    EXPECT_GE(inside, 7);
}

TEST(Run, UnaddressedSitesDoNotEvolve) {
    const auto array = make_grid(2, 2, 4.0);
    Occupancy occ(array);
    for (std::size_t s = 0; s < 4; ++s) occ.set(s, true);
    PulseSequence seq;
    seq.rotate({0, 2}, pi, 0.0, DriveParams{});
    const auto st = expected_states(array, occ, seq, NoiseModel{});
    EXPECT_GT(st[0]->p_up(), 0.99);
    EXPECT_EQ(st[1]->p_down(), 1.0);
    EXPECT_EQ(st[3]->p_down(), 1.0);
}

TEST(Run, DeterministicPerSeed) {
    const auto array = make_grid(2, 3, 4.0);
    Occupancy occ(array);
    for (std::size_t s : {0, 1, 3, 5}) occ.set(s, true);
    NoiseModel n;
    n.frequency_jitter_hz = 3.0;
    n.rabi_miscalibration = 0.02;
    readout::ImagingModel img;
    img.p_loss_per_image = 0.05;
    img.shelve_error = 0.05;
    PulseSequence seq;
    seq.rotate({0, 3}, pi / 2, 0.0, DriveParams{}).wait(0.01).rotate({0, 3}, pi / 2, 0.0, DriveParams{});
    std::ostringstream a, b, c;
    write_shots_csv(a, run_sequence(array, occ, seq, n, img, 50, SeedSpec{9}));
    write_shots_csv(b, run_sequence(array, occ, seq, n, img, 50, SeedSpec{9}));
    write_shots_csv(c, run_sequence(array, occ, seq, n, img, 50, SeedSpec{10}));
    EXPECT_EQ(a.str(), b.str());
    EXPECT_NE(a.str(), c.str());
}

TEST(Run, Errors) {
    const auto array = make_grid(2, 2, 4.0);
    const Occupancy occ(array);
    EXPECT_THROW(run_sequence(array, occ, PulseSequence{}, NoiseModel{}, ideal_imaging(), 0, SeedSpec{}), Error);
    EXPECT_THROW(run_sequence(array, Occupancy(3, 3), PulseSequence{}, NoiseModel{}, ideal_imaging(), 1, SeedSpec{}),
                 Error);
    PulseSequence bad;
    bad.rotate({0, 3}, pi, 0.0, DriveParams{});
    try {
        run_sequence(array, occ, bad, NoiseModel{}, ideal_imaging(), 1, SeedSpec{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ConstraintViolation);
        EXPECT_NE(std::string(e.what()).find("instruction 0"), std::string::npos);
    }
}
