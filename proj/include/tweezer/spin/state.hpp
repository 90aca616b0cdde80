#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>

#include "tweezer/core/error.hpp"

namespace tweezer::spin {

using Complex = std::complex<double>;
using Matrix3 = Eigen::Matrix3cd;

// Basis order of every density matrix: {|down>, |up>, |L>}.
inline constexpr int kDown = 0;
inline constexpr int kUp = 1;
inline constexpr int kLeak = 2;

struct SiteState {
    Matrix3 rho = Matrix3::Zero();
    bool shelved = false;
    bool lost = false;

    static SiteState basis(int level) {
        SiteState s;
        s.rho(level, level) = 1.0;
        return s;
    }

    static SiteState down() { return basis(kDown); }
    static SiteState up() { return basis(kUp); }

    double population(int level) const { return rho(level, level).real(); }
    double p_up() const { return population(kUp); }
    double p_down() const { return population(kDown); }
    double p_leak() const { return population(kLeak); }

    // <down|rho|up>
    Complex coherence() const { return rho(kDown, kUp); }
};

// Pure qubit state with Bloch polar angle `theta` from the south pole
// (|down>) and azimuth `phi`.
inline SiteState qubit_state(double theta, double phi) {
    Eigen::Vector3cd psi;
    psi << std::cos(theta / 2.0), std::sin(theta / 2.0) * std::exp(Complex(0.0, -phi)), 0.0;
    SiteState s;
    s.rho = psi * psi.adjoint();
    return s;
}

// Bloch vector of the qubit block with |up> at the north pole.
struct BlochVector {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

inline BlochVector bloch(const SiteState& s) {
    const Complex up_down = s.rho(kUp, kDown);
    return {2.0 * up_down.real(), -2.0 * up_down.imag(), s.p_up() - s.p_down()};
}

struct NoiseModel {
    double t1 = std::numeric_limits<double>::infinity();     // seconds
    double t_phi = std::numeric_limits<double>::infinity();  // pure dephasing, seconds
    double rabi_miscalibration = 0.0;                        // fractional std-dev per site and shot
    double frequency_jitter_hz = 0.0;                        // std-dev per shot
    double detuning_offset_hz = 0.0;                         // static qubit frequency offset
};

inline double rate(double time_constant) {
    return std::isinf(time_constant) ? 0.0 : 1.0 / time_constant;
}

// 1/T2 = 1/(2 T1) + 1/T_phi
inline double t2_of(const NoiseModel& n) {
    const double r = 0.5 * rate(n.t1) + rate(n.t_phi);
    return r == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / r;
}

// T_phi that yields the requested T2 for a given T1.
inline double t_phi_for_t2(double t2, double t1 = std::numeric_limits<double>::infinity()) {
    const double r = rate(t2) - 0.5 * rate(t1);
    if (r < 0.0) {
        fail(Errc::InvalidArgument, "T2 cannot exceed 2 T1");
    }
    return r == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / r;
}

inline void validate_noise(const NoiseModel& n) {
    if (!(n.t1 > 0.0) || !(n.t_phi > 0.0)) {
        fail(Errc::InvalidArgument, "T1 and T_phi must be positive or infinite");
    }
    if (!(n.rabi_miscalibration >= 0.0) || !(n.frequency_jitter_hz >= 0.0)) {
        fail(Errc::InvalidArgument, "noise standard deviations must be non-negative");
    }
}

}  // namespace tweezer::spin
