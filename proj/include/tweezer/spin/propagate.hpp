#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <numbers>

#include "tweezer/core/error.hpp"
#include "tweezer/spin/state.hpp"

namespace tweezer::spin {

// Two-photon Raman drive on the qubit, with the same beams coupling |up> to
// the leakage level |L> at c * Omega. The Stark beam shifts |L> by
// stark_shift_hz and dephases the qubit at stark_scatter_hz.
struct DriveParams {
    double rabi_hz = 1160.0;
    double phase = 0.0;
    double detuning_hz = 0.0;
    double leakage_ratio = 1.0;
    double stark_shift_hz = 20000.0;
    bool stark_beam_on = true;
    double stark_scatter_hz = 0.0;
};

inline void validate_drive(const DriveParams& d) {
    if (!(d.rabi_hz >= 0.0) || !std::isfinite(d.rabi_hz)) {
        fail(Errc::InvalidArgument, "Rabi frequency must be finite and non-negative");
    }
    if (!(d.stark_scatter_hz >= 0.0)) {
        fail(Errc::InvalidArgument, "Stark scatter rate must be non-negative");
    }
}

// H / h in hertz, basis {down, up, L}.
inline Matrix3 drive_hamiltonian(const DriveParams& d) {
    Matrix3 h = Matrix3::Zero();
    const Complex coupling = 0.5 * d.rabi_hz * std::exp(Complex(0.0, -d.phase));
    h(kUp, kDown) = coupling;
    h(kDown, kUp) = std::conj(coupling);
    const double leak = 0.5 * d.leakage_ratio * d.rabi_hz;
    h(kLeak, kUp) = leak;
    h(kUp, kLeak) = leak;
    h(kUp, kUp) = d.detuning_hz;
    h(kLeak, kLeak) = d.stark_beam_on ? d.stark_shift_hz : 0.0;
    return h;
}

// exp(-i 2 pi H t) for Hermitian H via its eigendecomposition.
inline Matrix3 evolution_operator(const Matrix3& h, double seconds) {
    Eigen::SelfAdjointEigenSolver<Matrix3> eig(h);
    const auto& v = eig.eigenvectors();
    Eigen::Vector3cd phases;
    for (int k = 0; k < 3; ++k) {
        phases(k) = std::exp(Complex(0.0, -2.0 * std::numbers::pi * eig.eigenvalues()(k) * seconds));
    }
    return v * phases.asDiagonal() * v.adjoint();
}

namespace detail {

inline Matrix3 hermitize(const Matrix3& m) { return 0.5 * (m + m.adjoint()); }

// Column-stacked Liouvillian for d rho/dt = -i 2 pi [H, rho] + kappa D[P_up] rho.
inline Eigen::Matrix<Complex, 9, 9> liouvillian(const Matrix3& h, double kappa) {
    using Super = Eigen::Matrix<Complex, 9, 9>;
    const Matrix3 id = Matrix3::Identity();
    Matrix3 p = Matrix3::Zero();
    p(kUp, kUp) = 1.0;
    auto kron = [](const Matrix3& a, const Matrix3& b) {
        Super out;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) out.block<3, 3>(3 * i, 3 * j) = a(i, j) * b;
        return out;
    };
    const Complex two_pi_i(0.0, 2.0 * std::numbers::pi);
    Super l = -two_pi_i * (kron(id, h) - kron(h.transpose(), id));
    l += kappa * (kron(p.conjugate(), p) - 0.5 * kron(id, p) - 0.5 * kron(p.transpose(), id));
    return l;
}

}  // namespace detail

// Evolves one site under a constant drive for `seconds`. Exact: a unitary
// from the eigendecomposition without scattering, otherwise the matrix
// exponential of the 9x9 Liouvillian.
inline SiteState propagate_pulse(const SiteState& s, const DriveParams& d, double seconds) {
    if (seconds < 0.0) fail(Errc::NegativeDuration, "pulse duration is negative");
    if (s.lost) fail(Errc::InvalidArgument, "cannot drive a lost atom");
    validate_drive(d);
    if (seconds == 0.0) return s;

    const Matrix3 h = drive_hamiltonian(d);
    SiteState out = s;
    const double scatter = d.stark_beam_on ? d.stark_scatter_hz : 0.0;
    if (scatter == 0.0) {
        const Matrix3 u = evolution_operator(h, seconds);
        out.rho = detail::hermitize(u * s.rho * u.adjoint());
        return out;
    }
    // A coherence decay of e^{-scatter t} needs kappa = 2 * scatter.
    const Eigen::Matrix<Complex, 9, 9> prop = (detail::liouvillian(h, 2.0 * scatter) * seconds).exp();
    const Eigen::Map<const Eigen::Matrix<Complex, 9, 1>> v(s.rho.data());
    Eigen::Matrix<Complex, 9, 1> w = prop * v;
    out.rho = detail::hermitize(Eigen::Map<Matrix3>(w.data()));
    return out;
}

using Superoperator = Eigen::Matrix<Complex, 9, 9>;

// Column-stacked map vec(rho) -> vec(rho') of propagate_pulse, for reuse
// when the same pulse acts on many states.
inline Superoperator pulse_superoperator(const DriveParams& d, double seconds) {
    if (seconds < 0.0) fail(Errc::NegativeDuration, "pulse duration is negative");
    validate_drive(d);
    if (seconds == 0.0) return Superoperator::Identity();
    const Matrix3 h = drive_hamiltonian(d);
    const double scatter = d.stark_beam_on ? d.stark_scatter_hz : 0.0;
    if (scatter == 0.0) {
        const Matrix3 u = evolution_operator(h, seconds);
        Superoperator s;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) s.block<3, 3>(3 * i, 3 * j) = std::conj(u(i, j)) * u;
        return s;
    }
    return (detail::liouvillian(h, 2.0 * scatter) * seconds).exp();
}

inline SiteState apply_superoperator(const Superoperator& s, const SiteState& in) {
    SiteState out = in;
    const Eigen::Map<const Eigen::Matrix<Complex, 9, 1>> v(in.rho.data());
    Eigen::Matrix<Complex, 9, 1> w = s * v;
    out.rho = detail::hermitize(Eigen::Map<Matrix3>(w.data()));
    return out;
}

// Free precession with the qubit frequency offset by `detuning_offset_hz`,
// generalised amplitude damping toward the maximally mixed qubit at rate
// 1/T1, and pure dephasing at 1/T_phi. |L> keeps its population.
inline SiteState free_evolve(const SiteState& s, double seconds, double detuning_offset_hz,
                             const NoiseModel& n) {
    if (seconds < 0.0) fail(Errc::NegativeDuration, "wait duration is negative");
    validate_noise(n);
    SiteState out = s;
    if (seconds == 0.0) return out;
    Matrix3 rho = s.rho;

    if (detuning_offset_hz != 0.0) {
        const Complex ph = std::exp(Complex(0.0, -2.0 * std::numbers::pi * detuning_offset_hz * seconds));
        rho.row(kUp) *= ph;
        rho.col(kUp) *= std::conj(ph);
    }

    const double gamma = -std::expm1(-seconds * rate(n.t1));
    if (gamma > 0.0) {
        // Kraus operators of the p = 1/2 channel, identity on |L>.
        const double a = std::sqrt(0.5);
        const double keep = std::sqrt(1.0 - gamma), jump = std::sqrt(gamma);
        Matrix3 k0 = Matrix3::Zero(), k1 = Matrix3::Zero(), k2 = Matrix3::Zero(), k3 = Matrix3::Zero();
        k0(kUp, kUp) = a;
        k0(kDown, kDown) = a * keep;
        k0(kLeak, kLeak) = a;
        k1(kUp, kDown) = a * jump;
        k2(kDown, kDown) = a;
        k2(kUp, kUp) = a * keep;
        k2(kLeak, kLeak) = a;
        k3(kDown, kUp) = a * jump;
        rho = k0 * rho * k0.adjoint() + k1 * rho * k1.adjoint() + k2 * rho * k2.adjoint() +
              k3 * rho * k3.adjoint();
    }

    const double phi_rate = rate(n.t_phi);
    if (phi_rate > 0.0) {
        // Gaussian phase noise on the Zeeman ladder: coherences between levels
        // one step apart decay as a, two steps apart as a^4.
        const double a = std::exp(-seconds * phi_rate);
        const double a4 = a * a * a * a;
        rho(kDown, kUp) *= a;
        rho(kUp, kDown) *= a;
        rho(kUp, kLeak) *= a;
        rho(kLeak, kUp) *= a;
        rho(kDown, kLeak) *= a4;
        rho(kLeak, kDown) *= a4;
    }
    out.rho = detail::hermitize(rho);
    return out;
}

// Population of |L> after driving a site prepared in |up>.
inline double leakage_fraction(const DriveParams& d, double seconds) {
    return propagate_pulse(SiteState::up(), d, seconds).p_leak();
}

// Shift of |up> (hertz, negative) caused by the off-resonant |up>-|L> coupling
// while the Stark beam is on. Driving with detuning_hz = -light_shift_hz(d)
// keeps the qubit on its shifted resonance.
inline double light_shift_hz(const DriveParams& d) {
    if (!d.stark_beam_on || d.leakage_ratio == 0.0) return 0.0;
    const double g = d.leakage_ratio * d.rabi_hz;
    return 0.5 * (d.stark_shift_hz - std::copysign(std::hypot(d.stark_shift_hz, g), d.stark_shift_hz));
}

// Duration of a rotation by |theta| at the given Rabi frequency.
inline double rotation_time(double theta, double rabi_hz) {
    if (!(rabi_hz > 0.0)) fail(Errc::InvalidArgument, "rotation needs a positive Rabi frequency");
    return std::abs(theta) / (2.0 * std::numbers::pi * rabi_hz);
}

// Bloch rotation by theta about (cos phi, sin phi, 0), using the drive's
// couplings and detuning. Negative angles rotate about the opposite axis.
inline SiteState rotate(const SiteState& s, double theta, double phi, DriveParams d,
                        double rabi_scale = 1.0) {
    if (theta == 0.0) return s;
    const double t = rotation_time(theta, d.rabi_hz);
    d.phase = theta < 0.0 ? phi + std::numbers::pi : phi;
    d.rabi_hz *= rabi_scale;
    return propagate_pulse(s, d, t);
}

}  // namespace tweezer::spin
