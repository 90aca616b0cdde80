#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>

#include "tweezer/core/error.hpp"

namespace tweezer::hologram {

namespace detail {

// FFTW's planner is not re-entrant; execution of a finished plan is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace detail

// Unitary 2-D DFT on an N x N complex grid (row-major). Forward uses the
// e^{-i...} kernel; both directions are scaled by 1/N so Parseval holds with
// no further normalization.
class Fft2d {
  public:
    explicit Fft2d(std::size_t n) : n_(n) {
        if (n == 0) {
            fail(Errc::InvalidArgument, "FFT size must be positive");
        }
        buffer_ = fftw_alloc_complex(n * n);
        std::lock_guard lock(detail::fftw_planner_mutex());
        const int ni = static_cast<int>(n);
        forward_ = fftw_plan_dft_2d(ni, ni, buffer_, buffer_, FFTW_FORWARD, FFTW_ESTIMATE);
        backward_ = fftw_plan_dft_2d(ni, ni, buffer_, buffer_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }

    Fft2d(const Fft2d&) = delete;
    Fft2d& operator=(const Fft2d&) = delete;

    ~Fft2d() {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
        fftw_free(buffer_);
    }

    std::size_t size() const noexcept { return n_; }

    void forward(std::span<std::complex<double>> data) { run(forward_, data); }
    void inverse(std::span<std::complex<double>> data) { run(backward_, data); }

  private:
    void run(fftw_plan plan, std::span<std::complex<double>> data) {
        if (data.size() != n_ * n_) {
            fail(Errc::SizeMismatch, "FFT input has the wrong number of samples");
        }
        auto* buf = reinterpret_cast<std::complex<double>*>(buffer_);
        std::copy(data.begin(), data.end(), buf);
        fftw_execute(plan);
        const double scale = 1.0 / static_cast<double>(n_);
        for (std::size_t i = 0; i < data.size(); ++i) {
            data[i] = buf[i] * scale;
        }
    }

    std::size_t n_;
    fftw_complex* buffer_ = nullptr;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

}  // namespace tweezer::hologram
