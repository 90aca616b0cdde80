#pragma once

#include <algorithm>
#include <cstddef>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tweezer/core/error.hpp"

namespace tweezer {

struct SiteCoord {
    std::size_t row = 0;
    std::size_t col = 0;

    friend bool operator==(const SiteCoord&, const SiteCoord&) = default;
};

struct Position {
    double x = 0.0;  // micrometers
    double y = 0.0;
};

// Rectangular trap array. Sites are indexed row-major.
class TrapArray {
  public:
    TrapArray() = default;

    TrapArray(std::size_t rows, std::size_t cols, double pitch_um)
        : rows_(rows), cols_(cols), pitch_(pitch_um), depth_scale_(rows * cols, 1.0) {
        if (rows == 0 || cols == 0) {
            fail(Errc::ZeroDimension, "trap array needs at least one row and one column");
        }
        if (!(pitch_um > 0.0)) {
            fail(Errc::NonPositivePitch, "pitch must be positive");
        }
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return rows_ * cols_; }
    double pitch() const noexcept { return pitch_; }

    std::size_t index(std::size_t row, std::size_t col) const noexcept { return row * cols_ + col; }
    std::size_t index(SiteCoord c) const noexcept { return index(c.row, c.col); }
    SiteCoord coord(std::size_t site) const noexcept { return {site / cols_, site % cols_}; }

    Position position(std::size_t site) const noexcept {
        const auto c = coord(site);
        return {static_cast<double>(c.col) * pitch_, static_cast<double>(c.row) * pitch_};
    }

    double depth_scale(std::size_t site) const { return depth_scale_.at(site); }

    void set_depth_scale(std::size_t site, double value) {
        if (!(value > 0.0 && value <= 1.0)) {
            fail(Errc::InvalidArgument, "depth scale must lie in (0, 1]");
        }
        depth_scale_.at(site) = value;
    }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    double pitch_ = 0.0;
    std::vector<double> depth_scale_;
};

inline TrapArray make_grid(std::size_t rows, std::size_t cols, double pitch_um) {
    return TrapArray(rows, cols, pitch_um);
}

// Per-site atom presence for one TrapArray shape.
class Occupancy {
  public:
    Occupancy() = default;
    Occupancy(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), bits_(rows * cols, 0) {}
    explicit Occupancy(const TrapArray& array) : Occupancy(array.rows(), array.cols()) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return bits_.size(); }

    bool operator[](std::size_t site) const noexcept { return bits_[site] != 0; }
    bool at(std::size_t row, std::size_t col) const { return bits_.at(row * cols_ + col) != 0; }
    void set(std::size_t site, bool value) { bits_.at(site) = value ? 1 : 0; }

    std::size_t count() const noexcept {
        return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
    }

    bool matches(const TrapArray& array) const noexcept {
        return rows_ == array.rows() && cols_ == array.cols();
    }

    friend bool operator==(const Occupancy&, const Occupancy&) = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<unsigned char> bits_;
};

// One ASCII line per row, '1' for an atom and '0' for an empty site.
inline void write_occupancy(std::ostream& out, const Occupancy& occ) {
    for (std::size_t r = 0; r < occ.rows(); ++r) {
        for (std::size_t c = 0; c < occ.cols(); ++c) {
            out << (occ.at(r, c) ? '1' : '0');
        }
        out << '\n';
    }
}

inline std::string to_string(const Occupancy& occ) {
    std::ostringstream out;
    write_occupancy(out, occ);
    return out.str();
}

inline Occupancy read_occupancy(std::istream& in) {
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        lines.push_back(line);
    }
    if (lines.empty()) {
        fail(Errc::ParseError, "occupancy text is empty");
    }
    const std::size_t cols = lines.front().size();
    Occupancy occ(lines.size(), cols);
    for (std::size_t r = 0; r < lines.size(); ++r) {
        if (lines[r].size() != cols) {
            fail(Errc::ParseError, "occupancy row " + std::to_string(r) + " has inconsistent length");
        }
        for (std::size_t c = 0; c < cols; ++c) {
            const char ch = lines[r][c];
            if (ch != '0' && ch != '1') {
                fail(Errc::ParseError, std::string("unexpected character '") + ch + "' in occupancy");
            }
            occ.set(r * cols + c, ch == '1');
        }
    }
    return occ;
}

inline Occupancy occupancy_from_string(const std::string& text) {
    std::istringstream in(text);
    return read_occupancy(in);
}

// Computational sub-array plus the field and qubit splitting it runs at.
struct RegisterSpec {
    std::size_t rows = 0;  // array shape the mask refers to
    std::size_t cols = 0;
    std::vector<unsigned char> target_mask;
    double magnetic_field_gauss = 11.0;
    double qubit_freq_hz = 2100.0;

    bool is_target(std::size_t site) const { return target_mask.at(site) != 0; }

    std::vector<std::size_t> target_sites() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < target_mask.size(); ++i) {
            if (target_mask[i]) out.push_back(i);
        }
        return out;
    }

    std::size_t target_count() const {
        return static_cast<std::size_t>(std::count(target_mask.begin(), target_mask.end(), 1));
    }
};

struct TargetRect {
    std::size_t row0 = 0;
    std::size_t col0 = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

// Bounding rectangle of the target mask; throws InvalidRegister unless the
// mask is exactly a filled, non-empty rectangle.
inline TargetRect target_rect(const RegisterSpec& reg) {
    std::size_t rmin = reg.rows, rmax = 0, cmin = reg.cols, cmax = 0, n = 0;
    for (std::size_t i = 0; i < reg.target_mask.size(); ++i) {
        if (!reg.target_mask[i]) continue;
        const std::size_t r = i / reg.cols, c = i % reg.cols;
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
        cmin = std::min(cmin, c);
        cmax = std::max(cmax, c);
        ++n;
    }
    if (n == 0) {
        fail(Errc::InvalidRegister, "target mask selects no sites");
    }
    const TargetRect rect{rmin, cmin, rmax - rmin + 1, cmax - cmin + 1};
    if (rect.rows * rect.cols != n) {
        fail(Errc::InvalidRegister, "target mask is not a contiguous rectangle");
    }
    return rect;
}

inline void validate_register(const RegisterSpec& reg, const TrapArray& array) {
    if (reg.rows != array.rows() || reg.cols != array.cols() ||
        reg.target_mask.size() != array.size()) {
        fail(Errc::SizeMismatch, "register mask does not match the trap array");
    }
    if (!(reg.qubit_freq_hz > 0.0)) {
        fail(Errc::InvalidRegister, "qubit frequency must be positive");
    }
    target_rect(reg);
}

inline RegisterSpec make_register(const TrapArray& array, TargetRect rect, double field_gauss = 11.0,
                                  double qubit_freq_hz = 2100.0) {
    if (rect.rows == 0 || rect.cols == 0 || rect.row0 + rect.rows > array.rows() ||
        rect.col0 + rect.cols > array.cols()) {
        fail(Errc::InvalidRegister, "target rectangle does not fit inside the array");
    }
    RegisterSpec reg;
    reg.rows = array.rows();
    reg.cols = array.cols();
    reg.target_mask.assign(array.size(), 0);
    reg.magnetic_field_gauss = field_gauss;
    reg.qubit_freq_hz = qubit_freq_hz;
    for (std::size_t r = rect.row0; r < rect.row0 + rect.rows; ++r) {
        for (std::size_t c = rect.col0; c < rect.col0 + rect.cols; ++c) {
            reg.target_mask[array.index(r, c)] = 1;
        }
    }
    validate_register(reg, array);
    return reg;
}

// Target of the given shape placed in the middle of the array (rounded
// toward the origin when the margin is odd).
inline RegisterSpec centered_register(const TrapArray& array, std::size_t rows, std::size_t cols,
                                      double field_gauss = 11.0, double qubit_freq_hz = 2100.0) {
    if (rows == 0 || cols == 0 || rows > array.rows() || cols > array.cols()) {
        fail(Errc::InvalidRegister, "register does not fit inside the array");
    }
    return make_register(array, {(array.rows() - rows) / 2, (array.cols() - cols) / 2, rows, cols},
                         field_gauss, qubit_freq_hz);
}

}  // namespace tweezer
