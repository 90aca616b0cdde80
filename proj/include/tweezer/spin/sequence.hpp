#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "tweezer/core/error.hpp"
#include "tweezer/core/grid.hpp"
#include "tweezer/spin/propagate.hpp"

namespace tweezer::spin {

// Rotation of the listed sites, which must share one column or one row.
struct Rotate {
    std::vector<std::size_t> sites;
    double theta = 0.0;
    double phase = 0.0;
    DriveParams drive;
};

struct Wait {
    double seconds = 0.0;
};

struct Shelve {};

struct Image {
    std::string tag = "main";
};

using Instruction = std::variant<Rotate, Wait, Shelve, Image>;

struct PulseSequence {
    std::vector<Instruction> instructions;

    PulseSequence& rotate(std::vector<std::size_t> sites, double theta, double phase, const DriveParams& d) {
        instructions.emplace_back(Rotate{std::move(sites), theta, phase, d});
        return *this;
    }
    PulseSequence& wait(double seconds) {
        instructions.emplace_back(Wait{seconds});
        return *this;
    }
    PulseSequence& shelve() {
        instructions.emplace_back(Shelve{});
        return *this;
    }
    PulseSequence& image(std::string tag = "main") {
        instructions.emplace_back(Image{std::move(tag)});
        return *this;
    }

    bool has_image() const {
        return std::any_of(instructions.begin(), instructions.end(),
                           [](const Instruction& i) { return std::holds_alternative<Image>(i); });
    }
};

// Column/row addressing constraint plus bounds and durations.
inline void validate_sequence(const PulseSequence& seq, const TrapArray& array) {
    for (std::size_t k = 0; k < seq.instructions.size(); ++k) {
        const auto& ins = seq.instructions[k];
        if (const auto* r = std::get_if<Rotate>(&ins)) {
            if (r->sites.empty()) {
                fail(Errc::ConstraintViolation, fmt::format("instruction {}: Rotate addresses no sites", k));
            }
            std::set<std::size_t> rows, cols;
            for (auto s : r->sites) {
                if (s >= array.size()) {
                    fail(Errc::ConstraintViolation, fmt::format("instruction {}: site {} out of range", k, s));
                }
                rows.insert(array.coord(s).row);
                cols.insert(array.coord(s).col);
            }
            if (rows.size() > 1 && cols.size() > 1) {
                fail(Errc::ConstraintViolation,
                     fmt::format("instruction {}: Rotate spans {} rows and {} columns", k, rows.size(),
                                 cols.size()));
            }
            validate_drive(r->drive);
            if (r->theta != 0.0 && !(r->drive.rabi_hz > 0.0)) {
                fail(Errc::ConstraintViolation, fmt::format("instruction {}: Rotate with zero Rabi frequency", k));
            }
        } else if (const auto* w = std::get_if<Wait>(&ins)) {
            if (w->seconds < 0.0) fail(Errc::NegativeDuration, fmt::format("instruction {}: negative wait", k));
        }
    }
}

// ---------------------------------------------------------------------------
// Text format, one instruction per line ('#' starts a comment):
//   ROT cols=<list> [rows=<list>] theta=<expr> phi=<expr> [omega=<Hz>] [delta=<Hz>]
//       [c=<ratio>] [stark=on|off] [stark_shift=<Hz>] [scatter=<Hz>]
//   WAIT <number>[s|ms|us]
//   SHELVE
//   IMAGE [tag]
// <list> is comma-separated indices or a-b ranges; an omitted rows= or
// cols= means every row or column of the array. Angles accept numbers, pi,
// and + - * / with parentheses.

namespace detail {

class AngleParser {
  public:
    explicit AngleParser(std::string_view text) : s_(text) {}

    double parse() {
        const double v = expr();
        skip();
        if (pos_ != s_.size()) error();
        return v;
    }

  private:
    [[noreturn]] void error() const {
        fail(Errc::ParseError, fmt::format("cannot parse angle expression '{}'", s_));
    }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    double expr() {
        double v = term();
        for (;;) {
            if (eat('+')) v += term();
            else if (eat('-')) v -= term();
            else return v;
        }
    }
    double term() {
        double v = factor();
        for (;;) {
            if (eat('*')) v *= factor();
            else if (eat('/')) v /= factor();
            else return v;
        }
    }
    double factor() {
        if (eat('-')) return -factor();
        if (eat('+')) return factor();
        if (eat('(')) {
            const double v = expr();
            if (!eat(')')) error();
            return v;
        }
        skip();
        if (s_.substr(pos_, 2) == "pi") {
            pos_ += 2;
            return std::numbers::pi;
        }
        const std::size_t start = pos_;
        while (pos_ < s_.size() &&
               (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' || s_[pos_] == 'e' ||
                s_[pos_] == 'E' ||
                ((s_[pos_] == '-' || s_[pos_] == '+') && pos_ > start &&
                 (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E')))) {
            ++pos_;
        }
        if (start == pos_) error();
        return parse_number(s_.substr(start, pos_ - start));
    }

  public:
    static double parse_number(std::string_view text) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc{} || ptr != text.data() + text.size()) {
            fail(Errc::ParseError, fmt::format("invalid number '{}'", text));
        }
        return v;
    }

  private:
    std::string_view s_;
    std::size_t pos_ = 0;
};

inline std::vector<std::size_t> parse_index_list(const std::string& text, std::size_t limit) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto dash = item.find('-', 1);
        auto parse_one = [&](const std::string& t) {
            std::size_t v = 0;
            const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
            if (ec != std::errc{} || ptr != t.data() + t.size()) {
                fail(Errc::ParseError, fmt::format("invalid index '{}'", t));
            }
            if (v >= limit) fail(Errc::ConstraintViolation, fmt::format("index {} out of range", v));
            return v;
        };
        if (dash == std::string::npos) {
            out.push_back(parse_one(item));
        } else {
            const std::size_t a = parse_one(item.substr(0, dash));
            const std::size_t b = parse_one(item.substr(dash + 1));
            if (b < a) fail(Errc::ParseError, fmt::format("descending range '{}'", item));
            for (std::size_t v = a; v <= b; ++v) out.push_back(v);
        }
    }
    if (out.empty()) fail(Errc::ParseError, "empty index list");
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

inline double parse_duration(const std::string& text) {
    std::size_t split = text.size();
    while (split > 0 && std::isalpha(static_cast<unsigned char>(text[split - 1]))) --split;
    const std::string unit = text.substr(split);
    double scale = 1.0;
    if (unit.empty() || unit == "s") scale = 1.0;
    else if (unit == "ms") scale = 1e-3;
    else if (unit == "us") scale = 1e-6;
    else fail(Errc::ParseError, fmt::format("unknown time unit '{}'", unit));
    return AngleParser::parse_number(text.substr(0, split)) * scale;
}

inline std::string format_list(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace detail

inline Instruction parse_instruction(const std::string& line, const TrapArray& array,
                                     const DriveParams& defaults = {}) {
    std::istringstream in(line);
    std::string op;
    in >> op;
    std::vector<std::string> args;
    for (std::string a; in >> a;) args.push_back(a);

    if (op == "WAIT") {
        if (args.size() != 1) fail(Errc::ParseError, "WAIT takes exactly one duration");
        return Wait{detail::parse_duration(args[0])};
    }
    if (op == "SHELVE") {
        if (!args.empty()) fail(Errc::ParseError, "SHELVE takes no arguments");
        return Shelve{};
    }
    if (op == "IMAGE") {
        if (args.size() > 1) fail(Errc::ParseError, "IMAGE takes at most one tag");
        return Image{args.empty() ? std::string("main") : args[0]};
    }
    if (op != "ROT") fail(Errc::ParseError, fmt::format("unknown instruction '{}'", op));

    Rotate rot;
    rot.drive = defaults;
    std::vector<std::size_t> rows, cols;
    bool have_theta = false;
    for (const auto& a : args) {
        const auto eq = a.find('=');
        if (eq == std::string::npos) fail(Errc::ParseError, fmt::format("expected key=value, got '{}'", a));
        const std::string key = a.substr(0, eq);
        const std::string value = a.substr(eq + 1);
        if (key == "rows") rows = detail::parse_index_list(value, array.rows());
        else if (key == "cols") cols = detail::parse_index_list(value, array.cols());
        else if (key == "theta") {
            rot.theta = detail::AngleParser(value).parse();
            have_theta = true;
        } else if (key == "phi") rot.phase = detail::AngleParser(value).parse();
        else if (key == "omega") rot.drive.rabi_hz = detail::AngleParser::parse_number(value);
        else if (key == "delta") rot.drive.detuning_hz = detail::AngleParser::parse_number(value);
        else if (key == "c") rot.drive.leakage_ratio = detail::AngleParser::parse_number(value);
        else if (key == "stark_shift") rot.drive.stark_shift_hz = detail::AngleParser::parse_number(value);
        else if (key == "scatter") rot.drive.stark_scatter_hz = detail::AngleParser::parse_number(value);
        else if (key == "stark") {
            if (value != "on" && value != "off") fail(Errc::ParseError, "stark must be on or off");
            rot.drive.stark_beam_on = value == "on";
        } else {
            fail(Errc::ParseError, fmt::format("unknown ROT key '{}'", key));
        }
    }
    if (!have_theta) fail(Errc::ParseError, "ROT requires theta=");
    if (rows.empty()) {
        for (std::size_t r = 0; r < array.rows(); ++r) rows.push_back(r);
    }
    if (cols.empty()) {
        for (std::size_t c = 0; c < array.cols(); ++c) cols.push_back(c);
    }
    if (rows.size() > 1 && cols.size() > 1) {
        fail(Errc::ConstraintViolation,
             fmt::format("ROT addresses {} columns and {} rows; one of them must be a single line",
                         cols.size(), rows.size()));
    }
    for (auto r : rows) {
        for (auto c : cols) rot.sites.push_back(array.index(r, c));
    }
    std::sort(rot.sites.begin(), rot.sites.end());
    return rot;
}

inline PulseSequence parse_sequence(std::istream& in, const TrapArray& array, const DriveParams& defaults = {}) {
    PulseSequence seq;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            seq.instructions.push_back(parse_instruction(line, array, defaults));
        } catch (const Error& e) {
            throw Error(e.code(), fmt::format("line {}: {}", lineno, e.what()));
        }
    }
    validate_sequence(seq, array);
    return seq;
}

inline PulseSequence parse_sequence(const std::string& text, const TrapArray& array,
                                    const DriveParams& defaults = {}) {
    std::istringstream in(text);
    return parse_sequence(in, array, defaults);
}

// Writes every drive field explicitly; angles use shortest round-trip
// decimal form.
inline void write_sequence(std::ostream& out, const PulseSequence& seq, const TrapArray& array) {
    validate_sequence(seq, array);
    for (const auto& ins : seq.instructions) {
        if (const auto* r = std::get_if<Rotate>(&ins)) {
            std::vector<std::size_t> rows, cols;
            for (auto s : r->sites) {
                rows.push_back(array.coord(s).row);
                cols.push_back(array.coord(s).col);
            }
            for (auto* v : {&rows, &cols}) {
                std::sort(v->begin(), v->end());
                v->erase(std::unique(v->begin(), v->end()), v->end());
            }
            out << fmt::format("ROT cols={} rows={} theta={} phi={} omega={} delta={} c={} stark={} "
                               "stark_shift={} scatter={}\n",
                               detail::format_list(cols), detail::format_list(rows), r->theta, r->phase,
                               r->drive.rabi_hz, r->drive.detuning_hz, r->drive.leakage_ratio,
                               r->drive.stark_beam_on ? "on" : "off", r->drive.stark_shift_hz,
                               r->drive.stark_scatter_hz);
        } else if (const auto* w = std::get_if<Wait>(&ins)) {
            out << fmt::format("WAIT {}s\n", w->seconds);
        } else if (std::holds_alternative<Shelve>(ins)) {
            out << "SHELVE\n";
        } else {
            out << "IMAGE " << std::get<Image>(ins).tag << '\n';
        }
    }
}

}  // namespace tweezer::spin
