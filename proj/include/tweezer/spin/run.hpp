#pragma once

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "tweezer/core/error.hpp"
#include "tweezer/core/grid.hpp"
#include "tweezer/core/random.hpp"
#include "tweezer/readout/correction.hpp"
#include "tweezer/readout/imaging.hpp"
#include "tweezer/spin/propagate.hpp"
#include "tweezer/spin/sequence.hpp"

namespace tweezer::spin {

struct SiteOutcome {
    std::uint32_t counts1 = 0;
    std::uint32_t counts2 = 0;
    bool bright1 = false;
    bool bright2 = false;  // second image doubles as the post-selection flag

    bool post_selected() const { return bright2; }
};

struct ImageRecord {
    std::string tag;
    std::vector<SiteOutcome> sites;  // every array site, row-major
};

struct ShotRecord {
    std::vector<ImageRecord> images;
};

struct ShotRecords {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Occupancy occupancy;
    std::uint32_t threshold = 0;
    std::vector<ShotRecord> shots;
};

namespace detail {

// A sequence that never images gets a final shelve-and-image appended.
inline PulseSequence with_readout(PulseSequence seq) {
    if (!seq.has_image()) seq.shelve().image("final");
    return seq;
}

// Per-Rotate superoperators, usable when Rabi amplitudes do not vary per shot.
inline std::vector<std::optional<Superoperator>> rotation_cache(const PulseSequence& seq) {
    std::vector<std::optional<Superoperator>> cache(seq.instructions.size());
    for (std::size_t k = 0; k < seq.instructions.size(); ++k) {
        const auto* r = std::get_if<Rotate>(&seq.instructions[k]);
        if (!r || r->theta == 0.0) continue;
        DriveParams d = r->drive;
        d.phase = r->theta < 0.0 ? r->phase + std::numbers::pi : r->phase;
        cache[k] = pulse_superoperator(d, rotation_time(r->theta, d.rabi_hz));
    }
    return cache;
}

}  // namespace detail

// Runs `shots` independent repetitions of `seq` on the atoms in `occ`.
// Every shot draws from the substream (seed, "shot", index): first the shot's
// qubit frequency jitter, then one Rabi miscalibration per array site, then
// readout draws in instruction and site order. Frequency offsets act during
// Wait only; sites outside a Rotate's set do not evolve during it.
inline ShotRecords run_sequence(const TrapArray& array, const Occupancy& occ, const PulseSequence& sequence,
                                const NoiseModel& noise, const readout::ImagingModel& imaging, std::size_t shots,
                                SeedSpec seed) {
    if (!occ.matches(array)) fail(Errc::SizeMismatch, "occupancy does not match the trap array");
    if (shots == 0) fail(Errc::InvalidArgument, "at least one shot is required");
    validate_sequence(sequence, array);
    validate_noise(noise);
    const PulseSequence seq = detail::with_readout(sequence);
    const readout::ImagingSampler sampler(imaging);
    const std::uint32_t threshold = readout::classification_threshold(imaging);
    const bool per_site_rabi = noise.rabi_miscalibration > 0.0;
    const auto cache = per_site_rabi ? std::vector<std::optional<Superoperator>>(seq.instructions.size())
                                     : detail::rotation_cache(seq);

    ShotRecords out{array.rows(), array.cols(), occ, threshold, {}};
    out.shots.resize(shots);
    const std::size_t n = array.size();
    std::vector<SiteState> states(n);
    std::vector<double> scale(n, 1.0);

    for (std::size_t shot = 0; shot < shots; ++shot) {
        Rng rng = make_stream(seed, "shot", shot);
        std::normal_distribution<double> normal(0.0, 1.0);
        const double jitter = noise.frequency_jitter_hz > 0.0 ? noise.frequency_jitter_hz * normal(rng) : 0.0;
        if (per_site_rabi) {
            for (auto& s : scale) s = 1.0 + noise.rabi_miscalibration * normal(rng);
        }
        for (std::size_t i = 0; i < n; ++i) states[i] = SiteState::down();
        auto active = [&](std::size_t i) { return occ[i] && !states[i].lost; };

        for (std::size_t k = 0; k < seq.instructions.size(); ++k) {
            const auto& ins = seq.instructions[k];
            if (const auto* r = std::get_if<Rotate>(&ins)) {
                if (r->theta == 0.0) continue;
                for (auto i : r->sites) {
                    if (!active(i) || states[i].shelved) continue;
                    states[i] = cache[k] ? apply_superoperator(*cache[k], states[i])
                                         : rotate(states[i], r->theta, r->phase, r->drive, scale[i]);
                }
            } else if (const auto* w = std::get_if<Wait>(&ins)) {
                for (std::size_t i = 0; i < n; ++i) {
                    if (active(i) && !states[i].shelved) {
                        states[i] = free_evolve(states[i], w->seconds, noise.detuning_offset_hz + jitter, noise);
                    }
                }
            } else if (std::holds_alternative<Shelve>(ins)) {
                for (std::size_t i = 0; i < n; ++i) {
                    if (active(i)) sampler.shelve(states[i], rng);
                }
            } else {
                ImageRecord rec{std::get<Image>(ins).tag, std::vector<SiteOutcome>(n)};
                for (std::size_t i = 0; i < n; ++i) {
                    const auto img = sampler.image(states[i], active(i), rng);
                    rec.sites[i] = {img.image1, img.image2, readout::is_bright(img.image1, threshold),
                                    readout::is_bright(img.image2, threshold)};
                }
                out.shots[shot].images.push_back(std::move(rec));
            }
        }
    }
    return out;
}

// Deterministic site states just before the first Shelve or Image, with
// static noise only (no jitter or miscalibration draws). Empty sites are
// std::nullopt.
inline std::vector<std::optional<SiteState>> expected_states(const TrapArray& array, const Occupancy& occ,
                                                             const PulseSequence& seq, const NoiseModel& noise) {
    if (!occ.matches(array)) fail(Errc::SizeMismatch, "occupancy does not match the trap array");
    validate_sequence(seq, array);
    std::vector<std::optional<SiteState>> states(array.size());
    for (std::size_t i = 0; i < array.size(); ++i) {
        if (occ[i]) states[i] = SiteState::down();
    }
    for (const auto& ins : seq.instructions) {
        if (const auto* r = std::get_if<Rotate>(&ins)) {
            for (auto i : r->sites) {
                if (states[i]) states[i] = rotate(*states[i], r->theta, r->phase, r->drive);
            }
        } else if (const auto* w = std::get_if<Wait>(&ins)) {
            for (auto& s : states) {
                if (s) s = free_evolve(*s, w->seconds, noise.detuning_offset_hz, noise);
            }
        } else {
            break;
        }
    }
    return states;
}

struct SiteTally {
    std::size_t bright = 0;  // k: bright in image 1 among post-selected shots
    std::size_t kept = 0;    // n: post-selected shots
};

// Per-site counts for the image with `tag` (the first image when empty).
inline std::vector<SiteTally> tally(const ShotRecords& rec, const std::string& tag = {}) {
    std::vector<SiteTally> out(rec.rows * rec.cols);
    for (const auto& shot : rec.shots) {
        const ImageRecord* img = nullptr;
        for (const auto& im : shot.images) {
            if (tag.empty() || im.tag == tag) {
                img = &im;
                break;
            }
        }
        if (!img) fail(Errc::InvalidArgument, fmt::format("no image tagged '{}'", tag));
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (!rec.occupancy[i] || !img->sites[i].post_selected()) continue;
            ++out[i].kept;
            out[i].bright += img->sites[i].bright1;
        }
    }
    return out;
}

// One row per shot and site for the image with `tag` (the first when empty).
inline void write_shots_csv(std::ostream& out, const ShotRecords& rec, const std::string& tag = {}) {
    out << "shot_index,site_row,site_col,image1_counts,image2_counts,class1,class2,post_selected\n";
    for (std::size_t s = 0; s < rec.shots.size(); ++s) {
        for (const auto& im : rec.shots[s].images) {
            if (!tag.empty() && im.tag != tag) continue;
            for (std::size_t i = 0; i < im.sites.size(); ++i) {
                const auto& o = im.sites[i];
                out << fmt::format("{},{},{},{},{},{},{},{}\n", s, i / rec.cols, i % rec.cols, o.counts1, o.counts2,
                                   o.bright1 ? "bright" : "dark", o.bright2 ? "bright" : "dark",
                                   o.post_selected() ? 1 : 0);
            }
            break;
        }
    }
}

}  // namespace tweezer::spin
