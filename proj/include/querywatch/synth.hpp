#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "querywatch/audio.hpp"
#include "querywatch/rng.hpp"

namespace qw::synth {

// Deterministic signal generators used by the evaluation harness and the
// simulator when no external corpus is supplied. Everything is a pure
// function of its arguments.

inline AudioClip sine_clip(double freq_hz, double seconds, double amplitude = 0.4,
                           int rate = kCanonicalRate, std::string id = "") {
    AudioClip clip;
    clip.sample_rate = rate;
    clip.id = id.empty() ? "sine-" + std::to_string(static_cast<int>(freq_hz)) : std::move(id);
    const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
    clip.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        clip.samples[i] = amplitude * std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / rate);
    return clip;
}

inline AudioClip chirp_clip(double f0_hz, double f1_hz, double seconds, double amplitude = 0.4,
                            int rate = kCanonicalRate, std::string id = "") {
    AudioClip clip;
    clip.sample_rate = rate;
    clip.id = id.empty() ? "chirp" : std::move(id);
    const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
    clip.samples.resize(n);
    const double k = (f1_hz - f0_hz) / seconds;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        clip.samples[i] = amplitude * std::sin(2.0 * M_PI * (f0_hz * t + 0.5 * k * t * t));
    }
    return clip;
}

// Band-limited noise as a sum of random-phase partials: deterministic and
// free of filter edge effects.
inline AudioClip noise_band_clip(double f_lo_hz, double f_hi_hz, double seconds,
                                 std::uint64_t seed, double amplitude = 0.4,
                                 int rate = kCanonicalRate, std::string id = "") {
    AudioClip clip;
    clip.sample_rate = rate;
    clip.id = id.empty() ? "band" : std::move(id);
    const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
    clip.samples.assign(n, 0.0);
    detail::Rng rng(detail::mix64(seed ^ 0x62616e64ull));
    constexpr int kPartials = 48;
    for (int p = 0; p < kPartials; ++p) {
        const double f = rng.uniform(f_lo_hz, f_hi_hz);
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        const double a = amplitude / std::sqrt(static_cast<double>(kPartials)) *
                         (0.5 + rng.uniform());
        for (std::size_t i = 0; i < n; ++i)
            clip.samples[i] += a * std::sin(2.0 * M_PI * f * static_cast<double>(i) / rate + phase);
    }
    for (double& s : clip.samples) s = detail::clamp_sample(s);
    return clip;
}

// Music-like carrier: a melody over a shared pentatonic vocabulary with a
// per-song harmonic profile. Songs from different seeds share note
// frequencies but not their ordering, giving the moderate cross-similarity
// real song corpora show.
inline AudioClip song_clip(std::uint64_t seed, double seconds, double amplitude = 0.4,
                           int rate = kCanonicalRate, std::string id = "") {
    static const double kScale[] = {220.0, 246.9, 277.2, 329.6, 370.0,
                                    440.0, 493.9, 554.4, 659.3, 740.0,
                                    880.0, 987.8, 1108.7, 1318.5, 1480.0, 1760.0};
    constexpr int kScaleLen = 16;
    constexpr double kNote = 0.25;  // seconds per note

    AudioClip clip;
    clip.sample_rate = rate;
    clip.id = id.empty() ? "song-" + std::to_string(seed) : std::move(id);
    const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
    clip.samples.assign(n, 0.0);

    detail::Rng rng(detail::mix64(seed ^ 0x736f6e67ull));
    double h2 = 0.3 + 0.4 * rng.uniform();  // per-song timbre
    double h3 = 0.1 + 0.3 * rng.uniform();
    int note = static_cast<int>(rng.below(kScaleLen));

    const auto note_samples = static_cast<std::size_t>(kNote * rate);
    for (std::size_t start = 0; start < n; start += note_samples) {
        // random walk over the scale keeps songs distinct but in-vocabulary
        const int step = static_cast<int>(rng.below(5)) - 2;
        note = std::clamp(note + step, 0, kScaleLen - 1);
        const double f = kScale[note];
        const bool add_fifth = rng.uniform() < 0.5;
        const double fifth = kScale[std::min(note + 3, kScaleLen - 1)];
        const std::size_t end = std::min(n, start + note_samples);
        for (std::size_t i = start; i < end; ++i) {
            const double t = static_cast<double>(i) / rate;
            const double local = static_cast<double>(i - start) / static_cast<double>(note_samples);
            const double env = local < 0.1 ? local / 0.1 : (1.0 - 0.6 * local);
            double v = std::sin(2.0 * M_PI * f * t) + h2 * std::sin(2.0 * M_PI * 2.0 * f * t) +
                       h3 * std::sin(2.0 * M_PI * 3.0 * f * t);
            if (add_fifth) v += 0.6 * std::sin(2.0 * M_PI * fifth * t);
            clip.samples[i] += amplitude * 0.5 * env * v;
        }
    }
    for (double& s : clip.samples) s = detail::clamp_sample(s);
    return clip;
}

// Dialogue-like carrier: short band-noise bursts ("syllables") separated by
// silence. Sparse spectra produce far fewer fingerprint peaks than songs.
inline AudioClip sparse_clip(std::uint64_t seed, double seconds, double amplitude = 0.4,
                             int rate = kCanonicalRate, std::string id = "") {
    AudioClip clip;
    clip.sample_rate = rate;
    clip.id = id.empty() ? "sparse-" + std::to_string(seed) : std::move(id);
    const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
    clip.samples.assign(n, 0.0);

    detail::Rng rng(detail::mix64(seed ^ 0x74616c6bull));
    std::size_t pos = static_cast<std::size_t>(rng.uniform(0.0, 0.2) * rate);
    while (pos < n) {
        const double burst_len = rng.uniform(0.10, 0.25);
        const double f_center = rng.uniform(300.0, 2800.0);
        const auto burst_n = static_cast<std::size_t>(burst_len * rate);
        detail::Rng burst_rng(rng.next_u64());
        constexpr int kPartials = 12;
        for (int p = 0; p < kPartials; ++p) {
            const double f = f_center * (0.8 + 0.4 * burst_rng.uniform());
            const double phase = burst_rng.uniform(0.0, 2.0 * M_PI);
            for (std::size_t i = 0; i < burst_n && pos + i < n; ++i) {
                const double local = static_cast<double>(i) / static_cast<double>(burst_n);
                const double env = std::sin(M_PI * local);  // smooth on/off
                clip.samples[pos + i] += amplitude * env / kPartials * 3.0 *
                                         std::sin(2.0 * M_PI * f * static_cast<double>(i) / rate +
                                                  phase);
            }
        }
        pos += burst_n + static_cast<std::size_t>(rng.uniform(0.25, 0.70) * rate);
    }
    for (double& s : clip.samples) s = detail::clamp_sample(s);
    return clip;
}

// Mixed benign clip: tone, chirp or noise band depending on the seed.
inline AudioClip benign_clip(std::uint64_t seed, double seconds = 1.0,
                             int rate = kCanonicalRate) {
    detail::Rng rng(detail::mix64(seed ^ 0x62656e69ull));
    const std::string id = "benign-" + std::to_string(seed);
    switch (rng.below(3)) {
        case 0: {
            const double f = rng.uniform(150.0, 6500.0);
            AudioClip c = sine_clip(f, seconds, 0.35, rate, id);
            const double f2 = rng.uniform(150.0, 6500.0);
            const AudioClip c2 = sine_clip(f2, seconds, 0.2, rate, id);
            for (std::size_t i = 0; i < c.samples.size(); ++i)
                c.samples[i] = detail::clamp_sample(c.samples[i] + c2.samples[i]);
            return c;
        }
        case 1: {
            const double f0 = rng.uniform(100.0, 3000.0);
            const double f1 = f0 + rng.uniform(200.0, 4000.0);
            return chirp_clip(f0, f1, seconds, 0.4, rate, id);
        }
        default: {
            const double lo = rng.uniform(100.0, 4000.0);
            return noise_band_clip(lo, lo + rng.uniform(300.0, 3000.0), seconds,
                                   rng.next_u64(), 0.4, rate, id);
        }
    }
}

inline std::vector<AudioClip> benign_corpus(std::size_t count, std::uint64_t seed,
                                            double seconds = 1.0) {
    std::vector<AudioClip> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(benign_clip(seed + i, seconds));
    return out;
}

// Song corpus built the way the evaluation protocol slices carriers: a few
// long songs, several random slices from each.
inline std::vector<AudioClip> song_corpus(std::size_t songs, int slices_per_song,
                                          double slice_seconds, std::uint64_t seed) {
    std::vector<AudioClip> out;
    out.reserve(songs * static_cast<std::size_t>(slices_per_song));
    for (std::size_t s = 0; s < songs; ++s) {
        const AudioClip song = song_clip(seed + 1000 + s, slice_seconds * 5.0);
        auto slices = slice_segments(song, slice_seconds, slices_per_song, seed + 31 * s);
        for (auto& sl : slices) out.push_back(std::move(sl));
    }
    return out;
}

inline std::vector<AudioClip> sparse_corpus(std::size_t count, double seconds,
                                            std::uint64_t seed) {
    std::vector<AudioClip> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(sparse_clip(seed + 5000 + i, seconds));
    return out;
}

}  // namespace qw::synth
