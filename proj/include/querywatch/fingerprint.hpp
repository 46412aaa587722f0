#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "querywatch/audio.hpp"
#include "querywatch/dsp.hpp"
#include "querywatch/errors.hpp"

namespace qw {

struct FingerprintConfig {
    int window_len = 1024;
    int hop = 512;
    std::string window = "hann";
    int neighborhood_frames = 9;  // full side of the max-filter box
    int neighborhood_bins = 9;
    double amplitude_floor_db = -60.0;  // relative to the spectrogram max
    int highpass_cutoff_bin = 4;        // bins below this never become peaks
    int fanout = 5;                     // pairs per anchor
    double dt_max_seconds = 0.5;
    int peaks_per_second = 60;  // uniformity cap, strongest kept
    int vector_dim = 4096;
    int scheme_version = 1;

    void validate() const {
        if (hop <= 0 || window_len < hop)
            throw Error("fingerprint config: require window_len >= hop > 0");
        if (vector_dim < 256) throw Error("fingerprint config: vector_dim must be >= 256");
        if (fanout < 1) throw Error("fingerprint config: fanout must be >= 1");
        if (neighborhood_frames < 1 || neighborhood_bins < 1 ||
            neighborhood_frames % 2 == 0 || neighborhood_bins % 2 == 0)
            throw Error("fingerprint config: neighborhood sides must be odd and >= 1");
        if (window != "hann") throw Error("fingerprint config: unknown window " + window);
        if (peaks_per_second < 1) throw Error("fingerprint config: peaks_per_second must be >= 1");
    }
};

struct Spectrogram {
    int frames = 0;
    int bins = 0;
    std::vector<double> magnitudes;  // row-major [frame][bin]
    std::vector<double> frame_times;
    std::vector<double> bin_freqs;
    int sample_rate = kCanonicalRate;
    int window_len = 0;
    int hop = 0;

    double at(int frame, int bin) const {
        return magnitudes[static_cast<std::size_t>(frame) * bins + bin];
    }
    double& at(int frame, int bin) {
        return magnitudes[static_cast<std::size_t>(frame) * bins + bin];
    }

    double duration_seconds() const {
        if (frames == 0) return 0.0;
        return (static_cast<double>(frames - 1) * hop + window_len) / sample_rate;
    }
};

struct Peak {
    int frame = 0;
    int bin = 0;
    double magnitude = 0.0;
};

struct PeakSet {
    std::vector<Peak> peaks;  // sorted by (frame, bin)
    int sample_rate = kCanonicalRate;
    int hop = 0;
};

struct PeakPair {
    int bin_a = 0;
    int bin_b = 0;
    int dt_frames = 0;  // always > 0
};

struct PeakPairs {
    std::vector<PeakPair> pairs;
    int max_gap_frames = 0;
};

// Count histogram over hashed (bin_a, bin_b, dt-bucket) triples.
struct Fingerprint {
    std::vector<std::uint32_t> counts;
    std::uint64_t total_pairs = 0;
    std::string clip_id;
    int scheme_version = 1;
};

// Magnitude spectrogram of the Hann-windowed DFT, one column per hop.
inline Spectrogram stft(const AudioClip& clip, const FingerprintConfig& cfg = {}) {
    cfg.validate();
    const auto n = clip.samples.size();
    const auto win = static_cast<std::size_t>(cfg.window_len);
    if (n < win) throw ClipTooShort("clip shorter than the analysis window");

    Spectrogram spec;
    spec.frames = static_cast<int>(1 + (n - win) / static_cast<std::size_t>(cfg.hop));
    spec.bins = cfg.window_len / 2 + 1;
    spec.sample_rate = clip.sample_rate;
    spec.window_len = cfg.window_len;
    spec.hop = cfg.hop;
    spec.magnitudes.resize(static_cast<std::size_t>(spec.frames) * spec.bins);
    spec.frame_times.resize(spec.frames);
    spec.bin_freqs.resize(spec.bins);
    for (int m = 0; m < spec.bins; ++m)
        spec.bin_freqs[m] = static_cast<double>(m) * clip.sample_rate / cfg.window_len;

    const auto window = detail::hann_window(win);
    detail::FftPlan plan(win);
    std::vector<std::complex<double>> buf(win);
    for (int f = 0; f < spec.frames; ++f) {
        const std::size_t start = static_cast<std::size_t>(f) * cfg.hop;
        spec.frame_times[f] = static_cast<double>(start) / clip.sample_rate;
        for (std::size_t i = 0; i < win; ++i)
            buf[i] = {clip.samples[start + i] * window[i], 0.0};
        if (plan.fast()) {
            plan.forward(buf);
            for (int m = 0; m < spec.bins; ++m) spec.at(f, m) = std::abs(buf[m]);
        } else {
            auto full = detail::direct_dft(buf);
            for (int m = 0; m < spec.bins; ++m) spec.at(f, m) = std::abs(full[m]);
        }
    }
    return spec;
}

namespace detail {

// Per-second peak budget bucketed by frame start time.
inline int peak_time_bucket(const Spectrogram& spec, int frame) {
    return static_cast<int>((static_cast<std::int64_t>(frame) * spec.hop) / spec.sample_rate);
}

}  // namespace detail

// A cell survives iff it is at or above the relative floor, its bin clears
// the high-pass cutoff, and it is the lexicographically first cell attaining
// the maximum of its neighborhood box.
inline PeakSet find_peaks(const Spectrogram& spec, const FingerprintConfig& cfg = {}) {
    cfg.validate();
    PeakSet out;
    out.sample_rate = spec.sample_rate;
    out.hop = spec.hop;
    if (spec.frames == 0 || spec.bins == 0) return out;

    const double max_mag = *std::max_element(spec.magnitudes.begin(), spec.magnitudes.end());
    if (max_mag <= 0.0) return out;
    const double floor = max_mag * std::pow(10.0, cfg.amplitude_floor_db / 20.0);
    const int rf = cfg.neighborhood_frames / 2;
    const int rb = cfg.neighborhood_bins / 2;

    // separable sliding max: bins pass then frames pass
    std::vector<double> row_max(spec.magnitudes.size());
    for (int f = 0; f < spec.frames; ++f) {
        for (int b = 0; b < spec.bins; ++b) {
            double m = 0.0;
            for (int bb = std::max(0, b - rb); bb <= std::min(spec.bins - 1, b + rb); ++bb)
                m = std::max(m, spec.at(f, bb));
            row_max[static_cast<std::size_t>(f) * spec.bins + b] = m;
        }
    }

    std::vector<Peak> candidates;
    for (int f = 0; f < spec.frames; ++f) {
        for (int b = cfg.highpass_cutoff_bin; b < spec.bins; ++b) {
            const double v = spec.at(f, b);
            if (v < floor || v <= 0.0) continue;
            double box = 0.0;
            for (int ff = std::max(0, f - rf); ff <= std::min(spec.frames - 1, f + rf); ++ff)
                box = std::max(box, row_max[static_cast<std::size_t>(ff) * spec.bins + b]);
            if (v < box) continue;
            // ties: keep only the lexicographically smallest coordinate
            bool first = true;
            for (int ff = std::max(0, f - rf); first && ff <= std::min(spec.frames - 1, f + rf); ++ff)
                for (int bb = std::max(0, b - rb); bb <= std::min(spec.bins - 1, b + rb); ++bb)
                    if (spec.at(ff, bb) == v && (ff < f || (ff == f && bb < b))) {
                        first = false;
                        break;
                    }
            if (first) candidates.push_back({f, b, v});
        }
    }

    // cap each one-second bucket at the strongest peaks_per_second entries
    std::vector<Peak> kept;
    kept.reserve(candidates.size());
    std::size_t i = 0;
    while (i < candidates.size()) {
        std::size_t j = i;
        const int bucket = detail::peak_time_bucket(spec, candidates[i].frame);
        while (j < candidates.size() && detail::peak_time_bucket(spec, candidates[j].frame) == bucket)
            ++j;
        if (j - i <= static_cast<std::size_t>(cfg.peaks_per_second)) {
            kept.insert(kept.end(), candidates.begin() + i, candidates.begin() + j);
        } else {
            std::vector<Peak> bucket_peaks(candidates.begin() + i, candidates.begin() + j);
            std::sort(bucket_peaks.begin(), bucket_peaks.end(), [](const Peak& a, const Peak& b) {
                if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
                if (a.frame != b.frame) return a.frame < b.frame;
                return a.bin < b.bin;
            });
            bucket_peaks.resize(static_cast<std::size_t>(cfg.peaks_per_second));
            kept.insert(kept.end(), bucket_peaks.begin(), bucket_peaks.end());
        }
        i = j;
    }
    std::sort(kept.begin(), kept.end(), [](const Peak& a, const Peak& b) {
        if (a.frame != b.frame) return a.frame < b.frame;
        return a.bin < b.bin;
    });
    out.peaks = std::move(kept);
    return out;
}

inline int max_pair_gap_frames(const PeakSet& peaks, const FingerprintConfig& cfg) {
    if (peaks.hop <= 0) return 0;
    return static_cast<int>(std::floor(cfg.dt_max_seconds * peaks.sample_rate / peaks.hop));
}

// Anchor each peak to the next up-to-fanout peaks within the dt window.
inline PeakPairs pair_peaks(const PeakSet& peaks, const FingerprintConfig& cfg = {}) {
    cfg.validate();
    PeakPairs out;
    out.max_gap_frames = max_pair_gap_frames(peaks, cfg);
    if (out.max_gap_frames < 1) return out;
    const auto& ps = peaks.peaks;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        int taken = 0;
        for (std::size_t j = i + 1; j < ps.size() && taken < cfg.fanout; ++j) {
            const int gap = ps[j].frame - ps[i].frame;
            if (gap == 0) continue;
            if (gap > out.max_gap_frames) break;  // peaks sorted by frame
            out.pairs.push_back({ps[i].bin, ps[j].bin, gap});
            ++taken;
        }
    }
    return out;
}

namespace detail {

inline std::uint32_t pair_hash_index(const PeakPair& p, int max_gap, int dim) {
    // 32 dt buckets over (0, dt_max]
    const int bucket = max_gap > 0
        ? std::min(31, ((p.dt_frames - 1) * 32) / max_gap)
        : 0;
    std::uint64_t packed = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(p.bin_a)) << 40) |
                           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(p.bin_b)) << 16) |
                           static_cast<std::uint64_t>(static_cast<std::uint32_t>(bucket));
    return static_cast<std::uint32_t>(mix64(packed) % static_cast<std::uint64_t>(dim));
}

}  // namespace detail

inline Fingerprint vectorize(const PeakPairs& pairs, const FingerprintConfig& cfg = {}) {
    cfg.validate();
    Fingerprint fp;
    fp.scheme_version = cfg.scheme_version;
    fp.counts.assign(static_cast<std::size_t>(cfg.vector_dim), 0);
    for (const auto& p : pairs.pairs)
        ++fp.counts[detail::pair_hash_index(p, pairs.max_gap_frames, cfg.vector_dim)];
    fp.total_pairs = pairs.pairs.size();
    return fp;
}

inline Fingerprint extract(const AudioClip& clip, const FingerprintConfig& cfg = {}) {
    Fingerprint fp = vectorize(pair_peaks(find_peaks(stft(clip, cfg), cfg), cfg), cfg);
    fp.clip_id = clip.id;
    return fp;
}

// Wire format: "QWFP", version byte, u32le dim, dim x u32le counts.
inline std::vector<std::uint8_t> fingerprint_to_bytes(const Fingerprint& fp) {
    std::vector<std::uint8_t> out;
    out.reserve(9 + 4 * fp.counts.size());
    out.insert(out.end(), {'Q', 'W', 'F', 'P'});
    out.push_back(static_cast<std::uint8_t>(fp.scheme_version));
    detail::put_u32le(out, static_cast<std::uint32_t>(fp.counts.size()));
    for (std::uint32_t c : fp.counts) detail::put_u32le(out, c);
    return out;
}

inline Fingerprint fingerprint_from_bytes(const std::uint8_t* data, std::size_t len,
                                          std::size_t* consumed = nullptr) {
    if (len < 9 || std::memcmp(data, "QWFP", 4) != 0)
        throw CorruptFingerprint("bad fingerprint magic");
    Fingerprint fp;
    fp.scheme_version = data[4];
    const std::uint32_t dim = detail::read_u32le(data + 5);
    if (len < 9 + static_cast<std::size_t>(dim) * 4)
        throw CorruptFingerprint("truncated fingerprint payload");
    fp.counts.resize(dim);
    for (std::uint32_t i = 0; i < dim; ++i) {
        fp.counts[i] = detail::read_u32le(data + 9 + static_cast<std::size_t>(i) * 4);
        fp.total_pairs += fp.counts[i];
    }
    if (consumed) *consumed = 9 + static_cast<std::size_t>(dim) * 4;
    return fp;
}

inline Fingerprint fingerprint_from_bytes(const std::vector<std::uint8_t>& bytes) {
    return fingerprint_from_bytes(bytes.data(), bytes.size());
}

}  // namespace qw
