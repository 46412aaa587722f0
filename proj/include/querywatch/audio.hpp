#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "querywatch/dsp.hpp"
#include "querywatch/errors.hpp"
#include "querywatch/rng.hpp"

namespace qw {

inline constexpr int kCanonicalRate = 16000;
inline constexpr double kSnrCapDb = 200.0;

// Decoded mono PCM signal, amplitudes in [-1, 1].
struct AudioClip {
    std::vector<double> samples;
    int sample_rate = kCanonicalRate;
    std::string id;

    double duration_seconds() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }

    double rms() const {
        if (samples.empty()) return 0.0;
        double acc = 0.0;
        for (double s : samples) acc += s * s;
        return std::sqrt(acc / static_cast<double>(samples.size()));
    }

    double peak() const {
        double p = 0.0;
        for (double s : samples) p = std::max(p, std::abs(s));
        return p;
    }
};

namespace detail {

inline double clamp_sample(double s) { return std::clamp(s, -1.0, 1.0); }

inline std::uint32_t read_u32le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16le(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 24) & 0xff);
}

inline void put_u16le(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
}

}  // namespace detail

// Band-limited windowed-sinc resampler, 64 taps, no dithering. Same-rate
// calls return the input untouched so they stay bit-identical.
inline AudioClip resample(const AudioClip& clip, int target_rate) {
    switch (target_rate) {
        case 8000:
        case 16000:
        case 44100:
        case 48000:
            break;
        default:
            throw UnsupportedRate("unsupported target rate " + std::to_string(target_rate));
    }
    if (clip.sample_rate <= 0) throw UnsupportedRate("source rate must be positive");
    if (clip.sample_rate == target_rate) return clip;

    constexpr int kRadius = 32;  // 64-tap kernel
    const double in_rate = clip.sample_rate;
    const double out_rate = target_rate;
    const std::size_t n_in = clip.samples.size();
    const auto n_out = static_cast<std::size_t>(
        std::llround(static_cast<double>(n_in) * out_rate / in_rate));
    const double cutoff = std::min(1.0, out_rate / in_rate);

    AudioClip out;
    out.sample_rate = target_rate;
    out.id = clip.id;
    out.samples.resize(n_out);
    for (std::size_t m = 0; m < n_out; ++m) {
        const double t = static_cast<double>(m) * in_rate / out_rate;
        const auto base = static_cast<long long>(std::floor(t));
        double acc = 0.0, wsum = 0.0;
        for (long long k = base - kRadius + 1; k <= base + kRadius; ++k) {
            const double x = t - static_cast<double>(k);
            const double w = 0.5 + 0.5 * std::cos(M_PI * x / kRadius);
            const double h = cutoff * detail::sinc(cutoff * x) * w;
            wsum += h;
            if (k >= 0 && k < static_cast<long long>(n_in))
                acc += clip.samples[static_cast<std::size_t>(k)] * h;
        }
        out.samples[m] = detail::clamp_sample(wsum != 0.0 ? acc / wsum : 0.0);
    }
    return out;
}

// Decodes RIFF/WAVE PCM16, downmixes stereo by channel average, resamples to
// 16 kHz and scales to [-1, 1].
inline AudioClip decode_wav(const std::vector<std::uint8_t>& bytes, const std::string& id = "") {
    using detail::read_u16le;
    using detail::read_u32le;
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw MalformedWav("missing RIFF/WAVE header");

    bool have_fmt = false;
    std::uint16_t channels = 0, bits = 0, format = 0;
    std::uint32_t rate = 0;
    std::size_t data_off = 0, data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* tag = reinterpret_cast<const char*>(bytes.data() + pos);
        std::uint32_t chunk_len = read_u32le(bytes.data() + pos + 4);
        std::size_t body = pos + 8;
        if (body + chunk_len > bytes.size()) throw MalformedWav("truncated chunk");
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            if (chunk_len < 16) throw MalformedWav("fmt chunk too small");
            format = read_u16le(bytes.data() + body);
            channels = read_u16le(bytes.data() + body + 2);
            rate = read_u32le(bytes.data() + body + 4);
            bits = read_u16le(bytes.data() + body + 14);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            data_off = body;
            data_len = chunk_len;
        }
        pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
    }
    if (!have_fmt || data_off == 0) throw MalformedWav("missing fmt or data chunk");
    if (format != 1) throw UnsupportedEncoding("only PCM (format 1) supported");
    if (bits != 16) throw UnsupportedEncoding("only 16-bit samples supported");
    if (channels != 1 && channels != 2)
        throw UnsupportedEncoding("only mono or stereo supported");
    if (rate == 0) throw MalformedWav("zero sample rate");

    const std::size_t frame_bytes = 2u * channels;
    const std::size_t frames = data_len / frame_bytes;
    if (frames == 0) throw MalformedWav("empty data chunk");

    AudioClip clip;
    clip.sample_rate = static_cast<int>(rate);
    clip.id = id;
    clip.samples.resize(frames);
    const std::uint8_t* p = bytes.data() + data_off;
    for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (int c = 0; c < channels; ++c) {
            auto raw = static_cast<std::int16_t>(read_u16le(p + i * frame_bytes + 2 * c));
            acc += static_cast<double>(raw) / 32768.0;
        }
        clip.samples[i] = detail::clamp_sample(acc / channels);
    }
    if (clip.sample_rate != kCanonicalRate) clip = resample(clip, kCanonicalRate);
    return clip;
}

// 16-bit mono PCM at the clip's own rate.
inline std::vector<std::uint8_t> encode_wav(const AudioClip& clip) {
    const std::size_t n = clip.samples.size();
    const std::uint32_t data_len = static_cast<std::uint32_t>(n * 2);
    std::vector<std::uint8_t> out;
    out.reserve(44 + data_len);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    detail::put_u32le(out, 36 + data_len);
    out.insert(out.end(), {'W', 'A', 'V', 'E'});
    out.insert(out.end(), {'f', 'm', 't', ' '});
    detail::put_u32le(out, 16);
    detail::put_u16le(out, 1);  // PCM
    detail::put_u16le(out, 1);  // mono
    detail::put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate));
    detail::put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate * 2));
    detail::put_u16le(out, 2);
    detail::put_u16le(out, 16);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    detail::put_u32le(out, data_len);
    for (std::size_t i = 0; i < n; ++i) {
        double v = std::round(detail::clamp_sample(clip.samples[i]) * 32768.0);
        auto s = static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0));
        detail::put_u16le(out, static_cast<std::uint16_t>(s));
    }
    return out;
}

// 20*log10(rms(ref)/rms(deg - ref)), capped at +-200 dB.
inline double measure_snr(const AudioClip& reference, const AudioClip& degraded) {
    if (reference.samples.size() != degraded.samples.size() ||
        reference.sample_rate != degraded.sample_rate)
        throw LengthMismatch("clips must share length and rate");
    double noise_acc = 0.0;
    for (std::size_t i = 0; i < reference.samples.size(); ++i) {
        double d = degraded.samples[i] - reference.samples[i];
        noise_acc += d * d;
    }
    double noise_rms = std::sqrt(noise_acc / static_cast<double>(reference.samples.size()));
    if (noise_rms == 0.0) return kSnrCapDb;
    double ref_rms = reference.rms();
    if (ref_rms == 0.0) return -kSnrCapDb;
    return std::clamp(20.0 * std::log10(ref_rms / noise_rms), -kSnrCapDb, kSnrCapDb);
}

// Adds zero-mean Gaussian noise scaled to an exact target RMS so the
// requested SNR is met before the final clip back to [-1, 1].
inline AudioClip add_noise_snr(const AudioClip& clip, double snr_db, std::uint64_t seed) {
    double signal_rms = clip.rms();
    if (signal_rms == 0.0) throw SilentInput("SNR undefined for silent input");
    const std::size_t n = clip.samples.size();

    detail::Rng rng(detail::mix64(seed ^ 0x616e736eull));  // domain-separated stream
    std::vector<double> noise(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        noise[i] = rng.gaussian();
        acc += noise[i] * noise[i];
    }
    double actual_rms = std::sqrt(acc / static_cast<double>(n));
    double target_rms = signal_rms * std::pow(10.0, -snr_db / 20.0);
    double scale = actual_rms > 0.0 ? target_rms / actual_rms : 0.0;

    AudioClip out = clip;
    for (std::size_t i = 0; i < n; ++i)
        out.samples[i] = detail::clamp_sample(clip.samples[i] + scale * noise[i]);
    return out;
}

// `count` random segments of seg_seconds each; offsets drawn uniformly.
inline std::vector<AudioClip> slice_segments(const AudioClip& clip, double seg_seconds,
                                             int count, std::uint64_t seed) {
    const auto seg_len = static_cast<std::size_t>(std::llround(seg_seconds * clip.sample_rate));
    if (seg_len == 0 || seg_len > clip.samples.size())
        throw ClipTooShort("clip shorter than requested segment");
    detail::Rng rng(detail::mix64(seed ^ 0x736c6963ull));
    std::vector<AudioClip> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        std::size_t off = rng.below(clip.samples.size() - seg_len + 1);
        AudioClip seg;
        seg.sample_rate = clip.sample_rate;
        seg.id = clip.id + "#" + std::to_string(i);
        seg.samples.assign(clip.samples.begin() + static_cast<long>(off),
                           clip.samples.begin() + static_cast<long>(off + seg_len));
        out.push_back(std::move(seg));
    }
    return out;
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed for " + path);
    return bytes;
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path);
}

inline AudioClip load_wav_file(const std::string& path) {
    return decode_wav(read_file(path), path);
}

inline void save_wav_file(const std::string& path, const AudioClip& clip) {
    write_file(path, encode_wav(clip));
}

}  // namespace qw
