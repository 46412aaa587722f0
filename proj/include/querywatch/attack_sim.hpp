#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "querywatch/audio.hpp"
#include "querywatch/detector.hpp"
#include "querywatch/errors.hpp"
#include "querywatch/metrics.hpp"

namespace qw {

enum class QueryLabel { attack, fake, benign };

inline const char* to_string(QueryLabel l) {
    switch (l) {
        case QueryLabel::attack: return "attack";
        case QueryLabel::fake: return "fake";
        default: return "benign";
    }
}

inline QueryLabel query_label_from_string(const std::string& s) {
    if (s == "attack") return QueryLabel::attack;
    if (s == "fake") return QueryLabel::fake;
    if (s == "benign") return QueryLabel::benign;
    throw Error("unknown query label " + s);
}

struct TraceRecord {
    std::uint64_t seq = 0;
    std::string client;
    AudioClip clip;
    QueryLabel label = QueryLabel::benign;
    double perturbation_scale = 0.0;
    double perturbation_peak = 0.0;  // max |query - carrier| after clipping
    double carrier_peak = 0.0;
    std::string wav_path;  // set when the trace lives on disk
};

struct QueryTrace {
    std::vector<TraceRecord> records;
    std::optional<AudioClip> carrier;
};

struct AttackSpec {
    AudioClip carrier;
    int n_queries = 300;
    std::vector<double> schedule;  // per-query perturbation scale, non-decreasing
    double p_fake = 0.0;
    std::vector<AudioClip> decoy_pool;
    std::optional<double> attack_noise_snr_db;
    std::uint64_t seed = 1;
    std::string client_id = "attacker";
};

// Linear amplitude ramp between two SNR endpoints relative to the carrier
// RMS. Query-based attacks carry substantial perturbation from the first
// iterations, so the default ramp starts already noisy.
inline std::vector<double> default_schedule(const AudioClip& carrier, int n_queries,
                                            double snr_start_db = 18.0,
                                            double snr_end_db = 6.0) {
    const double r = carrier.rms();
    const double eps0 = r * std::pow(10.0, -snr_start_db / 20.0);
    const double eps1 = r * std::pow(10.0, -snr_end_db / 20.0);
    std::vector<double> schedule(static_cast<std::size_t>(n_queries));
    for (int t = 0; t < n_queries; ++t) {
        const double frac = n_queries > 1 ? static_cast<double>(t) / (n_queries - 1) : 0.0;
        schedule[static_cast<std::size_t>(t)] = eps0 + (eps1 - eps0) * frac;
    }
    return schedule;
}

// Emulates the query loop of an iterative attack: each query is the carrier
// plus a fresh seeded Gaussian delta at the scheduled scale. There is no
// model to differentiate here; the defense only sees inter-query similarity,
// which this preserves.
inline QueryTrace synth_attack_trace(const AttackSpec& spec) {
    if (spec.carrier.duration_seconds() < 1.0)
        throw CarrierTooShort("attack carrier must be at least 1 s");
    if (static_cast<int>(spec.schedule.size()) != spec.n_queries)
        throw Error("schedule length must equal n_queries");
    for (std::size_t t = 1; t < spec.schedule.size(); ++t)
        if (spec.schedule[t] < spec.schedule[t - 1] || spec.schedule[t - 1] < 0.0)
            throw Error("schedule must be non-negative and non-decreasing");

    QueryTrace trace;
    trace.carrier = spec.carrier;
    trace.records.reserve(static_cast<std::size_t>(spec.n_queries));
    const double carrier_peak = spec.carrier.peak();
    const std::size_t n = spec.carrier.samples.size();

    for (int t = 0; t < spec.n_queries; ++t) {
        const double eps = spec.schedule[static_cast<std::size_t>(t)];
        detail::Rng rng(detail::mix64(spec.seed ^ (0x61747461ull + static_cast<std::uint64_t>(t))));
        TraceRecord rec;
        rec.seq = static_cast<std::uint64_t>(t) + 1;
        rec.client = spec.client_id;
        rec.label = QueryLabel::attack;
        rec.perturbation_scale = eps;
        rec.carrier_peak = carrier_peak;
        rec.clip.sample_rate = spec.carrier.sample_rate;
        rec.clip.id = "atk-" + std::to_string(t + 1);
        rec.clip.samples.resize(n);
        double pert_peak = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double q = detail::clamp_sample(spec.carrier.samples[i] + eps * rng.gaussian());
            rec.clip.samples[i] = q;
            pert_peak = std::max(pert_peak, std::abs(q - spec.carrier.samples[i]));
        }
        rec.perturbation_peak = pert_peak;
        trace.records.push_back(std::move(rec));
    }
    return trace;
}

// Replaces a seeded uniform subset of positions with decoys from the pool.
inline QueryTrace inject_fakes(const QueryTrace& trace, double p_fake,
                               const std::vector<AudioClip>& pool, std::uint64_t seed) {
    if (p_fake < 0.0 || p_fake > 1.0) throw Error("p_fake must be in [0, 1]");
    QueryTrace out = trace;
    if (p_fake == 0.0) return out;
    if (pool.empty()) throw EmptyPool("fake injection needs a decoy pool");

    const std::size_t n = out.records.size();
    const auto n_fake = static_cast<std::size_t>(std::llround(p_fake * static_cast<double>(n)));
    std::vector<std::size_t> positions(n);
    for (std::size_t i = 0; i < n; ++i) positions[i] = i;
    detail::Rng rng(detail::mix64(seed ^ 0x66616b65ull));
    rng.shuffle(positions);
    positions.resize(n_fake);
    std::sort(positions.begin(), positions.end());

    for (std::size_t pos : positions) {
        TraceRecord& rec = out.records[pos];
        rec.clip = pool[rng.below(pool.size())];
        rec.label = QueryLabel::fake;
        rec.perturbation_scale = 0.0;
        rec.perturbation_peak = 0.0;
    }
    return out;
}

// Adaptive attack A1: attack-labeled queries pass through SNR noise meant to
// disturb fingerprint extraction. Fake and benign records stay untouched.
inline QueryTrace apply_noise_attack(const QueryTrace& trace, double snr_db,
                                     std::uint64_t seed) {
    QueryTrace out = trace;
    for (std::size_t i = 0; i < out.records.size(); ++i) {
        TraceRecord& rec = out.records[i];
        if (rec.label != QueryLabel::attack) continue;
        rec.clip = add_noise_snr(rec.clip, snr_db,
                                 detail::mix64(seed ^ (0x6e6f6973ull + rec.seq)));
        if (out.carrier && out.carrier->samples.size() == rec.clip.samples.size()) {
            double pert_peak = 0.0;
            for (std::size_t s = 0; s < rec.clip.samples.size(); ++s)
                pert_peak = std::max(pert_peak,
                                     std::abs(rec.clip.samples[s] - out.carrier->samples[s]));
            rec.perturbation_peak = pert_peak;
        }
    }
    return out;
}

// Feeds the trace through a fresh detector and assembles the report. The
// action policy is forced to log so a block cannot truncate the evaluation.
inline MetricsReport run_eval(const QueryTrace& trace, const DetectorConfig& cfg) {
    if (cfg.delta <= 0.0 || cfg.delta >= 1.0)
        throw UncalibratedThreshold("run_eval needs a calibrated delta in (0, 1)");
    DetectorConfig eval_cfg = cfg;
    eval_cfg.policy = ActionPolicy::log;
    Detector det(eval_cfg, [] { return std::int64_t{0}; });

    MetricsReport report;
    report.k = cfg.memory_depth;
    report.delta = cfg.delta;
    report.defense_noise_snr_db = cfg.defense_noise_snr_db;
    report.a_n = trace.records.size();

    std::vector<bool> flags;
    flags.reserve(trace.records.size());
    for (const auto& rec : trace.records) {
        Verdict v = det.observe(rec.client, rec.clip);
        flags.push_back(v.flagged);
        report.trail.push_back({rec.seq, v.score(), v.flagged});
        if (v.flagged && !report.first_detection_seq && rec.label == QueryLabel::attack) {
            report.first_detection_seq = rec.seq;
            report.fsnr_db = rec.perturbation_peak > 0.0
                ? fsnr_from_amplitudes(rec.carrier_peak, rec.perturbation_peak)
                : kSnrCapDb;  // zero perturbation: detection at the SNR cap
        }
    }
    report.d_n = count_flagged_windows(flags, cfg.memory_depth);
    report.dsr_percent =
        report.a_n > 0 ? dsr(report.d_n, static_cast<double>(report.a_n), cfg.memory_depth) : 0.0;
    return report;
}

// --- trace (de)serialization: JSON Lines manifest + WAV files ---

inline void save_trace(const QueryTrace& trace, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "clips", ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());

    if (trace.carrier) save_wav_file((fs::path(dir) / "carrier.wav").string(), *trace.carrier);

    std::ofstream manifest(fs::path(dir) / "trace.jsonl", std::ios::trunc);
    if (!manifest) throw IoError("cannot create trace manifest in " + dir);
    for (const auto& rec : trace.records) {
        char name[32];
        std::snprintf(name, sizeof(name), "clips/q%06llu.wav",
                      static_cast<unsigned long long>(rec.seq));
        save_wav_file((fs::path(dir) / name).string(), rec.clip);
        nlohmann::json line{{"seq", rec.seq},
                            {"client", rec.client},
                            {"wav", name},
                            {"label", to_string(rec.label)},
                            {"scale", rec.perturbation_scale},
                            {"pert_peak", rec.perturbation_peak},
                            {"carrier_peak", rec.carrier_peak}};
        manifest << line.dump() << '\n';
    }
    if (!manifest) throw IoError("write failed for trace manifest in " + dir);
}

inline QueryTrace load_trace(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open " + manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();

    QueryTrace trace;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw TraceParseError("bad JSON: " + std::string(e.what()), line_no);
        }
        TraceRecord rec;
        try {
            rec.seq = j.at("seq").get<std::uint64_t>();
            rec.client = j.at("client").get<std::string>();
            rec.wav_path = j.at("wav").get<std::string>();
            rec.label = query_label_from_string(j.at("label").get<std::string>());
            rec.perturbation_scale = j.at("scale").get<double>();
            if (j.contains("pert_peak")) rec.perturbation_peak = j.at("pert_peak").get<double>();
            if (j.contains("carrier_peak")) rec.carrier_peak = j.at("carrier_peak").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw TraceParseError("missing field: " + std::string(e.what()), line_no);
        }
        const fs::path wav = base / rec.wav_path;
        if (!fs::exists(wav)) throw TraceParseError("missing wav " + wav.string(), line_no);
        rec.clip = load_wav_file(wav.string());
        rec.clip.id = rec.wav_path;
        trace.records.push_back(std::move(rec));
    }
    const fs::path carrier = base / "carrier.wav";
    if (fs::exists(carrier)) trace.carrier = load_wav_file(carrier.string());
    return trace;
}

}  // namespace qw
