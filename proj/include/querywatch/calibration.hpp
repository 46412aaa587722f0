#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "querywatch/audio.hpp"
#include "querywatch/detector.hpp"
#include "querywatch/errors.hpp"

namespace qw {

struct CalibrationResult {
    int k = 0;
    double delta = 1.0;
    double target_fpr = 0.001;
    std::size_t corpus_size = 0;
    std::map<std::string, double> percentiles;
    bool degenerate = false;            // all scores saturated at 1
    std::vector<double> scores;         // every aggregate seen, stream order

    nlohmann::json to_json() const {
        nlohmann::json p;
        for (const auto& [name, v] : percentiles) p[name] = v;
        return nlohmann::json{{"k", k},
                              {"delta", delta},
                              {"target_fpr", target_fpr},
                              {"corpus_size", corpus_size},
                              {"degenerate", degenerate},
                              {"percentiles", p}};
    }

    static CalibrationResult from_json(const nlohmann::json& j) {
        CalibrationResult r;
        r.k = j.at("k").get<int>();
        r.delta = j.at("delta").get<double>();
        r.target_fpr = j.at("target_fpr").get<double>();
        r.corpus_size = j.at("corpus_size").get<std::size_t>();
        if (j.contains("degenerate")) r.degenerate = j.at("degenerate").get<bool>();
        if (j.contains("percentiles"))
            for (auto it = j.at("percentiles").begin(); it != j.at("percentiles").end(); ++it)
                r.percentiles[it.key()] = it.value().get<double>();
        return r;
    }
};

// Nearest-rank quantile (no interpolation): the achieved flag rate on the
// calibration stream is guaranteed to stay at or below target_fpr.
inline double nearest_rank_quantile(std::vector<double> values, double q) {
    if (values.empty()) throw EmptyInput("quantile of empty sample");
    std::sort(values.begin(), values.end());
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

// Streams the corpus in seeded random order through one rolling memory and
// sets delta at the (1 - target_fpr) score quantile.
inline CalibrationResult calibrate(const std::vector<AudioClip>& corpus, int k,
                                   double target_fpr, std::uint64_t seed,
                                   const FingerprintConfig& fp_cfg = {},
                                   std::optional<double> defense_noise_snr_db = {}) {
    if (k < 1) throw Error("calibrate: k must be >= 1");
    if (target_fpr <= 0.0 || target_fpr >= 1.0)
        throw Error("calibrate: target_fpr must be in (0, 1)");
    if (corpus.size() <= static_cast<std::size_t>(k))
        throw CorpusTooSmall("calibration corpus must exceed the memory depth k");

    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    detail::Rng rng(detail::mix64(seed ^ 0x63616c69ull));
    rng.shuffle(order);

    DetectorConfig cfg;
    cfg.memory_depth = k;
    cfg.delta = 1.0;  // strict inequality: never flags during calibration
    cfg.fingerprint = fp_cfg;
    cfg.defense_noise_snr_db = defense_noise_snr_db;
    Detector det(cfg, [] { return std::int64_t{0}; });

    CalibrationResult result;
    result.k = k;
    result.target_fpr = target_fpr;
    result.corpus_size = corpus.size();
    for (std::size_t idx : order) {
        Verdict v = det.observe("calibration", corpus[idx]);
        if (v.breakdown) result.scores.push_back(v.breakdown->aggregate);
    }

    result.delta = nearest_rank_quantile(result.scores, 1.0 - target_fpr);
    result.degenerate = result.delta >= 1.0 - 1e-12;
    const std::pair<const char*, double> wanted[] = {
        {"p50", 0.50}, {"p90", 0.90}, {"p99", 0.99}, {"p999", 0.999}};
    for (const auto& [name, q] : wanted)
        result.percentiles[name] = nearest_rank_quantile(result.scores, q);
    result.percentiles["min"] = *std::min_element(result.scores.begin(), result.scores.end());
    result.percentiles["max"] = *std::max_element(result.scores.begin(), result.scores.end());
    return result;
}

// One calibration per k, shared corpus and seed.
inline std::vector<std::pair<int, double>> delta_curve(const std::vector<AudioClip>& corpus,
                                                       const std::vector<int>& ks,
                                                       double target_fpr, std::uint64_t seed,
                                                       const FingerprintConfig& fp_cfg = {}) {
    std::vector<std::pair<int, double>> curve;
    curve.reserve(ks.size());
    for (int k : ks)
        curve.emplace_back(k, calibrate(corpus, k, target_fpr, seed, fp_cfg).delta);
    return curve;
}

}  // namespace qw
