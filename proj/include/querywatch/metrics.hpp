#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "querywatch/audio.hpp"
#include "querywatch/errors.hpp"

namespace qw {

// Detection success rate: 100 * d_n * k / a_n, capped at 100. Fractional
// detection counts are allowed so averaged results can be re-expressed.
inline double dsr(double d_n, double a_n, int k) {
    if (a_n < 1.0) throw ZeroQueries("DSR needs at least one query");
    if (d_n < 0.0 || k < 1) throw Error("DSR needs d_n >= 0 and k >= 1");
    return std::min(100.0, 100.0 * d_n * static_cast<double>(k) / a_n);
}

enum class AmplitudeMeasure { peak, rms };

// First-signal-to-noise ratio from raw amplitudes, capped like measure_snr.
inline double fsnr_from_amplitudes(double carrier_amp, double perturbation_amp) {
    if (perturbation_amp <= 0.0)
        throw ZeroPerturbation("FSNR undefined for a zero perturbation");
    if (carrier_amp <= 0.0) return -kSnrCapDb;
    return std::clamp(20.0 * std::log10(carrier_amp / perturbation_amp), -kSnrCapDb, kSnrCapDb);
}

// 20*log10(A_x / FA_delta) with A the peak absolute amplitude by default;
// the RMS variant is kept for sensitivity analysis.
inline double fsnr(const AudioClip& carrier, const AudioClip& perturbation,
                   AmplitudeMeasure measure = AmplitudeMeasure::peak) {
    if (carrier.samples.size() != perturbation.samples.size())
        throw LengthMismatch("carrier and perturbation lengths differ");
    const double ax = measure == AmplitudeMeasure::peak ? carrier.peak() : carrier.rms();
    const double fa =
        measure == AmplitudeMeasure::peak ? perturbation.peak() : perturbation.rms();
    return fsnr_from_amplitudes(ax, fa);
}

// whitespace split, lowercased, punctuation stripped
inline std::vector<std::string> tokenize_words(const std::string& text) {
    std::vector<std::string> words;
    std::string cur;
    for (char raw : text) {
        const auto c = static_cast<unsigned char>(raw);
        if (std::isalnum(c) || raw == '\'') {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            words.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(cur);
    return words;
}

// Word error rate over a minimum-edit-distance alignment.
inline double wer(const std::vector<std::string>& reference,
                  const std::vector<std::string>& hypothesis) {
    if (reference.empty()) throw EmptyReference("WER needs a non-empty reference");
    const std::size_t n = reference.size();
    const std::size_t m = hypothesis.size();
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = prev[j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return 100.0 * static_cast<double>(prev[m]) / static_cast<double>(n);
}

struct ScoreTrailEntry {
    std::uint64_t seq = 0;
    std::optional<double> score;
    bool flagged = false;
};

struct MetricsReport {
    std::size_t a_n = 0;  // total queries
    int d_n = 0;          // flagged length-k windows (final partial counts)
    int k = 0;
    double dsr_percent = 0.0;
    std::optional<double> fsnr_db;
    std::optional<std::uint64_t> first_detection_seq;
    std::vector<ScoreTrailEntry> trail;
    double delta = 0.0;
    std::optional<double> defense_noise_snr_db;

    nlohmann::json to_json() const {
        nlohmann::json trail_json = nlohmann::json::array();
        for (const auto& e : trail) {
            nlohmann::json entry{{"seq", e.seq}, {"flagged", e.flagged}};
            if (e.score)
                entry["score"] = *e.score;
            else
                entry["score"] = nullptr;
            trail_json.push_back(entry);
        }
        nlohmann::json j{{"a_n", a_n},
                         {"d_n", d_n},
                         {"k", k},
                         {"dsr_percent", dsr_percent},
                         {"delta", delta},
                         {"trail", trail_json}};
        j["fsnr_db"] = fsnr_db ? nlohmann::json(*fsnr_db) : nlohmann::json(nullptr);
        j["first_detection_seq"] =
            first_detection_seq ? nlohmann::json(*first_detection_seq) : nlohmann::json(nullptr);
        j["defense_noise_snr_db"] =
            defense_noise_snr_db ? nlohmann::json(*defense_noise_snr_db) : nlohmann::json(nullptr);
        return j;
    }

    // Aligned one-row table mirroring the evaluation summary columns.
    std::string render_table() const {
        std::ostringstream os;
        auto col = [&os](const std::string& s, int w) {
            os << s;
            for (int i = static_cast<int>(s.size()); i < w; ++i) os << ' ';
        };
        col("Queries(n)", 12);
        col("Detections", 12);
        col("DSR(%)", 10);
        col("FSNR(dB)", 10);
        os << '\n';
        std::ostringstream v1, v2, v3;
        v1 << a_n;
        v2 << d_n;
        v3.precision(2);
        v3 << std::fixed << dsr_percent;
        col(v1.str(), 12);
        col(v2.str(), 12);
        col(v3.str(), 10);
        if (fsnr_db) {
            std::ostringstream v4;
            v4.precision(2);
            v4 << std::fixed << *fsnr_db;
            col(v4.str(), 10);
        } else {
            col("-", 10);
        }
        os << '\n';
        return os.str();
    }
};

// Recount of flagged windows over a verdict trail: ceil(n/k) chunks, a chunk
// detects when it contains at least one flagged query.
inline int count_flagged_windows(const std::vector<bool>& flags, int k) {
    if (k < 1) throw Error("window size must be >= 1");
    int windows_hit = 0;
    for (std::size_t start = 0; start < flags.size(); start += static_cast<std::size_t>(k)) {
        const std::size_t end = std::min(flags.size(), start + static_cast<std::size_t>(k));
        for (std::size_t i = start; i < end; ++i) {
            if (flags[i]) {
                ++windows_hit;
                break;
            }
        }
    }
    return windows_hit;
}

}  // namespace qw
