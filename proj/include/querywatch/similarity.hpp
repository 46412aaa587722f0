#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "querywatch/errors.hpp"
#include "querywatch/fingerprint.hpp"

namespace qw {

// Per-memory-element cosine components, their weights and the aggregate.
struct SimilarityBreakdown {
    std::vector<double> components;  // one per memory element, memory order
    std::vector<double> weights;     // sums to 1
    double aggregate = 0.0;
};

// Standard cosine over count vectors; 0 when either vector is all-zero, so
// silence never looks related to anything.
inline double cosine(const Fingerprint& x, const Fingerprint& y) {
    if (x.counts.size() != y.counts.size())
        throw DimensionMismatch("fingerprint dimensions differ");
    if (x.scheme_version != y.scheme_version)
        throw SchemeMismatch("fingerprint scheme versions differ");
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (std::size_t i = 0; i < x.counts.size(); ++i) {
        const double a = x.counts[i];
        const double b = y.counts[i];
        dot += a * b;
        nx += a * a;
        ny += b * b;
    }
    if (nx == 0.0 || ny == 0.0) return 0.0;
    return dot / (std::sqrt(nx) * std::sqrt(ny));
}

// Window-length schedule for the inverse-variance weights: start at 2, grow
// by 1 up to max(2, k/10), drop to half the cap, repeat until k values.
inline std::vector<int> weight_window_schedule(int k) {
    const int l_max = std::max(2, k / 10);
    std::vector<int> ls(static_cast<std::size_t>(k));
    int l = 2;
    for (int i = 0; i < k; ++i) {
        ls[static_cast<std::size_t>(i)] = l;
        ++l;
        if (l > l_max) l = std::max(2, l_max / 2);
    }
    return ls;
}

// Inverse-variance-coefficient weights: each component is weighted by
// max(0, 1 - std/mean) over a window of +-l/2 neighbours (truncated at the
// ends), then the weights are normalized to sum to 1. A window with high
// relative spread - e.g. straddling a decoy query - contributes nothing.
inline std::vector<double> weight_vector(const std::vector<double>& components) {
    const int k = static_cast<int>(components.size());
    if (k == 0) throw EmptyInput("no similarity components");
    if (k == 1) return {1.0};

    const auto ls = weight_window_schedule(k);
    std::vector<double> raw(static_cast<std::size_t>(k), 0.0);
    for (int i = 0; i < k; ++i) {
        const int half = ls[static_cast<std::size_t>(i)] / 2;
        const int lo = std::max(0, i - half);
        const int hi = std::min(k - 1, i + half);
        const int n = hi - lo + 1;
        double mean = 0.0;
        for (int j = lo; j <= hi; ++j) mean += components[static_cast<std::size_t>(j)];
        mean /= n;
        double var = 0.0;
        for (int j = lo; j <= hi; ++j) {
            const double d = components[static_cast<std::size_t>(j)] - mean;
            var += d * d;
        }
        const double stddev = std::sqrt(var / n);
        raw[static_cast<std::size_t>(i)] = std::max(0.0, 1.0 - stddev / std::max(mean, 1e-9));
    }

    double total = 0.0;
    for (double w : raw) total += w;
    if (total <= 0.0) {
        // all windows too volatile: fall back to uniform weighting
        return std::vector<double>(static_cast<std::size_t>(k), 1.0 / k);
    }
    for (double& w : raw) w /= total;
    return raw;
}

inline SimilarityBreakdown memory_similarity(const Fingerprint& fp,
                                             const std::vector<Fingerprint>& memory) {
    if (memory.empty()) throw EmptyMemory("similarity needs a non-empty memory");
    SimilarityBreakdown b;
    b.components.reserve(memory.size());
    for (const auto& m : memory) b.components.push_back(cosine(fp, m));
    b.weights = weight_vector(b.components);
    b.aggregate = 0.0;
    for (std::size_t i = 0; i < b.components.size(); ++i)
        b.aggregate += b.components[i] * b.weights[i];
    return b;
}

}  // namespace qw
