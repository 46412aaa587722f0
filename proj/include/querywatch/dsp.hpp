#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace qw::detail {

inline bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey. Tables are built once per plan so repeated
// transforms of the same size (one per STFT frame) stay cheap.
class FftPlan {
  public:
    explicit FftPlan(std::size_t n) : n_(n) {
        if (!is_power_of_two(n)) return;  // callers fall back to the direct DFT
        rev_.resize(n);
        std::size_t log2n = 0;
        while ((std::size_t{1} << log2n) < n) ++log2n;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < log2n; ++b)
                if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (log2n - 1 - b);
            rev_[i] = r;
        }
        twiddle_.resize(n / 2);
        for (std::size_t k = 0; k < n / 2; ++k) {
            double ang = -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
            twiddle_[k] = {std::cos(ang), std::sin(ang)};
        }
    }

    bool fast() const { return !rev_.empty(); }
    std::size_t size() const { return n_; }

    void forward(std::vector<std::complex<double>>& a) const {
        for (std::size_t i = 0; i < n_; ++i)
            if (i < rev_[i]) std::swap(a[i], a[rev_[i]]);
        for (std::size_t len = 2; len <= n_; len <<= 1) {
            std::size_t step = n_ / len;
            for (std::size_t i = 0; i < n_; i += len) {
                for (std::size_t j = 0; j < len / 2; ++j) {
                    auto u = a[i + j];
                    auto v = a[i + j + len / 2] * twiddle_[j * step];
                    a[i + j] = u + v;
                    a[i + j + len / 2] = u - v;
                }
            }
        }
    }

  private:
    std::size_t n_;
    std::vector<std::size_t> rev_;
    std::vector<std::complex<double>> twiddle_;
};

// O(n^2) fallback for non power-of-two window sizes.
inline std::vector<std::complex<double>> direct_dft(const std::vector<std::complex<double>>& in) {
    std::size_t n = in.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t t = 0; t < n; ++t) {
            double ang = -2.0 * M_PI * static_cast<double>(k * t % n) / static_cast<double>(n);
            acc += in[t] * std::complex<double>{std::cos(ang), std::sin(ang)};
        }
        out[k] = acc;
    }
    return out;
}

inline std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n < 2) return w;
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n - 1));
    return w;
}

inline double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    return std::sin(M_PI * x) / (M_PI * x);
}

}  // namespace qw::detail
