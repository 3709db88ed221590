#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace geocert::fft {

using cd = std::complex<double>;

// Real-FFT output: bins 0..floor(L/2), stored as separate re/im sequences.
struct ComplexVector {
    std::vector<double> re;
    std::vector<double> im;

    std::size_t size() const { return re.size(); }
};

namespace detail {

inline cd twiddle(double k, std::size_t n, bool inverse) {
    const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi * k / static_cast<double>(n);
    return {std::cos(ang), std::sin(ang)};
}

inline std::size_t smallest_factor(std::size_t n) {
    if (n % 2 == 0) return 2;
    for (std::size_t p = 3; p * p <= n; p += 2)
        if (n % p == 0) return p;
    return n;
}

// Iterative radix-2 FFT, n must be a power of two. Used by the Bluestein path.
inline void fft_pow2(std::vector<cd>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const cd wl = twiddle(1.0, len, inverse);
        for (std::size_t i = 0; i < n; i += len) {
            cd w{1.0, 0.0};
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cd u = a[i + j];
                const cd v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= static_cast<double>(n);
}

void fft_forward(std::vector<cd>& a);

// Bluestein chirp-z transform for lengths with large prime factors.
inline void fft_bluestein(std::vector<cd>& x) {
    const std::size_t n = x.size();
    std::size_t m = 1;
    while (m < 2 * n - 1) m <<= 1;

    std::vector<cd> chirp(n);
    for (std::size_t j = 0; j < n; ++j) {
        // exp(-i*pi*j^2/n), j^2 reduced mod 2n to keep the argument small
        const double jj = static_cast<double>((static_cast<unsigned long long>(j) * j) % (2 * n));
        const double ang = -std::numbers::pi * jj / static_cast<double>(n);
        chirp[j] = {std::cos(ang), std::sin(ang)};
    }

    std::vector<cd> a(m, cd{0.0, 0.0});
    std::vector<cd> b(m, cd{0.0, 0.0});
    for (std::size_t j = 0; j < n; ++j) a[j] = x[j] * chirp[j];
    b[0] = std::conj(chirp[0]);
    for (std::size_t j = 1; j < n; ++j) b[j] = b[m - j] = std::conj(chirp[j]);

    fft_pow2(a, false);
    fft_pow2(b, false);
    for (std::size_t j = 0; j < m; ++j) a[j] *= b[j];
    fft_pow2(a, true);

    for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
}

// Mixed-radix Cooley-Tukey, recursing on the smallest prime factor.
inline void fft_mixed_radix(std::vector<cd>& x) {
    const std::size_t n = x.size();
    const std::size_t p = smallest_factor(n);
    const std::size_t m = n / p;

    // sub-DFT q operates on elements q, q+p, q+2p, ...
    std::vector<std::vector<cd>> sub(p, std::vector<cd>(m));
    for (std::size_t q = 0; q < p; ++q) {
        for (std::size_t j = 0; j < m; ++j) sub[q][j] = x[j * p + q];
        if (m > 1) fft_forward(sub[q]);
    }

    for (std::size_t k0 = 0; k0 < m; ++k0) {
        for (std::size_t r = 0; r < p; ++r) {
            const std::size_t k = k0 + r * m;
            cd acc{0.0, 0.0};
            for (std::size_t q = 0; q < p; ++q)
                acc += twiddle(static_cast<double>((static_cast<unsigned long long>(q) * k) % n), n,
                               false) *
                       sub[q][k0];
            x[k] = acc;
        }
    }
}

inline void fft_forward(std::vector<cd>& a) {
    const std::size_t n = a.size();
    if (n <= 1) return;
    if ((n & (n - 1)) == 0) {
        fft_pow2(a, false);
    } else if (smallest_factor(n) > 61) {
        fft_bluestein(a);
    } else {
        fft_mixed_radix(a);
    }
}

inline void fft_any(std::vector<cd>& a, bool inverse) {
    if (!inverse) {
        fft_forward(a);
        return;
    }
    // unnormalized inverse via conjugation; 1/n is applied by fft_inplace
    for (auto& v : a) v = std::conj(v);
    fft_forward(a);
    for (auto& v : a) v = std::conj(v);
}

}  // namespace detail

// Unnormalized forward transform; the inverse carries the 1/n factor.
inline void fft_inplace(std::vector<cd>& a, bool inverse) {
    detail::fft_any(a, inverse);
    if (inverse) {
        const double s = 1.0 / static_cast<double>(a.size());
        for (auto& v : a) v *= s;
    }
}

inline ComplexVector rfft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    if (n == 0) throw std::invalid_argument("rfft: empty input");
    std::vector<cd> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = cd{x[i], 0.0};
    fft_inplace(a, false);
    const std::size_t lf = n / 2 + 1;
    ComplexVector out;
    out.re.resize(lf);
    out.im.resize(lf);
    for (std::size_t k = 0; k < lf; ++k) {
        out.re[k] = a[k].real();
        out.im[k] = a[k].imag();
    }
    return out;
}

inline std::vector<double> irfft(const ComplexVector& f, std::size_t n) {
    if (n == 0) throw std::invalid_argument("irfft: zero length");
    const std::size_t lf = n / 2 + 1;
    if (f.size() != lf) throw std::invalid_argument("irfft: spectrum length mismatch");
    std::vector<cd> a(n);
    a[0] = cd{f.re[0], 0.0};  // DC bin is real for a real signal
    for (std::size_t k = 1; k < lf; ++k) {
        const bool self_conj = (n % 2 == 0 && k == n / 2);
        const cd v = self_conj ? cd{f.re[k], 0.0} : cd{f.re[k], f.im[k]};
        a[k] = v;
        if (!self_conj) a[n - k] = std::conj(v);
    }
    fft_inplace(a, true);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i].real();
    return out;
}

}  // namespace geocert::fft
