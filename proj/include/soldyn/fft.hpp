#ifndef SOLDYN_FFT_HPP
#define SOLDYN_FFT_HPP

#include <cassert>
#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <vector>

namespace soldyn {

using cplx = std::complex<double>;

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Twiddle table for one transform length, shared by forward/inverse.
struct TwiddleTable {
    std::size_t n = 0;
    std::vector<cplx> w;       // w[j] = exp(-2 pi i j / n), j < n/2
    std::vector<std::size_t> rev;

    explicit TwiddleTable(std::size_t n_) : n(n_), w(n_ / 2), rev(n_) {
        const double th = -2.0 * M_PI / double(n);
        for (std::size_t j = 0; j < n / 2; ++j)
            w[j] = cplx(std::cos(th * double(j)), std::sin(th * double(j)));
        std::size_t lg = 0;
        while ((std::size_t(1) << lg) < n) ++lg;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < lg; ++b)
                if (i & (std::size_t(1) << b)) r |= std::size_t(1) << (lg - 1 - b);
            rev[i] = r;
        }
    }
};

inline const TwiddleTable& twiddles(std::size_t n) {
    static std::map<std::size_t, TwiddleTable> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, TwiddleTable(n)).first;
    return it->second;
}

} // namespace detail

/// In-place radix-2 complex FFT. sign=-1 forward (e^{-ikx}), sign=+1 inverse
/// (unnormalized; caller divides by n).
inline void fft_pow2(cplx* a, std::size_t n, int sign) {
    if (n <= 1) return;
    if (!detail::is_pow2(n)) throw std::invalid_argument("fft: length must be a power of two");
    const auto& tt = detail::twiddles(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = tt.rev[i];
        if (r > i) std::swap(a[i], a[r]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len >> 1;
        const std::size_t step = n / len;
        for (std::size_t base = 0; base < n; base += len) {
            std::size_t tw = 0;
            for (std::size_t j = 0; j < half; ++j, tw += step) {
                cplx w = tt.w[tw];
                if (sign > 0) w = std::conj(w);
                cplx u = a[base + j];
                cplx t = a[base + j + half] * w;
                a[base + j] = u + t;
                a[base + j + half] = u - t;
            }
        }
    }
}

inline void fft(std::vector<cplx>& a, int sign) { fft_pow2(a.data(), a.size(), sign); }

/// Batched FFT over B interleaved transforms: a[j*B + b] holds position j of
/// batch member b. The butterfly inner loop runs over the batch, which keeps
/// the memory access contiguous and lets the compiler vectorize it.
inline void fft_pow2_batched(cplx* a, std::size_t n, std::size_t B, int sign) {
    if (n <= 1) return;
    if (!detail::is_pow2(n)) throw std::invalid_argument("fft: length must be a power of two");
    if (B > 32) throw std::invalid_argument("fft: batch width capped at 32");
    const auto& tt = detail::twiddles(n);
    cplx rowtmp[32];
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = tt.rev[i];
        if (r > i) {
            cplx* pi = a + i * B;
            cplx* pr = a + r * B;
            std::copy(pi, pi + B, rowtmp);
            std::copy(pr, pr + B, pi);
            std::copy(rowtmp, rowtmp + B, pr);
        }
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len >> 1;
        const std::size_t step = n / len;
        for (std::size_t base = 0; base < n; base += len) {
            // j = 0: twiddle is 1
            {
                double* p1 = reinterpret_cast<double*>(a + base * B);
                double* p2 = reinterpret_cast<double*>(a + (base + half) * B);
                for (std::size_t b = 0; b < 2 * B; ++b) {
                    double t = p2[b];
                    p2[b] = p1[b] - t;
                    p1[b] += t;
                }
            }
            std::size_t tw = step;
            for (std::size_t j = 1; j < half; ++j, tw += step) {
                cplx w = tt.w[tw];
                if (sign > 0) w = std::conj(w);
                const double wr = w.real(), wi = w.imag();
                double* p1 = reinterpret_cast<double*>(a + (base + j) * B);
                double* p2 = reinterpret_cast<double*>(a + (base + j + half) * B);
                for (std::size_t b = 0; b < B; ++b) {
                    double xr = p2[2 * b], xi = p2[2 * b + 1];
                    double tr = xr * wr - xi * wi;
                    double ti = xr * wi + xi * wr;
                    p2[2 * b] = p1[2 * b] - tr;
                    p2[2 * b + 1] = p1[2 * b + 1] - ti;
                    p1[2 * b] += tr;
                    p1[2 * b + 1] += ti;
                }
            }
        }
    }
}

/// Inverse FFT with 1/n normalization.
inline void ifft(std::vector<cplx>& a) {
    fft_pow2(a.data(), a.size(), +1);
    const double s = 1.0 / double(a.size());
    for (auto& z : a) z *= s;
}

/// DST-I of x[0..n-1] (interior Dirichlet nodes): X_k = sum_j x_j sin(pi (j+1)(k+1)/(n+1)).
/// Needs n+1 to be a power of two. Self-inverse up to the factor 2/(n+1).
inline std::vector<double> dst1(const std::vector<double>& x) {
    const std::size_t n = x.size();
    const std::size_t m = 2 * (n + 1);
    if (!detail::is_pow2(m)) throw std::invalid_argument("dst1: n+1 must be a power of two");
    std::vector<cplx> ext(m, cplx(0.0, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
        ext[j + 1] = cplx(x[j], 0.0);
        ext[m - 1 - j] = cplx(-x[j], 0.0);
    }
    fft_pow2(ext.data(), m, -1);
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = -0.5 * ext[k + 1].imag();
    return out;
}

inline std::vector<double> idst1(const std::vector<double>& X) {
    auto y = dst1(X);
    const double s = 2.0 / double(X.size() + 1);
    for (auto& v : y) v *= s;
    return y;
}

/// Chirp-z evaluation of a trigonometric polynomial at uniformly scaled points.
/// Given spectral data d[q], q = 0..n-1, computes out[j] = sum_q d[q] e^{i w q j}
/// for arbitrary real w, via Bluestein (3 FFTs of length 2n). Kernel FFT is
/// cached per (w, n).
class ChirpZ {
public:
    ChirpZ(double w, std::size_t n) : n_(n), m_(2 * n), w_(w) {
        if (!detail::is_pow2(n)) throw std::invalid_argument("chirpz: n must be a power of two");
        chirp_.resize(n_);
        for (std::size_t q = 0; q < n_; ++q) chirp_[q] = phase(0.5 * w_ * double(q) * double(q));
        kernel_.assign(m_, cplx(0.0, 0.0));
        // kernel h[p] = e^{-i w p^2 / 2}, p = -(n-1)..(n-1), wrapped into length 2n
        for (std::size_t p = 0; p < n_; ++p) {
            cplx h = phase(-0.5 * w_ * double(p) * double(p));
            kernel_[p] = h;
            if (p != 0) kernel_[m_ - p] = h;
        }
        fft_pow2(kernel_.data(), m_, -1);
    }

    /// out[j] = sum_q d[q] e^{i w q j}, j = 0..n-1.
    void apply(const cplx* d, cplx* out) const {
        std::vector<cplx> buf(m_, cplx(0.0, 0.0));
        for (std::size_t q = 0; q < n_; ++q) buf[q] = d[q] * chirp_[q];
        fft_pow2(buf.data(), m_, -1);
        for (std::size_t k = 0; k < m_; ++k) buf[k] *= kernel_[k];
        fft_pow2(buf.data(), m_, +1);
        const double s = 1.0 / double(m_);
        for (std::size_t j = 0; j < n_; ++j) out[j] = buf[j] * chirp_[j] * s;
    }

private:
    static cplx phase(double t) { return cplx(std::cos(t), std::sin(t)); }
    std::size_t n_, m_;
    double w_;
    std::vector<cplx> chirp_;
    std::vector<cplx> kernel_;
};

} // namespace soldyn

#endif
