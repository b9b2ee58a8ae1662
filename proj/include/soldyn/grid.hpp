#ifndef SOLDYN_GRID_HPP
#define SOLDYN_GRID_HPP

#include <array>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "soldyn/fft.hpp"

namespace soldyn {

template <int D>
using Vec = std::array<double, D>;

template <int D>
inline double dot(const Vec<D>& a, const Vec<D>& b) {
    double s = 0.0;
    for (int d = 0; d < D; ++d) s += a[d] * b[d];
    return s;
}

template <int D>
inline double norm2(const Vec<D>& a) { return dot<D>(a, a); }

/// Uniform periodic grid on [-L/2, L/2)^D, n points per axis.
template <int D>
struct Grid {
    std::size_t n = 0;   // points per axis (power of two)
    double box = 0.0;    // edge length L

    Grid() = default;
    Grid(std::size_t n_, double box_) : n(n_), box(box_) {
        if (!detail::is_pow2(n)) throw std::invalid_argument("grid: n must be a power of two");
        if (box <= 0.0) throw std::invalid_argument("grid: box must be positive");
    }

    double spacing() const { return box / double(n); }
    std::size_t size() const {
        std::size_t s = 1;
        for (int d = 0; d < D; ++d) s *= n;
        return s;
    }
    /// Quadrature weight of one node (trapezoid on the periodic grid).
    double cell() const {
        double c = 1.0;
        for (int d = 0; d < D; ++d) c *= spacing();
        return c;
    }
    double coord(std::size_t i) const { return -0.5 * box + spacing() * double(i); }
    /// Wavenumber of FFT index m along one axis.
    double wavenumber(std::size_t m) const {
        const double base = 2.0 * M_PI / box;
        return (m < n / 2) ? base * double(m) : base * (double(m) - double(n));
    }
    bool operator==(const Grid& o) const { return n == o.n && box == o.box; }
    bool operator!=(const Grid& o) const { return !(*this == o); }
};

/// Complex field sampled on a Grid<D>, row-major (last axis contiguous).
template <int D>
struct Field {
    Grid<D> grid;
    std::vector<cplx> v;

    Field() = default;
    explicit Field(const Grid<D>& g) : grid(g), v(g.size(), cplx(0.0, 0.0)) {}

    std::size_t size() const { return v.size(); }
    cplx& operator[](std::size_t i) { return v[i]; }
    const cplx& operator[](std::size_t i) const { return v[i]; }

    /// Decode flat index into per-axis indices.
    std::array<std::size_t, D> unflatten(std::size_t idx) const {
        std::array<std::size_t, D> ix{};
        for (int d = D - 1; d >= 0; --d) {
            ix[d] = idx % grid.n;
            idx /= grid.n;
        }
        return ix;
    }
    Vec<D> point(std::size_t idx) const {
        auto ix = unflatten(idx);
        Vec<D> x{};
        for (int d = 0; d < D; ++d) x[d] = grid.coord(ix[d]);
        return x;
    }
};

template <int D>
inline void check_same_grid(const Field<D>& a, const Field<D>& b) {
    if (a.grid != b.grid) throw std::invalid_argument("fields live on different grids");
}

// ---- elementwise helpers ----

template <int D>
inline Field<D> operator+(const Field<D>& a, const Field<D>& b) {
    check_same_grid(a, b);
    Field<D> r(a.grid);
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

template <int D>
inline Field<D> operator-(const Field<D>& a, const Field<D>& b) {
    check_same_grid(a, b);
    Field<D> r(a.grid);
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

template <int D>
inline Field<D> operator*(cplx s, const Field<D>& a) {
    Field<D> r(a.grid);
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = s * a[i];
    return r;
}

template <int D>
inline void axpy(cplx s, const Field<D>& x, Field<D>& y) {
    check_same_grid(x, y);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

/// Transform every 1D line along `axis` in place with `op(line_ptr)`.
/// Strided lines are gathered in blocks of adjacent lines so that the memory
/// traffic stays contiguous (a single-line gather at stride n touches a new
/// cache line per element).
template <int D, typename Op>
inline void for_each_line(Field<D>& f, int axis, Op&& op) {
    const std::size_t n = f.grid.n;
    if constexpr (D == 1) {
        op(f.v.data());
        return;
    } else {
        std::size_t stride = 1;
        for (int d = D - 1; d > axis; --d) stride *= n;
        if (stride == 1) {
            std::size_t outer = f.size() / n;
            for (std::size_t o = 0; o < outer; ++o) op(f.v.data() + o * n);
            return;
        }
        const std::size_t nblocks = f.size() / (stride * n); // product of axes before `axis`
        constexpr std::size_t B = 16;
        std::vector<cplx> scratch(B * n);
        for (std::size_t hi = 0; hi < nblocks; ++hi) {
            cplx* base = f.v.data() + hi * stride * n;
            for (std::size_t lo = 0; lo < stride; lo += B) {
                const std::size_t bw = std::min(B, stride - lo);
                for (std::size_t j = 0; j < n; ++j) {
                    const cplx* src = base + j * stride + lo;
                    cplx* dst = scratch.data() + j;
                    for (std::size_t b = 0; b < bw; ++b) dst[b * n] = src[b];
                }
                for (std::size_t b = 0; b < bw; ++b) op(scratch.data() + b * n);
                for (std::size_t j = 0; j < n; ++j) {
                    cplx* dst = base + j * stride + lo;
                    const cplx* src = scratch.data() + j;
                    for (std::size_t b = 0; b < bw; ++b) dst[b] = src[b * n];
                }
            }
        }
    }
}

/// FFT along one axis via batched transforms: blocks of adjacent lines are
/// packed into [position][batch] layout so both the gather and the butterfly
/// inner loops stay contiguous.
template <int D>
inline void fft_axis(Field<D>& f, int axis, int sign) {
    const std::size_t n = f.grid.n;
    if constexpr (D == 1) {
        fft_pow2(f.v.data(), n, sign);
        return;
    } else {
        std::size_t stride = 1;
        for (int d = D - 1; d > axis; --d) stride *= n;
        constexpr std::size_t B = 16;
        std::vector<cplx> scratch(B * n);
        if (stride == 1) {
            const std::size_t nlines = f.size() / n;
            for (std::size_t l0 = 0; l0 < nlines; l0 += B) {
                const std::size_t bw = std::min(B, nlines - l0);
                cplx* base = f.v.data() + l0 * n;
                for (std::size_t b = 0; b < bw; ++b)
                    for (std::size_t j = 0; j < n; ++j) scratch[j * B + b] = base[b * n + j];
                fft_pow2_batched(scratch.data(), n, B, sign);
                for (std::size_t b = 0; b < bw; ++b)
                    for (std::size_t j = 0; j < n; ++j) base[b * n + j] = scratch[j * B + b];
            }
            return;
        }
        const std::size_t nblocks = f.size() / (stride * n);
        for (std::size_t hi = 0; hi < nblocks; ++hi) {
            cplx* base = f.v.data() + hi * stride * n;
            for (std::size_t lo = 0; lo < stride; lo += B) {
                const std::size_t bw = std::min(B, stride - lo);
                for (std::size_t j = 0; j < n; ++j) {
                    const cplx* src = base + j * stride + lo;
                    cplx* dst = scratch.data() + j * B;
                    for (std::size_t b = 0; b < bw; ++b) dst[b] = src[b];
                }
                fft_pow2_batched(scratch.data(), n, B, sign);
                for (std::size_t j = 0; j < n; ++j) {
                    cplx* dst = base + j * stride + lo;
                    const cplx* src = scratch.data() + j * B;
                    for (std::size_t b = 0; b < bw; ++b) dst[b] = src[b];
                }
            }
        }
    }
}

/// Forward FFT along all axes (unnormalized, e^{-ikx} convention).
template <int D>
inline void fft_forward(Field<D>& f) {
    for (int d = 0; d < D; ++d) fft_axis(f, d, -1);
}

/// Inverse FFT along all axes, including the 1/n^D normalization.
template <int D>
inline void fft_inverse(Field<D>& f) {
    for (int d = 0; d < D; ++d) fft_axis(f, d, +1);
    const double s = 1.0 / double(f.size());
    for (auto& z : f.v) z *= s;
}

/// Apply a diagonal multiplier m(k) in spectral space: f <- IFFT[m .* FFT(f)].
template <int D, typename Mult>
inline void apply_multiplier(Field<D>& f, Mult&& m) {
    fft_forward(f);
    const std::size_t n = f.grid.n;
    std::array<std::size_t, D> ix{};
    for (std::size_t i = 0; i < f.size(); ++i) {
        Vec<D> k{};
        std::size_t idx = i;
        for (int d = D - 1; d >= 0; --d) {
            ix[d] = idx % n;
            idx /= n;
        }
        for (int d = 0; d < D; ++d) k[d] = f.grid.wavenumber(ix[d]);
        f[i] *= m(k);
    }
    fft_inverse(f);
}

// ---- integrals ----

template <int D>
inline double mass(const Field<D>& f) {
    double s = 0.0;
    for (const auto& z : f.v) s += std::norm(z);
    return s * f.grid.cell();
}

/// Real inner product <u,w> = Re int u conj(w).
template <int D>
inline double inner(const Field<D>& u, const Field<D>& w) {
    check_same_grid(u, w);
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        s += u[i].real() * w[i].real() + u[i].imag() * w[i].imag();
    return s * u.grid.cell();
}

/// Symplectic form omega(u,w) = Im int u conj(w).
template <int D>
inline double symplectic_form(const Field<D>& u, const Field<D>& w) {
    check_same_grid(u, w);
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        s += u[i].imag() * w[i].real() - u[i].real() * w[i].imag();
    return s * u.grid.cell();
}

/// Spectral partial derivative along axis d. The unpaired Nyquist mode is
/// zeroed (an odd multiplier on it would leak an imaginary part into the
/// derivative of a real field).
template <int D>
inline Field<D> deriv(const Field<D>& f, int axis) {
    Field<D> g = f;
    fft_forward(g);
    const std::size_t n = g.grid.n;
    for (std::size_t i = 0; i < g.size(); ++i) {
        std::size_t idx = i;
        std::size_t id = 0;
        for (int d = D - 1; d >= 0; --d) {
            std::size_t c = idx % n;
            if (d == axis) id = c;
            idx /= n;
        }
        g[i] *= (id == n / 2) ? cplx(0.0, 0.0) : cplx(0.0, g.grid.wavenumber(id));
    }
    fft_inverse(g);
    return g;
}

template <int D>
inline double h1_norm_sq(const Field<D>& f) {
    Field<D> g = f;
    fft_forward(g);
    const std::size_t n = g.grid.n;
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        std::size_t idx = i;
        double k2 = 0.0;
        for (int d = D - 1; d >= 0; --d) {
            std::size_t c = idx % n;
            double k = g.grid.wavenumber(c);
            k2 += k * k;
            idx /= n;
        }
        s += (1.0 + k2) * std::norm(g[i]);
    }
    return s * f.grid.cell() / double(f.size());
}

template <int D>
inline double h1_distance(const Field<D>& u, const Field<D>& w) {
    check_same_grid(u, w);
    Field<D> d(u.grid);
    for (std::size_t i = 0; i < u.size(); ++i) d[i] = u[i] - w[i];
    return std::sqrt(h1_norm_sq(d));
}

/// Fraction of |u|^2 within one spacing of the box boundary (domain-size check).
template <int D>
inline double boundary_mass_fraction(const Field<D>& f) {
    const std::size_t n = f.grid.n;
    double edge = 0.0, tot = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        auto ix = f.unflatten(i);
        bool b = false;
        for (int d = 0; d < D; ++d)
            if (ix[d] == 0 || ix[d] == n - 1) b = true;
        double m = std::norm(f[i]);
        tot += m;
        if (b) edge += m;
    }
    return tot > 0.0 ? edge / tot : 0.0;
}

} // namespace soldyn

#endif
