#ifndef SOLDYN_MODULATION_HPP
#define SOLDYN_MODULATION_HPP

#include <array>
#include <cmath>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "soldyn/effective.hpp"
#include "soldyn/grid.hpp"
#include "soldyn/groundstate.hpp"
#include "soldyn/spectral.hpp"
#include "soldyn/symmetry.hpp"

namespace soldyn {

struct FitDivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Result of the symplectic-orthogonal decomposition u = g.(eta + w).
template <int D>
struct Decomposition {
    GroupElement<D> g;
    Field<D> w;
    std::array<double, n_generators<D>> residuals{}; // omega(w, e_j eta)
    double w_h1 = 0.0;
    int iterations = 0;
};

/// The explicit projections P_1..P_{2D+2} (3D ordering: Re int u x_j eta,
/// -Im int u d_j eta, Im int u (s + x.grad) eta, Re int u eta).
template <int D>
inline std::array<double, n_generators<D>> project(const Field<D>& u, const GroundState<D>& gs) {
    if (u.grid != gs.grid) throw std::invalid_argument("project: grid mismatch");
    std::array<double, n_generators<D>> P{};
    const double cell = u.grid.cell();
    for (std::size_t i = 0; i < u.size(); ++i) {
        auto x = u.point(i);
        double r = std::sqrt(norm2<D>(x));
        double e = gs.eta_at(r), de = gs.deta_at(r);
        double s_eta = double(gs.scale_weight) * e + r * de;
        double ur = u[i].real(), ui = u[i].imag();
        for (int d = 0; d < D; ++d) {
            double dir = (r > 0.0) ? x[d] / r : 0.0;
            P[d] += ur * x[d] * e;              // Re int u x_d eta
            P[D + d] -= ui * dir * de;          // -Im int u d_d eta
        }
        P[2 * D] += ui * s_eta;                 // Im int u (s + x.grad) eta
        P[2 * D + 1] += ur * e;                 // Re int u eta
    }
    for (auto& p : P) p *= cell;
    return P;
}

namespace detail {

/// omega(g^-1 u - eta, e_j eta) for all j, evaluated without transforming u:
/// omega(g^-1 u, e_j eta) = (1/mu) omega(u, g.(e_j eta)) and the transformed
/// generator fields are sampled pointwise from radial data.
template <int D>
inline std::array<double, n_generators<D>> fit_residuals(const Field<D>& u,
                                                         const GroupElement<D>& g,
                                                         const GroundState<D>& gs) {
    std::array<double, n_generators<D>> F{};
    const double cell = u.grid.cell();
    const double amp = std::pow(g.mu, gs.scale_weight);
    const int m = n_generators<D>;
    for (std::size_t i = 0; i < u.size(); ++i) {
        auto x = u.point(i);
        Vec<D> y;
        double r2 = 0.0;
        for (int d = 0; d < D; ++d) {
            y[d] = g.mu * (x[d] - g.a[d]);
            r2 += y[d] * y[d];
        }
        double r = std::sqrt(r2);
        double e = gs.eta_at(r), de = gs.deta_at(r);
        double ph = g.gamma;
        for (int d = 0; d < D; ++d) ph += g.v[d] * (x[d] - g.a[d]);
        // z = u conj(P) with P the phase/amplitude factor of the action
        cplx z = u[i] * cplx(std::cos(ph), -std::sin(ph)) * amp;
        double zr = z.real(), zi = z.imag();
        for (int d = 0; d < D; ++d) {
            double dir = (r > 0.0) ? y[d] / r : 0.0;
            F[d] += (-dir * de) * zi;          // Im(z conj(real psi)) = psi Im z
            F[D + d] += -y[d] * e * zr;        // Im(z conj(i q)) = -q Re z
        }
        F[2 * D] += -e * zr;
        F[2 * D + 1] += (double(gs.scale_weight) * e + r * de) * zi;
    }
    for (int j = 0; j < m; ++j) F[j] *= cell / g.mu;
    F[2 * D] += gs.mass; // subtract omega(eta, i eta) = -mass
    return F;
}

template <int D>
inline double max_abs(const std::array<double, n_generators<D>>& a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::fabs(x));
    return m;
}

} // namespace detail

template <int D>
struct FitOptions {
    double tol = 1e-10;
    int max_iter = 50;
    bool refresh_jacobian_each_iter = false; // chord Newton by default
};

/// Newton solve of the 2D+2 orthogonality conditions omega(g^-1 u - eta, e_j eta) = 0,
/// warm-started from g_guess, with a finite-difference Jacobian in the group
/// parameters and a coarse (a, gamma) scan as a fallback when Newton stalls.
template <int D>
inline Decomposition<D> fit(const Field<D>& u, const GroupElement<D>& g_guess,
                            const GroundState<D>& gs, const FitOptions<D>& opt = {}) {
    if (u.grid != gs.grid) throw std::invalid_argument("fit: grid mismatch");
    const int m = n_generators<D>;
    GroupElement<D> g = g_guess;

    auto pack = [&](const GroupElement<D>& ge) {
        std::array<double, n_generators<D>> p{};
        for (int d = 0; d < D; ++d) {
            p[d] = ge.a[d];
            p[D + d] = ge.v[d];
        }
        p[2 * D] = ge.gamma;
        p[2 * D + 1] = ge.mu;
        return p;
    };
    auto unpack = [&](const std::array<double, n_generators<D>>& p) {
        GroupElement<D> ge;
        for (int d = 0; d < D; ++d) {
            ge.a[d] = p[d];
            ge.v[d] = p[D + d];
        }
        ge.gamma = p[2 * D];
        ge.mu = p[2 * D + 1];
        return ge;
    };

    auto residual = [&](const GroupElement<D>& ge) { return detail::fit_residuals(u, ge, gs); };
    auto F = residual(g);
    double fn = detail::max_abs<D>(F);

    Matrix J(m, m);
    bool have_j = false;
    int stalls = 0;
    int it = 0;
    for (; it < opt.max_iter && fn >= opt.tol; ++it) {
        if (!have_j || opt.refresh_jacobian_each_iter) {
            auto p0 = pack(g);
            for (int c = 0; c < m; ++c) {
                double step = (c == 2 * D + 1) ? 1e-6 * std::fabs(p0[c]) : 1e-6;
                auto pp = p0, pm = p0;
                pp[c] += step;
                pm[c] -= step;
                auto Fp = residual(unpack(pp));
                auto Fm = residual(unpack(pm));
                for (int r = 0; r < m; ++r) J(r, c) = (Fp[r] - Fm[r]) / (2.0 * step);
            }
            have_j = true;
        }
        std::vector<double> rhs(m);
        for (int r = 0; r < m; ++r) rhs[r] = -F[r];
        std::vector<double> dp;
        try {
            dp = solve_lu(J, rhs);
        } catch (const std::runtime_error&) {
            throw FitDivergenceError("fit: singular Jacobian (left the soliton tube?)");
        }
        double lam = 1.0;
        auto p0 = pack(g);
        bool improved = false;
        for (int back = 0; back < 8; ++back, lam *= 0.5) {
            auto pn = p0;
            for (int c = 0; c < m; ++c) pn[c] += lam * dp[c];
            if (pn[2 * D + 1] <= 0.1 * p0[2 * D + 1]) continue; // keep mu positive
            auto gn = unpack(pn);
            auto Fn = residual(gn);
            double fnn = detail::max_abs<D>(Fn);
            if (fnn < fn) {
                g = gn;
                F = Fn;
                fn = fnn;
                improved = true;
                break;
            }
        }
        if (!improved) {
            if (++stalls == 1) {
                have_j = false; // refresh Jacobian once
                continue;
            }
            // coarse scan over (a, gamma) around the current point, then retry
            double dx = u.grid.spacing();
            GroupElement<D> best = g;
            double bestf = fn;
            for (int sa = -2; sa <= 2; ++sa)
                for (int sg = 0; sg < 8; ++sg) {
                    GroupElement<D> t = g;
                    t.a[0] += 0.5 * dx * sa;
                    t.gamma += 2.0 * M_PI * sg / 8.0;
                    auto Ft = residual(t);
                    double ft = detail::max_abs<D>(Ft);
                    if (ft < bestf) {
                        bestf = ft;
                        best = t;
                    }
                }
            if (bestf >= fn)
                throw FitDivergenceError("fit: Newton stalled at residual " + std::to_string(fn));
            g = best;
            F = residual(g);
            fn = detail::max_abs<D>(F);
            have_j = false;
        }
    }
    if (fn >= opt.tol)
        throw FitDivergenceError("fit: residual " + std::to_string(fn) + " after " +
                                 std::to_string(opt.max_iter) + " iterations");

    Decomposition<D> dec;
    dec.g = g;
    Field<D> pulled = act(inverse(g), u, gs.scale_weight);
    dec.w = pulled - gs.eta;
    auto ef = generator_fields(gs);
    for (int j = 0; j < m; ++j) dec.residuals[j] = symplectic_form(dec.w, ef[j]);
    dec.w_h1 = std::sqrt(h1_norm_sq(dec.w));
    dec.iterations = it;
    return dec;
}

/// alpha = 1/2 int V(x/mu+a) eta^2 - 1/(2mu) int x.grad V(x/mu+a) eta^2,
/// beta = 1/(2mu) int grad V(x/mu+a) eta^2.
template <int D>
inline std::pair<double, Vec<D>> alpha_beta(const std::type_identity_t<Vec<D>>& a, double mu,
                                            const Potential<D>& pot, const GroundState<D>& gs) {
    auto m = potential_moments(pot, gs, a, mu);
    double alpha = 0.5 * m.mean - 0.5 / mu * m.xgrad;
    Vec<D> beta;
    for (int d = 0; d < D; ++d) beta[d] = 0.5 / mu * m.grad[d];
    return {alpha, beta};
}

/// Quadratic Taylor source: Q(x) = a0 + x^T B x with B = -hess V(a)/(2 mu^2)
/// and a0 = (I2/2) tr B, which makes Q eta symplectically orthogonal to the
/// generalized kernel (in particular int Q eta (s + x.grad) eta = 0).
template <int D>
inline QuadraticSource<D> quadratic_source(const std::type_identity_t<Vec<D>>& a, double mu,
                                           const Potential<D>& pot, const GroundState<D>& gs) {
    QuadraticSource<D> q;
    auto H = pot.hessV(a);
    double tr = 0.0;
    for (int i = 0; i < D; ++i) {
        for (int j = 0; j < D; ++j) q.b[i][j] = -H[i][j] / (2.0 * mu * mu);
        tr += q.b[i][i];
    }
    q.a0 = 0.5 * gs.i2 * tr;
    return q;
}

/// X = mu sum (-a'_j + v_j) e_j + sum (v'_j/mu + beta_j) e_{D+j}
///   + (-gamma' + a'.v - |v|^2/2 + lambda mu^2 - alpha) e_phase - (mu'/mu) e_scale.
/// The + on the boost slot is fixed by X = 0 along the exact effective flow
/// (v' = -mu beta there); the w-equation residual check confirms it.
template <int D>
inline LieCoeffs<D> compute_X(const GroupElement<D>& g, const GroupTangent<D>& gdot, double alpha,
                              const std::type_identity_t<Vec<D>>& beta, double lambda) {
    LieCoeffs<D> x;
    double adotv = 0.0;
    for (int d = 0; d < D; ++d) {
        x.translation(d) = g.mu * (-gdot.da[d] + g.v[d]);
        x.boost(d) = gdot.dv[d] / g.mu + beta[d];
        adotv += gdot.da[d] * g.v[d];
    }
    x.phase() = -gdot.dgamma + adotv - 0.5 * norm2<D>(g.v) + lambda * g.mu * g.mu - alpha;
    x.scaling() = -gdot.dmu / g.mu;
    return x;
}

template <int D>
struct WtildeResult {
    Field<D> wtilde;
    std::array<std::array<double, D>, D> theta{}; // theta_jk for j <= k
};

/// wtilde = sum_{j<=k} (-d_j d_k V(a)/mu^4) f_jk and the rates
/// theta_jk = d/dt[-d_j d_k V(a)/mu^4] for the supplied (a', mu').
template <int D>
inline WtildeResult<D> build_wtilde(const std::type_identity_t<Vec<D>>& a, double mu,
                                    const Potential<D>& pot, const GroundState<D>& gs,
                                    const CorrectorBasis<D>& cb,
                                    const std::type_identity_t<Vec<D>>& adot, double mudot) {
    WtildeResult<D> out;
    out.wtilde = Field<D>(gs.grid);
    auto H = pot.hessV(a);
    const double mu4 = mu * mu * mu * mu;
    for (int j = 0; j < D; ++j)
        for (int k = j; k < D; ++k)
            axpy<D>(cplx(-H[j][k] / mu4, 0.0), cb.f[j][k], out.wtilde);

    // directional derivative of hess V along a' by centered differences
    double anorm = 0.0;
    for (int d = 0; d < D; ++d) anorm = std::max(anorm, std::fabs(adot[d]));
    double epsd = 1e-4 / (anorm + 1.0);
    Vec<D> ap = a, am = a;
    for (int d = 0; d < D; ++d) {
        ap[d] += epsd * adot[d];
        am[d] -= epsd * adot[d];
    }
    auto Hp = pot.hessV(ap), Hm = pot.hessV(am);
    for (int j = 0; j < D; ++j)
        for (int k = j; k < D; ++k) {
            double dH = (Hp[j][k] - Hm[j][k]) / (2.0 * epsd);
            out.theta[j][k] = -dH / mu4 + 4.0 * H[j][k] * mudot / (mu4 * mu);
        }
    return out;
}

/// Lyapounov functional <L w1, w1>.
template <int D>
inline double lyapounov(const Field<D>& w1, const LinearizedOperator<D>& lop) {
    return inner(lop.apply(w1), w1);
}

/// Nonlinear remainder N(w) = K(|w|^2) eta + K(eta (w + conj w)) w + K(|w|^2) w,
/// K = |x|^-1 * in 3D and the identity in 1D.
template <int D>
inline Field<D> nonlinear_term(const Field<D>& w, const GroundState<D>& gs,
                               const LinearizedOperator<D>& lop) {
    Field<D> w2(w.grid), ew(w.grid);
    for (std::size_t i = 0; i < w.size(); ++i) {
        w2[i] = cplx(std::norm(w[i]), 0.0);
        ew[i] = cplx(gs.eta[i].real() * 2.0 * w[i].real(), 0.0); // eta (w + conj w)
    }
    Field<D> Kw2, Kew;
    if constexpr (D == 3) {
        Kw2 = coulomb_convolve(w2, lop.nl.kernel);
        Kew = coulomb_convolve(ew, lop.nl.kernel);
    } else {
        Kw2 = w2;
        Kew = ew;
    }
    Field<D> r(w.grid);
    for (std::size_t i = 0; i < w.size(); ++i)
        r[i] = Kw2[i].real() * gs.eta[i].real() + Kew[i].real() * w[i] + Kw2[i].real() * w[i];
    return r;
}

/// Right-hand side of the w-equation (diagnostic):
/// dw/dt = X eta + i[-V(x/mu+a) + alpha + beta.x] eta + X w
///       + i[-V(x/mu+a) + alpha + beta.x] w + i mu^2 (-L w + N(w)).
template <int D>
inline Field<D> weq_rhs(const Field<D>& w, const GroupElement<D>& g, const GroupTangent<D>& gdot,
                        const Potential<D>& pot, const GroundState<D>& gs,
                        const LinearizedOperator<D>& lop) {
    auto [alpha, beta] = alpha_beta(g.a, g.mu, pot, gs);
    LieCoeffs<D> X = compute_X(g, gdot, alpha, beta, gs.lambda);
    Field<D> etaw = gs.eta + w;
    Field<D> rhs = apply_lie(X, etaw, gs.scale_weight);
    // multiplier i(-V + alpha + beta.x) on (eta + w)
    for (std::size_t i = 0; i < w.size(); ++i) {
        auto x = w.point(i);
        Vec<D> z;
        for (int d = 0; d < D; ++d) z[d] = x[d] / g.mu + g.a[d];
        double m = -pot.V(z) + alpha;
        for (int d = 0; d < D; ++d) m += beta[d] * x[d];
        rhs[i] += cplx(0.0, m) * etaw[i];
    }
    Field<D> Lw = lop.apply(w);
    Field<D> Nw = nonlinear_term(w, gs, lop);
    const double mu2 = g.mu * g.mu;
    for (std::size_t i = 0; i < w.size(); ++i)
        rhs[i] += cplx(0.0, mu2) * (Nw[i] - Lw[i]);
    return rhs;
}

/// Exact mass relation behind the mu bound: mu (mass(eta) + ||w||^2) = mass(u0).
template <int D>
inline double mu_consistency_gap(const Decomposition<D>& dec, const GroundState<D>& gs,
                                 double mass_u0) {
    double wl2 = mass(dec.w);
    return dec.g.mu * (gs.mass + wl2) - mass_u0;
}

} // namespace soldyn

#endif
