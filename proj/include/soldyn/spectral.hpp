#ifndef SOLDYN_SPECTRAL_HPP
#define SOLDYN_SPECTRAL_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "soldyn/dense.hpp"
#include "soldyn/grid.hpp"
#include "soldyn/groundstate.hpp"
#include "soldyn/pde.hpp"
#include "soldyn/symmetry.hpp"

namespace soldyn {

struct IncompatibleSourceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Q(x) = a0 + x^T B x with symmetric B (1D: B is 1x1).
template <int D>
struct QuadraticSource {
    double a0 = 0.0;
    std::array<std::array<double, D>, D> b{};

    double eval(const Vec<D>& x) const {
        double s = a0;
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j) s += b[i][j] * x[i] * x[j];
        return s;
    }
};

namespace detail {

template <int D>
inline void require_real(const Field<D>& w, const char* who) {
    double im = 0.0, re = 0.0;
    for (const auto& z : w.v) {
        im += z.imag() * z.imag();
        re += std::norm(z);
    }
    if (im > 1e-20 * (re + 1e-300))
        throw std::domain_error(std::string(who) + ": input must be real-valued");
}

} // namespace detail

/// Linearization of the energy about eta. The Hartree convolution uses the
/// same truncated-Coulomb multiplier as the PDE stepper.
template <int D>
struct LinearizedOperator {
    const GroundState<D>* gs = nullptr;
    Field<D> pot;   // |x|^-1 * eta^2 (3D) or eta^2 (1D)
    Nonlinearity<D> nl;
    double lambda = 0.0;

    explicit LinearizedOperator(const GroundState<D>& g) : gs(&g), nl(g.grid) {
        lambda = g.lambda;
        pot = nl.potential(g.eta);
    }

    Field<D> lminus_term(const Field<D>& w) const {
        Field<D> lap = w;
        apply_multiplier(lap, [](const Vec<D>& k) { return -norm2<D>(k); });
        Field<D> r(w.grid);
        for (std::size_t i = 0; i < w.size(); ++i)
            r[i] = -0.5 * lap[i] - pot[i].real() * w[i] + lambda * w[i];
        return r;
    }

    /// L+ w = -1/2 lap w - 2 K(eta w) eta - (K eta^2) w + lambda w (K = |x|^-1* in 3D,
    /// identity in 1D, giving -3 eta^2 w there).
    Field<D> apply_plus(const Field<D>& w) const {
        detail::require_real(w, "apply_Lplus");
        Field<D> r = lminus_term(w);
        const Field<D>& eta = gs->eta;
        if constexpr (D == 3) {
            Field<3> ew(w.grid);
            for (std::size_t i = 0; i < w.size(); ++i)
                ew[i] = cplx(eta[i].real() * w[i].real(), 0.0);
            Field<3> conv = coulomb_convolve(ew, nl.kernel);
            for (std::size_t i = 0; i < w.size(); ++i)
                r[i] -= 2.0 * conv[i].real() * eta[i].real();
        } else {
            for (std::size_t i = 0; i < w.size(); ++i)
                r[i] -= 2.0 * std::norm(eta[i]) * w[i].real();
        }
        return r;
    }

    Field<D> apply_minus(const Field<D>& w) const {
        detail::require_real(w, "apply_Lminus");
        return lminus_term(w);
    }

    /// L on a complex field: L+ on the real part, L- on the imaginary part.
    Field<D> apply(const Field<D>& w) const {
        Field<D> re(w.grid), im(w.grid);
        for (std::size_t i = 0; i < w.size(); ++i) {
            re[i] = cplx(w[i].real(), 0.0);
            im[i] = cplx(w[i].imag(), 0.0);
        }
        Field<D> lp = apply_plus(re);
        Field<D> lm = apply_minus(im);
        Field<D> r(w.grid);
        for (std::size_t i = 0; i < w.size(); ++i) r[i] = cplx(lp[i].real(), lm[i].real());
        return r;
    }
};

namespace detail {

/// Preconditioned MINRES for the symmetric (indefinite) operator A, with
/// deflation of the given L2-orthonormal directions. M^-1 = (-1/2 lap + lambda)^-1.
template <int D, typename ApplyA>
inline Field<D> minres_deflated(const Grid<D>& grid, ApplyA&& A, const Field<D>& b_in,
                                const std::vector<Field<D>>& deflate, double lambda,
                                double tol, std::size_t itmax, double* final_res = nullptr) {
    auto project = [&](Field<D>& f) {
        for (const auto& q : deflate) {
            double c = inner(f, q);
            axpy<D>(cplx(-c, 0.0), q, f);
        }
    };
    auto precond = [&](const Field<D>& r) {
        Field<D> y = r;
        apply_multiplier(y, [&](const Vec<D>& k) { return 1.0 / (0.5 * norm2<D>(k) + lambda); });
        return y;
    };
    Field<D> b = b_in;
    project(b);
    const double bnorm = std::sqrt(inner(b, b));
    Field<D> x(grid);
    if (bnorm == 0.0) return x;

    Field<D> r1 = b;
    Field<D> y = precond(r1);
    double beta1 = std::sqrt(inner(r1, y));
    if (beta1 <= 0.0) return x;

    double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
    double cs = -1.0, sn = 0.0, oldeps = 0.0;
    Field<D> r2 = r1;
    Field<D> w(grid), w2(grid), w1(grid);

    for (std::size_t it = 1; it <= itmax; ++it) {
        Field<D> v = cplx(1.0 / beta, 0.0) * y;
        Field<D> Av = A(v);
        project(Av);
        if (it >= 2) axpy<D>(cplx(-beta / oldb, 0.0), r1, Av);
        double alfa = inner(v, Av);
        axpy<D>(cplx(-alfa / beta, 0.0), r2, Av);
        r1 = r2;
        r2 = Av;
        y = precond(r2);
        oldb = beta;
        beta = std::sqrt(std::max(0.0, inner(r2, y)));
        bool exhausted = beta < 1e-14 * beta1; // Lanczos breakdown: space exhausted
        if (exhausted) beta = 0.0;
        oldeps = epsln;
        double delta = cs * dbar + sn * alfa;
        double gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        double gamma = std::sqrt(gbar * gbar + beta * beta);
        gamma = std::max(gamma, 1e-300);
        cs = gbar / gamma;
        sn = beta / gamma;
        double phi = cs * phibar;
        phibar = sn * phibar;
        w1 = w2;
        w2 = w;
        w = v;
        axpy<D>(cplx(-oldeps, 0.0), w1, w);
        axpy<D>(cplx(-delta, 0.0), w2, w);
        w = cplx(1.0 / gamma, 0.0) * w;
        axpy<D>(cplx(phi, 0.0), w, x);
        if (exhausted || phibar < 0.1 * tol * bnorm || phibar < 1e-15 * bnorm) break;
    }
    project(x);
    // true residual
    Field<D> res = A(x);
    for (std::size_t i = 0; i < res.size(); ++i) res[i] = b[i] - res[i];
    project(res);
    double rn = std::sqrt(inner(res, res));
    if (final_res) *final_res = rn;
    if (rn > tol) throw NonConvergenceError("solve_Lplus: MINRES stalled, residual " + std::to_string(rn));
    return x;
}

} // namespace detail

/// The translation kernel directions d_j eta, L2-orthonormalized.
template <int D>
inline std::vector<Field<D>> lplus_kernel_fields(const GroundState<D>& gs) {
    std::vector<Field<D>> kern;
    for (int d = 0; d < D; ++d) {
        Field<D> k(gs.grid);
        for (std::size_t i = 0; i < k.size(); ++i) {
            auto x = k.point(i);
            double r = std::sqrt(norm2<D>(x));
            double dir = (r > 0.0) ? x[d] / r : 0.0;
            k[i] = cplx(dir * gs.deta_at(r), 0.0);
        }
        for (const auto& q : kern) axpy<D>(cplx(-inner(k, q), 0.0), q, k);
        double nn = std::sqrt(inner(k, k));
        k = cplx(1.0 / nn, 0.0) * k;
        kern.push_back(k);
    }
    return kern;
}

/// Solve L+ f = rhs in (ker L+)^perp for an arbitrary real rhs, deflating the
/// translation kernel. An optional initial guess is handled by solving for
/// the correction.
template <int D>
inline Field<D> solve_Lplus_field(const Field<D>& rhs, const GroundState<D>& gs, double tol,
                                  const LinearizedOperator<D>* lop = nullptr,
                                  const Field<D>* x0 = nullptr, std::size_t itmax = 2000) {
    LinearizedOperator<D> local_op(gs);
    const LinearizedOperator<D>& L = lop ? *lop : local_op;
    auto kern = lplus_kernel_fields(gs);
    double proj = 0.0;
    for (const auto& q : kern) proj = std::hypot(proj, inner(rhs, q));
    double rhsn = std::sqrt(inner(rhs, rhs));
    if (rhsn > 0.0 && proj > 10.0 * tol * std::max(1.0, rhsn))
        throw IncompatibleSourceError("solve_Lplus: source has a kernel component of size " +
                                      std::to_string(proj));
    // Krylov iterates are mathematically real; roundoff imaginary parts are
    // stripped before each operator application
    auto apply_real = [&](const Field<D>& v) {
        Field<D> vr = v;
        for (auto& z : vr.v) z = cplx(z.real(), 0.0);
        return L.apply_plus(vr);
    };
    if (x0) {
        Field<D> g0 = *x0;
        for (const auto& q : kern) axpy<D>(cplx(-inner(g0, q), 0.0), q, g0);
        Field<D> r0 = apply_real(g0);
        for (std::size_t i = 0; i < rhs.size(); ++i) r0[i] = rhs[i] - r0[i];
        Field<D> corr =
            detail::minres_deflated<D>(gs.grid, apply_real, r0, kern, gs.lambda, tol, itmax);
        axpy<D>(cplx(1.0, 0.0), corr, g0);
        return g0;
    }
    return detail::minres_deflated<D>(gs.grid, apply_real, rhs, kern, gs.lambda, tol, itmax);
}

/// Solve L+ f = Q eta for a quadratic source.
template <int D>
inline Field<D> solve_Lplus(const QuadraticSource<D>& src, const GroundState<D>& gs, double tol,
                            const LinearizedOperator<D>* lop = nullptr,
                            const Field<D>* x0 = nullptr, std::size_t itmax = 2000) {
    Field<D> rhs(gs.grid);
    for (std::size_t i = 0; i < rhs.size(); ++i) {
        auto x = rhs.point(i);
        rhs[i] = cplx(src.eval(x) * gs.eta[i].real(), 0.0);
    }
    return solve_Lplus_field(rhs, gs, tol, lop, x0, itmax);
}

/// omega(f, e_j eta) for all generators (the corrector orthogonality residuals).
template <int D>
inline std::array<double, n_generators<D>> symplectic_residuals(const Field<D>& f,
                                                                const GroundState<D>& gs) {
    auto ef = generator_fields(gs);
    std::array<double, n_generators<D>> r{};
    for (int j = 0; j < n_generators<D>; ++j) r[j] = symplectic_form(f, ef[j]);
    return r;
}

namespace detail {

inline void hermite_values(double xi, int kmax, std::vector<double>& out) {
    out.resize(kmax);
    double h0 = std::pow(M_PI, -0.25) * std::exp(-0.5 * xi * xi);
    if (kmax > 0) out[0] = h0;
    if (kmax > 1) out[1] = std::sqrt(2.0) * xi * h0;
    for (int k = 2; k < kmax; ++k)
        out[k] = std::sqrt(2.0 / k) * xi * out[k - 1] - std::sqrt(double(k - 1) / k) * out[k - 2];
}

/// Tensor Hermite basis scaled to the soliton width, as real grid vectors.
template <int D>
inline std::vector<std::vector<double>> hermite_basis(const Grid<D>& grid, double sigma,
                                                      std::size_t n_basis) {
    // enumerate multi-indices by total degree
    std::vector<std::array<int, D>> idx;
    for (int p = 0; idx.size() < n_basis; ++p) {
        if constexpr (D == 1) {
            idx.push_back({p});
        } else {
            for (int i = 0; i <= p && idx.size() < n_basis; ++i)
                for (int j = 0; i + j <= p && idx.size() < n_basis; ++j) {
                    int k = p - i - j;
                    idx.push_back({i, j, k});
                }
        }
        if (p > 200) break;
    }
    int kmax = 0;
    for (auto& a : idx)
        for (int d = 0; d < D; ++d) kmax = std::max(kmax, a[d] + 1);

    const std::size_t n = grid.n;
    std::vector<std::vector<double>> table(n, std::vector<double>(kmax));
    for (std::size_t i = 0; i < n; ++i) hermite_values(grid.coord(i) / sigma, kmax, table[i]);

    std::vector<std::vector<double>> basis;
    basis.reserve(idx.size());
    Field<D> probe(grid);
    for (auto& a : idx) {
        std::vector<double> b(probe.size());
        for (std::size_t i = 0; i < probe.size(); ++i) {
            auto ix = probe.unflatten(i);
            double v = 1.0;
            for (int d = 0; d < D; ++d) v *= table[ix[d]][a[d]];
            b[i] = v;
        }
        basis.push_back(std::move(b));
    }
    return basis;
}

} // namespace detail

/// Corrector building blocks f_jk = L+^-1 [S_jk eta], S_jk = (1 - d_jk/2) x_j x_k
/// + d_jk I2/4; fixed once per ground state.
template <int D>
struct CorrectorBasis {
    std::array<std::array<Field<D>, D>, D> f; // f[j][k] for j <= k
};

template <int D>
inline CorrectorBasis<D> build_corrector_basis(const GroundState<D>& gs, double tol,
                                               const LinearizedOperator<D>* lop = nullptr) {
    CorrectorBasis<D> cb;
    for (int j = 0; j < D; ++j)
        for (int k = j; k < D; ++k) {
            QuadraticSource<D> s;
            if (j == k) {
                s.b[j][j] = 0.5;
                s.a0 = gs.i2 / 4.0;
            } else {
                s.b[j][k] = s.b[k][j] = 0.5;
                s.a0 = 0.0;
            }
            cb.f[j][k] = solve_Lplus(s, gs, tol, lop);
        }
    return cb;
}

template <int D>
struct CoercivityReport {
    double constrained_min = 0.0;   // min over both blocks with symplectic constraints
    double plus_block_min = 0.0;    // constrained L+ block
    double minus_block_min = 0.0;   // constrained L- block
    double unconstrained_plus = 0.0; // no constraints; negative direction shows here
    Field<D> minimizer_plus;        // constrained L+ block argmin (real field)
};

/// Constrained Rayleigh quotient min of <L w, w>/||w||_H1 over a Hermite
/// Galerkin space, with the symplectic-orthogonality constraints imposed by
/// projection. Real block: w_re in {x_j eta, eta}^perp; imaginary block:
/// w_im in {d_j eta, (s + x.grad) eta}^perp.
template <int D>
inline CoercivityReport<D> coercivity_constant(const GroundState<D>& gs, std::size_t n_basis) {
    if (n_basis < 50) throw std::invalid_argument("coercivity_constant: need n_basis >= 50");
    LinearizedOperator<D> L(gs);
    const double sigma = 1.0 / std::sqrt(2.0 * gs.lambda);
    auto basis = detail::hermite_basis<D>(gs.grid, sigma, n_basis);
    const std::size_t nb = basis.size();
    const double cell = gs.grid.cell();

    auto to_field = [&](const std::vector<double>& b) {
        Field<D> f(gs.grid);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = cplx(b[i], 0.0);
        return f;
    };
    auto dotv = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s * cell;
    };

    // constraint fields
    auto ef = generator_fields(gs);
    std::vector<std::vector<double>> con_plus, con_minus;
    {
        const int m = n_generators<D>;
        for (int d = 0; d < D; ++d) {
            std::vector<double> xj(gs.eta.size());
            for (std::size_t i = 0; i < xj.size(); ++i)
                xj[i] = ef[D + d][i].imag(); // x_j eta
            con_plus.push_back(std::move(xj));
            std::vector<double> dj(gs.eta.size());
            for (std::size_t i = 0; i < dj.size(); ++i) dj[i] = -ef[d][i].real(); // d_j eta
            con_minus.push_back(std::move(dj));
        }
        std::vector<double> e(gs.eta.size()), S(gs.eta.size());
        for (std::size_t i = 0; i < e.size(); ++i) {
            e[i] = ef[2 * D][i].imag();      // eta
            S[i] = ef[m - 1][i].real();      // (s + x.grad) eta
        }
        con_plus.push_back(std::move(e));
        con_minus.push_back(std::move(S));
    }
    auto orthonormalize = [&](std::vector<std::vector<double>>& cons) {
        for (std::size_t i = 0; i < cons.size(); ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                double c = dotv(cons[i], cons[j]);
                for (std::size_t k = 0; k < cons[i].size(); ++k) cons[i][k] -= c * cons[j][k];
            }
            double nn = std::sqrt(dotv(cons[i], cons[i]));
            for (auto& v : cons[i]) v /= nn;
        }
    };
    orthonormalize(con_plus);
    orthonormalize(con_minus);

    auto block_min = [&](bool plus, const std::vector<std::vector<double>>* cons,
                         Field<D>* argmin = nullptr) {
        std::vector<std::vector<double>> bb = basis;
        if (cons)
            for (auto& b : bb)
                for (const auto& q : *cons) {
                    double c = dotv(b, q);
                    for (std::size_t k = 0; k < b.size(); ++k) b[k] -= c * q[k];
                }
        Matrix A(nb, nb), B(nb, nb);
        for (std::size_t j = 0; j < nb; ++j) {
            Field<D> fj = to_field(bb[j]);
            Field<D> Lf = plus ? L.apply_plus(fj) : L.apply_minus(fj);
            Field<D> Hf = fj; // (1 - lap) f for the H1 Gram
            apply_multiplier(Hf, [](const Vec<D>& k) { return 1.0 + norm2<D>(k); });
            for (std::size_t i = 0; i < nb; ++i) {
                double aij = 0.0, bij = 0.0;
                const auto& bi = bb[i];
                for (std::size_t k = 0; k < bi.size(); ++k) {
                    aij += bi[k] * Lf[k].real();
                    bij += bi[k] * Hf[k].real();
                }
                A(i, j) = aij * cell;
                B(i, j) = bij * cell;
            }
        }
        for (std::size_t i = 0; i < nb; ++i)
            for (std::size_t j = i + 1; j < nb; ++j) {
                double a = 0.5 * (A(i, j) + A(j, i));
                A(i, j) = A(j, i) = a;
                double b = 0.5 * (B(i, j) + B(j, i));
                B(i, j) = B(j, i) = b;
            }
        std::vector<double> coef;
        double ev = min_generalized_eig(A, B, argmin ? &coef : nullptr);
        if (argmin) {
            *argmin = Field<D>(gs.grid);
            for (std::size_t j = 0; j < nb; ++j)
                for (std::size_t k = 0; k < argmin->size(); ++k)
                    (*argmin)[k] += cplx(coef[j] * bb[j][k], 0.0);
        }
        return ev;
    };

    CoercivityReport<D> rep;
    rep.plus_block_min = block_min(true, &con_plus, &rep.minimizer_plus);
    rep.minus_block_min = block_min(false, &con_minus);
    rep.constrained_min = std::min(rep.plus_block_min, rep.minus_block_min);
    rep.unconstrained_plus = block_min(true, nullptr);
    if (rep.constrained_min < -1e-6)
        throw std::runtime_error("coercivity_constant: constrained minimum is negative; "
                                 "discretization or orthogonality failure");
    return rep;
}

/// Max relative out-of-span residual of iL(e_j eta) against span{e_k eta}.
/// Kernel directions give iL(e_j eta) ~ 0; their residual is normalized by
/// the natural scale lambda ||e_j eta|| rather than by the vanishing output.
template <int D>
inline double manifold_invariance_check(const GroundState<D>& gs) {
    LinearizedOperator<D> L(gs);
    auto ef = generator_fields(gs);
    const int m = n_generators<D>;
    Matrix G(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) G(i, j) = inner(ef[i], ef[j]);
    double worst = 0.0;
    for (int j = 0; j < m; ++j) {
        Field<D> z = L.apply(ef[j]);
        for (auto& zz : z.v) zz *= cplx(0.0, 1.0); // i L (e_j eta)
        double zn = std::sqrt(inner(z, z));
        double scale = std::max(zn, gs.lambda * std::sqrt(inner(ef[j], ef[j])));
        std::vector<double> rhsv(m);
        for (int k = 0; k < m; ++k) rhsv[k] = inner(z, ef[k]);
        auto c = solve_lu(G, rhsv);
        Field<D> res = z;
        for (int k = 0; k < m; ++k) axpy<D>(cplx(-c[k], 0.0), ef[k], res);
        worst = std::max(worst, std::sqrt(inner(res, res)) / scale);
    }
    return worst;
}

} // namespace soldyn

#endif
