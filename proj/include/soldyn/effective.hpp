#ifndef SOLDYN_EFFECTIVE_HPP
#define SOLDYN_EFFECTIVE_HPP

#include <cmath>
#include <functional>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "soldyn/grid.hpp"
#include "soldyn/groundstate.hpp"

namespace soldyn {

/// Slowly varying external potential V(x) = W(h x). W comes from a small
/// analytic family so the eta^2-weighted integrals entering the flow have
/// closed forms in the cached trig moments of the ground state.
template <int D>
struct Potential {
    enum class Family { zero, trig, linear, quadratic };
    Family family = Family::zero;
    double h = 0.1;

    // trig: W(y) = sum_d amp_d cos(k_d y_d + phase_d)
    Vec<D> amp{}, wavek{}, phase{};
    // linear: W(y) = glin . y + c0
    Vec<D> glin{};
    double c0 = 0.0;
    // quadratic: W(y) = 1/2 y^T M y
    std::array<std::array<double, D>, D> mq{};

    static Potential zero_potential(double h) {
        Potential p;
        p.family = Family::zero;
        p.h = h;
        return p;
    }
    static Potential cosine(double h, const Vec<D>& amp_, const Vec<D>& k_, const Vec<D>& ph_) {
        Potential p;
        p.family = Family::trig;
        p.h = h;
        p.amp = amp_;
        p.wavek = k_;
        p.phase = ph_;
        return p;
    }
    static Potential linear(double h, const Vec<D>& g, double c) {
        Potential p;
        p.family = Family::linear;
        p.h = h;
        p.glin = g;
        p.c0 = c;
        return p;
    }
    static Potential quadratic(double h, const std::array<std::array<double, D>, D>& m) {
        Potential p;
        p.family = Family::quadratic;
        p.h = h;
        p.mq = m;
        return p;
    }

    double W(const Vec<D>& y) const {
        switch (family) {
        case Family::zero: return 0.0;
        case Family::trig: {
            double s = 0.0;
            for (int d = 0; d < D; ++d) s += amp[d] * std::cos(wavek[d] * y[d] + phase[d]);
            return s;
        }
        case Family::linear: {
            double s = c0;
            for (int d = 0; d < D; ++d) s += glin[d] * y[d];
            return s;
        }
        case Family::quadratic: {
            double s = 0.0;
            for (int i = 0; i < D; ++i)
                for (int j = 0; j < D; ++j) s += 0.5 * mq[i][j] * y[i] * y[j];
            return s;
        }
        }
        return 0.0;
    }
    Vec<D> gradW(const Vec<D>& y) const {
        Vec<D> g{};
        switch (family) {
        case Family::zero: break;
        case Family::trig:
            for (int d = 0; d < D; ++d) g[d] = -amp[d] * wavek[d] * std::sin(wavek[d] * y[d] + phase[d]);
            break;
        case Family::linear:
            for (int d = 0; d < D; ++d) g[d] = glin[d];
            break;
        case Family::quadratic:
            for (int i = 0; i < D; ++i) {
                double s = 0.0;
                for (int j = 0; j < D; ++j) s += 0.5 * (mq[i][j] + mq[j][i]) * y[j];
                g[i] = s;
            }
            break;
        }
        return g;
    }
    std::array<std::array<double, D>, D> hessW(const Vec<D>& y) const {
        std::array<std::array<double, D>, D> H{};
        switch (family) {
        case Family::zero: break;
        case Family::trig:
            for (int d = 0; d < D; ++d)
                H[d][d] = -amp[d] * wavek[d] * wavek[d] * std::cos(wavek[d] * y[d] + phase[d]);
            break;
        case Family::linear: break;
        case Family::quadratic:
            for (int i = 0; i < D; ++i)
                for (int j = 0; j < D; ++j) H[i][j] = 0.5 * (mq[i][j] + mq[j][i]);
            break;
        }
        return H;
    }

    double V(const Vec<D>& x) const {
        Vec<D> y;
        for (int d = 0; d < D; ++d) y[d] = h * x[d];
        return W(y);
    }
    Vec<D> gradV(const Vec<D>& x) const {
        Vec<D> y;
        for (int d = 0; d < D; ++d) y[d] = h * x[d];
        auto g = gradW(y);
        for (int d = 0; d < D; ++d) g[d] *= h;
        return g;
    }
    std::array<std::array<double, D>, D> hessV(const Vec<D>& x) const {
        Vec<D> y;
        for (int d = 0; d < D; ++d) y[d] = h * x[d];
        auto H = hessW(y);
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j) H[i][j] *= h * h;
        return H;
    }

    /// Sample V on a grid (once per run; V is time-independent).
    Field<D> sample(const Grid<D>& g) const {
        Field<D> f(g);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = cplx(V(f.point(i)), 0.0);
        return f;
    }
};

/// eta^2-weighted integrals of the potential around a soliton at (a, mu):
/// mean = int V(x/mu + a) eta^2 dx, grad_d = int d_d V(x/mu + a) eta^2 dx,
/// xgrad = int x . grad V(x/mu + a) eta^2 dx.
template <int D>
struct PotentialMoments {
    double mean = 0.0;
    Vec<D> grad{};
    double xgrad = 0.0;
};

template <int D>
inline PotentialMoments<D> potential_moments(const Potential<D>& pot, const GroundState<D>& gs,
                                             const std::type_identity_t<Vec<D>>& a, double mu) {
    PotentialMoments<D> m;
    using F = typename Potential<D>::Family;
    switch (pot.family) {
    case F::zero: break;
    case F::trig: {
        for (int d = 0; d < D; ++d) {
            double kappa = pot.wavek[d] * pot.h / mu;
            double theta = pot.wavek[d] * pot.h * a[d] + pot.phase[d];
            auto [rho, drho] = gs.trig_moment(kappa);
            m.mean += pot.amp[d] * std::cos(theta) * rho;
            m.grad[d] = -pot.amp[d] * pot.wavek[d] * pot.h * std::sin(theta) * rho;
            m.xgrad += pot.amp[d] * pot.wavek[d] * pot.h * std::cos(theta) * drho;
        }
        break;
    }
    case F::linear: {
        double ga = 0.0;
        for (int d = 0; d < D; ++d) ga += pot.glin[d] * a[d];
        m.mean = (pot.c0 + pot.h * ga) * gs.mass;
        for (int d = 0; d < D; ++d) m.grad[d] = pot.h * pot.glin[d] * gs.mass;
        m.xgrad = 0.0;
        break;
    }
    case F::quadratic: {
        double ama = 0.0, trm = 0.0;
        Vec<D> ma{};
        for (int i = 0; i < D; ++i) {
            trm += pot.mq[i][i];
            for (int j = 0; j < D; ++j) {
                double ms = 0.5 * (pot.mq[i][j] + pot.mq[j][i]);
                ama += ms * a[i] * a[j];
                ma[i] += ms * a[j];
            }
        }
        m.mean = 0.5 * pot.h * pot.h * (ama * gs.mass + trm * gs.i2 / (mu * mu));
        for (int d = 0; d < D; ++d) m.grad[d] = pot.h * pot.h * ma[d] * gs.mass;
        m.xgrad = pot.h * pot.h * trm * gs.i2 / mu;
        break;
    }
    }
    return m;
}

/// Same integrals by direct quadrature on the ground-state grid (consistency
/// oracle for the closed forms, and the path for arbitrary W handles).
template <int D>
inline PotentialMoments<D> potential_moments_quadrature(const Potential<D>& pot,
                                                        const GroundState<D>& gs,
                                                        const std::type_identity_t<Vec<D>>& a,
                                                        double mu) {
    PotentialMoments<D> m;
    const double cell = gs.grid.cell();
    for (std::size_t i = 0; i < gs.eta.size(); ++i) {
        auto x = gs.eta.point(i);
        double e2 = std::norm(gs.eta[i]);
        Vec<D> z;
        for (int d = 0; d < D; ++d) z[d] = x[d] / mu + a[d];
        m.mean += pot.V(z) * e2;
        auto g = pot.gradV(z);
        double xg = 0.0;
        for (int d = 0; d < D; ++d) {
            m.grad[d] += g[d] * e2;
            xg += x[d] * g[d];
        }
        m.xgrad += xg * e2;
    }
    m.mean *= cell;
    m.xgrad *= cell;
    for (int d = 0; d < D; ++d) m.grad[d] *= cell;
    return m;
}

template <int D>
struct EffectiveState {
    double t = 0.0;
    Vec<D> a{};
    Vec<D> v{};
    double gamma = 0.0;
    double mu = 1.0;
};

/// -(mu/2) int grad V(x/mu + a) eta^2 dx.
template <int D>
inline Vec<D> effective_force(const std::type_identity_t<Vec<D>>& a, double mu,
                              const Potential<D>& pot, const GroundState<D>& gs) {
    auto m = potential_moments(pot, gs, a, mu);
    Vec<D> f;
    for (int d = 0; d < D; ++d) f[d] = -0.5 * mu * m.grad[d];
    return f;
}

/// gamma' = |v|^2/2 + lambda mu^2 - alpha(a, mu), with
/// alpha = 1/2 int V eta^2 - 1/(2 mu) int x.grad V eta^2.
template <int D>
inline double gamma_rate(const EffectiveState<D>& st, const Potential<D>& pot,
                         const GroundState<D>& gs) {
    auto m = potential_moments(pot, gs, st.a, st.mu);
    double alpha = 0.5 * m.mean - 0.5 / st.mu * m.xgrad;
    return 0.5 * norm2<D>(st.v) + gs.lambda * st.mu * st.mu - alpha;
}

/// Restriction of the Hamiltonian to the soliton manifold,
/// |v|^2 mu / 2 + lambda mu^3 / 3 + (mu^4/2) int V eta^2(mu(x-a)).
template <int D>
inline double restricted_hamiltonian(const EffectiveState<D>& st, const Potential<D>& pot,
                                     const GroundState<D>& gs) {
    auto m = potential_moments(pot, gs, st.a, st.mu);
    return 0.5 * norm2<D>(st.v) * st.mu + gs.lambda * st.mu * st.mu * st.mu / 3.0 +
           0.5 * st.mu * m.mean;
}

template <int D>
using EffectiveTrajectory = std::vector<EffectiveState<D>>;

/// Fixed-step RK4 for a' = v, v' = effective_force, mu' = 0, gamma' = gamma_rate.
/// Every step is stored (dense output keyed by step index). A negative dt
/// integrates backward in time.
template <int D>
inline EffectiveTrajectory<D> integrate(const EffectiveState<D>& st0, const Potential<D>& pot,
                                        const GroundState<D>& gs, double T, double dt) {
    double vmax = std::max(1.0, std::sqrt(norm2<D>(st0.v)));
    if (std::fabs(dt) > 0.01 / vmax * (1.0 + 1e-12))
        throw std::invalid_argument("integrate: dt must satisfy |dt| <= 0.01/max(1,|v0|)");
    long nsteps = std::lround(T / std::fabs(dt));
    EffectiveTrajectory<D> traj;
    traj.reserve(std::size_t(nsteps) + 1);
    EffectiveState<D> y = st0;
    traj.push_back(y);

    struct Deriv {
        Vec<D> da, dv;
        double dgamma;
    };
    auto rhs = [&](const EffectiveState<D>& s) {
        Deriv d;
        d.da = s.v;
        d.dv = effective_force(s.a, s.mu, pot, gs);
        d.dgamma = gamma_rate(s, pot, gs);
        return d;
    };
    auto advanced = [&](const EffectiveState<D>& s, const Deriv& d, double step) {
        EffectiveState<D> r = s;
        for (int q = 0; q < D; ++q) {
            r.a[q] += step * d.da[q];
            r.v[q] += step * d.dv[q];
        }
        r.gamma += step * d.dgamma;
        return r;
    };

    double H0 = restricted_hamiltonian(y, pot, gs);
    for (long s = 0; s < nsteps; ++s) {
        Deriv k1 = rhs(y);
        Deriv k2 = rhs(advanced(y, k1, 0.5 * dt));
        Deriv k3 = rhs(advanced(y, k2, 0.5 * dt));
        Deriv k4 = rhs(advanced(y, k3, dt));
        EffectiveState<D> yn = y;
        for (int q = 0; q < D; ++q) {
            yn.a[q] += dt / 6.0 * (k1.da[q] + 2 * k2.da[q] + 2 * k3.da[q] + k4.da[q]);
            yn.v[q] += dt / 6.0 * (k1.dv[q] + 2 * k2.dv[q] + 2 * k3.dv[q] + k4.dv[q]);
        }
        yn.gamma += dt / 6.0 * (k1.dgamma + 2 * k2.dgamma + 2 * k3.dgamma + k4.dgamma);
        yn.t = st0.t + double(s + 1) * dt;
        double H1 = restricted_hamiltonian(yn, pot, gs);
        if (std::fabs(H1 - H0) > 1e-6 * std::max(1.0, std::fabs(H0)))
            throw std::runtime_error("integrate: single-step energy jump exceeds 1e-6");
        H0 = H1;
        y = yn;
        traj.push_back(y);
    }
    return traj;
}

struct OdeCompareReport {
    double sup_da = 0.0; // sup |a - abar|
    double sup_dv = 0.0; // sup |v - vbar|
};

/// Perturbed system a' = v + eps1, v' = force(a) + eps2 against the unforced
/// system with the same initial data; force(a) = -1/2 int grad V(x+a) eta^2
/// has the slow structure h f(h a) of the comparison lemma.
template <int D>
inline OdeCompareReport ode_compare(const Potential<D>& pot, const GroundState<D>& gs,
                                    const EffectiveState<D>& st0,
                                    const std::function<double(double)>& eps1,
                                    const std::function<double(double)>& eps2, double T,
                                    double dt) {
    auto force = [&](const Vec<D>& a) { return effective_force<D>(a, 1.0, pot, gs); };
    Vec<D> a = st0.a, v = st0.v, ab = st0.a, vb = st0.v;
    long nsteps = std::lround(T / dt);
    OdeCompareReport rep;

    auto rk4 = [&](Vec<D>& aa, Vec<D>& vv, double t, bool forced) {
        auto f = [&](const Vec<D>& pa, const Vec<D>& pv, double tt, Vec<D>& da, Vec<D>& dv) {
            double e1 = forced ? eps1(tt) : 0.0;
            double e2 = forced ? eps2(tt) : 0.0;
            auto F = force(pa);
            for (int d = 0; d < D; ++d) {
                da[d] = pv[d] + e1;
                dv[d] = F[d] + e2;
            }
        };
        Vec<D> k1a, k1v, k2a, k2v, k3a, k3v, k4a, k4v, ta, tv;
        f(aa, vv, t, k1a, k1v);
        for (int d = 0; d < D; ++d) { ta[d] = aa[d] + 0.5 * dt * k1a[d]; tv[d] = vv[d] + 0.5 * dt * k1v[d]; }
        f(ta, tv, t + 0.5 * dt, k2a, k2v);
        for (int d = 0; d < D; ++d) { ta[d] = aa[d] + 0.5 * dt * k2a[d]; tv[d] = vv[d] + 0.5 * dt * k2v[d]; }
        f(ta, tv, t + 0.5 * dt, k3a, k3v);
        for (int d = 0; d < D; ++d) { ta[d] = aa[d] + dt * k3a[d]; tv[d] = vv[d] + dt * k3v[d]; }
        f(ta, tv, t + dt, k4a, k4v);
        for (int d = 0; d < D; ++d) {
            aa[d] += dt / 6.0 * (k1a[d] + 2 * k2a[d] + 2 * k3a[d] + k4a[d]);
            vv[d] += dt / 6.0 * (k1v[d] + 2 * k2v[d] + 2 * k3v[d] + k4v[d]);
        }
    };

    for (long s = 0; s < nsteps; ++s) {
        double t = double(s) * dt;
        rk4(a, v, t, true);
        rk4(ab, vb, t, false);
        double da = 0.0, dv = 0.0;
        for (int d = 0; d < D; ++d) {
            da = std::max(da, std::fabs(a[d] - ab[d]));
            dv = std::max(dv, std::fabs(v[d] - vb[d]));
        }
        rep.sup_da = std::max(rep.sup_da, da);
        rep.sup_dv = std::max(rep.sup_dv, dv);
    }
    return rep;
}

} // namespace soldyn

#endif
