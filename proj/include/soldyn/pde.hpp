#ifndef SOLDYN_PDE_HPP
#define SOLDYN_PDE_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "soldyn/grid.hpp"

namespace soldyn {

struct BlowupError : std::runtime_error {
    double last_stable_time;
    explicit BlowupError(double t)
        : std::runtime_error("pde: blowup detected at t = " + std::to_string(t)),
          last_stable_time(t) {}
};

/// Spherically truncated Coulomb kernel on the reciprocal grid:
/// multiplier 4 pi (1 - cos(|k| R)) / |k|^2, value 2 pi R^2 at k = 0.
/// Truncation removes periodic-image self-interaction; default R = box/2.
struct HartreeKernel {
    Grid<3> grid;
    double radius = 0.0;
    std::vector<double> mult; // flat, same layout as a Field<3>

    HartreeKernel() = default;
    explicit HartreeKernel(const Grid<3>& g, double R = -1.0) : grid(g) {
        radius = (R > 0.0) ? R : 0.5 * g.box;
        mult.resize(g.size());
        const std::size_t n = g.n;
        for (std::size_t i = 0; i < mult.size(); ++i) {
            std::size_t idx = i;
            double k2 = 0.0;
            for (int d = 2; d >= 0; --d) {
                std::size_t c = idx % n;
                double k = g.wavenumber(c);
                k2 += k * k;
                idx /= n;
            }
            if (k2 == 0.0) {
                mult[i] = 2.0 * M_PI * radius * radius;
            } else {
                double kk = std::sqrt(k2);
                mult[i] = 4.0 * M_PI * (1.0 - std::cos(kk * radius)) / k2;
            }
        }
    }
};

/// |x|^-1 * |u|^2 via the truncated-Coulomb multiplier; output forced real.
inline Field<3> hartree_potential(const Field<3>& u, const HartreeKernel& kernel) {
    if (u.grid != kernel.grid) throw std::invalid_argument("hartree_potential: grid mismatch");
    Field<3> rho(u.grid);
    for (std::size_t i = 0; i < u.size(); ++i) rho[i] = cplx(std::norm(u[i]), 0.0);
    fft_forward(rho);
    for (std::size_t i = 0; i < rho.size(); ++i) rho[i] *= kernel.mult[i];
    fft_inverse(rho);
    for (auto& z : rho.v) z = cplx(z.real(), 0.0);
    return rho;
}

/// Convolution |x|^-1 * f for a real field f (shared by the linearized operators).
inline Field<3> coulomb_convolve(const Field<3>& f, const HartreeKernel& kernel) {
    if (f.grid != kernel.grid) throw std::invalid_argument("coulomb_convolve: grid mismatch");
    Field<3> g = f;
    fft_forward(g);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= kernel.mult[i];
    fft_inverse(g);
    for (auto& z : g.v) z = cplx(z.real(), 0.0);
    return g;
}

/// Self-interaction potential entering the flow: |x|^-1 * |u|^2 in 3D, |u|^2
/// for the 1D cubic equation.
template <int D>
struct Nonlinearity;

template <>
struct Nonlinearity<3> {
    HartreeKernel kernel;
    explicit Nonlinearity(const Grid<3>& g) : kernel(g) {}
    Field<3> potential(const Field<3>& u) const { return hartree_potential(u, kernel); }
};

template <>
struct Nonlinearity<1> {
    explicit Nonlinearity(const Grid<1>&) {}
    Field<1> potential(const Field<1>& u) const {
        Field<1> p(u.grid);
        for (std::size_t i = 0; i < u.size(); ++i) p[i] = cplx(std::norm(u[i]), 0.0);
        return p;
    }
};

/// Right-hand side -i(-1/2 lap u + V u - Phi(u) u); equals -i times the
/// Gateaux derivative of the discrete Hamiltonian.
template <int D>
inline Field<D> hartree_rhs(const Field<D>& u, const Field<D>& V, const Nonlinearity<D>& nl) {
    check_same_grid(u, V);
    Field<D> lap = u;
    apply_multiplier(lap, [](const Vec<D>& k) { return -norm2<D>(k); });
    Field<D> phi = nl.potential(u);
    Field<D> r(u.grid);
    for (std::size_t i = 0; i < u.size(); ++i) {
        cplx h = -0.5 * lap[i] + (V[i].real() - phi[i].real()) * u[i];
        r[i] = cplx(0.0, -1.0) * h;
    }
    return r;
}

/// H_V(u) = int 1/4 |grad u|^2 - 1/4 |u|^2 Phi(u) + 1/2 V |u|^2.
template <int D>
inline double energy(const Field<D>& u, const Field<D>& V, const Nonlinearity<D>& nl) {
    check_same_grid(u, V);
    Field<D> g = u;
    fft_forward(g);
    const std::size_t n = g.grid.n;
    double kin = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        std::size_t idx = i;
        double k2 = 0.0;
        for (int d = D - 1; d >= 0; --d) {
            double k = g.grid.wavenumber(idx % n);
            k2 += k * k;
            idx /= n;
        }
        kin += k2 * std::norm(g[i]);
    }
    kin *= u.grid.cell() / double(u.size());
    Field<D> phi = nl.potential(u);
    double self = 0.0, ext = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double n2 = std::norm(u[i]);
        self += n2 * phi[i].real();
        ext += n2 * V[i].real();
    }
    self *= u.grid.cell();
    ext *= u.grid.cell();
    return 0.25 * kin - 0.25 * self + 0.5 * ext;
}

template <int D>
struct Stepper {
    Grid<D> grid;
    Field<D> V;               // external potential samples (real)
    Nonlinearity<D> nl;
    std::vector<cplx> kin_half;  // exp(-i (dt/2)(|k|^2/2)), precomputed per dt
    std::vector<cplx> kin_full;  // squared multiplier for fused whole steps
    double dt = 0.0;
    double max_abs0 = 0.0;

    Stepper(const Grid<D>& g, const Field<D>& Vext) : grid(g), V(Vext), nl(g) {
        if (V.grid != g) throw std::invalid_argument("stepper: potential grid mismatch");
    }

    void prepare(double dt_, const Field<D>& u0) {
        dt = dt_;
        double kmax2 = 0.0;
        for (int d = 0; d < D; ++d) {
            double km = M_PI * double(grid.n) / grid.box;
            kmax2 += km * km;
        }
        if (dt * kmax2 / 2.0 >= M_PI)
            throw std::invalid_argument("stepper: dt too large for the grid (dt |k|^2/2 must stay below pi)");
        kin_half.resize(grid.size());
        kin_full.resize(grid.size());
        const std::size_t n = grid.n;
        for (std::size_t i = 0; i < kin_half.size(); ++i) {
            std::size_t idx = i;
            double k2 = 0.0;
            for (int d = D - 1; d >= 0; --d) {
                double k = grid.wavenumber(idx % n);
                k2 += k * k;
                idx /= n;
            }
            double p = -0.5 * dt * 0.5 * k2;
            kin_half[i] = cplx(std::cos(p), std::sin(p));
            kin_full[i] = kin_half[i] * kin_half[i];
        }
        max_abs0 = 0.0;
        for (const auto& z : u0.v) max_abs0 = std::max(max_abs0, std::abs(z));
    }

    void kinetic(Field<D>& u, bool full) const {
        fft_forward(u);
        const auto& tab = full ? kin_full : kin_half;
        for (std::size_t i = 0; i < u.size(); ++i) u[i] *= tab[i];
        fft_inverse(u);
    }
    void kinetic_half(Field<D>& u) const { kinetic(u, false); }

    /// Phase step exp(-i dt (V - Phi(u))). |u| is invariant under this flow,
    /// so Phi evaluated on entry is constant through the substep and the
    /// substep is exact.
    void phase_full(Field<D>& u) const {
        Field<D> phi = nl.potential(u);
        for (std::size_t i = 0; i < u.size(); ++i) {
            double p = -dt * (V[i].real() - phi[i].real());
            u[i] *= cplx(std::cos(p), std::sin(p));
        }
    }

    void check_stable(const Field<D>& u, double t) const {
        for (const auto& z : u.v) {
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw BlowupError(t);
        }
        double m = 0.0;
        for (const auto& z : u.v) m = std::max(m, std::abs(z));
        if (m > 10.0 * max_abs0) throw BlowupError(t);
    }
};

/// One Strang step: half kinetic, full phase, half kinetic.
template <int D>
inline Field<D> step_strang(const Field<D>& u, double dt, const Field<D>& V,
                            const Nonlinearity<D>& nl) {
    Stepper<D> st(u.grid, V);
    st.nl = nl;
    st.prepare(dt, u);
    Field<D> w = u;
    st.kinetic_half(w);
    st.phase_full(w);
    st.kinetic_half(w);
    return w;
}

template <int D>
struct Observer {
    double interval = 1.0;
    std::function<void(double, const Field<D>&)> fn;
};

/// Evolve u0 to time T with the Strang stepper, fusing adjacent kinetic
/// half-steps between observations. Observers fire at t=0, every interval,
/// and at t=T, always on a synchronized field.
template <int D>
inline Field<D> run(const Field<D>& u0, const Field<D>& V, double T, double dt,
                    std::vector<Observer<D>> observers) {
    Stepper<D> st(u0.grid, V);
    st.prepare(dt, u0);
    Field<D> u = u0;

    long nsteps = (T > 0.0) ? std::lround(T / dt) : 0;
    if (T > 0.0 && nsteps < 1) nsteps = 1;
    std::vector<long> next_fire(observers.size());
    std::vector<long> stride(observers.size());
    for (std::size_t i = 0; i < observers.size(); ++i) {
        long s = std::lround(observers[i].interval / dt);
        stride[i] = std::max<long>(1, s);
        next_fire[i] = 0;
    }
    auto fire = [&](long step, double t) {
        for (std::size_t i = 0; i < observers.size(); ++i)
            if (step == next_fire[i] || step == nsteps) {
                observers[i].fn(t, u);
                if (step == next_fire[i]) next_fire[i] += stride[i];
            }
    };
    fire(0, 0.0);
    if (nsteps == 0) return u;

    bool open = false; // true when we owe a trailing half kinetic step
    for (long s = 1; s <= nsteps; ++s) {
        if (!open) st.kinetic_half(u);
        st.phase_full(u);
        bool observe_now = (s == nsteps);
        for (std::size_t i = 0; i < observers.size() && !observe_now; ++i)
            if (s == next_fire[i]) observe_now = true;
        if (observe_now) {
            st.kinetic_half(u);
            open = false;
            st.check_stable(u, double(s) * dt);
            fire(s, double(s) * dt);
        } else {
            st.kinetic(u, true); // fused exp(K dt/2) exp(K dt/2)
            open = true;
        }
    }
    return u;
}

// ---- checkpoint format: little-endian binary header + interleaved re/im ----

template <int D>
inline void save_checkpoint(const Field<D>& f, double time, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    std::int64_t dims = D, n = std::int64_t(f.grid.n);
    double box = f.grid.box;
    out.write(reinterpret_cast<const char*>(&dims), 8);
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&box), 8);
    out.write(reinterpret_cast<const char*>(&time), 8);
    std::vector<double> buf(2 * f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        buf[2 * i] = f[i].real();
        buf[2 * i + 1] = f[i].imag();
    }
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * 8));
}

template <int D>
inline Field<D> load_checkpoint(const std::string& path, double& time) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::int64_t dims = 0, n = 0;
    double box = 0.0;
    in.read(reinterpret_cast<char*>(&dims), 8);
    in.read(reinterpret_cast<char*>(&n), 8);
    in.read(reinterpret_cast<char*>(&box), 8);
    in.read(reinterpret_cast<char*>(&time), 8);
    if (dims != D) throw std::runtime_error("load_checkpoint: dimension mismatch");
    Field<D> f(Grid<D>(std::size_t(n), box));
    std::vector<double> buf(2 * f.size());
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * 8));
    if (!in) throw std::runtime_error("load_checkpoint: truncated data");
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = cplx(buf[2 * i], buf[2 * i + 1]);
    return f;
}

} // namespace soldyn

#endif
