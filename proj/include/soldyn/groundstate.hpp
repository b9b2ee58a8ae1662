#ifndef SOLDYN_GROUNDSTATE_HPP
#define SOLDYN_GROUNDSTATE_HPP

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "soldyn/dense.hpp"
#include "soldyn/fft.hpp"
#include "soldyn/grid.hpp"

namespace soldyn {

struct IterationLimitError : std::runtime_error {
    double last_residual;
    explicit IterationLimitError(double r)
        : std::runtime_error("ground-state solve: iteration limit reached, residual " +
                             std::to_string(r)),
          last_residual(r) {}
};

struct SolverInstabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Radial profile of the 3D Hartree soliton on nodes r_j = j dr, j = 0..n.
/// eta is positive and decreasing; lambda is the eigenvalue of
/// -1/2 lap eta - (|x|^-1 * eta^2) eta + lambda eta = 0. The second
/// derivative table comes from the ODE itself and feeds quintic Hermite
/// interpolation off the nodes.
struct RadialProfile {
    double rmax = 0.0;
    std::size_t n = 0; // intervals; node count n+1; n must be a power of two
    std::vector<double> r, eta, deta, d2eta;
    double lambda = 0.0;

    double dr() const { return rmax / double(n); }

    double mass() const { // 4 pi int r^2 eta^2 dr, trapezoid
        double s = 0.0;
        for (std::size_t j = 0; j <= n; ++j) {
            double w = (j == 0 || j == n) ? 0.5 : 1.0;
            s += w * r[j] * r[j] * eta[j] * eta[j];
        }
        return 4.0 * M_PI * s * dr();
    }

    /// Quintic Hermite evaluation of eta and eta' at radius rr >= 0, clamped
    /// to the exponential tail model beyond rmax.
    void eval(double rr, double& e, double& de) const {
        if (rr >= r[n - 1]) {
            double s = std::sqrt(2.0 * lambda);
            e = eta[n - 1] * std::exp(-s * (rr - r[n - 1]));
            de = -s * e;
            return;
        }
        double t = rr / dr();
        std::size_t j = std::min<std::size_t>(std::size_t(t), n - 1);
        double u = t - double(j), h = dr();
        double u2 = u * u, u3 = u2 * u, u4 = u3 * u, u5 = u4 * u;
        double H0 = 1 - 10 * u3 + 15 * u4 - 6 * u5;
        double H1 = u - 6 * u3 + 8 * u4 - 3 * u5;
        double H2 = 0.5 * u2 - 1.5 * u3 + 1.5 * u4 - 0.5 * u5;
        double H3 = 10 * u3 - 15 * u4 + 6 * u5;
        double H4 = -4 * u3 + 7 * u4 - 3 * u5;
        double H5 = 0.5 * u3 - u4 + 0.5 * u5;
        e = H0 * eta[j] + H1 * h * deta[j] + H2 * h * h * d2eta[j] + H3 * eta[j + 1] +
            H4 * h * deta[j + 1] + H5 * h * h * d2eta[j + 1];
        double G0 = -30 * u2 + 60 * u3 - 30 * u4;
        double G1 = 1 - 18 * u2 + 32 * u3 - 15 * u4;
        double G2 = u - 4.5 * u2 + 6 * u3 - 2.5 * u4;
        double G3 = 30 * u2 - 60 * u3 + 30 * u4;
        double G4 = -12 * u2 + 28 * u3 - 15 * u4;
        double G5 = 1.5 * u2 - 4 * u3 + 2.5 * u4;
        de = G0 * eta[j] / h + G1 * deta[j] + G2 * h * d2eta[j] + G3 * eta[j + 1] / h +
             G4 * deta[j + 1] + G5 * h * d2eta[j + 1];
    }
};

namespace radial {

/// Cumulative integral I[j] = int_0^{r_j} f with O(h^4) segment rules
/// (interior segments average the two bracketing parabola rules). The
/// trapezoid version carries an O(h^2) interior-cut bias ~ (pi h^2/3) eta^2
/// that shifts lambda at the 1e-5 level, visibly above the solver tolerance.
inline std::vector<double> cumquad(const std::vector<double>& f, double h) {
    const std::size_t m = f.size();
    std::vector<double> I(m, 0.0);
    if (m < 4) {
        for (std::size_t j = 1; j < m; ++j) I[j] = I[j - 1] + 0.5 * h * (f[j - 1] + f[j]);
        return I;
    }
    for (std::size_t j = 0; j + 1 < m; ++j) {
        double seg;
        if (j == 0)
            seg = h / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2]);
        else if (j + 2 >= m)
            seg = h / 12.0 * (-f[j - 1] + 8.0 * f[j] + 5.0 * f[j + 1]);
        else
            seg = h / 24.0 * (-f[j - 1] + 13.0 * f[j] + 13.0 * f[j + 1] - f[j + 2]);
        I[j + 1] = I[j] + seg;
    }
    return I;
}

/// Newton's shell formula: Phi(r) = 4pi [ (1/r) int_0^r s^2 f ds + int_r^rmax s f ds ],
/// for f = eta^2 tabulated on the profile nodes, via cumulative prefix sums.
inline std::vector<double> shell_potential(const std::vector<double>& r,
                                           const std::vector<double>& f, double dr) {
    const std::size_t m = r.size();
    std::vector<double> f1(m), f2(m);
    for (std::size_t j = 0; j < m; ++j) {
        f1[j] = r[j] * r[j] * f[j];
        f2[j] = r[j] * f[j];
    }
    auto in = cumquad(f1, dr);
    auto i2 = cumquad(f2, dr);
    std::vector<double> phi(m);
    for (std::size_t j = 0; j < m; ++j) {
        double inner_part = (j == 0) ? 0.0 : in[j] / r[j];
        phi[j] = 4.0 * M_PI * (inner_part + (i2.back() - i2[j]));
    }
    return phi;
}

/// Evaluate sum_m c_m cos(pi m j / n) at nodes j = 0..n (c indexed 1..n-1).
inline std::vector<double> cosine_sum(const std::vector<double>& c, std::size_t n) {
    std::vector<cplx> ext(2 * n, cplx(0.0, 0.0));
    for (std::size_t m = 1; m < n; ++m) {
        ext[m] = cplx(c[m - 1], 0.0);
        ext[2 * n - m] = cplx(c[m - 1], 0.0);
    }
    fft_pow2(ext.data(), 2 * n, -1);
    std::vector<double> out(n + 1);
    for (std::size_t j = 0; j <= n; ++j) out[j] = 0.5 * ext[j].real();
    return out;
}

/// Rebuild eta and eta' on all nodes from interior values of phi = r eta.
inline void reconstruct(RadialProfile& p, const std::vector<double>& phi_int) {
    const std::size_t n = p.n;
    const double dr = p.dr();
    auto b = dst1(phi_int);
    std::vector<double> bk(n - 1);
    const double kf = M_PI / p.rmax;
    for (std::size_t m = 1; m < n; ++m) bk[m - 1] = b[m - 1] * kf * double(m) * 2.0 / double(n);
    auto dphi = cosine_sum(bk, n); // phi'(r_j)
    p.r.resize(n + 1);
    p.eta.resize(n + 1);
    p.deta.resize(n + 1);
    for (std::size_t j = 0; j <= n; ++j) p.r[j] = dr * double(j);
    p.eta[0] = dphi[0]; // lim phi/r
    p.deta[0] = 0.0;
    for (std::size_t j = 1; j < n; ++j) {
        p.eta[j] = phi_int[j - 1] / p.r[j];
        p.deta[j] = (dphi[j] - p.eta[j]) / p.r[j];
    }
    p.eta[n] = 0.0;
    p.deta[n] = dphi[n] / p.r[n];
}

/// eta'' from the equation: lap eta = 2(lambda - Phi) eta with
/// lap eta = eta'' + (2/r) eta'; at r = 0, eta'' = (2/3)(lambda - Phi) eta.
inline void fill_second_derivative(RadialProfile& p) {
    std::vector<double> f(p.n + 1);
    for (std::size_t j = 0; j <= p.n; ++j) f[j] = p.eta[j] * p.eta[j];
    auto Phi = shell_potential(p.r, f, p.dr());
    p.d2eta.resize(p.n + 1);
    p.d2eta[0] = 2.0 / 3.0 * (p.lambda - Phi[0]) * p.eta[0];
    for (std::size_t j = 1; j <= p.n; ++j)
        p.d2eta[j] = 2.0 * (p.lambda - Phi[j]) * p.eta[j] - 2.0 / p.r[j] * p.deta[j];
}

/// Sup-norm residual of the stationary equation (spectral Laplacian).
inline double residual(const RadialProfile& p) {
    const std::size_t n = p.n;
    std::vector<double> phi_int(n - 1);
    for (std::size_t j = 1; j < n; ++j) phi_int[j - 1] = p.r[j] * p.eta[j];
    auto b = dst1(phi_int);
    const double kf = M_PI / p.rmax;
    for (std::size_t m = 1; m < n; ++m) {
        double k = kf * double(m);
        b[m - 1] *= -k * k;
    }
    auto lap_phi = idst1(b); // phi'' on interior nodes
    std::vector<double> f(p.eta.size());
    for (std::size_t j = 0; j < f.size(); ++j) f[j] = p.eta[j] * p.eta[j];
    auto Phi = shell_potential(p.r, f, p.dr());
    double worst = 0.0;
    for (std::size_t j = 1; j < n; ++j) {
        double lap_eta = lap_phi[j - 1] / p.r[j];
        double res = -0.5 * lap_eta - Phi[j] * p.eta[j] + p.lambda * p.eta[j];
        worst = std::max(worst, std::fabs(res));
    }
    return worst;
}

/// Residual with 5-point finite differences; appropriate for profiles built
/// by interpolation (rescale), where spectral differentiation would amplify
/// sub-node interpolation noise.
inline double residual_fd(const RadialProfile& p) {
    const std::size_t n = p.n;
    const double dr = p.dr();
    std::vector<double> f(n + 1);
    for (std::size_t j = 0; j <= n; ++j) f[j] = p.eta[j] * p.eta[j];
    auto Phi = shell_potential(p.r, f, dr);
    double worst = 0.0;
    for (std::size_t j = 2; j + 2 <= n; ++j) {
        double d2 = (-p.eta[j - 2] + 16 * p.eta[j - 1] - 30 * p.eta[j] + 16 * p.eta[j + 1] -
                     p.eta[j + 2]) /
                    (12 * dr * dr);
        double d1 = (p.eta[j - 2] - 8 * p.eta[j - 1] + 8 * p.eta[j + 1] - p.eta[j + 2]) / (12 * dr);
        double lap = d2 + 2.0 / p.r[j] * d1;
        double res = -0.5 * lap - Phi[j] * p.eta[j] + p.lambda * p.eta[j];
        worst = std::max(worst, std::fabs(res));
    }
    return worst;
}

} // namespace radial

/// Petviashvili (spectral renormalization) solve of the Choquard stationary
/// equation at a fixed lambda, on phi = r eta in DST space.
inline RadialProfile solve_hartree_profile_at_lambda(double rmax, std::size_t n, double tol,
                                                     double lambda, std::size_t itmax = 4000,
                                                     std::vector<double>* residual_trace = nullptr) {
    if (rmax < 20.0) throw std::invalid_argument("ground-state solve: rmax must be >= 20");
    if (n < 512) throw std::invalid_argument("ground-state solve: need at least 512 points");
    if (!detail::is_pow2(n)) throw std::invalid_argument("ground-state solve: n must be a power of two");
    if (tol <= 0.0) throw std::invalid_argument("ground-state solve: tol must be positive");

    RadialProfile p;
    p.rmax = rmax;
    p.n = n;
    p.lambda = lambda;
    const double dr = rmax / double(n);
    std::vector<double> r_int(n - 1);
    for (std::size_t j = 1; j < n; ++j) r_int[j - 1] = dr * double(j);

    std::vector<double> mult(n - 1);
    const double kf = M_PI / rmax;
    for (std::size_t m = 1; m < n; ++m) {
        double k = kf * double(m);
        mult[m - 1] = 0.5 * k * k + lambda;
    }

    std::vector<double> eta(n - 1);
    for (std::size_t j = 0; j < n - 1; ++j)
        eta[j] = 1.3 * lambda * std::exp(-0.25 * lambda * r_int[j] * r_int[j]);

    std::vector<double> phi(n - 1), rnode(n + 1);
    for (std::size_t j = 0; j <= n; ++j) rnode[j] = dr * double(j);

    double last_res = 1e300;
    bool converged = false;
    for (std::size_t it = 0; it < itmax; ++it) {
        std::vector<double> f(n + 1, 0.0);
        for (std::size_t j = 1; j < n; ++j) f[j] = eta[j - 1] * eta[j - 1];
        auto Phi = radial::shell_potential(rnode, f, dr);
        std::vector<double> G(n - 1);
        for (std::size_t j = 1; j < n; ++j) G[j - 1] = r_int[j - 1] * Phi[j] * eta[j - 1];
        for (std::size_t j = 0; j < n - 1; ++j) phi[j] = r_int[j] * eta[j];
        auto Gh = dst1(G);
        auto ph = dst1(phi);
        double num = 0.0, den = 0.0;
        for (std::size_t m = 0; m < n - 1; ++m) {
            num += mult[m] * ph[m] * ph[m];
            den += Gh[m] * ph[m];
        }
        if (den <= 0.0) throw SolverInstabilityError("ground-state solve: degenerate renormalization factor");
        double gam = std::pow(num / den, 1.5);
        for (std::size_t m = 0; m < n - 1; ++m) Gh[m] = gam * Gh[m] / mult[m];
        auto phi_new = idst1(Gh);
        double diff = 0.0;
        for (std::size_t j = 0; j < n - 1; ++j) {
            double e = phi_new[j] / r_int[j];
            diff = std::max(diff, std::fabs(e - eta[j]));
            eta[j] = e;
        }
        bool near = diff < 0.05 * tol;
        if (near || residual_trace) {
            std::vector<double> phi_int(n - 1);
            for (std::size_t j = 0; j < n - 1; ++j) phi_int[j] = r_int[j] * eta[j];
            radial::reconstruct(p, phi_int);
            last_res = radial::residual(p);
            if (residual_trace) residual_trace->push_back(last_res);
            if (near && last_res < tol) {
                converged = true;
                break;
            }
        }
    }
    if (!converged) throw IterationLimitError(last_res);

    // machine-level tail ringing is clipped to the exponential model
    double floor_val = 1e-13 * p.eta[0];
    std::size_t jc = p.n;
    for (std::size_t j = 1; j <= p.n; ++j)
        if (p.eta[j] < floor_val) {
            jc = j;
            break;
        }
    if (jc < p.n) {
        double s = std::sqrt(2.0 * lambda);
        for (std::size_t j = jc; j <= p.n; ++j) {
            p.eta[j] = p.eta[jc - 1] * std::exp(-s * (p.r[j] - p.r[jc - 1]));
            p.deta[j] = -s * p.eta[j];
        }
    }
    for (std::size_t j = 0; j < p.n; ++j) {
        if (p.eta[j] <= 0.0)
            throw SolverInstabilityError("ground-state solve: negative values encountered");
        if (j > 0 && p.eta[j] > p.eta[j - 1] * (1.0 + 1e-12))
            throw SolverInstabilityError("ground-state solve: profile not decreasing");
    }
    radial::fill_second_derivative(p);
    return p;
}

/// x -> mu^2 eta(mu x): eigenvalue lambda mu^2, mass mu * old mass.
inline RadialProfile rescale(const RadialProfile& p, double mu) {
    if (mu <= 0.0) throw std::domain_error("rescale: mu must be positive");
    if (mu == 1.0) return p;
    RadialProfile q;
    q.rmax = p.rmax;
    q.n = p.n;
    q.lambda = p.lambda * mu * mu;
    q.r = p.r;
    q.eta.resize(p.n + 1);
    q.deta.resize(p.n + 1);
    for (std::size_t j = 0; j <= p.n; ++j) {
        double e, de;
        p.eval(mu * p.r[j], e, de);
        q.eta[j] = mu * mu * e;
        q.deta[j] = mu * mu * mu * de;
    }
    radial::fill_second_derivative(q);
    return q;
}

/// Full pipeline: solve at lambda=1, read off the mass, jump to the lambda
/// whose soliton has mass 2 via the exact scaling law, and re-solve there so
/// the delivered profile carries no interpolation error.
inline RadialProfile solve_hartree_ground_state(double rmax, std::size_t n, double tol) {
    RadialProfile p1 = solve_hartree_profile_at_lambda(rmax, n, tol, 1.0);
    double m1 = p1.mass();
    double mu = 2.0 / m1;
    RadialProfile p2 = solve_hartree_profile_at_lambda(rmax, n, tol, mu * mu);
    double m2 = p2.mass();
    if (std::fabs(m2 - 2.0) > 1e-12) {
        double mu2 = 2.0 / m2;
        p2 = solve_hartree_profile_at_lambda(rmax, n, tol, p2.lambda * mu2 * mu2);
    }
    return p2;
}

/// Exponential decay rate fitted on [r_lo, r_hi] with the Coulomb-tail model
/// log eta = c0 + c1 log r - rate * r (the ln r term removes the power-law
/// prefactor bias a plain linear fit would pick up).
inline double decay_rate(const RadialProfile& p, double r_lo = 15.0, double r_hi = 25.0) {
    std::vector<double> xs, ys, ls;
    for (std::size_t j = 0; j <= p.n; ++j)
        if (p.r[j] >= r_lo && p.r[j] <= r_hi && p.eta[j] > 0.0) {
            xs.push_back(p.r[j]);
            ls.push_back(std::log(p.r[j]));
            ys.push_back(std::log(p.eta[j]));
        }
    if (xs.size() < 8) throw std::invalid_argument("decay_rate: fit window has too few nodes");
    Matrix X(xs.size(), 3);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = ls[i];
        X(i, 2) = xs[i];
    }
    auto c = least_squares(X, ys);
    return -c[2];
}

// ---- serialization: flat text, 17 significant digits ----

inline void save_profile(const RadialProfile& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_profile: cannot open " + path);
    char buf[128];
    std::snprintf(buf, sizeof buf, "lambda=%.17g\n", p.lambda);
    out << buf;
    std::snprintf(buf, sizeof buf, "mass=%.17g\n", p.mass());
    out << buf;
    std::snprintf(buf, sizeof buf, "n=%zu\n", p.n);
    out << buf;
    std::snprintf(buf, sizeof buf, "rmax=%.17g\n", p.rmax);
    out << buf;
    for (std::size_t j = 0; j <= p.n; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", p.r[j], p.eta[j]);
        out << buf;
    }
}

inline RadialProfile load_profile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_profile: cannot open " + path);
    RadialProfile p;
    std::string line;
    for (int i = 0; i < 4; ++i) {
        if (!std::getline(in, line)) throw std::runtime_error("load_profile: truncated header");
        auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("load_profile: bad header line");
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "lambda") p.lambda = std::stod(val);
        else if (key == "mass") continue; // recomputable
        else if (key == "n") p.n = std::stoul(val);
        else if (key == "rmax") p.rmax = std::stod(val);
        else throw std::runtime_error("load_profile: unknown header key " + key);
    }
    p.r.resize(p.n + 1);
    p.eta.resize(p.n + 1);
    for (std::size_t j = 0; j <= p.n; ++j) {
        if (!(in >> p.r[j] >> p.eta[j])) throw std::runtime_error("load_profile: truncated data");
    }
    std::vector<double> phi_int(p.n - 1);
    for (std::size_t j = 1; j < p.n; ++j) phi_int[j - 1] = p.r[j] * p.eta[j];
    std::vector<double> eta_saved = p.eta;
    radial::reconstruct(p, phi_int); // fills deta
    p.eta = eta_saved;
    radial::fill_second_derivative(p);
    return p;
}

// ---- ground state bound to a simulation grid ----

/// Ground state with everything the rest of the pipeline needs: grid samples,
/// radial evaluators, eigenvalue, mass, second moment, and cached trig
/// moments of eta^2 for the effective dynamics.
template <int D>
struct GroundState {
    Grid<D> grid;
    Field<D> eta;       // real-valued samples
    double lambda = 0.0;
    double mass = 0.0;
    double i2 = 0.0;    // int x_1^2 eta^2 dx
    int scale_weight = (D == 3) ? 2 : 1; // mu^s in the group action
    RadialProfile profile; // populated for D == 3

    double eta_at(double r) const;
    double deta_at(double r) const;

    /// rho(kappa) = int cos(kappa x_1) eta^2 dx and its kappa-derivative.
    mutable std::map<double, std::pair<double, double>> moment_cache;
    std::pair<double, double> trig_moment(double kappa) const;
};

template <>
inline double GroundState<1>::eta_at(double r) const { return 1.0 / std::cosh(r); }
template <>
inline double GroundState<1>::deta_at(double r) const {
    double s = 1.0 / std::cosh(r);
    return -s * std::tanh(r);
}

template <>
inline double GroundState<3>::eta_at(double r) const {
    double e, de;
    profile.eval(r, e, de);
    return e;
}
template <>
inline double GroundState<3>::deta_at(double r) const {
    double e, de;
    profile.eval(r, e, de);
    return de;
}

template <int D>
inline std::pair<double, double> GroundState<D>::trig_moment(double kappa) const {
    auto it = moment_cache.find(kappa);
    if (it != moment_cache.end()) return it->second;
    double v = 0.0, dv = 0.0;
    if constexpr (D == 1) {
        const double dx = grid.spacing();
        for (std::size_t i = 0; i < eta.size(); ++i) {
            double x = grid.coord(i);
            double e2 = std::norm(eta[i]);
            v += std::cos(kappa * x) * e2;
            dv += -x * std::sin(kappa * x) * e2;
        }
        v *= dx;
        dv *= dx;
    } else {
        const auto& p = profile;
        const double dr = p.dr();
        for (std::size_t j = 0; j <= p.n; ++j) {
            double w = (j == 0 || j == p.n) ? 0.5 : 1.0;
            double r = p.r[j], e2 = p.eta[j] * p.eta[j];
            double z = kappa * r;
            double sinc = (std::fabs(z) < 1e-8) ? 1.0 - z * z / 6.0 : std::sin(z) / z;
            double dsinc_dk;
            if (std::fabs(z) < 1e-6)
                dsinc_dk = -kappa * r * r / 3.0;
            else
                dsinc_dk = (std::cos(z) - sinc) / kappa;
            v += w * r * r * e2 * sinc;
            dv += w * r * r * e2 * dsinc_dk;
        }
        v *= 4.0 * M_PI * dr;
        dv *= 4.0 * M_PI * dr;
    }
    auto res = std::make_pair(v, dv);
    moment_cache.emplace(kappa, res);
    return res;
}

namespace detail {

template <int D>
inline void fill_common(GroundState<D>& gs) {
    gs.mass = soldyn::mass(gs.eta);
    double s = 0.0;
    for (std::size_t i = 0; i < gs.eta.size(); ++i) {
        auto x = gs.eta.point(i);
        s += x[0] * x[0] * std::norm(gs.eta[i]);
    }
    gs.i2 = s * gs.grid.cell();
}

} // namespace detail

/// eta(x) = sech(x) with lambda = 1/2, on a 1D grid.
inline GroundState<1> gp_ground_state(const Grid<1>& g) {
    if (g.n < 128) throw std::invalid_argument("gp_ground_state: grid too coarse (need >= 128 points)");
    GroundState<1> gs;
    gs.grid = g;
    gs.eta = Field<1>(g);
    for (std::size_t i = 0; i < g.n; ++i) gs.eta[i] = cplx(1.0 / std::cosh(g.coord(i)), 0.0);
    gs.lambda = 0.5;
    detail::fill_common(gs);
    return gs;
}

inline GroundState<3> bind_to_grid(const RadialProfile& p, const Grid<3>& g) {
    if (g.n < 32) throw std::invalid_argument("ground state: grid too coarse");
    GroundState<3> gs;
    gs.grid = g;
    gs.profile = p;
    gs.lambda = p.lambda;
    gs.eta = Field<3>(g);
    for (std::size_t i = 0; i < gs.eta.size(); ++i) {
        auto x = gs.eta.point(i);
        gs.eta[i] = cplx(gs.eta_at(std::sqrt(norm2<3>(x))), 0.0);
    }
    detail::fill_common(gs);
    return gs;
}

inline GroundState<3> hartree_ground_state(const Grid<3>& g, double rmax = 32.0,
                                           std::size_t n = 4096, double tol = 1e-10) {
    return bind_to_grid(solve_hartree_ground_state(rmax, n, tol), g);
}

/// H(eta) = int 1/4 |grad eta|^2 - 1/4 eta^2 (eta^2 * |x|^-1); equals -lambda/3.
inline double hamiltonian_value(const RadialProfile& p) {
    std::vector<double> f(p.n + 1);
    for (std::size_t j = 0; j <= p.n; ++j) f[j] = p.eta[j] * p.eta[j];
    auto Phi = radial::shell_potential(p.r, f, p.dr());
    double kin = 0.0, pot = 0.0;
    for (std::size_t j = 0; j <= p.n; ++j) {
        double w = (j == 0 || j == p.n) ? 0.5 : 1.0;
        kin += w * p.deta[j] * p.deta[j] * p.r[j] * p.r[j];
        pot += w * f[j] * Phi[j] * p.r[j] * p.r[j];
    }
    return 4.0 * M_PI * p.dr() * 0.25 * (kin - pot);
}

inline double hamiltonian_value(const GroundState<3>& gs) { return hamiltonian_value(gs.profile); }

inline double hamiltonian_value(const GroundState<1>& gs) {
    auto d = deriv(gs.eta, 0);
    double kin = 0.0, quart = 0.0;
    for (std::size_t i = 0; i < gs.eta.size(); ++i) {
        kin += std::norm(d[i]);
        double e2 = std::norm(gs.eta[i]);
        quart += e2 * e2;
    }
    return 0.25 * (kin - quart) * gs.grid.cell();
}

/// Field of the scaling generator (s + x.grad) eta, built from radial data.
template <int D>
inline Field<D> scaling_generator_field(const GroundState<D>& gs) {
    Field<D> f(gs.grid);
    for (std::size_t i = 0; i < f.size(); ++i) {
        auto x = f.point(i);
        double r = std::sqrt(norm2<D>(x));
        f[i] = cplx(double(gs.scale_weight) * gs.eta_at(r) + r * gs.deta_at(r), 0.0);
    }
    return f;
}

} // namespace soldyn

#endif
