// Test-only numerical oracles, independent of the library's solver paths.
#ifndef SOLDYN_TEST_ORACLES_HPP
#define SOLDYN_TEST_ORACLES_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracles {

/// Cumulative Simpson-type integral (O(h^4)) of f on a uniform grid; I[0]=0.
inline std::vector<double> cumint(const std::vector<double>& f, double h) {
    const std::size_t n = f.size();
    std::vector<double> I(n, 0.0);
    if (n < 3) return I;
    for (std::size_t j = 0; j + 1 < n; ++j) {
        if (j + 2 < n)
            I[j + 1] = I[j] + h / 12.0 * (5.0 * f[j] + 8.0 * f[j + 1] - f[j + 2]);
        else
            I[j + 1] = I[j] + h / 12.0 * (-f[j - 1] + 8.0 * f[j] + 5.0 * f[j + 1]);
    }
    return I;
}

/// Self-consistent-field + Numerov-shooting solve of the mass-2 Hartree
/// ground state. Entirely separate machinery from the library: no DST, no
/// Petviashvili, no shared code.
struct ShootingResult {
    double lambda = 0.0;
    double eta0 = 0.0;
    std::vector<double> r, eta;
};

inline ShootingResult shooting_ground_state(double rmax = 30.0, std::size_t n = 16384,
                                            double target_mass = 2.0) {
    const double h = rmax / double(n);
    std::vector<double> r(n + 1), eta(n + 1);
    for (std::size_t j = 0; j <= n; ++j) r[j] = h * double(j);
    for (std::size_t j = 0; j <= n; ++j) eta[j] = 0.35 * std::exp(-0.3 * r[j] * r[j]);

    auto mass_of = [&](const std::vector<double>& e) {
        std::vector<double> f(n + 1);
        for (std::size_t j = 0; j <= n; ++j) f[j] = r[j] * r[j] * e[j] * e[j];
        return 4.0 * M_PI * cumint(f, h).back();
    };
    {
        double c = std::sqrt(target_mass / mass_of(eta));
        for (auto& v : eta) v *= c;
    }

    double lam = 0.5;
    std::vector<double> phi(n + 1);
    for (int scf = 0; scf < 400; ++scf) {
        // Newton-shell potential via cumulative Simpson
        std::vector<double> f1(n + 1), f2(n + 1);
        for (std::size_t j = 0; j <= n; ++j) {
            f1[j] = r[j] * r[j] * eta[j] * eta[j];
            f2[j] = r[j] * eta[j] * eta[j];
        }
        auto I1 = cumint(f1, h);
        auto I2 = cumint(f2, h);
        std::vector<double> Phi(n + 1);
        for (std::size_t j = 0; j <= n; ++j) {
            double inner = (j == 0) ? 0.0 : I1[j] / r[j];
            Phi[j] = 4.0 * M_PI * (inner + (I2.back() - I2[j]));
        }

        // Numerov shoot of phi'' = 2(Lam - Phi) phi; ground state has no
        // interior node. Bisection on the node count.
        auto has_node = [&](double Lam) {
            std::vector<double> g(n + 1);
            for (std::size_t j = 0; j <= n; ++j) g[j] = 2.0 * (Lam - Phi[j]);
            double pm = 0.0, pc = h;
            phi[0] = 0.0;
            phi[1] = h;
            for (std::size_t j = 1; j < n; ++j) {
                double pn = (2.0 * pc * (1.0 + 5.0 * h * h * g[j] / 12.0) -
                             pm * (1.0 - h * h * g[j - 1] / 12.0)) /
                            (1.0 - h * h * g[j + 1] / 12.0);
                phi[j + 1] = pn;
                if (pn <= 0.0) return true;
                pm = pc;
                pc = pn;
            }
            return false;
        };
        double lo = 1e-4, hi = 6.0;
        if (!has_node(lo) || has_node(hi))
            throw std::runtime_error("shooting oracle: eigenvalue bracket failed");
        for (int it = 0; it < 100; ++it) {
            double mid = 0.5 * (lo + hi);
            if (has_node(mid)) lo = mid;
            else hi = mid;
        }
        lam = 0.5 * (lo + hi);
        has_node(hi); // leave phi filled with the nodeless branch

        // suppress the growing-mode tail: past the point where |phi| stops
        // decreasing in the classically forbidden region, clamp to e^{-s r}
        std::vector<double> enew(n + 1);
        enew[0] = 0.0;
        for (std::size_t j = 1; j <= n; ++j) enew[j] = phi[j] / r[j];
        enew[0] = enew[1] + (enew[1] - enew[2]); // linear fill at the origin
        double s = std::sqrt(2.0 * lam);
        std::size_t jc = n;
        std::size_t jpk = 0;
        for (std::size_t j = 1; j <= n; ++j)
            if (enew[j] > enew[jpk]) jpk = j;
        for (std::size_t j = jpk + 1; j < n; ++j)
            if (enew[j + 1] > enew[j]) {
                jc = j;
                break;
            }
        for (std::size_t j = jc; j <= n && jc < n; ++j)
            enew[j] = enew[jc - 1] * std::exp(-s * (r[j] - r[jc - 1]));
        double c = std::sqrt(target_mass / mass_of(enew));
        for (auto& v : enew) v *= c;

        double diff = 0.0;
        const double theta = 0.5;
        for (std::size_t j = 0; j <= n; ++j) {
            double mixed = (1.0 - theta) * eta[j] + theta * enew[j];
            diff = std::max(diff, std::fabs(mixed - eta[j]));
            eta[j] = mixed;
        }
        double cr = std::sqrt(target_mass / mass_of(eta));
        for (auto& v : eta) v *= cr;
        if (diff < 1e-12) break;
    }

    ShootingResult out;
    out.lambda = lam;
    out.eta = eta;
    out.r = r;
    // eta(0) by quadratic extrapolation from the first interior nodes
    out.eta0 = 3.0 * eta[1] - 3.0 * eta[2] + eta[3];
    return out;
}

} // namespace oracles

#endif
