#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "soldyn/effective.hpp"
#include "soldyn/groundstate.hpp"

using namespace soldyn;

namespace {

GroundState<1>& gp() {
    static GroundState<1> gs = gp_ground_state(Grid<1>(4096, 200.0));
    return gs;
}

GroundState<3>& hartree() {
    static GroundState<3> gs = hartree_ground_state(Grid<3>(64, 32.0), 30.0, 2048, 1e-10);
    return gs;
}

Potential<1> cos1d(double h, double amp = 1.0, double phase = 0.0) {
    return Potential<1>::cosine(h, {amp}, {1.0}, {phase});
}

} // namespace

TEST_CASE("closed-form moments agree with grid quadrature") {
    auto& gs = gp();
    for (auto pot : {cos1d(0.1), cos1d(0.07, -0.8, 0.9),
                     Potential<1>::linear(0.1, {0.6}, 0.2),
                     Potential<1>::quadratic(0.1, {{{1.3}}})}) {
        for (double mu : {1.0, 1.08}) {
            Vec<1> a{1.7};
            auto mc = potential_moments(pot, gs, a, mu);
            auto mq = potential_moments_quadrature(pot, gs, a, mu);
            CHECK(mc.mean == doctest::Approx(mq.mean).epsilon(1e-10));
            CHECK(mc.grad[0] == doctest::Approx(mq.grad[0]).epsilon(1e-10));
            CHECK(mc.xgrad == doctest::Approx(mq.xgrad).epsilon(1e-9));
        }
    }
    // 3d: radial closed form vs full-grid quadrature (grid-resolution level)
    auto& gh = hartree();
    auto pot3 = Potential<3>::cosine(0.1, {1.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0});
    Vec<3> a3{0.8, -0.5, 0.2};
    auto mc3 = potential_moments(pot3, gh, a3, 1.0);
    auto mq3 = potential_moments_quadrature(pot3, gh, a3, 1.0);
    CHECK(mc3.mean == doctest::Approx(mq3.mean).epsilon(1e-5));
    CHECK(mc3.grad[0] == doctest::Approx(mq3.grad[0]).epsilon(1e-4));
}

TEST_CASE("effective force: constant, linear, odd-symmetry cases") {
    auto& gs = gp();
    // W constant
    auto f0 = effective_force<1>({0.3}, 1.0, Potential<1>::linear(0.1, {0.0}, 2.5), gs);
    CHECK(std::fabs(f0[0]) < 1e-14);
    // W(y) = y: force = -(h/2) int eta^2 = -h
    double h = 0.1;
    auto fl = effective_force<1>({0.0}, 1.0, Potential<1>::linear(h, {1.0}, 0.0), gs);
    CHECK(fl[0] == doctest::Approx(-h).epsilon(1e-12));
    // W = cos, a = 0: odd integrand
    auto fc = effective_force<1>({0.0}, 1.0, cos1d(0.1), gs);
    CHECK(std::fabs(fc[0]) < 1e-14);
}

TEST_CASE("force is the a-gradient of the restricted potential energy") {
    auto& gs = gp();
    auto pot = cos1d(0.1, 1.0, 0.4);
    for (double mu : {1.0, 1.05}) {
        Vec<1> a{2.3};
        auto F = effective_force(a, mu, pot, gs);
        const double d = 1e-5;
        auto mp = potential_moments(pot, gs, {a[0] + d}, mu);
        auto mm = potential_moments(pot, gs, {a[0] - d}, mu);
        double grad = 0.5 * mu * (mp.mean - mm.mean) / (2.0 * d);
        CHECK(F[0] == doctest::Approx(-grad).epsilon(1e-6));
    }
}

TEST_CASE("gamma rate closed cases") {
    auto& gs = gp();
    EffectiveState<1> st;
    st.v = {0.7};
    st.mu = 1.0;
    // V = 0
    double g0 = gamma_rate(st, Potential<1>::zero_potential(0.1), gs);
    CHECK(g0 == doctest::Approx(0.5 * 0.49 + gs.lambda).epsilon(1e-14));
    // W = c constant: alpha = c
    double c = 1.7;
    st.mu = 1.1;
    double gc = gamma_rate(st, Potential<1>::linear(0.1, {0.0}, c), gs);
    CHECK(gc == doctest::Approx(0.5 * 0.49 + gs.lambda * 1.21 - c).epsilon(1e-12));
}

// gamma' from the flow of the restricted Hamiltonian
// f = mu|v|^2/2 + mu^3 H(eta) + (mu/2) int V(x/mu+a) eta^2:
// gamma' = (1/mu) v . grad_v f - d_mu f, by Richardson-extrapolated central
// differences. This pins the sign conventions of the closed form.
template <int D>
static void fd_gamma_check(const GroundState<D>& gs, const Potential<D>& pot, Vec<D> a, Vec<D> v,
                           double mu) {
    double Hval = hamiltonian_value(gs);
    auto f = [&](const Vec<D>& vv, double m) {
        auto mom = potential_moments(pot, gs, a, m);
        return 0.5 * norm2<D>(vv) * m + m * m * m * Hval + 0.5 * m * mom.mean;
    };
    auto dcentral = [](auto&& fn, double h) { return (fn(h) - fn(-h)) / (2.0 * h); };
    // d_mu f, Richardson
    auto dmu_at = [&](double h) { return (f(v, mu + h) - f(v, mu - h)) / (2.0 * h); };
    double dmu = (4.0 * dmu_at(5e-4) - dmu_at(1e-3)) / 3.0;
    // v . grad_v f
    double vgv = 0.0;
    for (int d = 0; d < D; ++d) {
        auto dv_at = [&](double h) {
            Vec<D> vp = v, vm = v;
            vp[d] += h;
            vm[d] -= h;
            return (f(vp, mu) - f(vm, mu)) / (2.0 * h);
        };
        double dfd = (4.0 * dv_at(5e-4) - dv_at(1e-3)) / 3.0;
        vgv += v[d] * dfd;
    }
    (void)dcentral;
    double fd = vgv / mu - dmu;
    EffectiveState<D> st;
    st.a = a;
    st.v = v;
    st.mu = mu;
    double closed = gamma_rate(st, pot, gs);
    CHECK(fd == doctest::Approx(closed).epsilon(1e-8));
}

TEST_CASE("gamma rate FD oracle, 1d and 3d") {
    fd_gamma_check<1>(gp(), cos1d(0.1, 1.0, 0.3), {1.3}, {0.4}, 1.0);
    fd_gamma_check<1>(gp(), cos1d(0.05, -0.7, 0.0), {-0.8}, {0.25}, 1.07);
    auto pot3 = Potential<3>::cosine(0.1, {1.0, -0.5, 0.0}, {1.0, 1.0, 1.0}, {0.2, 0.0, 0.0});
    fd_gamma_check<3>(hartree(), pot3, {0.4, 0.1, -0.3}, {0.2, 0.0, 0.1}, 1.0);
}

TEST_CASE("restricted hamiltonian: values and kinetic scaling") {
    auto& gs = gp();
    EffectiveState<1> st;
    double H0 = restricted_hamiltonian(st, Potential<1>::zero_potential(0.1), gs);
    CHECK(H0 == doctest::Approx(gs.lambda / 3.0).epsilon(1e-12));
    CHECK(H0 == doctest::Approx(-hamiltonian_value(gs)).epsilon(1e-9));

    auto pot = cos1d(0.1);
    EffectiveState<1> s1, s2, s0;
    s1.v = {0.5};
    s2.v = {1.0};
    double e0 = restricted_hamiltonian(s0, pot, gs);
    double e1 = restricted_hamiltonian(s1, pot, gs);
    double e2 = restricted_hamiltonian(s2, pot, gs);
    CHECK(e2 - e0 == doctest::Approx(4.0 * (e1 - e0)).epsilon(1e-12));
}

TEST_CASE("free flow is exact: straight line and linear phase") {
    auto& gs = gp();
    EffectiveState<1> st;
    st.a = {1.0};
    st.v = {0.5};
    auto traj = integrate(st, Potential<1>::zero_potential(0.1), gs, 5.0, 1e-2);
    auto& last = traj.back();
    CHECK(last.t == doctest::Approx(5.0));
    CHECK(last.a[0] == doctest::Approx(1.0 + 0.5 * 5.0).epsilon(1e-13));
    CHECK(last.v[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(last.mu == 1.0);
    CHECK(last.gamma == doctest::Approx((0.5 * 0.25 + gs.lambda) * 5.0).epsilon(1e-12));
}

TEST_CASE("rk4 is fourth order and conserves the restricted hamiltonian") {
    auto& gs = gp();
    auto pot = cos1d(0.1);
    EffectiveState<1> st;
    st.v = {0.3};

    // stiffer well so the dt^4 error sits well above roundoff at the dt cap
    auto stiff = Potential<1>::quadratic(1.0, {{{25.0}}});
    EffectiveState<1> s0;
    s0.a = {0.5};
    auto endpoint = [&](double dt) { return integrate(s0, stiff, gs, 10.0, dt).back(); };
    auto y1 = endpoint(8e-3), y2 = endpoint(4e-3), y3 = endpoint(2e-3);
    double e12 = std::fabs(y1.a[0] - y2.a[0]);
    double e23 = std::fabs(y2.a[0] - y3.a[0]);
    CHECK(e12 / e23 == doctest::Approx(16.0).epsilon(0.3));

    // energy drift over t in [0, 100] at dt = 1e-3 below 1e-8 per unit time
    auto traj = integrate(st, pot, gs, 100.0, 1e-3);
    double H0 = restricted_hamiltonian(traj.front(), pot, gs);
    double worst = 0.0;
    for (auto& y : traj)
        worst = std::max(worst, std::fabs(restricted_hamiltonian(y, pot, gs) - H0));
    CHECK(worst / 100.0 < 1e-8);

    // mu is not stepped at all
    for (auto& y : traj) CHECK(y.mu == 1.0);
}

TEST_CASE("integrating forward then backward returns to the start") {
    auto& gs = gp();
    auto pot = cos1d(0.1, 1.0, 0.6);
    EffectiveState<1> st;
    st.a = {0.4};
    st.v = {0.35};
    auto fwd = integrate(st, pot, gs, 7.0, 1e-3).back();
    auto back = integrate(fwd, pot, gs, 7.0, -1e-3).back();
    CHECK(std::fabs(back.a[0] - st.a[0]) < 1e-8);
    CHECK(std::fabs(back.v[0] - st.v[0]) < 1e-8);
    CHECK(std::fabs(back.gamma - st.gamma) < 1e-8);
}

TEST_CASE("integrate guards: dt bound and energy-jump rejection") {
    auto& gs = gp();
    EffectiveState<1> st;
    st.v = {3.0};
    CHECK_THROWS_AS(integrate(st, Potential<1>::zero_potential(0.1), gs, 1.0, 5e-3),
                    std::invalid_argument);
    // violent quadratic potential makes a single RK4 step jump the energy
    auto bad = Potential<1>::quadratic(1.0, {{{4.0e4}}});
    EffectiveState<1> s2;
    s2.a = {1.0};
    CHECK_THROWS_AS(integrate(s2, bad, gs, 1.0, 1e-2), std::runtime_error);
}

TEST_CASE("ode_compare: zero perturbation and envelope for sin forcing") {
    auto& gs = gp();
    auto pot = cos1d(0.05);
    EffectiveState<1> st;
    auto zero = [](double) { return 0.0; };
    auto rep0 = ode_compare(pot, gs, st, zero, zero, 10.0, 1e-3);
    CHECK(rep0.sup_da == 0.0);
    CHECK(rep0.sup_dv == 0.0);

    double h = 0.05;
    auto eps = [h](double t) { return h * h * h * h * std::sin(t); };
    auto rep = ode_compare(pot, gs, st, eps, eps, 1.0 / h, 1e-3);
    // bound C h^2 log(1/h) with a generous C; sin forcing stays far below it
    CHECK(rep.sup_da < 10.0 * h * h * std::log(1.0 / h));
    CHECK(rep.sup_dv > 0.0);
}
