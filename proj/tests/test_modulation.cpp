#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "soldyn/modulation.hpp"
#include "soldyn/pde.hpp"

using namespace soldyn;

namespace {

GroundState<1>& gp() {
    static GroundState<1> gs = gp_ground_state(Grid<1>(4096, 200.0));
    return gs;
}

Potential<1> cos1d(double h, double amp = 1.0, double phase = 0.0) {
    return Potential<1>::cosine(h, {amp}, {1.0}, {phase});
}

/// Random smooth localized complex field, projected off the symplectic
/// pairing directions so that omega(w, e_j eta) = 0 for all j.
Field<1> orthogonal_bump(const GroundState<1>& gs, unsigned seed, double h1_size) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Field<1> w(gs.grid);
    for (int m = 1; m <= 12; ++m) {
        double cr = U(rng), ci = U(rng), ph = M_PI * U(rng);
        for (std::size_t i = 0; i < w.size(); ++i) {
            double x = gs.grid.coord(i);
            double env = std::exp(-0.08 * x * x);
            w[i] += env * cplx(cr, ci) * std::cos(0.35 * m * x + ph);
        }
    }
    // remove the span{e_j eta} pairing components: solve M c = omega(w, e_j eta)
    auto ef = generator_fields(gs);
    const int m = n_generators<1>;
    Matrix M(m, m);
    std::vector<double> rhs(m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) M(i, j) = symplectic_form(ef[j], ef[i]);
        rhs[i] = symplectic_form(w, ef[i]);
    }
    auto c = solve_lu(M, rhs);
    for (int j = 0; j < m; ++j) axpy<1>(cplx(-c[j], 0.0), ef[j], w);
    double s = h1_size / std::sqrt(h1_norm_sq(w));
    for (auto& z : w.v) z *= s;
    return w;
}

} // namespace

TEST_CASE("projections: known values on eta and the duality identities") {
    auto& gs = gp();
    auto P = project(gs.eta, gs);
    CHECK(P[3] == doctest::Approx(2.0).epsilon(1e-12)); // Re int eta^2
    Field<1> ieta(gs.grid);
    for (std::size_t i = 0; i < gs.eta.size(); ++i) ieta[i] = cplx(0.0, 1.0) * gs.eta[i];
    auto Pi = project(ieta, gs);
    // Im int i eta (1 + x d) eta = 2 - 1 = 1
    CHECK(Pi[2] == doctest::Approx(1.0).epsilon(1e-10));

    // duality against the symplectic pairings, 20 random fields
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    auto ef = generator_fields(gs);
    const double f = 2.0 / gs.mass;
    for (int t = 0; t < 20; ++t) {
        Field<1> u(gs.grid);
        for (std::size_t i = 0; i < u.size(); ++i) {
            double x = gs.grid.coord(i);
            u[i] = std::exp(-0.05 * x * x) * cplx(U(rng), U(rng));
        }
        auto Pu = project(u, gs);
        CHECK(Pu[0] == doctest::Approx(-f * symplectic_form(u, ef[1])).epsilon(1e-10));
        CHECK(Pu[1] == doctest::Approx(f * symplectic_form(u, ef[0])).epsilon(1e-10));
        CHECK(Pu[2] == doctest::Approx(f * symplectic_form(u, ef[3])).epsilon(1e-10));
        CHECK(Pu[3] == doctest::Approx(-f * symplectic_form(u, ef[2])).epsilon(1e-10));
    }

    Field<1> bad(Grid<1>(2048, 200.0));
    CHECK_THROWS_AS(project(bad, gs), std::invalid_argument);
}

TEST_CASE("fit recovers exact manifold points") {
    auto& gs = gp();
    GroupElement<1> g0;
    g0.a[0] = 1.7;
    g0.v[0] = 0.35;
    g0.gamma = 0.9;
    g0.mu = 1.0;
    auto u = act(g0, gs.eta, gs.scale_weight);
    GroupElement<1> guess;
    guess.a[0] = 1.6;
    guess.v[0] = 0.3;
    guess.gamma = 0.8;
    auto dec = fit(u, guess, gs);
    CHECK(std::fabs(dec.g.a[0] - g0.a[0]) < 1e-9);
    CHECK(std::fabs(dec.g.v[0] - g0.v[0]) < 1e-9);
    CHECK(std::fabs(std::remainder(dec.g.gamma - g0.gamma, 2.0 * M_PI)) < 1e-9);
    CHECK(std::fabs(dec.g.mu - g0.mu) < 1e-9);
    CHECK(std::sqrt(mass(dec.w)) < 1e-9);
    for (double r : dec.residuals) CHECK(std::fabs(r) < 1e-9);

    // mu recovery from a pure dilation
    GroupElement<1> gm;
    gm.mu = 1.05;
    auto um = act(gm, gs.eta, gs.scale_weight);
    auto dm = fit(um, GroupElement<1>::identity(), gs);
    CHECK(std::fabs(dm.g.mu - 1.05) < 1e-8);
}

TEST_CASE("fit recovers the group element under an orthogonal perturbation") {
    auto& gs = gp();
    GroupElement<1> g0;
    g0.a[0] = -0.8;
    g0.v[0] = 0.25;
    g0.gamma = 2.2;
    auto w0 = orthogonal_bump(gs, 77, 1e-3);
    Field<1> etaw = gs.eta + w0;
    auto u = act(g0, etaw, gs.scale_weight);
    GroupElement<1> guess = g0;
    guess.a[0] += 0.05;
    guess.gamma -= 0.04;
    auto dec = fit(u, guess, gs);
    CHECK(std::fabs(dec.g.a[0] - g0.a[0]) < 1e-6);
    CHECK(std::fabs(dec.g.v[0] - g0.v[0]) < 1e-6);
    CHECK(std::fabs(std::remainder(dec.g.gamma - g0.gamma, 2.0 * M_PI)) < 1e-6);
    CHECK(std::fabs(dec.g.mu - 1.0) < 1e-6);
    CHECK(dec.w_h1 == doctest::Approx(1e-3).epsilon(0.05));

    // local uniqueness: refit from another nearby guess
    GroupElement<1> guess2 = g0;
    guess2.v[0] -= 0.03;
    guess2.mu = 1.02;
    auto dec2 = fit(u, guess2, gs);
    CHECK(std::fabs(dec2.g.a[0] - dec.g.a[0]) < 1e-9);
    CHECK(std::fabs(dec2.g.mu - dec.g.mu) < 1e-9);

    // mass relation mu (mass(eta) + ||w||^2) = mass(u)
    CHECK(std::fabs(mu_consistency_gap(dec, gs, mass(u))) < 1e-9);
}

TEST_CASE("fit diverges away from the soliton tube") {
    auto& gs = gp();
    Field<1> junk(gs.grid);
    for (std::size_t i = 0; i < junk.size(); ++i) {
        double x = gs.grid.coord(i);
        junk[i] = cplx(0.05 * std::sin(0.8 * x) * std::exp(-0.01 * x * x), 0.0);
    }
    FitOptions<1> opt;
    opt.max_iter = 12;
    CHECK_THROWS_AS(fit(junk, GroupElement<1>::identity(), gs, opt), FitDivergenceError);
}

TEST_CASE("alpha/beta: constants, projection identity, affine potential") {
    auto& gs = gp();
    // W = c
    auto [ac, bc] = alpha_beta<1>({0.4}, 1.1, Potential<1>::linear(0.1, {0.0}, 2.3), gs);
    CHECK(ac == doctest::Approx(2.3 * gs.mass / 2.0).epsilon(1e-12));
    CHECK(std::fabs(bc[0]) < 1e-14);

    // vanishing forcing: all projections of i(V - alpha - beta x) eta below 1e-9
    auto pot = cos1d(0.1);
    for (double mu : {1.0, 1.03}) {
        Vec<1> a{0.7};
        auto [al, be] = alpha_beta<1>(a, mu, pot, gs);
        Field<1> f(gs.grid);
        for (std::size_t i = 0; i < f.size(); ++i) {
            double x = gs.grid.coord(i);
            double val = pot.V({x / mu + a[0]}) - al - be[0] * x;
            f[i] = cplx(0.0, val) * gs.eta[i];
        }
        auto P = project(f, gs);
        for (double p : P) CHECK(std::fabs(p) < 1e-9);
    }

    // affine W: alpha = V(a), beta = grad V(a)/mu
    double h = 0.1;
    auto lin = Potential<1>::linear(h, {0.8}, 0.5);
    Vec<1> a{1.2};
    double mu = 1.04;
    auto [al, be] = alpha_beta<1>(a, mu, lin, gs);
    CHECK(al == doctest::Approx(lin.V({a[0]})).epsilon(1e-12));
    CHECK(be[0] == doctest::Approx(lin.gradV({a[0]})[0] / mu).epsilon(1e-12));
}

TEST_CASE("quadratic source: exact for quadratic W, h^2 scaling, orthogonality") {
    auto& gs = gp();
    // quadratic W: the Taylor expansion terminates, so -V + alpha + beta x = Q
    auto quad = Potential<1>::quadratic(0.1, {{{1.7}}});
    Vec<1> a{0.9};
    for (double mu : {1.0, 1.06}) {
        auto [al, be] = alpha_beta<1>(a, mu, quad, gs);
        auto q = quadratic_source<1>(a, mu, quad, gs);
        double worst = 0.0;
        for (std::size_t i = 0; i < gs.eta.size(); ++i) {
            double x = gs.grid.coord(i);
            if (std::fabs(x) > 20.0) continue; // soliton support
            double lhs = -quad.V({x / mu + a[0]}) + al + be[0] * x;
            worst = std::max(worst, std::fabs(lhs - q.eval({x})));
        }
        CHECK(worst < 1e-10);
    }

    // coefficients scale as h^2 (at a = 0 the W'' argument is h-independent)
    auto qa = quadratic_source<1>({0.0}, 1.0, cos1d(0.1), gs);
    auto qb = quadratic_source<1>({0.0}, 1.0, cos1d(0.05), gs);
    CHECK(qa.b[0][0] / qb.b[0][0] == doctest::Approx(4.0).epsilon(1e-6));
    CHECK(qa.a0 / qb.a0 == doctest::Approx(4.0).epsilon(1e-6));

    // Q eta is orthogonal to ker L+ and to the scaling pairing
    auto q = quadratic_source<1>({0.3}, 1.0, cos1d(0.1), gs);
    Field<1> qeta(gs.grid);
    for (std::size_t i = 0; i < gs.eta.size(); ++i)
        qeta[i] = cplx(q.eval({gs.grid.coord(i)}), 0.0) * gs.eta[i];
    auto de = deriv(gs.eta, 0);
    CHECK(std::fabs(inner(qeta, de)) < 1e-10);
    auto S = scaling_generator_field(gs);
    CHECK(std::fabs(inner(qeta, S)) < 1e-10);
}

TEST_CASE("X vanishes on the exact effective flow and reflects perturbations") {
    auto& gs = gp();
    auto pot = cos1d(0.1);
    EffectiveState<1> st;
    st.a = {0.6};
    st.v = {0.4};
    auto [al, be] = alpha_beta<1>(st.a, st.mu, pot, gs);
    GroupElement<1> g;
    g.a = st.a;
    g.v = st.v;
    g.mu = st.mu;
    GroupTangent<1> gd;
    gd.da = st.v;
    gd.dv = effective_force(st.a, st.mu, pot, gs);
    gd.dgamma = gamma_rate(st, pot, gs);
    gd.dmu = 0.0;
    auto X = compute_X(g, gd, al, be, gs.lambda);
    CHECK(X.norm() < 1e-9);

    GroupTangent<1> gd2 = gd;
    gd2.da[0] += 1e-3;
    auto X2 = compute_X(g, gd2, al, be, gs.lambda);
    CHECK(X2.translation(0) == doctest::Approx(-g.mu * 1e-3).epsilon(1e-9));
    // phase slot picks up a' . v
    CHECK(X2.phase() == doctest::Approx(1e-3 * g.v[0]).epsilon(1e-9));
    CHECK(std::fabs(X2.boost(0)) < 1e-12);
}

TEST_CASE("wtilde: zero for constant W, h^2 size, theta h^3 scaling") {
    auto& gs = gp();
    LinearizedOperator<1> L(gs);
    auto cb = build_corrector_basis(gs, 1e-10, &L);

    auto wz = build_wtilde<1>({0.2}, 1.0, Potential<1>::linear(0.1, {0.0}, 3.0), gs, cb, {0.3}, 0.0);
    CHECK(std::sqrt(h1_norm_sq(wz.wtilde)) < 1e-14);
    CHECK(std::fabs(wz.theta[0][0]) < 1e-12);

    double prev = 0.0;
    std::vector<double> ratios;
    for (double h : {0.1, 0.05, 0.025}) {
        auto wr = build_wtilde<1>({0.2}, 1.0, cos1d(h), gs, cb, {0.3}, 0.0);
        double size = std::sqrt(h1_norm_sq(wr.wtilde)) / (h * h);
        if (prev > 0.0) ratios.push_back(size / prev);
        prev = size;
        // theta scales like h^3 (third derivative of V along a')
        CHECK(std::fabs(wr.theta[0][0]) < 10.0 * h * h * h);
        CHECK(std::fabs(wr.theta[0][0]) > 1e-3 * h * h * h);
    }
    for (double r : ratios) CHECK(std::fabs(r - 1.0) < 0.2);
}

TEST_CASE("lyapounov: zero field, coercivity cross-check") {
    auto& gs = gp();
    LinearizedOperator<1> L(gs);
    Field<1> z(gs.grid);
    CHECK(lyapounov(z, L) == 0.0);

    auto rep = coercivity_constant(gs, 60);
    Field<1> w1 = rep.minimizer_plus;
    for (auto& zz : w1.v) zz *= 1e-3;
    double ratio = lyapounov(w1, L) / h1_norm_sq(w1);
    CHECK(ratio == doctest::Approx(rep.plus_block_min).epsilon(0.01));
}

TEST_CASE("w-equation residual: finite differences of a real PDE run") {
    // full-stack consistency: fit g(t) at three nearby times of a GP run,
    // finite-difference w and g, and compare dw/dt against the w-equation
    // right-hand side assembled from X, alpha, beta, L and N.
    auto& gs = gp();
    const double h = 0.1;
    auto pot = cos1d(h);
    Field<1> V = pot.sample(gs.grid);
    Nonlinearity<1> nl(gs.grid);

    GroupElement<1> g0;
    g0.v[0] = 0.3;
    Field<1> u = act(g0, gs.eta, gs.scale_weight);
    const double dt = 5e-4;
    // march to t = 2 so that w is nontrivial
    long warm = std::lround(2.0 / dt);
    for (long s = 0; s < warm; ++s) u = step_strang(u, dt, V, nl);

    const double delta = 0.02; // FD step in time
    long nd = std::lround(delta / dt);
    Field<1> um = u;
    Field<1> u0 = u;
    for (long s = 0; s < nd; ++s) u0 = step_strang(u0, dt, V, nl);
    Field<1> up = u0;
    for (long s = 0; s < nd; ++s) up = step_strang(up, dt, V, nl);

    // fit all three snapshots with warm starts
    GroupElement<1> guess = g0;
    guess.a[0] = 0.3 * 2.0;
    guess.gamma = (0.5 * 0.09 + gs.lambda) * 2.0;
    auto dm = fit(um, guess, gs);
    auto d0 = fit(u0, dm.g, gs);
    auto dp = fit(up, d0.g, gs);

    GroupTangent<1> gd;
    gd.da[0] = (dp.g.a[0] - dm.g.a[0]) / (2.0 * delta);
    gd.dv[0] = (dp.g.v[0] - dm.g.v[0]) / (2.0 * delta);
    gd.dgamma = (dp.g.gamma - dm.g.gamma) / (2.0 * delta);
    gd.dmu = (dp.g.mu - dm.g.mu) / (2.0 * delta);

    Field<1> dwdt(gs.grid);
    for (std::size_t i = 0; i < dwdt.size(); ++i)
        dwdt[i] = (dp.w[i] - dm.w[i]) / (2.0 * delta);

    LinearizedOperator<1> L(gs);
    auto rhs = weq_rhs(d0.w, d0.g, gd, pot, gs, L);

    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < dwdt.size(); ++i) {
        num += std::norm(dwdt[i] - rhs[i]);
        den += std::norm(rhs[i]);
    }
    // O(delta^2) time differencing plus fit tolerances; rhs scale is ~ h^2
    CHECK(std::sqrt(num / den) < 0.05);
}
