#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "soldyn/fft.hpp"
#include "soldyn/grid.hpp"

using namespace soldyn;

TEST_CASE("fft roundtrip and Parseval") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (std::size_t n : {8u, 256u, 4096u}) {
        std::vector<cplx> a(n), orig;
        for (auto& z : a) z = cplx(U(rng), U(rng));
        orig = a;
        double s0 = 0.0;
        for (auto& z : a) s0 += std::norm(z);
        fft(a, -1);
        double s1 = 0.0;
        for (auto& z : a) s1 += std::norm(z);
        CHECK(s1 / double(n) == doctest::Approx(s0).epsilon(1e-12));
        ifft(a);
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(a[i] - orig[i]));
        CHECK(err < 1e-13);
    }
}

TEST_CASE("fft of a pure mode lands on the right bin") {
    const std::size_t n = 64;
    std::vector<cplx> a(n);
    for (std::size_t j = 0; j < n; ++j) {
        double x = 2.0 * M_PI * double(j) / double(n);
        a[j] = cplx(std::cos(3.0 * x), std::sin(3.0 * x)); // e^{i 3 x}
    }
    fft(a, -1);
    CHECK(std::abs(a[3] - cplx(double(n), 0.0)) < 1e-10);
    for (std::size_t k = 0; k < n; ++k)
        if (k != 3) CHECK(std::abs(a[k]) < 1e-10);
}

TEST_CASE("dst1 matches the direct sine sum and inverts") {
    const std::size_t n = 31; // n+1 = 32
    std::vector<double> x(n);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (auto& v : x) v = U(rng);
    auto X = dst1(x);
    for (std::size_t k = 0; k < n; ++k) {
        double direct = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            direct += x[j] * std::sin(M_PI * double(j + 1) * double(k + 1) / double(n + 1));
        CHECK(X[k] == doctest::Approx(direct).epsilon(1e-12));
    }
    auto back = idst1(X);
    for (std::size_t j = 0; j < n; ++j) CHECK(back[j] == doctest::Approx(x[j]).epsilon(1e-12));
}

TEST_CASE("chirp-z equals the direct evaluation") {
    const std::size_t n = 64;
    const double w = 0.9871 * 2.0 * M_PI / double(n);
    ChirpZ cz(w, n);
    std::vector<cplx> d(n), out(n);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (auto& z : d) z = cplx(U(rng), U(rng));
    cz.apply(d.data(), out.data());
    for (std::size_t j = 0; j < n; ++j) {
        cplx direct(0.0, 0.0);
        for (std::size_t q = 0; q < n; ++q)
            direct += d[q] * cplx(std::cos(w * double(q) * double(j)), std::sin(w * double(q) * double(j)));
        CHECK(std::abs(out[j] - direct) < 1e-10);
    }
}

TEST_CASE("spectral derivative on the periodic grid") {
    Grid<1> g(256, 2.0 * M_PI);
    Field<1> f(g);
    for (std::size_t i = 0; i < g.n; ++i) f[i] = cplx(std::sin(3.0 * g.coord(i)), 0.0);
    auto df = deriv(f, 0);
    double err = 0.0;
    for (std::size_t i = 0; i < g.n; ++i)
        err = std::max(err, std::abs(df[i] - cplx(3.0 * std::cos(3.0 * g.coord(i)), 0.0)));
    CHECK(err < 1e-10);
}

TEST_CASE("3d transforms: axis handling and h1 norm") {
    Grid<3> g(64, 12.0);
    Field<3> f(g);
    for (std::size_t i = 0; i < f.size(); ++i) {
        auto x = f.point(i);
        f[i] = cplx(std::exp(-(x[0] * x[0] + 2 * x[1] * x[1] + 0.5 * x[2] * x[2])), 0.0);
    }
    Field<3> f2 = f;
    fft_forward(f2);
    fft_inverse(f2);
    double err = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) err = std::max(err, std::abs(f2[i] - f[i]));
    CHECK(err < 1e-13);

    // d/dx1 of a separable Gaussian against the analytic derivative
    auto d1 = deriv(f, 1);
    double worst = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        auto x = f.point(i);
        double exact = -4.0 * x[1] * std::exp(-(x[0] * x[0] + 2 * x[1] * x[1] + 0.5 * x[2] * x[2]));
        worst = std::max(worst, std::abs(d1[i].real() - exact));
    }
    CHECK(worst < 1e-6);

    // H1 norm against mass + sum of gradient masses
    double h1 = h1_norm_sq(f);
    double ref = mass(f);
    for (int d = 0; d < 3; ++d) ref += mass(deriv(f, d));
    CHECK(h1 == doctest::Approx(ref).epsilon(1e-10));
}
