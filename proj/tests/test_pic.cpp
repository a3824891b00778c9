#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "vmlpic/kernels.hpp"
#include "vmlpic/pic.hpp"

using namespace vmlpic;

namespace {

ParticleEnsemble single(double x, std::initializer_list<double> v, double w = 1.0) {
    ParticleEnsemble p(1, static_cast<int>(v.size()));
    p.x[0] = x;
    p.v.assign(v);
    p.w[0] = w;
    return p;
}

ParticleEnsemble random_ensemble(std::size_t n, int dv, double L, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> U(0.0, L);
    std::normal_distribution<double> N;
    ParticleEnsemble p(n, dv);
    for (std::size_t i = 0; i < n; ++i) {
        p.x[i] = U(gen);
        p.w[i] = L / n;
        for (int d = 0; d < dv; ++d) p.v[i * dv + d] = N(gen);
    }
    return p;
}

}  // namespace

TEST_CASE("grid geometry") {
    const Grid g(10, 5.0);
    CHECK(g.eta == 0.5);
    CHECK(g.center(0) == 0.25);
    CHECK(g.center(9) == 4.75);
    CHECK(g.wrap(-1) == 9);
    CHECK(g.wrap(10) == 0);
    CHECK_THROWS_AS(Grid(0, 1.0), Error);
}

TEST_CASE("deposit examples") {
    const Grid g(8, 4.0);
    FieldState f(g.M, 2);

    deposit(single(g.center(3), {0.5, -1.0}), g, f);
    for (int j = 0; j < g.M; ++j) CHECK(f.rho[j] == doctest::Approx(j == 3 ? 1.0 / g.eta : 0.0).epsilon(1e-15));
    CHECK(f.current(0)[3] == doctest::Approx(0.5 / g.eta));
    CHECK(f.current(1)[3] == doctest::Approx(-1.0 / g.eta));

    deposit(single(g.center(7) + 0.5 * g.eta, {0, 0}), g, f);  // between the last and first centers
    CHECK(f.rho[7] == doctest::Approx(0.5 / g.eta).epsilon(1e-14));
    CHECK(f.rho[0] == doctest::Approx(0.5 / g.eta).epsilon(1e-14));
    for (int j = 1; j < 7; ++j) CHECK(f.rho[j] == 0.0);

    // evenly spaced particles reproduce a flat density
    const int n = 10 * g.M;
    ParticleEnsemble u(n, 2);
    for (int p = 0; p < n; ++p) {
        u.x[p] = (p + 0.5) * g.L / n;
        u.w[p] = g.L / n;
    }
    deposit(u, g, f);
    const HatKernel psi(g.eta);
    for (int j = 0; j < g.M; ++j) {
        double brute = 0.0;
        for (int p = 0; p < n; ++p) brute += u.w[p] * psi(periodic_separation(g.center(j), u.x[p], g.L));
        CHECK(f.rho[j] == doctest::Approx(brute).epsilon(1e-13));
        CHECK(f.rho[j] == doctest::Approx(1.0).epsilon(1e-13));
    }
}

TEST_CASE("deposit matches the kernel sum and conserves mass and current") {
    for (int dv : {2, 3}) {
        const Grid g(13, 7.3);
        const auto p = random_ensemble(2000, dv, g.L, 17 + dv);
        FieldState f(g.M, dv);
        deposit(p, g, f);
        const HatKernel psi(g.eta);
        double mass = 0.0;
        std::vector<double> cur(dv, 0.0), pm(dv, 0.0);
        for (int j = 0; j < g.M; ++j) {
            double brute = 0.0;
            for (std::size_t q = 0; q < p.size(); ++q) brute += p.w[q] * psi(periodic_separation(g.center(j), p.x[q], g.L));
            CHECK(f.rho[j] == doctest::Approx(brute).epsilon(1e-12));
            mass += g.eta * f.rho[j];
            for (int i = 0; i < dv; ++i) cur[i] += g.eta * f.current(i)[j];
        }
        for (std::size_t q = 0; q < p.size(); ++q) {
            for (int i = 0; i < dv; ++i) pm[i] += p.w[q] * p.v[q * dv + i];
        }
        CHECK(std::abs(mass - p.total_weight()) <= 1e-12 * p.total_weight());
        for (int i = 0; i < dv; ++i) CHECK(std::abs(cur[i] - pm[i]) <= 1e-12 * (std::abs(pm[i]) + p.total_weight()));
    }
}

TEST_CASE("interpolation examples") {
    const Grid g(6, 3.0);
    FieldState f(g.M, 3);
    for (int j = 0; j < g.M; ++j) {
        f.E1[j] = 2.5;
        f.E2[j] = j;
        f.B3[j] = -j;
    }
    auto p = random_ensemble(50, 3, g.L, 3);
    p.x[0] = g.center(2);
    p.x[1] = g.center(4) + 0.5 * g.eta;
    const auto pf = interpolate_fields(p, f, g);
    for (std::size_t q = 0; q < p.size(); ++q) {
        CHECK(pf.E[q * 3 + 0] == doctest::Approx(2.5).epsilon(1e-14));
        CHECK(pf.E[q * 3 + 2] == 0.0);
        CHECK(pf.B[q * 3 + 0] == 0.0);
        CHECK(pf.B[q * 3 + 1] == 0.0);
    }
    CHECK(pf.E[0 * 3 + 1] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(pf.B[0 * 3 + 2] == doctest::Approx(-2.0).epsilon(1e-15));
    CHECK(pf.E[1 * 3 + 1] == doctest::Approx(4.5).epsilon(1e-15));

    // brute-force kernel oracle
    const HatKernel psi(g.eta);
    for (std::size_t q = 0; q < p.size(); ++q) {
        double e2 = 0.0;
        for (int j = 0; j < g.M; ++j) e2 += g.eta * psi(periodic_separation(p.x[q], g.center(j), g.L)) * f.E2[j];
        CHECK(pf.E[q * 3 + 1] == doctest::Approx(e2).epsilon(1e-13));
    }

    FieldState f2(g.M, 2);
    f2.E1.assign(g.M, 1.0);
    f2.E2.assign(g.M, 3.0);
    const auto p2 = random_ensemble(5, 2, g.L, 4);
    const auto pf2 = interpolate_fields(p2, f2, g);
    CHECK(pf2.E.size() == 10);
    CHECK(pf2.E[1] == doctest::Approx(3.0));
}

TEST_CASE("Lorentz push examples") {
    auto p = single(0.0, {1, 0, 0});
    ParticleFields pf{3, {0, 0, 0}, {0, 0, 1}};
    lorentz_push(p, pf, 0.1);
    CHECK(p.v[0] == 1.0);
    CHECK(p.v[1] == doctest::Approx(-0.1));
    CHECK(p.v[2] == 0.0);

    auto q = single(0.0, {0, 2, 0});
    ParticleFields pf2{3, {1, 0, 0}, {0, 0, 0.5}};
    lorentz_push(q, pf2, 0.2);
    CHECK(q.v[0] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(q.v[1] == 2.0);
    CHECK(q.v[2] == 0.0);

    auto r = single(0.0, {0.3, -0.7});
    ParticleFields none{2, {0, 0}, {0, 0, 0}};
    lorentz_push(r, none, 0.5);
    CHECK(r.v[0] == 0.3);
    CHECK(r.v[1] == -0.7);

    auto s = single(0.0, {1, 2});
    ParticleFields pf3{2, {0, 0}, {0, 0, 1}};
    lorentz_push(s, pf3, 0.1);
    CHECK(s.v[0] == doctest::Approx(1.2));
    CHECK(s.v[1] == doctest::Approx(1.9));
}

TEST_CASE("position advance examples") {
    auto p = single(3.0, {0.0, 1.0});
    advance_positions(p, 0.1, 10.0);
    CHECK(p.x[0] == 3.0);

    const double eps = 1e-3;
    auto w = single(10.0 - eps, {2.0 * eps / 0.5, 0.0});
    advance_positions(w, 0.5, 10.0);
    CHECK(w.x[0] == doctest::Approx(eps).epsilon(1e-9));

    auto a = single(1.0, {2.0, 0.0});
    advance_positions(a, 0.05, 10.0);
    CHECK(a.x[0] == doctest::Approx(1.1).epsilon(1e-15));

    auto b = single(0.5, {-3.0, 0.0});
    advance_positions(b, 1.0, 10.0);
    CHECK(b.x[0] == doctest::Approx(7.5));
}

TEST_CASE("Maxwell update examples") {
    const Grid g(16, 2.0 * std::numbers::pi);
    FieldState f(g.M, 3);
    f.B3.assign(g.M, 0.7);
    maxwell_step(f, 0.1, g);
    for (int j = 0; j < g.M; ++j) {
        CHECK(f.E1[j] == 0.0);
        CHECK(f.E2[j] == 0.0);
        CHECK(f.B3[j] == 0.7);
    }

    FieldState u(g.M, 3);
    std::fill(u.current(0).begin(), u.current(0).end(), 1.0);
    maxwell_step(u, 0.1, g);
    for (int j = 0; j < g.M; ++j) CHECK(u.E1[j] == doctest::Approx(-0.1));

    const double k = 3.0, dt = 0.05;
    FieldState m(g.M, 3);
    for (int j = 0; j < g.M; ++j) m.E2[j] = std::sin(k * g.center(j));
    maxwell_step(m, dt, g);
    for (int j = 0; j < g.M; ++j) {
        const double stencil_value = -dt * (std::sin(k * g.center(g.wrap(j + 1))) - std::sin(k * g.center(g.wrap(j - 1)))) /
                                     (2.0 * g.eta);
        CHECK(m.B3[j] == doctest::Approx(stencil_value).epsilon(1e-13));
        CHECK(std::abs(m.B3[j] + dt * std::sin(k * g.eta) / g.eta * std::cos(k * g.center(j))) < 1e-13);
    }
}

TEST_CASE("Maxwell update: B3 reads the freshly updated E2") {
    const Grid g(8, 8.0);
    FieldState f(g.M, 2);
    for (int j = 0; j < g.M; ++j) {
        f.B3[j] = std::cos(0.25 * std::numbers::pi * j);
        f.current(1)[j] = 0.1 * j;
    }
    auto expected = f;
    const double dt = 0.3;
    std::vector<double> E2new(g.M);
    for (int j = 0; j < g.M; ++j) {
        E2new[j] = f.E2[j] - dt * ((f.B3[g.wrap(j + 1)] - f.B3[g.wrap(j - 1)]) / (2 * g.eta) + f.current(1)[j]);
    }
    maxwell_step(f, dt, g);
    for (int j = 0; j < g.M; ++j) {
        CHECK(f.E2[j] == doctest::Approx(E2new[j]).epsilon(1e-15));
        const double b = expected.B3[j] - dt * (E2new[g.wrap(j + 1)] - E2new[g.wrap(j - 1)]) / (2 * g.eta);
        CHECK(f.B3[j] == doctest::Approx(b).epsilon(1e-15));
    }
}

TEST_CASE("vacuum modes follow the centered-difference dispersion factor") {
    const Grid g(32, 10.0);
    const double k = 2.0 * std::numbers::pi * 3 / g.L, dt = 1e-3;
    FieldState f(g.M, 3);
    for (int j = 0; j < g.M; ++j) f.B3[j] = std::cos(k * g.center(j));
    maxwell_step(f, dt, g);
    const double factor = std::sin(k * g.eta) / (k * g.eta);
    for (int j = 0; j < g.M; ++j) {
        // continuous rate dE2/dt = -dB3/dx = k sin(kx)
        const double exact = dt * k * std::sin(k * g.center(j));
        if (std::abs(exact) > 1e-6) CHECK(std::abs(f.E2[j] / exact - factor) < 1e-10);
    }
}

TEST_CASE("Maxwell update keeps the mean magnetic field") {
    const Grid g(24, 5.0);
    FieldState f(g.M, 3);
    std::mt19937_64 gen(2);
    std::normal_distribution<double> N;
    for (int j = 0; j < g.M; ++j) {
        f.E2[j] = N(gen);
        f.B3[j] = 0.3 + N(gen);
        for (int i = 0; i < 3; ++i) f.current(i)[j] = N(gen);
    }
    double mean0 = 0.0;
    for (double b : f.B3) mean0 += b;
    for (int s = 0; s < 100; ++s) maxwell_step(f, 0.01, g);
    double mean1 = 0.0;
    for (double b : f.B3) mean1 += b;
    CHECK(std::abs(mean1 - mean0) / g.M < 1e-10);
}

TEST_CASE("Poisson solve") {
    const Grid g(64, 4.0 * std::numbers::pi);
    std::vector<double> rho(g.M, 1.0);
    for (double e : poisson_solve(rho, 1.0, g)) CHECK(std::abs(e) < 1e-14);

    for (int mode : {1, 2, 5}) {
        const double k = 2.0 * std::numbers::pi * mode / g.L, alpha = 0.3;
        for (int j = 0; j < g.M; ++j) rho[j] = 1.0 + alpha * std::cos(k * g.center(j));
        const auto E = poisson_solve(rho, 1.0, g);
        for (int j = 0; j < g.M; ++j) CHECK(std::abs(E[j] - alpha / k * std::sin(k * g.center(j))) < 1e-12);
    }

    // odd cell count
    const Grid go(21, 3.0);
    std::vector<double> r(go.M);
    const double k = 2.0 * std::numbers::pi / go.L;
    for (int j = 0; j < go.M; ++j) r[j] = 2.0 + 0.1 * std::sin(k * go.center(j));
    const auto E = poisson_solve(r, 2.0, go);
    for (int j = 0; j < go.M; ++j) CHECK(std::abs(E[j] + 0.1 / k * std::cos(k * go.center(j))) < 1e-12);

    std::vector<double> charged(g.M, 1.1);
    CHECK_THROWS_WITH_AS(poisson_solve(charged, 1.0, g), "non-neutral plasma", Error);
}

TEST_CASE("Poisson solve reproduces the Landau-damping field energy") {
    const double alpha = 0.1, k = 0.5;
    const Grid g(100, 4.0 * std::numbers::pi);
    std::vector<double> rho(g.M);
    for (int j = 0; j < g.M; ++j) rho[j] = 1.0 + alpha * std::cos(k * g.center(j));
    const auto E = poisson_solve(rho, 1.0, g);
    double ee = 0.0;
    for (double e : E) ee += e * e;
    ee *= 0.5 * g.eta;
    CHECK(ee == doctest::Approx(alpha * alpha * g.L / (4 * k * k)).epsilon(1e-12));
    CHECK(std::abs(ee - 0.13) < 0.01);
}

TEST_CASE("electrostatic field step") {
    const Grid g(10, 1.0);
    FieldState f(g.M, 2);
    for (int j = 0; j < g.M; ++j) {
        f.E1[j] = std::sin(j);
        f.E2[j] = 0.5;  // cleared by the step
        f.B3[j] = 0.5;
    }
    const auto E0 = f.E1;
    vpl_field_step(f, 0.1, false);
    for (int j = 0; j < g.M; ++j) {
        CHECK(f.E1[j] == E0[j]);
        CHECK(f.E2[j] == 0.0);
        CHECK(f.B3[j] == 0.0);
    }

    std::fill(f.current(0).begin(), f.current(0).end(), 2.0);
    vpl_field_step(f, 0.05, false);
    for (int j = 0; j < g.M; ++j) CHECK(f.E1[j] == doctest::Approx(E0[j] - 0.1).epsilon(1e-15));

    // uniform current carries no field when the mean is removed
    auto h = f;
    vpl_field_step(h, 0.05, true);
    for (int j = 0; j < g.M; ++j) CHECK(h.E1[j] == doctest::Approx(f.E1[j]).epsilon(1e-15));

    for (bool sub : {false, true}) {
        FieldState m(g.M, 2);
        double mean0 = 0.0;
        for (int j = 0; j < g.M; ++j) {
            m.E1[j] = 0.3 * j;
            mean0 += m.E1[j];
            m.current(0)[j] = std::cos(2.0 * std::numbers::pi * j / g.M);
        }
        vpl_field_step(m, 0.2, sub);
        double mean1 = 0.0;
        for (double e : m.E1) mean1 += e;
        CHECK(std::abs(mean1 - mean0) < 1e-13);
    }
}
