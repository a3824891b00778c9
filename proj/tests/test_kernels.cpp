#include <doctest.h>

#include <array>
#include <cmath>
#include <random>

#include "vmlpic/kernels.hpp"
#include "vmlpic/pic.hpp"

using namespace vmlpic;

TEST_CASE("hat kernel values") {
    const HatKernel psi(0.5);
    CHECK(psi(0.0) == 2.0);
    CHECK(psi(0.5) == 0.0);
    CHECK(psi(-0.5) == 0.0);
    CHECK(psi(0.25) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(psi(-0.25) == psi(0.25));
    CHECK(psi(3.0) == 0.0);
    CHECK_THROWS_AS(HatKernel(0.0), Error);
}

TEST_CASE("hat kernel has unit mass and partitions unity on the grid") {
    const double eta = 0.37;
    const HatKernel psi(eta);
    const int N = 20000;
    const double a = -1.0, b = 1.0, h = (b - a) / N;
    double mass = 0.5 * (psi(a) + psi(b));
    for (int i = 1; i < N; ++i) mass += psi(a + i * h);
    CHECK(std::abs(mass * h - 1.0) < 1e-6);

    const Grid g(17, 17 * eta);
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> U(0.0, g.L);
    for (int t = 0; t < 1000; ++t) {
        const double x = U(gen);
        double s = 0.0;
        for (int j = 0; j < g.M; ++j) s += psi(periodic_separation(x, g.center(j), g.L));
        CHECK(std::abs(eta * s - 1.0) < 1e-12);
    }
}

TEST_CASE("periodic separation uses the minimum image") {
    CHECK(periodic_separation(0.1, 9.9, 10.0) == doctest::Approx(0.2));
    CHECK(periodic_separation(9.9, 0.1, 10.0) == doctest::Approx(-0.2));
    CHECK(periodic_separation(3.0, 1.0, 10.0) == doctest::Approx(2.0));
}

TEST_CASE("Landau kernel examples") {
    const LandauKernel A3(3), A2(2);
    CHECK(A3.gamma() == -3.0);
    const std::array<double, 3> e1{1, 0, 0};
    const auto m = A3.matrix(e1);
    const double diag[9] = {0, 0, 0, 0, 1, 0, 0, 0, 1};
    for (int i = 0; i < 9; ++i) CHECK(m[i] == doctest::Approx(diag[i]).epsilon(1e-15));

    const std::array<double, 2> z0{0, 0};
    const auto m0 = A2.matrix(z0);
    for (double x : m0) CHECK(x == 0.0);

    // |z|^0 times the projector, rational values
    const std::array<double, 2> z34{3, 4};
    const auto m34 = A2.matrix(z34);
    CHECK(m34[0] == doctest::Approx(16.0 / 25.0).epsilon(1e-15));
    CHECK(m34[1] == doctest::Approx(-12.0 / 25.0).epsilon(1e-15));
    CHECK(m34[2] == doctest::Approx(-12.0 / 25.0).epsilon(1e-15));
    CHECK(m34[3] == doctest::Approx(9.0 / 25.0).epsilon(1e-15));

    const std::array<double, 3> tiny{1e-13, 0, 0};
    for (double x : A3.matrix(tiny)) CHECK(x == 0.0);
    CHECK_THROWS_AS(LandauKernel(4), Error);
}

TEST_CASE("Landau kernel is symmetric PSD with z in its null space") {
    std::mt19937_64 gen(9);
    std::normal_distribution<double> N;
    for (int dv : {2, 3}) {
        const LandauKernel A(dv);
        for (int t = 0; t < 500; ++t) {
            std::array<double, 3> z{}, y{}, out{};
            for (int i = 0; i < dv; ++i) {
                z[i] = N(gen) * std::exp(N(gen));
                y[i] = N(gen);
            }
            const auto m = A.matrix(std::span<const double>(z.data(), dv));
            double fro = 0.0, zn = 0.0;
            for (int i = 0; i < dv; ++i) {
                zn += z[i] * z[i];
                for (int j = 0; j < dv; ++j) {
                    fro += m[i * dv + j] * m[i * dv + j];
                    CHECK(m[i * dv + j] == m[j * dv + i]);
                }
            }
            fro = std::sqrt(fro);
            zn = std::sqrt(zn);
            for (int i = 0; i < dv; ++i) {
                double az = 0.0;
                for (int j = 0; j < dv; ++j) az += m[i * dv + j] * z[j];
                CHECK(std::abs(az) <= 1e-12 * fro * zn);
            }
            // y^T A y >= 0 and apply() agrees with the matrix
            A.apply(std::span<const double>(z.data(), dv), std::span<const double>(y.data(), dv),
                    std::span<double>(out.data(), dv));
            double q = 0.0;
            for (int i = 0; i < dv; ++i) {
                double my = 0.0;
                for (int j = 0; j < dv; ++j) my += m[i * dv + j] * y[j];
                CHECK(out[i] == doctest::Approx(my).epsilon(1e-12).scale(fro));
                q += y[i] * my;
            }
            CHECK(q >= -1e-12 * fro);
            // eigenvalues: 0 (along z) and |z|^(gamma+2) with multiplicity dv-1
            const double trace = dv == 2 ? m[0] + m[3] : m[0] + m[4] + m[8];
            CHECK(trace == doctest::Approx((dv - 1) * std::pow(zn, 2.0 - dv)).epsilon(1e-12));
        }
    }
}
