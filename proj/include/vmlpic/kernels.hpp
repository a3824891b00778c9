#pragma once

#include <array>
#include <cmath>
#include <span>

#include "vmlpic/core.hpp"

namespace vmlpic {

/// Velocity differences shorter than this are treated as coincident and the
/// collision kernel returns zero.
inline constexpr double kCoincidentVelocity = 1e-12;

/// Degree-1 B-spline of half-width eta, normalized to unit integral.
class HatKernel {
public:
    explicit HatKernel(double eta) : m_eta(eta), m_inv_eta(1.0 / eta) {
        if (!(eta > 0.0)) throw Error("hat kernel width must be positive");
    }

    double eta() const { return m_eta; }

    double operator()(double r) const {
        const double t = 1.0 - std::abs(r) * m_inv_eta;
        return t > 0.0 ? t * m_inv_eta : 0.0;
    }

private:
    double m_eta;
    double m_inv_eta;
};

/// Separation x_a - x_b folded into [-L/2, L/2].
inline double periodic_separation(double xa, double xb, double L) {
    double d = xa - xb;
    d -= L * std::nearbyint(d / L);
    return d;
}

/// Landau collision kernel A(z) = |z|^(gamma+2) (I - z z^T / |z|^2) with the
/// Coulomb exponent gamma = -dv.
class LandauKernel {
public:
    explicit LandauKernel(int dv) : m_dv(dv) {
        if (dv != 2 && dv != 3) throw Error("Landau kernel supports dv = 2 or 3");
    }

    int dv() const { return m_dv; }
    double gamma() const { return -static_cast<double>(m_dv); }

    /// Row-major dv x dv matrix in the leading entries of a 3x3 buffer.
    std::array<double, 9> matrix(std::span<const double> z) const;

    /// A(z) y without forming the matrix.
    void apply(std::span<const double> z, std::span<const double> y, std::span<double> out) const;

private:
    int m_dv;
};

/// Scalar prefactor |z|^(gamma+2) for gamma = -Dv, given |z|^2 > 0.
template <int Dv>
inline double landau_prefactor(double r2) {
    if constexpr (Dv == 2) {
        return 1.0;
    } else {
        return 1.0 / std::sqrt(r2);
    }
}

}  // namespace vmlpic
