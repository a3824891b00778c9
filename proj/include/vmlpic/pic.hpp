#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vmlpic/core.hpp"

namespace vmlpic {

/// Uniform periodic grid with M cells on [0, L); values live at the cell
/// centers (j + 1/2) eta for j = 0..M-1.
struct Grid {
    int M = 1;
    double L = 1.0;
    double eta = 1.0;

    Grid() = default;
    Grid(int M_, double L_);

    double center(int j) const { return (j + 0.5) * eta; }
    int wrap(int j) const { return ((j % M) + M) % M; }
};

/// The two grid centers bracketing a position and the hat weight
/// eta * psi_eta(x - x_j) of each. With M >= 2 this is the minimum-image hat
/// kernel; with M = 1 both entries refer to the single cell.
struct Stencil {
    int left;
    int right;
    double w_left;
    double w_right;
};

inline Stencil stencil(const Grid& g, double x) {
    const double s = x / g.eta - 0.5;
    const double fl = std::floor(s);
    const double frac = s - fl;
    const int j0 = g.wrap(static_cast<int>(fl));
    return {j0, g.wrap(j0 + 1), 1.0 - frac, frac};
}

/// rho_j = sum_p w_p psi(x_j - x_p) and J_ij = sum_p w_p v_ip psi(x_j - x_p).
void deposit(const ParticleEnsemble& particles, const Grid& grid, FieldState& fields);

/// Per-particle fields: E is n x dv with (E1, E2, 0...) and B is n x 3 with
/// (0, 0, B3).
struct ParticleFields {
    int dv = 3;
    std::vector<double> E;
    std::vector<double> B;
};

ParticleFields interpolate_fields(const ParticleEnsemble& particles, const FieldState& fields, const Grid& grid);

/// v += dt (E + v x B) with B = (0, 0, B3).
void lorentz_push(ParticleEnsemble& particles, const ParticleFields& pf, double dt);

/// x += dt v_1, then wrap into [0, L).
void advance_positions(ParticleEnsemble& particles, double dt, double L);

/// Reduced Maxwell update in the order E1, E2, B3; the B3 update reads the
/// already-updated E2. Centered differences on the periodic grid.
void maxwell_step(FieldState& fields, double dt, const Grid& grid);

/// Periodic zero-mean spectral solution of -phi'' = rho - rho_ion, returning
/// E1 = -phi'. The Nyquist mode (even M) carries no derivative and is dropped.
std::vector<double> poisson_solve(std::span<const double> rho, double rho_ion, const Grid& grid);

/// E1 -= dt J1. With subtract_mean_current the spatial mean of J1 is removed
/// first, so E1 keeps zero mean as the gradient of a periodic potential.
void vpl_field_step(FieldState& fields, double dt, bool subtract_mean_current);

}  // namespace vmlpic
