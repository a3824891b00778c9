#pragma once

#include <vector>

#include "vmlpic/core.hpp"
#include "vmlpic/pic.hpp"

namespace vmlpic {

/// CDF of the density (1 + alpha cos kx) / L on [0, L).
double perturbed_cdf(double x, double alpha, double k, double L);

/// Inverts perturbed_cdf by Newton's method, falling back to bisection.
double invert_perturbed_cdf(double u, double alpha, double k, double L);

std::vector<double> sample_positions(std::size_t n, double alpha, double k, double L, Rng& rng);

/// n x dv velocities drawn from the preset's velocity marginal.
std::vector<double> sample_velocities(std::size_t n, int dv, Preset preset, const PresetParams& params, Rng& rng);

/// Positions, then velocities, from one stream; equal weights L / n.
ParticleEnsemble sample_ensemble(const SimConfig& cfg, Rng& rng);

/// Fields at t = 0. Electrostatic presets solve Poisson on the deposited
/// density (fields.rho must be current); weibel starts with E = 0 and
/// B3 = alpha_B sin(k x_j).
void initial_fields(const SimConfig& cfg, const Grid& grid, FieldState& fields);

}  // namespace vmlpic
