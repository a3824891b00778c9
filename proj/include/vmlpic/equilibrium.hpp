#pragma once

#include <array>
#include <span>
#include <vector>

#include "vmlpic/core.hpp"

namespace vmlpic {

/// Spatially uniform global Maxwellian reached by the collisional system.
struct EquilibriumState {
    double T_inf = 0.0;
    std::vector<double> u_inf;       // dv components; zero in VML
    std::array<double, 3> B_inf{};   // zero in VPL
    double rho_ion = 1.0;
};

/// Zero-drift equilibrium of the electromagnetic system. The magnetic field
/// keeps its spatial mean; the remaining energy is shared by dv velocity
/// degrees of freedom.
EquilibriumState vml_equilibrium(double initial_energy, const std::array<double, 3>& B_mean, double rho_ion,
                                 double volume, int dv);

/// Drifting equilibrium of the electrostatic system; the drift carries the
/// conserved momentum.
EquilibriumState vpl_equilibrium(double initial_energy, std::span<const double> initial_momentum, double rho_ion,
                                 double volume);

/// grad_v log f0 for the preset initial conditions.
std::array<double, 3> analytic_initial_score(Preset preset, const PresetParams& params, int dv, double x,
                                             std::span<const double> v);

/// Same, for a whole ensemble (n x dv).
std::vector<double> analytic_initial_scores(Preset preset, const PresetParams& params, const ParticleEnsemble& particles);

/// Score of the equal-weight mixture of N(c, var) and N(-c, var).
double two_beam_score(double v, double c, double var);

struct HistogramOptions {
    int bins = 200;
    double half_width_sigmas = 6.0;
};

/// L2 distance between the weighted histogram density of one velocity
/// component and the Gaussian N(u, T) sampled at the bin centers.
double maxwellian_l2_distance(const ParticleEnsemble& particles, int component, double T, double u,
                              const HistogramOptions& options = {});

struct DampingFit {
    double rate = 0.0;
    double t_begin = 0.0;
    double t_end = 0.0;
    int points = 0;
    bool used_peaks = true;
};

/// Exponential rate of |E|(t) from a least-squares line through the local
/// maxima of log |E| inside [t_min, t_max]. A monotone series without
/// oscillations is fitted on all of its samples instead.
DampingFit fit_damping_rate(std::span<const double> times, std::span<const double> E_l2,
                            double t_min = -1e300, double t_max = 1e300);

}  // namespace vmlpic
