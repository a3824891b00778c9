#include "vmlpic/sampling.hpp"

#include <cmath>

namespace vmlpic {

double perturbed_cdf(double x, double alpha, double k, double L) { return (x + alpha / k * std::sin(k * x)) / L; }

double invert_perturbed_cdf(double u, double alpha, double k, double L) {
    const double target = u;
    double x = u * L;
    for (int it = 0; it < 100; ++it) {
        const double r = perturbed_cdf(x, alpha, k, L) - target;
        if (std::abs(r) <= 1e-12) {
            if (x >= 0.0 && x < L) return x;
            break;
        }
        const double dF = (1.0 + alpha * std::cos(k * x)) / L;
        x -= r / dF;
        if (!(x >= 0.0 && x <= L)) break;
    }
    // F is strictly increasing on [0, L], so bisection always converges
    double lo = 0.0, hi = L;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (perturbed_cdf(mid, alpha, k, L) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (std::abs(perturbed_cdf(mid, alpha, k, L) - target) <= 1e-12) {
            lo = hi = mid;
        }
    }
    return lo < L ? lo : std::nextafter(L, 0.0);
}

std::vector<double> sample_positions(std::size_t n, double alpha, double k, double L, Rng& rng) {
    if (!(std::abs(alpha) < 1.0)) throw Error("sample_positions: need |alpha| < 1");
    std::vector<double> x(n);
    for (auto& xp : x) {
        const double u = rng.uniform();
        xp = alpha == 0.0 ? u * L : invert_perturbed_cdf(u, alpha, k, L);
    }
    return x;
}

std::vector<double> sample_velocities(std::size_t n, int dv, Preset preset, const PresetParams& params, Rng& rng) {
    std::vector<double> v(n * dv);
    for (std::size_t p = 0; p < n; ++p) {
        double* vp = v.data() + p * dv;
        switch (preset) {
            case Preset::LandauDamping:
            case Preset::Custom:
                for (int i = 0; i < dv; ++i) vp[i] = rng.normal();
                break;
            case Preset::TwoStream: {
                const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
                vp[0] = sign * params.c + rng.normal();
                for (int i = 1; i < dv; ++i) vp[i] = rng.normal();
                break;
            }
            case Preset::Weibel: {
                const double sd = std::sqrt(params.beta / 2.0);
                vp[0] = sd * rng.normal();
                const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
                vp[1] = sign * params.c + sd * rng.normal();
                for (int i = 2; i < dv; ++i) vp[i] = sd * rng.normal();
                break;
            }
        }
    }
    return v;
}

ParticleEnsemble sample_ensemble(const SimConfig& cfg, Rng& rng) {
    const auto n = static_cast<std::size_t>(cfg.n);
    ParticleEnsemble particles;
    particles.dv = cfg.dv;
    const double alpha = cfg.preset == Preset::Weibel ? 0.0 : cfg.preset_params.alpha;
    particles.x = sample_positions(n, alpha, cfg.preset_params.k, cfg.L, rng);
    particles.v = sample_velocities(n, cfg.dv, cfg.preset, cfg.preset_params, rng);
    particles.w.assign(n, cfg.L / static_cast<double>(n));
    return particles;
}

void initial_fields(const SimConfig& cfg, const Grid& grid, FieldState& fields) {
    std::fill(fields.E1.begin(), fields.E1.end(), 0.0);
    std::fill(fields.E2.begin(), fields.E2.end(), 0.0);
    std::fill(fields.B3.begin(), fields.B3.end(), 0.0);
    if (cfg.preset == Preset::Weibel) {
        for (int j = 0; j < grid.M; ++j) {
            fields.B3[j] = cfg.preset_params.alpha_B * std::sin(cfg.preset_params.k * grid.center(j));
        }
        return;
    }
    fields.E1 = poisson_solve(fields.rho, fields.rho_ion, grid);
}

}  // namespace vmlpic
