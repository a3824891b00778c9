#include "vmlpic/equilibrium.hpp"

#include <cmath>
#include <numbers>

namespace vmlpic {

EquilibriumState vml_equilibrium(double initial_energy, const std::array<double, 3>& B_mean, double rho_ion,
                                 double volume, int dv) {
    EquilibriumState eq;
    eq.B_inf = B_mean;
    eq.rho_ion = rho_ion;
    eq.u_inf.assign(dv, 0.0);
    const double B2 = B_mean[0] * B_mean[0] + B_mean[1] * B_mean[1] + B_mean[2] * B_mean[2];
    eq.T_inf = 2.0 / (dv * rho_ion * volume) * (initial_energy - 0.5 * B2 * volume);
    if (!(eq.T_inf > 0.0)) throw Error("inconsistent energy accounting");
    return eq;
}

EquilibriumState vpl_equilibrium(double initial_energy, std::span<const double> initial_momentum, double rho_ion,
                                 double volume) {
    const int dv = static_cast<int>(initial_momentum.size());
    EquilibriumState eq;
    eq.rho_ion = rho_ion;
    eq.u_inf.resize(dv);
    double u2 = 0.0;
    for (int i = 0; i < dv; ++i) {
        eq.u_inf[i] = initial_momentum[i] / (rho_ion * volume);
        u2 += eq.u_inf[i] * eq.u_inf[i];
    }
    eq.T_inf = 2.0 / (dv * rho_ion * volume) * (initial_energy - 0.5 * rho_ion * u2 * volume);
    if (!(eq.T_inf > 0.0)) throw Error("inconsistent energy accounting");
    return eq;
}

double two_beam_score(double v, double c, double var) {
    // [-(v-c) phi+ - (v+c) phi-] / (var (phi+ + phi-)) with phi+/phi- = exp(2cv/var)
    return (-v + c * std::tanh(c * v / var)) / var;
}

std::array<double, 3> analytic_initial_score(Preset preset, const PresetParams& params, int dv, double,
                                             std::span<const double> v) {
    std::array<double, 3> s{};
    switch (preset) {
        case Preset::LandauDamping:
        case Preset::Custom:
            for (int i = 0; i < dv; ++i) s[i] = -v[i];
            break;
        case Preset::TwoStream:
            s[0] = two_beam_score(v[0], params.c, 1.0);
            for (int i = 1; i < dv; ++i) s[i] = -v[i];
            break;
        case Preset::Weibel: {
            const double var = params.beta / 2.0;
            s[0] = -v[0] / var;
            s[1] = two_beam_score(v[1], params.c, var);
            for (int i = 2; i < dv; ++i) s[i] = -v[i] / var;
            break;
        }
        default:
            throw Error("no analytic score for this preset");
    }
    return s;
}

std::vector<double> analytic_initial_scores(Preset preset, const PresetParams& params,
                                            const ParticleEnsemble& particles) {
    const int dv = particles.dv;
    std::vector<double> out(particles.size() * dv);
    for (std::size_t p = 0; p < particles.size(); ++p) {
        const auto s = analytic_initial_score(preset, params, dv, particles.x[p], particles.vel(p));
        for (int i = 0; i < dv; ++i) out[p * dv + i] = s[i];
    }
    return out;
}

double maxwellian_l2_distance(const ParticleEnsemble& particles, int component, double T, double u,
                              const HistogramOptions& options) {
    if (particles.size() == 0) throw Error("maxwellian_l2_distance: empty particle set");
    if (component < 0 || component >= particles.dv) throw Error("maxwellian_l2_distance: bad component");
    if (options.bins < 16) throw Error("maxwellian_l2_distance: need at least 16 bins");
    if (!(T > 0.0)) throw Error("maxwellian_l2_distance: temperature must be positive");
    if (options.half_width_sigmas < 5.0) throw Error("maxwellian_l2_distance: range must cover 5 sigma");
    const int dv = particles.dv;
    const double sigma = std::sqrt(T);
    const double lo = u - options.half_width_sigmas * sigma;
    const double width = 2.0 * options.half_width_sigmas * sigma / options.bins;
    std::vector<double> hist(options.bins, 0.0);
    double total = 0.0;
    for (std::size_t p = 0; p < particles.size(); ++p) {
        total += particles.w[p];
        const double b = std::floor((particles.v[p * dv + component] - lo) / width);
        if (b >= 0.0 && b < options.bins) hist[static_cast<int>(b)] += particles.w[p];
    }
    const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi * T));
    double acc = 0.0;
    for (int b = 0; b < options.bins; ++b) {
        const double center = lo + (b + 0.5) * width;
        const double g = norm * std::exp(-(center - u) * (center - u) / (2.0 * T));
        const double f = hist[b] / (total * width);
        acc += width * (f - g) * (f - g);
    }
    return std::sqrt(acc);
}

namespace {

double slope(std::span<const double> t, std::span<const double> y) {
    const std::size_t n = t.size();
    double tm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        tm += t[i];
        ym += y[i];
    }
    tm /= n;
    ym /= n;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (t[i] - tm) * (y[i] - ym);
        den += (t[i] - tm) * (t[i] - tm);
    }
    return num / den;
}

}  // namespace

DampingFit fit_damping_rate(std::span<const double> times, std::span<const double> E_l2, double t_min,
                            double t_max) {
    if (times.size() != E_l2.size()) throw Error("fit_damping_rate: series lengths differ");
    std::vector<double> t, y;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] >= t_min && times[i] <= t_max) {
            if (!(E_l2[i] > 0.0)) throw Error("fit_damping_rate: field norm must be positive");
            t.push_back(times[i]);
            y.push_back(std::log(E_l2[i]));
        }
    }
    DampingFit fit;
    std::vector<double> pt, py;
    for (std::size_t i = 1; i + 1 < y.size(); ++i) {
        if (y[i] >= y[i - 1] && y[i] >= y[i + 1]) {
            pt.push_back(t[i]);
            py.push_back(y[i]);
        }
    }
    if (pt.size() >= 3) {
        fit.rate = slope(pt, py);
        fit.t_begin = pt.front();
        fit.t_end = pt.back();
        fit.points = static_cast<int>(pt.size());
        fit.used_peaks = true;
        return fit;
    }
    bool increasing = y.size() >= 3;
    bool decreasing = y.size() >= 3;
    for (std::size_t i = 1; i < y.size(); ++i) {
        increasing = increasing && y[i] > y[i - 1];
        decreasing = decreasing && y[i] < y[i - 1];
    }
    if (!increasing && !decreasing) throw Error("insufficient oscillations");
    fit.rate = slope(t, y);
    fit.t_begin = t.front();
    fit.t_end = t.back();
    fit.points = static_cast<int>(t.size());
    fit.used_peaks = false;
    return fit;
}

}  // namespace vmlpic
