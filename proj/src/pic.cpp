#include "vmlpic/pic.hpp"

#include <cmath>
#include <numbers>

namespace vmlpic {

Grid::Grid(int M_, double L_) : M(M_), L(L_), eta(L_ / M_) {
    if (M_ < 1 || !(L_ > 0.0)) throw Error("grid needs M >= 1 and L > 0");
}

void deposit(const ParticleEnsemble& particles, const Grid& grid, FieldState& fields) {
    const int dv = particles.dv;
    const int M = grid.M;
    fields.rho.assign(M, 0.0);
    fields.J.assign(static_cast<std::size_t>(M) * dv, 0.0);
    const double inv_eta = 1.0 / grid.eta;
    for (std::size_t p = 0; p < particles.size(); ++p) {
        const auto st = stencil(grid, particles.x[p]);
        const double wl = particles.w[p] * st.w_left * inv_eta;
        const double wr = particles.w[p] * st.w_right * inv_eta;
        fields.rho[st.left] += wl;
        fields.rho[st.right] += wr;
        const double* v = particles.v.data() + p * dv;
        for (int i = 0; i < dv; ++i) {
            fields.J[static_cast<std::size_t>(i) * M + st.left] += wl * v[i];
            fields.J[static_cast<std::size_t>(i) * M + st.right] += wr * v[i];
        }
    }
}

ParticleFields interpolate_fields(const ParticleEnsemble& particles, const FieldState& fields, const Grid& grid) {
    const int dv = particles.dv;
    const std::size_t n = particles.size();
    ParticleFields pf;
    pf.dv = dv;
    pf.E.assign(n * dv, 0.0);
    pf.B.assign(n * 3, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        const auto st = stencil(grid, particles.x[p]);
        pf.E[p * dv + 0] = st.w_left * fields.E1[st.left] + st.w_right * fields.E1[st.right];
        pf.E[p * dv + 1] = st.w_left * fields.E2[st.left] + st.w_right * fields.E2[st.right];
        pf.B[p * 3 + 2] = st.w_left * fields.B3[st.left] + st.w_right * fields.B3[st.right];
    }
    return pf;
}

void lorentz_push(ParticleEnsemble& particles, const ParticleFields& pf, double dt) {
    const int dv = particles.dv;
    for (std::size_t p = 0; p < particles.size(); ++p) {
        double* v = particles.v.data() + p * dv;
        const double* E = pf.E.data() + p * dv;
        const double B3 = pf.B[p * 3 + 2];
        const double a1 = E[0] + v[1] * B3;
        const double a2 = E[1] - v[0] * B3;
        v[0] += dt * a1;
        v[1] += dt * a2;
        for (int i = 2; i < dv; ++i) v[i] += dt * E[i];
    }
}

void advance_positions(ParticleEnsemble& particles, double dt, double L) {
    const int dv = particles.dv;
    for (std::size_t p = 0; p < particles.size(); ++p) {
        particles.x[p] = wrap_position(particles.x[p] + dt * particles.v[p * dv], L);
    }
}

void maxwell_step(FieldState& fields, double dt, const Grid& grid) {
    const int M = grid.M;
    const double inv_2eta = 1.0 / (2.0 * grid.eta);
    const auto J1 = fields.current(0);
    const auto J2 = fields.current(1);
    for (int j = 0; j < M; ++j) fields.E1[j] -= dt * J1[j];

    const std::vector<double> B_old = fields.B3;
    for (int j = 0; j < M; ++j) {
        const double curl = (B_old[grid.wrap(j + 1)] - B_old[grid.wrap(j - 1)]) * inv_2eta;
        fields.E2[j] -= dt * (curl + J2[j]);
    }
    for (int j = 0; j < M; ++j) {
        const double curl = (fields.E2[grid.wrap(j + 1)] - fields.E2[grid.wrap(j - 1)]) * inv_2eta;
        fields.B3[j] -= dt * curl;
    }
}

std::vector<double> poisson_solve(std::span<const double> rho, double rho_ion, const Grid& grid) {
    const int M = grid.M;
    if (static_cast<int>(rho.size()) != M) throw Error("poisson_solve: rho has wrong length");
    std::vector<double> src(M);
    double net = 0.0;
    for (int j = 0; j < M; ++j) {
        src[j] = rho[j] - rho_ion;
        net += src[j] * grid.eta;
    }
    if (!(std::abs(net) <= 1e-8)) throw Error("non-neutral plasma");

    std::vector<double> E(M, 0.0);
    const double two_pi_over_L = 2.0 * std::numbers::pi / grid.L;
    // modes 1..ceil(M/2)-1; the Nyquist mode of even M is skipped
    for (int m = 1; 2 * m < M; ++m) {
        const double km = two_pi_over_L * m;
        double re = 0.0;
        double im = 0.0;
        for (int j = 0; j < M; ++j) {
            const double ph = km * grid.center(j);
            re += src[j] * std::cos(ph);
            im -= src[j] * std::sin(ph);
        }
        // E_hat = -i S_hat / k; E_j = (2/M) Re(E_hat exp(i k x_j))
        const double e_re = im / km;
        const double e_im = -re / km;
        for (int j = 0; j < M; ++j) {
            const double ph = km * grid.center(j);
            E[j] += 2.0 / M * (e_re * std::cos(ph) - e_im * std::sin(ph));
        }
    }
    return E;
}

void vpl_field_step(FieldState& fields, double dt, bool subtract_mean_current) {
    const auto J1 = fields.current(0);
    const int M = fields.cells();
    double mean = 0.0;
    if (subtract_mean_current) {
        for (int j = 0; j < M; ++j) mean += J1[j];
        mean /= M;
    }
    for (int j = 0; j < M; ++j) fields.E1[j] -= dt * (J1[j] - mean);
    std::fill(fields.E2.begin(), fields.E2.end(), 0.0);
    std::fill(fields.B3.begin(), fields.B3.end(), 0.0);
}

}  // namespace vmlpic
