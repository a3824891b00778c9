#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "vmlpic/collision.hpp"
#include "vmlpic/core.hpp"
#include "vmlpic/pic.hpp"

namespace vmlpic {

/// Supplies s(x_p, v_p) = grad_v log f for every particle.
class ScoreEstimator {
public:
    virtual ~ScoreEstimator() = default;

    virtual std::string_view name() const = 0;

    /// Adapts internal state to the current particles (training for SBTM,
    /// nothing for the kernel estimator).
    virtual void update(const ParticleEnsemble& particles, const CellIndex& index) = 0;

    /// One dv-vector per particle, n x dv row-major.
    virtual std::vector<double> estimate(const ParticleEnsemble& particles, const CellIndex& index) const = 0;
};

// ---------------------------------------------------------------------------
// Kernel (blob) estimator

/// Multivariate Silverman bandwidth sigma * (4 / ((dv + 2) m))^(1 / (dv + 4)).
double silverman_bandwidth(double sigma, std::size_t m, int dv);

/// Per-cell bandwidths from the particles of each 3-cell stencil. A fixed
/// bandwidth > 0 overrides the rule.
std::vector<double> blob_bandwidths(const ParticleEnsemble& particles, const CellIndex& index, double fixed_h);

/// Score of the spatially localized Gaussian KDE at an arbitrary (x, v),
/// using bandwidth h and the particles in the stencil around cell j.
std::array<double, 3> blob_score_at(const ParticleEnsemble& particles, const CellIndex& index, const Grid& grid,
                                    double x, std::span<const double> v, double h);

std::vector<double> blob_score(const ParticleEnsemble& particles, const CellIndex& index, const Grid& grid,
                               double fixed_h = 0.0);

class BlobEstimator final : public ScoreEstimator {
public:
    BlobEstimator(Grid grid, double fixed_h = 0.0) : m_grid(grid), m_fixed_h(fixed_h) {}

    std::string_view name() const override { return "blob"; }
    void update(const ParticleEnsemble&, const CellIndex&) override {}
    std::vector<double> estimate(const ParticleEnsemble& particles, const CellIndex& index) const override {
        return blob_score(particles, index, m_grid, m_fixed_h);
    }

private:
    Grid m_grid;
    double m_fixed_h;
};

// ---------------------------------------------------------------------------
// Neural estimator

inline double softsign(double u) { return u / (1.0 + std::abs(u)); }
inline double softsign_d1(double u) {
    const double t = 1.0 + std::abs(u);
    return 1.0 / (t * t);
}
inline double softsign_d2(double u) {
    const double t = 1.0 + std::abs(u);
    return (u > 0.0 ? -2.0 : (u < 0.0 ? 2.0 : 0.0)) / (t * t * t);
}

/// s(x, v) = W2 softsign(W1 [x; v] + b1) + b2 with input width 1 + dv and
/// hidden width H. Parameters are stored flat: W1 (H x (1+dv), row-major),
/// b1 (H), W2 (dv x H, row-major), b2 (dv).
class MlpScoreNet {
public:
    MlpScoreNet() = default;
    MlpScoreNet(int dv, int hidden);

    /// Glorot-uniform weights, zero biases.
    static MlpScoreNet glorot(int dv, int hidden, Rng& rng);

    int dv() const { return m_dv; }
    int hidden() const { return m_hidden; }
    int inputs() const { return m_dv + 1; }
    std::size_t parameter_count() const { return m_params.size(); }

    std::span<double> params() { return m_params; }
    std::span<const double> params() const { return m_params; }

    double& W1(int h, int j) { return m_params[static_cast<std::size_t>(h) * inputs() + j]; }
    double W1(int h, int j) const { return m_params[static_cast<std::size_t>(h) * inputs() + j]; }
    double& b1(int h) { return m_params[b1_offset() + h]; }
    double b1(int h) const { return m_params[b1_offset() + h]; }
    double& W2(int i, int h) { return m_params[W2_offset() + static_cast<std::size_t>(i) * m_hidden + h]; }
    double W2(int i, int h) const { return m_params[W2_offset() + static_cast<std::size_t>(i) * m_hidden + h]; }
    double& b2(int i) { return m_params[b2_offset() + i]; }
    double b2(int i) const { return m_params[b2_offset() + i]; }

    std::size_t b1_offset() const { return static_cast<std::size_t>(m_hidden) * inputs(); }
    std::size_t W2_offset() const { return b1_offset() + m_hidden; }
    std::size_t b2_offset() const { return W2_offset() + static_cast<std::size_t>(m_dv) * m_hidden; }

    std::array<double, 3> forward(double x, std::span<const double> v) const;

    /// Forward pass for many points; xs has n entries, vs is n x dv.
    std::vector<double> forward_batch(std::span<const double> xs, std::span<const double> vs) const;

    /// Velocity Jacobian d s_i / d v_j, row-major dv x dv in a 3x3 buffer.
    std::array<double, 9> jacobian(double x, std::span<const double> v) const;

    /// Jacobian-vector product (grad_v s) z.
    std::array<double, 3> jvp(double x, std::span<const double> v, std::span<const double> z) const;

    void save(const std::filesystem::path& path) const;
    static MlpScoreNet load(const std::filesystem::path& path);

private:
    int m_dv = 0;
    int m_hidden = 0;
    std::vector<double> m_params;
};

inline std::array<double, 3> mlp_forward(const MlpScoreNet& net, double x, std::span<const double> v) {
    return net.forward(x, v);
}

/// Trace of the velocity Jacobian, from its closed form.
double exact_divergence(const MlpScoreNet& net, double x, std::span<const double> v);

/// z^T (grad_v s) z from a single Jacobian-vector product.
double hutchinson_divergence(const MlpScoreNet& net, double x, std::span<const double> v,
                             std::span<const double> z);

/// Training points for the score network. xs are the network's spatial input
/// (already normalized), vs is n x dv, ws the particle weights.
struct TrainingSet {
    std::span<const double> xs;
    std::span<const double> vs;
    std::span<const double> ws;

    std::size_t size() const { return xs.size(); }
};

/// Rademacher probes: either one dv-vector shared by all points or n x dv.
struct Probe {
    std::vector<double> z;
    bool shared = true;
};

Probe draw_probe(Rng& rng, int dv, std::size_t n, ProbeMode mode);

struct LossAndGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

/// sum_p w_p [ |s(x_p, v_p)|^2 + 2 div_v s(x_p, v_p) ] and its exact parameter
/// gradient. With DivergenceMode::Hutchinson the divergence is z^T J z for the
/// given probe; with Exact the probe is ignored.
LossAndGrad ism_loss_and_grad(const MlpScoreNet& net, const TrainingSet& data, DivergenceMode mode,
                              const Probe& probe);

/// Weighted mean squared error sum_p w_p |s_p - t_p|^2 / sum_p w_p and its
/// gradient; `targets` is n x dv.
LossAndGrad mse_loss_and_grad(const MlpScoreNet& net, const TrainingSet& data, std::span<const double> targets);

struct AdamWOptions {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

/// Adam with decoupled weight decay and bias correction.
class AdamW {
public:
    AdamW() = default;
    AdamW(std::size_t parameter_count, AdamWOptions options);

    void step(std::span<double> params, std::span<const double> grad);

    AdamWOptions& options() { return m_options; }
    const AdamWOptions& options() const { return m_options; }
    std::int64_t steps() const { return m_step; }

private:
    AdamWOptions m_options;
    std::vector<double> m_m;
    std::vector<double> m_v;
    std::int64_t m_step = 0;
};

inline void adamw_step(AdamW& state, std::span<const double> grad, std::span<double> params) {
    state.step(params, grad);
}

struct PretrainOptions {
    int max_steps = 10000;
    double lr = 1e-3;
    double weight_decay = 1e-4;
    int batch = 1024;
    double relative_tol = 1e-3;  // stop once MSE < relative_tol * mean |s*|^2
    double absolute_tol = 1e-8;  // floor for targets that are (nearly) zero
    int check_every = 100;
};

struct PretrainReport {
    int steps = 0;
    double mse = 0.0;
    double tolerance = 0.0;
    bool converged = false;
};

/// Fits the network to known scores by AdamW on the weighted MSE.
PretrainReport pretrain(MlpScoreNet& net, const TrainingSet& data, std::span<const double> targets,
                        const PretrainOptions& options, Rng& rng);

struct SbtmOptions {
    int K = 100;
    DivergenceMode divergence = DivergenceMode::Hutchinson;
    ProbeMode probe = ProbeMode::Shared;
    AdamWOptions adamw{};
    int max_halvings = 20;
};

/// Score network trained on the fly by implicit score matching.
class SbtmEstimator final : public ScoreEstimator {
public:
    SbtmEstimator(MlpScoreNet net, double L, SbtmOptions options, Rng rng);

    std::string_view name() const override { return "sbtm"; }
    void update(const ParticleEnsemble& particles, const CellIndex& index) override;
    std::vector<double> estimate(const ParticleEnsemble& particles, const CellIndex& index) const override;

    /// Fits the network to the analytic score of the initial condition.
    PretrainReport pretrain(const ParticleEnsemble& particles, std::span<const double> targets,
                            const PretrainOptions& options);

    /// K ISM steps on fixed particles; returns the loss before each step.
    std::vector<double> train(const ParticleEnsemble& particles, int K);

    const MlpScoreNet& net() const { return m_net; }
    MlpScoreNet& net() { return m_net; }
    const AdamW& optimizer() const { return m_opt; }
    int recoveries() const { return m_recoveries; }
    std::vector<double> normalized_positions(const ParticleEnsemble& particles) const;

private:
    MlpScoreNet m_net;
    double m_L;
    SbtmOptions m_options;
    AdamW m_opt;
    Rng m_rng;
    int m_recoveries = 0;
};

std::vector<double> sbtm_update(SbtmEstimator& estimator, const ParticleEnsemble& particles, int K);

/// Weighted mean squared difference of two score arrays.
double score_mse(std::span<const double> a, std::span<const double> b, std::span<const double> w, int dv);

}  // namespace vmlpic
