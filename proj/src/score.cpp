#include "vmlpic/score.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <fstream>
#include <numbers>

#include "binary_io.hpp"
#include "vmlpic/kernels.hpp"

namespace vmlpic {

// ---------------------------------------------------------------------------
// Blob estimator

double silverman_bandwidth(double sigma, std::size_t m, int dv) {
    return sigma * std::pow(4.0 / ((dv + 2.0) * static_cast<double>(m)), 1.0 / (dv + 4.0));
}

std::vector<double> blob_bandwidths(const ParticleEnsemble& particles, const CellIndex& index, double fixed_h) {
    const int M = index.cells();
    const int dv = particles.dv;
    std::vector<double> h(M, fixed_h);
    if (fixed_h > 0.0) return h;
    for (int j = 0; j < M; ++j) {
        std::size_t m = 0;
        double sum[3] = {0, 0, 0};
        double sum2[3] = {0, 0, 0};
        for (int c : index.neighbors(j)) {
            for (std::size_t p : index.cell(c)) {
                ++m;
                for (int i = 0; i < dv; ++i) {
                    const double vi = particles.v[p * dv + i];
                    sum[i] += vi;
                    sum2[i] += vi * vi;
                }
            }
        }
        double sigma = 0.0;
        if (m >= 2) {
            for (int i = 0; i < dv; ++i) {
                const double mean = sum[i] / m;
                const double var = std::max(0.0, (sum2[i] - m * mean * mean) / (m - 1.0));
                sigma += std::sqrt(var);
            }
            sigma /= dv;
        }
        // a degenerate stencil has zero score whatever h is
        h[j] = sigma > 0.0 ? silverman_bandwidth(sigma, m, dv) : 1.0;
    }
    return h;
}

std::array<double, 3> blob_score_at(const ParticleEnsemble& particles, const CellIndex& index, const Grid& grid,
                                    double x, std::span<const double> v, double h) {
    const int dv = particles.dv;
    const HatKernel hat(grid.eta);
    const int j = std::clamp(static_cast<int>(std::floor(x / grid.eta)), 0, grid.M - 1);
    const double inv_2h2 = 1.0 / (2.0 * h * h);
    // the normalization cancels in the ratio but decides when the weights underflow
    const double norm = std::pow(2.0 * std::numbers::pi * h * h, -0.5 * dv);
    double num[3] = {0, 0, 0};
    double den = 0.0;
    for (int c : index.neighbors(j)) {
        for (std::size_t q : index.cell(c)) {
            const double psi = hat(periodic_separation(x, particles.x[q], grid.L));
            if (psi == 0.0) continue;
            double diff[3];
            double r2 = 0.0;
            for (int i = 0; i < dv; ++i) {
                diff[i] = particles.v[q * dv + i] - v[i];
                r2 += diff[i] * diff[i];
            }
            const double c_q = particles.w[q] * psi * norm * std::exp(-r2 * inv_2h2);
            den += c_q;
            for (int i = 0; i < dv; ++i) num[i] += c_q * diff[i];
        }
    }
    if (!(den >= DBL_MIN)) {
        throw Error("isolated particle in velocity space");
    }
    std::array<double, 3> s{};
    for (int i = 0; i < dv; ++i) s[i] = num[i] / den / (h * h);
    return s;
}

std::vector<double> blob_score(const ParticleEnsemble& particles, const CellIndex& index, const Grid& grid,
                               double fixed_h) {
    const int dv = particles.dv;
    const auto h = blob_bandwidths(particles, index, fixed_h);
    std::vector<double> s(particles.size() * dv);
    for (std::size_t p = 0; p < particles.size(); ++p) {
        std::array<double, 3> sp;
        try {
            sp = blob_score_at(particles, index, grid, particles.x[p], particles.vel(p), h[index.cell_of(p)]);
        } catch (const Error&) {
            throw Error("isolated particle in velocity space (particle " + std::to_string(p) + ")");
        }
        for (int i = 0; i < dv; ++i) s[p * dv + i] = sp[i];
    }
    return s;
}

// ---------------------------------------------------------------------------
// Network

MlpScoreNet::MlpScoreNet(int dv, int hidden) : m_dv(dv), m_hidden(hidden) {
    if (dv != 2 && dv != 3) throw Error("score network supports dv = 2 or 3");
    if (hidden < 1) throw Error("score network needs a positive hidden width");
    m_params.assign(static_cast<std::size_t>(hidden) * (dv + 1) + hidden + static_cast<std::size_t>(dv) * hidden + dv,
                    0.0);
}

MlpScoreNet MlpScoreNet::glorot(int dv, int hidden, Rng& rng) {
    MlpScoreNet net(dv, hidden);
    const double a1 = std::sqrt(6.0 / (net.inputs() + hidden));
    const double a2 = std::sqrt(6.0 / (hidden + dv));
    for (int h = 0; h < hidden; ++h) {
        for (int j = 0; j < net.inputs(); ++j) net.W1(h, j) = a1 * (2.0 * rng.uniform() - 1.0);
    }
    for (int i = 0; i < dv; ++i) {
        for (int h = 0; h < hidden; ++h) net.W2(i, h) = a2 * (2.0 * rng.uniform() - 1.0);
    }
    return net;
}

std::array<double, 3> MlpScoreNet::forward(double x, std::span<const double> v) const {
    std::array<double, 3> s{};
    for (int i = 0; i < m_dv; ++i) s[i] = b2(i);
    for (int h = 0; h < m_hidden; ++h) {
        double u = b1(h) + W1(h, 0) * x;
        for (int j = 0; j < m_dv; ++j) u += W1(h, 1 + j) * v[j];
        const double a = softsign(u);
        for (int i = 0; i < m_dv; ++i) s[i] += W2(i, h) * a;
    }
    return s;
}

std::array<double, 9> MlpScoreNet::jacobian(double x, std::span<const double> v) const {
    std::array<double, 9> J{};
    for (int h = 0; h < m_hidden; ++h) {
        double u = b1(h) + W1(h, 0) * x;
        for (int j = 0; j < m_dv; ++j) u += W1(h, 1 + j) * v[j];
        const double d1 = softsign_d1(u);
        for (int i = 0; i < m_dv; ++i) {
            for (int j = 0; j < m_dv; ++j) J[i * m_dv + j] += W2(i, h) * d1 * W1(h, 1 + j);
        }
    }
    return J;
}

std::array<double, 3> MlpScoreNet::jvp(double x, std::span<const double> v, std::span<const double> z) const {
    std::array<double, 3> out{};
    for (int h = 0; h < m_hidden; ++h) {
        double u = b1(h) + W1(h, 0) * x;
        double du = 0.0;
        for (int j = 0; j < m_dv; ++j) {
            u += W1(h, 1 + j) * v[j];
            du += W1(h, 1 + j) * z[j];
        }
        const double da = softsign_d1(u) * du;
        for (int i = 0; i < m_dv; ++i) out[i] += W2(i, h) * da;
    }
    return out;
}

double exact_divergence(const MlpScoreNet& net, double x, std::span<const double> v) {
    double div = 0.0;
    for (int h = 0; h < net.hidden(); ++h) {
        double u = net.b1(h) + net.W1(h, 0) * x;
        double c = 0.0;
        for (int j = 0; j < net.dv(); ++j) {
            u += net.W1(h, 1 + j) * v[j];
            c += net.W2(j, h) * net.W1(h, 1 + j);
        }
        div += softsign_d1(u) * c;
    }
    return div;
}

double hutchinson_divergence(const MlpScoreNet& net, double x, std::span<const double> v,
                             std::span<const double> z) {
    const auto Jz = net.jvp(x, v, z);
    double out = 0.0;
    for (int i = 0; i < net.dv(); ++i) out += z[i] * Jz[i];
    return out;
}

Probe draw_probe(Rng& rng, int dv, std::size_t n, ProbeMode mode) {
    Probe probe;
    probe.shared = mode == ProbeMode::Shared;
    const std::size_t count = probe.shared ? static_cast<std::size_t>(dv) : n * dv;
    probe.z.resize(count);
    for (auto& z : probe.z) z = rng.rademacher();
    return probe;
}

namespace {

enum class Objective { Ism, Mse };

// Single pass over the training points computing the objective and its
// parameter gradient in closed form. The hidden layer loops run over
// contiguous arrays (W1 is transposed to column-major for the pass).
template <int Dv>
LossAndGrad evaluate(const MlpScoreNet& net, const TrainingSet& data, Objective objective, DivergenceMode mode,
                     const Probe* probe, std::span<const double> targets) {
    constexpr int I = Dv + 1;
    const int H = net.hidden();
    const std::size_t n = data.size();

    std::vector<double> W1c(static_cast<std::size_t>(I) * H);
    for (int h = 0; h < H; ++h) {
        for (int j = 0; j < I; ++j) W1c[static_cast<std::size_t>(j) * H + h] = net.W1(h, j);
    }
    const double* b1 = net.params().data() + net.b1_offset();
    const double* W2 = net.params().data() + net.W2_offset();
    const double* b2 = net.params().data() + net.b2_offset();

    std::vector<double> gW1c(static_cast<std::size_t>(I) * H, 0.0);
    std::vector<double> gb1(H, 0.0);
    std::vector<double> gW2(static_cast<std::size_t>(Dv) * H, 0.0);
    double gb2[Dv] = {};
    std::vector<double> S(H, 0.0);

    const bool with_div = objective == Objective::Ism;
    const bool per_particle = with_div && mode == DivergenceMode::Hutchinson && probe && !probe->shared;
    const bool shared_probe = with_div && mode == DivergenceMode::Hutchinson && !per_particle;

    // g_h is the per-unit divergence weight: div = sum_h softsign'(u_h) g_h
    std::vector<double> g(H, 0.0), a_z(H, 0.0), b_z(H, 0.0);
    if (with_div && mode == DivergenceMode::Exact) {
        for (int h = 0; h < H; ++h) {
            double c = 0.0;
            for (int i = 0; i < Dv; ++i) c += W2[static_cast<std::size_t>(i) * H + h] * net.W1(h, 1 + i);
            g[h] = c;
        }
    } else if (shared_probe) {
        const double* z = probe->z.data();
        for (int h = 0; h < H; ++h) {
            double az = 0.0, bz = 0.0;
            for (int i = 0; i < Dv; ++i) {
                az += W2[static_cast<std::size_t>(i) * H + h] * z[i];
                bz += net.W1(h, 1 + i) * z[i];
            }
            a_z[h] = az;
            b_z[h] = bz;
            g[h] = az * bz;
        }
    }

    double total_w = 0.0;
    if (objective == Objective::Mse) {
        for (std::size_t p = 0; p < n; ++p) total_w += data.ws[p];
        if (!(total_w > 0.0)) throw Error("mse_loss_and_grad: total weight must be positive");
    }

    std::vector<double> u(H), act(H), d1(H), d2(H), du(H);
    double loss = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        double in[I];
        in[0] = data.xs[p];
        for (int i = 0; i < Dv; ++i) in[1 + i] = data.vs[p * Dv + i];
        const double w = data.ws[p];

        for (int h = 0; h < H; ++h) u[h] = b1[h];
        for (int j = 0; j < I; ++j) {
            const double* col = W1c.data() + static_cast<std::size_t>(j) * H;
            const double ij = in[j];
            for (int h = 0; h < H; ++h) u[h] += col[h] * ij;
        }
        for (int h = 0; h < H; ++h) {
            const double t = 1.0 + std::abs(u[h]);
            const double inv_t = 1.0 / t;
            act[h] = u[h] * inv_t;
            d1[h] = inv_t * inv_t;
            d2[h] = (u[h] > 0.0 ? -2.0 : (u[h] < 0.0 ? 2.0 : 0.0)) * d1[h] * inv_t;
        }
        double s[Dv];
        for (int i = 0; i < Dv; ++i) {
            const double* row = W2 + static_cast<std::size_t>(i) * H;
            double acc = b2[i];
            for (int h = 0; h < H; ++h) acc += row[h] * act[h];
            s[i] = acc;
        }

        double gs[Dv];
        if (objective == Objective::Mse) {
            double err2 = 0.0;
            for (int i = 0; i < Dv; ++i) {
                const double e = s[i] - targets[p * Dv + i];
                err2 += e * e;
                gs[i] = 2.0 * w * e / total_w;
            }
            loss += w * err2;
        } else {
            double s2 = 0.0;
            for (int i = 0; i < Dv; ++i) {
                s2 += s[i] * s[i];
                gs[i] = 2.0 * w * s[i];
            }
            if (per_particle) {
                const double* z = probe->z.data() + p * Dv;
                for (int h = 0; h < H; ++h) {
                    double az = 0.0, bz = 0.0;
                    for (int i = 0; i < Dv; ++i) {
                        az += W2[static_cast<std::size_t>(i) * H + h] * z[i];
                        bz += W1c[static_cast<std::size_t>(1 + i) * H + h] * z[i];
                    }
                    a_z[h] = az;
                    b_z[h] = bz;
                    g[h] = az * bz;
                }
            }
            double div = 0.0;
            for (int h = 0; h < H; ++h) div += d1[h] * g[h];
            loss += w * (s2 + 2.0 * div);
        }

        for (int i = 0; i < Dv; ++i) {
            gb2[i] += gs[i];
            double* grow = gW2.data() + static_cast<std::size_t>(i) * H;
            const double gi = gs[i];
            for (int h = 0; h < H; ++h) grow[h] += gi * act[h];
        }
        for (int h = 0; h < H; ++h) {
            double back = 0.0;
            for (int i = 0; i < Dv; ++i) back += W2[static_cast<std::size_t>(i) * H + h] * gs[i];
            du[h] = back * d1[h];
        }
        if (with_div) {
            const double two_w = 2.0 * w;
            for (int h = 0; h < H; ++h) du[h] += two_w * d2[h] * g[h];
            if (per_particle) {
                const double* z = probe->z.data() + p * Dv;
                for (int i = 0; i < Dv; ++i) {
                    double* grow = gW2.data() + static_cast<std::size_t>(i) * H;
                    double* gcol = gW1c.data() + static_cast<std::size_t>(1 + i) * H;
                    const double zi = two_w * z[i];
                    for (int h = 0; h < H; ++h) {
                        grow[h] += zi * d1[h] * b_z[h];
                        gcol[h] += zi * d1[h] * a_z[h];
                    }
                }
            } else {
                for (int h = 0; h < H; ++h) S[h] += w * d1[h];
            }
        }
        for (int h = 0; h < H; ++h) gb1[h] += du[h];
        for (int j = 0; j < I; ++j) {
            double* gcol = gW1c.data() + static_cast<std::size_t>(j) * H;
            const double ij = in[j];
            for (int h = 0; h < H; ++h) gcol[h] += du[h] * ij;
        }
    }

    // divergence terms that depend on the point only through sum_p w_p softsign'(u_ph)
    if (with_div && !per_particle) {
        for (int i = 0; i < Dv; ++i) {
            double* grow = gW2.data() + static_cast<std::size_t>(i) * H;
            double* gcol = gW1c.data() + static_cast<std::size_t>(1 + i) * H;
            if (mode == DivergenceMode::Exact) {
                for (int h = 0; h < H; ++h) {
                    grow[h] += 2.0 * S[h] * net.W1(h, 1 + i);
                    gcol[h] += 2.0 * S[h] * W2[static_cast<std::size_t>(i) * H + h];
                }
            } else {
                const double zi = probe->z[i];
                for (int h = 0; h < H; ++h) {
                    grow[h] += 2.0 * S[h] * zi * b_z[h];
                    gcol[h] += 2.0 * S[h] * a_z[h] * zi;
                }
            }
        }
    }

    LossAndGrad out;
    out.loss = objective == Objective::Mse ? loss / total_w : loss;
    out.grad.assign(net.parameter_count(), 0.0);
    for (int h = 0; h < H; ++h) {
        for (int j = 0; j < I; ++j) out.grad[static_cast<std::size_t>(h) * I + j] = gW1c[static_cast<std::size_t>(j) * H + h];
        out.grad[net.b1_offset() + h] = gb1[h];
    }
    std::copy(gW2.begin(), gW2.end(), out.grad.begin() + static_cast<std::ptrdiff_t>(net.W2_offset()));
    for (int i = 0; i < Dv; ++i) out.grad[net.b2_offset() + i] = gb2[i];
    return out;
}

void check_training_set(const MlpScoreNet& net, const TrainingSet& data) {
    if (data.vs.size() != data.size() * net.dv() || data.ws.size() != data.size()) {
        throw Error("training set arrays have inconsistent shapes");
    }
}

}  // namespace

std::vector<double> MlpScoreNet::forward_batch(std::span<const double> xs, std::span<const double> vs) const {
    const std::size_t n = xs.size();
    std::vector<double> out(n * m_dv);
    std::vector<double> act(m_hidden);
    for (std::size_t p = 0; p < n; ++p) {
        for (int h = 0; h < m_hidden; ++h) {
            double u = b1(h) + W1(h, 0) * xs[p];
            for (int j = 0; j < m_dv; ++j) u += W1(h, 1 + j) * vs[p * m_dv + j];
            act[h] = softsign(u);
        }
        for (int i = 0; i < m_dv; ++i) {
            const double* row = m_params.data() + W2_offset() + static_cast<std::size_t>(i) * m_hidden;
            double acc = b2(i);
            for (int h = 0; h < m_hidden; ++h) acc += row[h] * act[h];
            out[p * m_dv + i] = acc;
        }
    }
    return out;
}

LossAndGrad ism_loss_and_grad(const MlpScoreNet& net, const TrainingSet& data, DivergenceMode mode,
                              const Probe& probe) {
    check_training_set(net, data);
    if (mode == DivergenceMode::Hutchinson) {
        const std::size_t expected = probe.shared ? net.dv() : data.size() * net.dv();
        if (probe.z.size() != expected) throw Error("Rademacher probe has the wrong size");
    }
    return net.dv() == 2 ? evaluate<2>(net, data, Objective::Ism, mode, &probe, {})
                         : evaluate<3>(net, data, Objective::Ism, mode, &probe, {});
}

LossAndGrad mse_loss_and_grad(const MlpScoreNet& net, const TrainingSet& data, std::span<const double> targets) {
    check_training_set(net, data);
    if (targets.size() != data.vs.size()) throw Error("target scores have the wrong shape");
    return net.dv() == 2 ? evaluate<2>(net, data, Objective::Mse, DivergenceMode::Exact, nullptr, targets)
                         : evaluate<3>(net, data, Objective::Mse, DivergenceMode::Exact, nullptr, targets);
}

void MlpScoreNet::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out.write("SBTM", 4);
    detail::write_le<std::uint32_t>(out, 1);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m_hidden));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m_dv));
    detail::write_doubles(out, m_params);
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

MlpScoreNet MlpScoreNet::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "SBTM") throw Error("'" + path.string() + "' is not a score network checkpoint");
    const auto version = detail::read_le<std::uint32_t>(in, path.string());
    if (version != 1) throw Error("unsupported checkpoint version " + std::to_string(version));
    const auto H = detail::read_le<std::uint32_t>(in, path.string());
    const auto dv = detail::read_le<std::uint32_t>(in, path.string());
    MlpScoreNet net(static_cast<int>(dv), static_cast<int>(H));
    detail::read_doubles(in, net.m_params, path.string());
    return net;
}

// ---------------------------------------------------------------------------
// Optimizer and training

AdamW::AdamW(std::size_t parameter_count, AdamWOptions options)
    : m_options(options), m_m(parameter_count, 0.0), m_v(parameter_count, 0.0) {}

void AdamW::step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != grad.size() || params.size() != m_m.size()) {
        throw Error("AdamW: parameter and gradient shapes differ");
    }
    ++m_step;
    const auto& o = m_options;
    const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(m_step));
    const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(m_step));
    const double decay = 1.0 - o.lr * o.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_m[i] = o.beta1 * m_m[i] + (1.0 - o.beta1) * grad[i];
        m_v[i] = o.beta2 * m_v[i] + (1.0 - o.beta2) * grad[i] * grad[i];
        const double m_hat = m_m[i] / bc1;
        const double v_hat = m_v[i] / bc2;
        params[i] = params[i] * decay - o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
}

double score_mse(std::span<const double> a, std::span<const double> b, std::span<const double> w, int dv) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t p = 0; p < w.size(); ++p) {
        double e2 = 0.0;
        for (int i = 0; i < dv; ++i) {
            const double e = a[p * dv + i] - b[p * dv + i];
            e2 += e * e;
        }
        num += w[p] * e2;
        den += w[p];
    }
    return num / den;
}

PretrainReport pretrain(MlpScoreNet& net, const TrainingSet& data, std::span<const double> targets,
                        const PretrainOptions& options, Rng& rng) {
    check_training_set(net, data);
    const int dv = net.dv();
    const std::size_t n = data.size();
    PretrainReport report;
    double mean_sq = 0.0;
    double total_w = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        double t2 = 0.0;
        for (int i = 0; i < dv; ++i) t2 += targets[p * dv + i] * targets[p * dv + i];
        mean_sq += data.ws[p] * t2;
        total_w += data.ws[p];
    }
    mean_sq /= total_w;
    report.tolerance = std::max(options.relative_tol * mean_sq, options.absolute_tol);

    auto full_mse = [&] {
        const auto pred = net.forward_batch(data.xs, data.vs);
        return score_mse(pred, targets, data.ws, dv);
    };

    AdamW opt(net.parameter_count(), {options.lr, 0.9, 0.999, 1e-8, options.weight_decay});
    const bool full_batch = static_cast<std::size_t>(options.batch) >= n;
    std::vector<double> bx, bv, bw, bt;
    report.mse = full_mse();
    if (report.mse < report.tolerance) {
        report.converged = true;
        return report;
    }
    for (int step = 1; step <= options.max_steps; ++step) {
        LossAndGrad lg;
        if (full_batch) {
            lg = mse_loss_and_grad(net, data, targets);
        } else {
            const std::size_t b = options.batch;
            bx.resize(b);
            bw.resize(b);
            bv.resize(b * dv);
            bt.resize(b * dv);
            for (std::size_t k = 0; k < b; ++k) {
                const auto p = static_cast<std::size_t>(rng.uniform() * n);
                bx[k] = data.xs[p];
                bw[k] = data.ws[p];
                for (int i = 0; i < dv; ++i) {
                    bv[k * dv + i] = data.vs[p * dv + i];
                    bt[k * dv + i] = targets[p * dv + i];
                }
            }
            lg = mse_loss_and_grad(net, TrainingSet{bx, bv, bw}, bt);
        }
        opt.step(net.params(), lg.grad);
        report.steps = step;
        if (full_batch || step % options.check_every == 0 || step == options.max_steps) {
            report.mse = full_mse();
            if (report.mse < report.tolerance) {
                report.converged = true;
                break;
            }
        }
    }
    return report;
}

SbtmEstimator::SbtmEstimator(MlpScoreNet net, double L, SbtmOptions options, Rng rng)
    : m_net(std::move(net)), m_L(L), m_options(options), m_opt(m_net.parameter_count(), options.adamw),
      m_rng(std::move(rng)) {}

std::vector<double> SbtmEstimator::normalized_positions(const ParticleEnsemble& particles) const {
    std::vector<double> xs(particles.size());
    for (std::size_t p = 0; p < xs.size(); ++p) xs[p] = particles.x[p] / m_L;
    return xs;
}

PretrainReport SbtmEstimator::pretrain(const ParticleEnsemble& particles, std::span<const double> targets,
                                       const PretrainOptions& options) {
    const auto xs = normalized_positions(particles);
    auto report = vmlpic::pretrain(m_net, TrainingSet{xs, particles.v, particles.w}, targets, options, m_rng);
    m_opt = AdamW(m_net.parameter_count(), m_options.adamw);
    return report;
}

std::vector<double> SbtmEstimator::train(const ParticleEnsemble& particles, int K) {
    std::vector<double> losses;
    if (K <= 0) return losses;
    const auto xs = normalized_positions(particles);
    const TrainingSet data{xs, particles.v, particles.w};
    const double base_lr = m_opt.options().lr;
    int halvings = 0;
    std::vector<double> prev_params(m_net.params().begin(), m_net.params().end());
    AdamW prev_opt = m_opt;
    for (int k = 0; k < K; ++k) {
        const auto probe = draw_probe(m_rng, m_net.dv(), particles.size(), m_options.probe);
        auto lg = ism_loss_and_grad(m_net, data, m_options.divergence, probe);
        const bool finite = std::isfinite(lg.loss) &&
                            std::all_of(lg.grad.begin(), lg.grad.end(), [](double g) { return std::isfinite(g); });
        if (!finite) {
            if (++halvings > m_options.max_halvings) {
                m_opt.options().lr = base_lr;
                throw Error("training divergence");
            }
            ++m_recoveries;
            std::copy(prev_params.begin(), prev_params.end(), m_net.params().begin());
            const double lr = m_opt.options().lr;
            m_opt = prev_opt;
            m_opt.options().lr = 0.5 * lr;
            --k;  // retry this step at the reduced rate
            continue;
        }
        losses.push_back(lg.loss);
        std::copy(m_net.params().begin(), m_net.params().end(), prev_params.begin());
        prev_opt = m_opt;
        m_opt.step(m_net.params(), lg.grad);
    }
    // the halved rate only applies for the remainder of this time step
    m_opt.options().lr = base_lr;
    return losses;
}

void SbtmEstimator::update(const ParticleEnsemble& particles, const CellIndex&) { train(particles, m_options.K); }

std::vector<double> SbtmEstimator::estimate(const ParticleEnsemble& particles, const CellIndex&) const {
    const auto xs = normalized_positions(particles);
    return m_net.forward_batch(xs, particles.v);
}

std::vector<double> sbtm_update(SbtmEstimator& estimator, const ParticleEnsemble& particles, int K) {
    return estimator.train(particles, K);
}

}  // namespace vmlpic
