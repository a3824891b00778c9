#include "vmlpic/simulation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "vmlpic/equilibrium.hpp"
#include "vmlpic/sampling.hpp"

namespace vmlpic {

namespace {

SbtmOptions sbtm_options(const SimConfig& cfg) {
    SbtmOptions o;
    o.K = cfg.K;
    o.divergence = cfg.divergence;
    o.probe = cfg.probe;
    o.adamw.lr = cfg.lr;
    o.adamw.weight_decay = cfg.weight_decay;
    return o;
}

PretrainOptions pretrain_options(const SimConfig& cfg) {
    PretrainOptions o;
    o.max_steps = cfg.pretrain_steps;
    o.lr = cfg.pretrain_lr;
    o.weight_decay = cfg.weight_decay;
    o.batch = cfg.pretrain_batch;
    return o;
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string describe(const PretrainReport& r) {
    return "steps=" + std::to_string(r.steps) + " mse=" + fmt(r.mse) + " tolerance=" + fmt(r.tolerance) +
           " converged=" + (r.converged ? "true" : "false");
}

}  // namespace

std::unique_ptr<ScoreEstimator> make_estimator(const SimConfig& config, const Grid& grid, const Rng& root) {
    switch (config.estimator) {
        case EstimatorKind::None:
            return nullptr;
        case EstimatorKind::Blob:
            return std::make_unique<BlobEstimator>(grid, config.bandwidth);
        case EstimatorKind::Sbtm: {
            Rng init = root.substream(streams::kNetInit);
            auto net = MlpScoreNet::glorot(config.dv, config.hidden, init);
            return std::make_unique<SbtmEstimator>(std::move(net), config.L, sbtm_options(config),
                                                   root.substream(streams::kTraining));
        }
    }
    return nullptr;
}

Simulation::Simulation(SimConfig config, RunOptions options)
    : m_config(std::move(config)), m_options(std::move(options)), m_root(m_config.seed) {
    m_config.validate();
    m_grid = Grid(m_config.M, m_config.L);
    Rng sampler = m_root.substream(streams::kSampling);
    m_particles = sample_ensemble(m_config, sampler);
    m_fields = FieldState(m_config.M, m_config.dv);
    m_fields.rho_ion = m_particles.total_weight() / m_config.L;
}

std::int64_t Simulation::snapshot_stride() const {
    if (m_config.snapshot_every > 0) return m_config.snapshot_every;
    return std::max<std::int64_t>(1, m_config.num_steps() / 10);
}

void Simulation::stage(const char* tag) {
    if (m_options.trace_stages) m_trace.emplace_back(std::to_string(m_step) + ":" + tag);
}

void Simulation::record(std::span<const double> U, std::span<const double> scores) {
    auto r = compute_diagnostics(m_particles, m_fields, m_grid, U, scores);
    r.step = m_step;
    r.t = static_cast<double>(m_step) * m_config.dt;
    if (m_writer) m_writer->append(r);
    m_records.push_back(std::move(r));
}

void Simulation::maybe_snapshot() {
    if (!m_options.out_dir) return;
    if (m_step % snapshot_stride() != 0 && m_step != m_config.num_steps()) return;
    char name[64];
    std::snprintf(name, sizeof(name), "snapshot_%06lld.vmls", static_cast<long long>(m_step));
    write_snapshot(m_particles, m_fields, static_cast<std::uint64_t>(m_step), *m_options.out_dir / "snapshots" / name,
                   &m_config);
}

void Simulation::write_manifest_file() const {
    if (!m_options.out_dir) return;
    write_manifest(*m_options.out_dir / "manifest.json", m_config, m_notes);
}

void Simulation::initialize() {
    if (m_initialized) return;
    m_initialized = true;
    if (m_options.out_dir) {
        std::error_code ec;
        std::filesystem::create_directories(*m_options.out_dir / "snapshots", ec);
        if (ec) throw Error("cannot create '" + m_options.out_dir->string() + "': " + ec.message());
        std::ofstream cfg(*m_options.out_dir / "config.txt");
        cfg << config_to_text(m_config);
        m_writer = std::make_unique<DiagnosticsWriter>(*m_options.out_dir / "diagnostics.csv", m_config.dv);
    }

    deposit(m_particles, m_grid, m_fields);
    initial_fields(m_config, m_grid, m_fields);

    std::vector<double> U, scores;
    if (m_config.nu > 0.0) {
        m_estimator = make_estimator(m_config, m_grid, m_root);
        if (auto* sbtm = dynamic_cast<SbtmEstimator*>(m_estimator.get())) {
            const auto targets = analytic_initial_scores(m_config.preset, m_config.preset_params, m_particles);
            m_pretrain = sbtm->pretrain(m_particles, targets, pretrain_options(m_config));
            m_notes.emplace_back("pretrain", describe(*m_pretrain));
            if (!m_pretrain->converged) {
                m_notes.emplace_back("pretrain_warning", "pretraining stopped before reaching its tolerance");
                if (m_options.log) m_options.log("warning: pretraining did not reach tolerance (" + describe(*m_pretrain) + ")");
            }
            if (m_options.out_dir) sbtm->net().save(*m_options.out_dir / "net.sbtm");
        }
        const auto index = build_cell_index(m_particles, m_grid);
        scores = m_estimator->estimate(m_particles, index);
        U = collision_force(m_particles, scores, index, m_grid);
    }
    record(U, scores);
    maybe_snapshot();
    write_manifest_file();
}

void Simulation::step() {
    if (!m_initialized) initialize();
    const double dt = m_config.dt;
    ++m_step;

    stage("interpolate");
    const auto pf = interpolate_fields(m_particles, m_fields, m_grid);
    stage("lorentz_push");
    lorentz_push(m_particles, pf, dt);
    stage("advance");
    advance_positions(m_particles, dt, m_config.L);
    stage("deposit");
    deposit(m_particles, m_grid, m_fields);
    stage("field_update");
    if (m_config.mode == Mode::VML) {
        maxwell_step(m_fields, dt, m_grid);
    } else {
        vpl_field_step(m_fields, dt, m_config.subtract_mean_current);
    }

    std::vector<double> U, scores;
    if (m_estimator) {
        stage("score_update");
        const auto index = build_cell_index(m_particles, m_grid);
        m_estimator->update(m_particles, index);
        scores = m_estimator->estimate(m_particles, index);
        stage("collision_push");
        U = collision_force(m_particles, scores, index, m_grid);
        collision_push(m_particles, U, m_config.nu, dt);
    }
    if (!m_particles.all_finite() || !m_fields.all_finite()) {
        throw Error("non-finite state at step " + std::to_string(m_step));
    }
    record(U, scores);
    maybe_snapshot();
}

void Simulation::run() {
    initialize();
    const auto steps = m_config.num_steps();
    const auto every = std::max<std::int64_t>(1, steps / 20);
    while (m_step < steps) {
        step();
        if (m_options.log && (m_step % every == 0 || m_step == steps)) {
            const auto& r = m_records.back();
            m_options.log("step " + std::to_string(m_step) + "/" + std::to_string(steps) + " t=" + fmt(r.t) +
                          " E_total=" + fmt(r.E_total) + " |E|=" + fmt(r.E_l2));
        }
    }
    if (auto* sbtm = dynamic_cast<SbtmEstimator*>(m_estimator.get())) {
        if (sbtm->recoveries() > 0) m_notes.emplace_back("training_recoveries", std::to_string(sbtm->recoveries()));
        if (m_options.out_dir) sbtm->net().save(*m_options.out_dir / "net.sbtm");
    }
    write_manifest_file();
}

double ScoreTestReport::mse(std::string_view estimator) const {
    for (const auto& e : entries) {
        if (e.estimator == estimator) return e.mse;
    }
    throw Error("score_test: no result for estimator '" + std::string(estimator) + "'");
}

ScoreTestReport score_test(const SimConfig& config, const std::vector<EstimatorKind>& estimators,
                           const std::optional<std::filesystem::path>& csv_path) {
    config.validate();
    const Grid grid(config.M, config.L);
    const Rng root(config.seed);
    Rng sampler = root.substream(streams::kSampling);
    const auto particles = sample_ensemble(config, sampler);
    const auto truth = analytic_initial_scores(config.preset, config.preset_params, particles);
    const auto index = build_cell_index(particles, grid);
    const int dv = config.dv;

    std::FILE* csv = nullptr;
    if (csv_path) {
        csv = std::fopen(csv_path->c_str(), "w");
        if (!csv) throw Error("cannot open '" + csv_path->string() + "' for writing");
        std::string header = "estimator,x";
        for (int i = 1; i <= dv; ++i) header += ",v" + std::to_string(i);
        for (int i = 1; i <= dv; ++i) header += ",s_est" + std::to_string(i);
        for (int i = 1; i <= dv; ++i) header += ",s_true" + std::to_string(i);
        std::fprintf(csv, "%s\n", header.c_str());
    }

    ScoreTestReport report;
    try {
        for (const auto kind : estimators) {
            SimConfig cfg = config;
            cfg.estimator = kind;
            auto est = make_estimator(cfg, grid, root);
            if (!est) throw Error("score_test: estimator 'none' has no scores");
            if (auto* sbtm = dynamic_cast<SbtmEstimator*>(est.get())) {
                report.pretrain = sbtm->pretrain(particles, truth, pretrain_options(cfg));
            }
            const auto s = est->estimate(particles, index);
            report.entries.push_back({std::string(est->name()), score_mse(s, truth, particles.w, dv)});
            if (csv) {
                for (std::size_t p = 0; p < particles.size(); ++p) {
                    std::fprintf(csv, "%s,%.17g", std::string(est->name()).c_str(), particles.x[p]);
                    for (int i = 0; i < dv; ++i) std::fprintf(csv, ",%.17g", particles.v[p * dv + i]);
                    for (int i = 0; i < dv; ++i) std::fprintf(csv, ",%.17g", s[p * dv + i]);
                    for (int i = 0; i < dv; ++i) std::fprintf(csv, ",%.17g", truth[p * dv + i]);
                    std::fputc('\n', csv);
                }
            }
        }
    } catch (...) {
        if (csv) std::fclose(csv);
        throw;
    }
    if (csv && std::fclose(csv) != 0) throw Error("write failed for '" + csv_path->string() + "'");
    return report;
}

}  // namespace vmlpic
