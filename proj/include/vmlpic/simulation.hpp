#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vmlpic/collision.hpp"
#include "vmlpic/core.hpp"
#include "vmlpic/diagnostics.hpp"
#include "vmlpic/pic.hpp"
#include "vmlpic/score.hpp"

namespace vmlpic {

/// Substream tags; every consumer of randomness draws from its own stream so
/// that e.g. the estimator choice never perturbs the initial sample.
namespace streams {
inline constexpr std::uint64_t kSampling = 1;
inline constexpr std::uint64_t kNetInit = 2;
inline constexpr std::uint64_t kTraining = 3;
}  // namespace streams

struct RunOptions {
    std::optional<std::filesystem::path> out_dir;  // no files when empty
    bool trace_stages = false;
    std::function<void(const std::string&)> log;   // progress messages
};

/// Builds the configured estimator; nullptr for EstimatorKind::None. SBTM
/// starts from a Glorot-initialized network.
std::unique_ptr<ScoreEstimator> make_estimator(const SimConfig& config, const Grid& grid, const Rng& root);

/// One run of the particle method. Construction samples the initial state;
/// initialize() pretrains and records step 0; step() advances by dt.
class Simulation {
public:
    explicit Simulation(SimConfig config, RunOptions options = {});

    void initialize();
    void step();
    void run();

    const SimConfig& config() const { return m_config; }
    const Grid& grid() const { return m_grid; }
    const ParticleEnsemble& particles() const { return m_particles; }
    const FieldState& fields() const { return m_fields; }
    const std::vector<DiagnosticsRecord>& records() const { return m_records; }
    const std::vector<std::string>& stage_trace() const { return m_trace; }
    const ScoreEstimator* estimator() const { return m_estimator.get(); }
    const std::optional<PretrainReport>& pretrain_report() const { return m_pretrain; }
    std::int64_t current_step() const { return m_step; }
    std::int64_t snapshot_stride() const;

private:
    void stage(const char* tag);
    void record(std::span<const double> U, std::span<const double> scores);
    void maybe_snapshot();
    void write_manifest_file() const;

    SimConfig m_config;
    RunOptions m_options;
    Grid m_grid;
    Rng m_root;
    ParticleEnsemble m_particles;
    FieldState m_fields;
    std::unique_ptr<ScoreEstimator> m_estimator;
    std::optional<PretrainReport> m_pretrain;
    std::unique_ptr<DiagnosticsWriter> m_writer;
    std::vector<DiagnosticsRecord> m_records;
    std::vector<std::string> m_trace;
    std::vector<std::pair<std::string, std::string>> m_notes;
    std::int64_t m_step = 0;
    bool m_initialized = false;
};

struct ScoreTestEntry {
    std::string estimator;
    double mse = 0.0;
};

struct ScoreTestReport {
    std::vector<ScoreTestEntry> entries;
    std::optional<PretrainReport> pretrain;

    double mse(std::string_view estimator) const;
};

/// Samples the initial condition and compares each estimator with the
/// analytic score. When csv_path is set, writes one row per particle and
/// estimator: estimator, x, v1..vdv, s_est1.., s_true1...
ScoreTestReport score_test(const SimConfig& config, const std::vector<EstimatorKind>& estimators,
                           const std::optional<std::filesystem::path>& csv_path = std::nullopt);

}  // namespace vmlpic
