#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vmlpic/core.hpp"
#include "vmlpic/pic.hpp"

namespace vmlpic {

/// Energies, momentum, field norm and (when scores and forces are given) the
/// estimated entropy production sum_p w_p s_p . U_p.
DiagnosticsRecord compute_diagnostics(const ParticleEnsemble& particles, const FieldState& fields, const Grid& grid,
                                      std::span<const double> U = {}, std::span<const double> scores = {});

/// `step,t,E_K,E_E,E_B,E_total,H_dot,P1..Pdv,E_l2`
std::string diagnostics_header(int dv);

void write_diagnostics_csv(const std::vector<DiagnosticsRecord>& records, int dv, const std::filesystem::path& path);
std::vector<DiagnosticsRecord> read_diagnostics_csv(const std::filesystem::path& path);

/// Appends rows to an open CSV as a run progresses.
class DiagnosticsWriter {
public:
    DiagnosticsWriter(const std::filesystem::path& path, int dv);
    ~DiagnosticsWriter();
    DiagnosticsWriter(const DiagnosticsWriter&) = delete;
    DiagnosticsWriter& operator=(const DiagnosticsWriter&) = delete;

    void append(const DiagnosticsRecord& record);

private:
    std::FILE* m_file = nullptr;
    std::filesystem::path m_path;
};

struct Snapshot {
    std::uint64_t step = 0;
    ParticleEnsemble particles;
    FieldState fields;
};

/// Binary layout (little-endian): "VMLS", u32 version, u64 n, u32 dv, u32 M,
/// then x[n], v[n*dv], w[n], E1[M], E2[M], B3[M]. A `<path>.json` sidecar
/// holds the step and the run configuration.
void write_snapshot(const ParticleEnsemble& particles, const FieldState& fields, std::uint64_t step,
                    const std::filesystem::path& path, const SimConfig* config = nullptr);
Snapshot read_snapshot(const std::filesystem::path& path);

/// Structured description of a run: configuration, code version, seed, and
/// free-form results such as the pretraining report.
void write_manifest(const std::filesystem::path& path, const SimConfig& config,
                    const std::vector<std::pair<std::string, std::string>>& notes = {});

}  // namespace vmlpic
