#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <random>
#include <vector>

namespace vmlpic {

/// Raised for every recoverable failure: bad configuration, invalid input
/// data, I/O errors. The message is meant for the end user.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Mode { VML, VPL };
enum class EstimatorKind { Blob, Sbtm, None };
enum class Preset { LandauDamping, TwoStream, Weibel, Custom };
enum class DivergenceMode { Hutchinson, Exact };
enum class ProbeMode { Shared, PerParticle };

std::string_view to_string(Mode m);
std::string_view to_string(EstimatorKind e);
std::string_view to_string(Preset p);
std::string_view to_string(DivergenceMode d);
std::string_view to_string(ProbeMode p);

Mode parse_mode(std::string_view s);
EstimatorKind parse_estimator(std::string_view s);
Preset parse_preset(std::string_view s);
DivergenceMode parse_divergence(std::string_view s);
ProbeMode parse_probe(std::string_view s);

struct PresetParams {
    double alpha = 0.1;    // density perturbation amplitude
    double k = 0.5;        // wavenumber
    double c = 0.0;        // beam speed
    double beta = 1.0;     // thermal parameter (weibel)
    double alpha_B = 0.0;  // magnetic perturbation amplitude (weibel)
};

/// Every physical and numerical parameter of a run. Field names double as
/// config-file keys.
struct SimConfig {
    double L = 4.0 * 3.14159265358979323846;
    int M = 100;
    double dt = 0.02;
    double t_final = 15.0;
    double nu = 0.4;
    int dv = 3;
    std::int64_t n = 100000;
    int K = 100;
    Mode mode = Mode::VPL;
    std::uint64_t seed = 0;
    EstimatorKind estimator = EstimatorKind::Sbtm;
    Preset preset = Preset::LandauDamping;
    PresetParams preset_params{};

    // score estimation
    int hidden = 256;
    double lr = 2e-4;
    double weight_decay = 1e-4;
    DivergenceMode divergence = DivergenceMode::Hutchinson;
    ProbeMode probe = ProbeMode::Shared;
    int pretrain_steps = 10000;
    double pretrain_lr = 1e-3;
    int pretrain_batch = 1024;
    double bandwidth = 0.0;  // 0 selects Silverman's rule, > 0 a fixed h

    // field solver
    bool subtract_mean_current = true;  // VPL only

    // output
    int snapshot_every = 0;  // 0: about ten snapshots per run

    double eta() const { return L / M; }
    double gamma() const { return -static_cast<double>(dv); }
    std::int64_t num_steps() const;

    /// Throws Error naming the first violated constraint.
    void validate() const;

    /// Full-scale defaults for a preset (L derived from k).
    static SimConfig for_preset(Preset p);
};

/// Builds a SimConfig from `key = value` pairs. The preset key (if any) is
/// applied first so other keys override its defaults. Unknown keys throw.
SimConfig config_from_pairs(const std::map<std::string, std::string>& pairs);

/// Parses the flat `key = value` text format (`#` starts a comment).
std::map<std::string, std::string> parse_config_text(std::string_view text);
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Key/value rendering of a config, in the same format the parser reads.
std::map<std::string, std::string> config_to_pairs(const SimConfig& cfg);
std::string config_to_text(const SimConfig& cfg);

/// n weighted particles; v is row-major n x dv.
struct ParticleEnsemble {
    int dv = 3;
    std::vector<double> x;
    std::vector<double> v;
    std::vector<double> w;

    ParticleEnsemble() = default;
    ParticleEnsemble(std::size_t n, int dv);

    std::size_t size() const { return x.size(); }
    std::span<double> vel(std::size_t p) { return {v.data() + p * dv, static_cast<std::size_t>(dv)}; }
    std::span<const double> vel(std::size_t p) const {
        return {v.data() + p * dv, static_cast<std::size_t>(dv)};
    }
    double total_weight() const;
    bool all_finite() const;
};

/// Grid fields at cell centers plus deposited moments.
struct FieldState {
    std::vector<double> E1, E2, B3;
    std::vector<double> rho;
    std::vector<double> J;  // dv x M, row i holds J_i
    double rho_ion = 1.0;

    FieldState() = default;
    FieldState(int M, int dv);

    int cells() const { return static_cast<int>(E1.size()); }
    std::span<double> current(int i) { return {J.data() + static_cast<std::size_t>(i) * E1.size(), E1.size()}; }
    std::span<const double> current(int i) const {
        return {J.data() + static_cast<std::size_t>(i) * E1.size(), E1.size()};
    }
    bool all_finite() const;
};

struct DiagnosticsRecord {
    std::int64_t step = 0;
    double t = 0.0;
    double E_K = 0.0;
    double E_E = 0.0;
    double E_B = 0.0;
    double E_total = 0.0;
    double H_dot = 0.0;
    std::vector<double> P;
    double E_l2 = 0.0;
};

/// x mod L in [0, L).
double wrap_position(double x, double L);

/// Deterministic 64-bit stream. Seed 0 is as good as any other.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64() { return m_engine(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double normal();
    /// +1 or -1 with equal probability.
    double rademacher();

    /// Independent child stream; the parent state is not advanced.
    Rng substream(std::uint64_t tag) const;

private:
    std::uint64_t m_seed;
    std::mt19937_64 m_engine;
    double m_spare = 0.0;
    bool m_has_spare = false;
};

std::uint64_t splitmix64(std::uint64_t x);

inline constexpr std::string_view kVersion = "0.1.0";

}  // namespace vmlpic
