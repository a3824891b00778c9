#include "vmlpic/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

namespace vmlpic {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return out;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
    T value{};
    const auto* begin = text.data();
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw Error("config key '" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
    }
    return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
    const auto t = lower(text);
    if (t == "true" || t == "1" || t == "yes" || t == "on") {
        return true;
    }
    if (t == "false" || t == "0" || t == "no" || t == "off") {
        return false;
    }
    throw Error("config key '" + std::string(key) + "': expected a boolean, got '" + std::string(text) + "'");
}

std::string format_double(double x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
    return std::string(buf, ptr);
}

}  // namespace

std::string_view to_string(Mode m) { return m == Mode::VML ? "VML" : "VPL"; }

std::string_view to_string(EstimatorKind e) {
    switch (e) {
        case EstimatorKind::Blob: return "blob";
        case EstimatorKind::Sbtm: return "sbtm";
        case EstimatorKind::None: return "none";
    }
    return "none";
}

std::string_view to_string(Preset p) {
    switch (p) {
        case Preset::LandauDamping: return "landau_damping";
        case Preset::TwoStream: return "two_stream";
        case Preset::Weibel: return "weibel";
        case Preset::Custom: return "custom";
    }
    return "custom";
}

std::string_view to_string(DivergenceMode d) { return d == DivergenceMode::Exact ? "exact" : "hutchinson"; }
std::string_view to_string(ProbeMode p) { return p == ProbeMode::PerParticle ? "per_particle" : "shared"; }

Mode parse_mode(std::string_view s) {
    const auto t = lower(s);
    if (t == "vml") return Mode::VML;
    if (t == "vpl") return Mode::VPL;
    throw Error("unknown mode '" + std::string(s) + "' (expected VML or VPL)");
}

EstimatorKind parse_estimator(std::string_view s) {
    const auto t = lower(s);
    if (t == "blob") return EstimatorKind::Blob;
    if (t == "sbtm") return EstimatorKind::Sbtm;
    if (t == "none") return EstimatorKind::None;
    throw Error("unknown estimator '" + std::string(s) + "' (expected blob, sbtm or none)");
}

Preset parse_preset(std::string_view s) {
    const auto t = lower(s);
    if (t == "landau_damping") return Preset::LandauDamping;
    if (t == "two_stream") return Preset::TwoStream;
    if (t == "weibel") return Preset::Weibel;
    if (t == "custom") return Preset::Custom;
    throw Error("unknown preset '" + std::string(s) + "'");
}

DivergenceMode parse_divergence(std::string_view s) {
    const auto t = lower(s);
    if (t == "hutchinson") return DivergenceMode::Hutchinson;
    if (t == "exact") return DivergenceMode::Exact;
    throw Error("unknown divergence mode '" + std::string(s) + "' (expected hutchinson or exact)");
}

ProbeMode parse_probe(std::string_view s) {
    const auto t = lower(s);
    if (t == "shared") return ProbeMode::Shared;
    if (t == "per_particle") return ProbeMode::PerParticle;
    throw Error("unknown probe mode '" + std::string(s) + "' (expected shared or per_particle)");
}

std::int64_t SimConfig::num_steps() const {
    // t < t_final loop of forward Euler steps; the tolerance absorbs t_final/dt rounding
    return static_cast<std::int64_t>(std::ceil(t_final / dt - 1e-9));
}

void SimConfig::validate() const {
    if (!(L > 0.0) || !std::isfinite(L)) throw Error("L must be positive");
    if (M < 1) throw Error("M must be a positive integer");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw Error("dt must be positive");
    if (!(t_final >= 0.0)) throw Error("t_final must be nonnegative");
    if (!(nu >= 0.0) || !std::isfinite(nu)) throw Error("nu must be nonnegative");
    if (dv != 2 && dv != 3) throw Error("dv must be 2 or 3");
    if (n < 2) throw Error("n must be at least 2");
    if (K < 0) throw Error("K must be nonnegative");
    if (hidden < 1) throw Error("hidden must be positive");
    if (!(lr > 0.0)) throw Error("lr must be positive");
    if (!(weight_decay >= 0.0)) throw Error("weight_decay must be nonnegative");
    if (pretrain_steps < 0) throw Error("pretrain_steps must be nonnegative");
    if (pretrain_batch < 1) throw Error("pretrain_batch must be positive");
    if (!(bandwidth >= 0.0)) throw Error("bandwidth must be nonnegative (0 selects Silverman)");
    if (snapshot_every < 0) throw Error("snapshot_every must be nonnegative");
    if (nu > 0.0 && estimator == EstimatorKind::None) throw Error("collisions require an estimator");
    if (preset == Preset::Weibel && mode != Mode::VML) throw Error("weibel requires VML");
    const auto& pp = preset_params;
    if (!(std::abs(pp.alpha) < 1.0)) throw Error("preset alpha must satisfy |alpha| < 1");
    if (!(pp.beta > 0.0)) throw Error("preset beta must be positive");
    const double modes = pp.k * L / (2.0 * std::numbers::pi);
    if (!(pp.k > 0.0) || std::abs(modes - std::round(modes)) > 1e-9 * std::max(1.0, modes) ||
        std::round(modes) < 1.0) {
        throw Error("preset wavenumber k must equal 2*pi*m/L for a positive integer m");
    }
}

SimConfig SimConfig::for_preset(Preset p) {
    SimConfig cfg;
    cfg.preset = p;
    switch (p) {
        case Preset::LandauDamping:
        case Preset::Custom:
            cfg.preset_params = {0.1, 0.5, 0.0, 1.0, 0.0};
            cfg.M = 100;
            cfg.dt = 0.02;
            cfg.nu = 0.4;
            cfg.t_final = 15.0;
            cfg.K = 100;
            cfg.mode = Mode::VPL;
            cfg.hidden = 256;
            break;
        case Preset::TwoStream:
            cfg.preset_params = {0.005, 0.2, 2.4, 1.0, 0.0};
            cfg.M = 100;
            cfg.dt = 0.05;
            cfg.nu = 0.32;
            cfg.t_final = 50.0;
            cfg.K = 100;
            cfg.mode = Mode::VPL;
            cfg.hidden = 256;
            break;
        case Preset::Weibel:
            cfg.preset_params = {0.0, 0.2, 0.3, 0.01, 1e-3};
            cfg.M = 100;
            cfg.dt = 0.1;
            cfg.nu = 4e-4;
            cfg.t_final = 125.0;
            cfg.K = 100;
            cfg.mode = Mode::VML;
            cfg.hidden = 512;
            break;
    }
    cfg.L = 2.0 * std::numbers::pi / cfg.preset_params.k;
    return cfg;
}

SimConfig config_from_pairs(const std::map<std::string, std::string>& pairs) {
    SimConfig cfg;
    if (auto it = pairs.find("preset"); it != pairs.end()) {
        cfg = SimConfig::for_preset(parse_preset(it->second));
    }
    bool L_given = pairs.count("L") > 0;
    for (const auto& [key, value] : pairs) {
        auto& pp = cfg.preset_params;
        if (key == "preset") continue;
        else if (key == "L") cfg.L = parse_number<double>(key, value);
        else if (key == "M") cfg.M = parse_number<int>(key, value);
        else if (key == "dt") cfg.dt = parse_number<double>(key, value);
        else if (key == "t_final") cfg.t_final = parse_number<double>(key, value);
        else if (key == "nu") cfg.nu = parse_number<double>(key, value);
        else if (key == "dv") cfg.dv = parse_number<int>(key, value);
        else if (key == "n") cfg.n = parse_number<std::int64_t>(key, value);
        else if (key == "K") cfg.K = parse_number<int>(key, value);
        else if (key == "mode") cfg.mode = parse_mode(value);
        else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
        else if (key == "estimator") cfg.estimator = parse_estimator(value);
        else if (key == "alpha") pp.alpha = parse_number<double>(key, value);
        else if (key == "k") pp.k = parse_number<double>(key, value);
        else if (key == "c") pp.c = parse_number<double>(key, value);
        else if (key == "beta") pp.beta = parse_number<double>(key, value);
        else if (key == "alpha_B") pp.alpha_B = parse_number<double>(key, value);
        else if (key == "hidden") cfg.hidden = parse_number<int>(key, value);
        else if (key == "lr") cfg.lr = parse_number<double>(key, value);
        else if (key == "weight_decay") cfg.weight_decay = parse_number<double>(key, value);
        else if (key == "divergence") cfg.divergence = parse_divergence(value);
        else if (key == "probe") cfg.probe = parse_probe(value);
        else if (key == "pretrain_steps") cfg.pretrain_steps = parse_number<int>(key, value);
        else if (key == "pretrain_lr") cfg.pretrain_lr = parse_number<double>(key, value);
        else if (key == "pretrain_batch") cfg.pretrain_batch = parse_number<int>(key, value);
        else if (key == "bandwidth") {
            cfg.bandwidth = lower(value) == "silverman" ? 0.0 : parse_number<double>(key, value);
        } else if (key == "subtract_mean_current") cfg.subtract_mean_current = parse_bool(key, value);
        else if (key == "snapshot_every") cfg.snapshot_every = parse_number<int>(key, value);
        else if (key == "gamma") {
            // accepted for completeness; it is pinned to -dv
            const double g = parse_number<double>(key, value);
            const int dv = pairs.count("dv") ? parse_number<int>("dv", pairs.at("dv")) : cfg.dv;
            if (g != -static_cast<double>(dv)) throw Error("gamma must equal -dv");
        } else {
            throw Error("unknown config key '" + key + "'");
        }
    }
    // presets tie the domain to one wavelength unless L is set explicitly
    if (!L_given && pairs.count("k")) {
        cfg.L = 2.0 * std::numbers::pi / cfg.preset_params.k;
    }
    return cfg;
}

std::map<std::string, std::string> parse_config_text(std::string_view text) {
    std::map<std::string, std::string> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw Error("config line " + std::to_string(line_no) + ": empty key or value");
        }
        out[std::string(key)] = std::string(value);
    }
    return out;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::map<std::string, std::string> config_to_pairs(const SimConfig& cfg) {
    const auto& pp = cfg.preset_params;
    return {
        {"L", format_double(cfg.L)},
        {"M", std::to_string(cfg.M)},
        {"dt", format_double(cfg.dt)},
        {"t_final", format_double(cfg.t_final)},
        {"nu", format_double(cfg.nu)},
        {"dv", std::to_string(cfg.dv)},
        {"n", std::to_string(cfg.n)},
        {"K", std::to_string(cfg.K)},
        {"mode", std::string(to_string(cfg.mode))},
        {"gamma", format_double(cfg.gamma())},
        {"seed", std::to_string(cfg.seed)},
        {"estimator", std::string(to_string(cfg.estimator))},
        {"preset", std::string(to_string(cfg.preset))},
        {"alpha", format_double(pp.alpha)},
        {"k", format_double(pp.k)},
        {"c", format_double(pp.c)},
        {"beta", format_double(pp.beta)},
        {"alpha_B", format_double(pp.alpha_B)},
        {"hidden", std::to_string(cfg.hidden)},
        {"lr", format_double(cfg.lr)},
        {"weight_decay", format_double(cfg.weight_decay)},
        {"divergence", std::string(to_string(cfg.divergence))},
        {"probe", std::string(to_string(cfg.probe))},
        {"pretrain_steps", std::to_string(cfg.pretrain_steps)},
        {"pretrain_lr", format_double(cfg.pretrain_lr)},
        {"pretrain_batch", std::to_string(cfg.pretrain_batch)},
        {"bandwidth", cfg.bandwidth > 0.0 ? format_double(cfg.bandwidth) : std::string("silverman")},
        {"subtract_mean_current", cfg.subtract_mean_current ? "true" : "false"},
        {"snapshot_every", std::to_string(cfg.snapshot_every)},
    };
}

std::string config_to_text(const SimConfig& cfg) {
    std::string out;
    for (const auto& [key, value] : config_to_pairs(cfg)) {
        out += key + " = " + value + "\n";
    }
    return out;
}

ParticleEnsemble::ParticleEnsemble(std::size_t n, int dv_)
    : dv(dv_), x(n, 0.0), v(n * static_cast<std::size_t>(dv_), 0.0), w(n, 0.0) {}

double ParticleEnsemble::total_weight() const {
    double sum = 0.0;
    for (double wp : w) sum += wp;
    return sum;
}

bool ParticleEnsemble::all_finite() const {
    auto finite = [](const std::vector<double>& a) {
        return std::all_of(a.begin(), a.end(), [](double e) { return std::isfinite(e); });
    };
    return finite(x) && finite(v) && finite(w);
}

FieldState::FieldState(int M, int dv)
    : E1(M, 0.0), E2(M, 0.0), B3(M, 0.0), rho(M, 0.0), J(static_cast<std::size_t>(M) * dv, 0.0) {}

bool FieldState::all_finite() const {
    auto finite = [](const std::vector<double>& a) {
        return std::all_of(a.begin(), a.end(), [](double e) { return std::isfinite(e); });
    };
    return finite(E1) && finite(E2) && finite(B3) && finite(rho) && finite(J) && std::isfinite(rho_ion);
}

double wrap_position(double x, double L) {
    if (!std::isfinite(x)) throw Error("non-finite position");
    double r = std::fmod(x, L);
    if (r < 0.0) r += L;
    // fmod of a tiny negative number can round up to exactly L
    if (r >= L) r = 0.0;
    return r;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : m_seed(seed), m_engine(splitmix64(seed)) {}

double Rng::uniform() { return static_cast<double>(m_engine() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    if (m_has_spare) {
        m_has_spare = false;
        return m_spare;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    m_spare = r * std::sin(th);
    m_has_spare = true;
    return r * std::cos(th);
}

double Rng::rademacher() { return (m_engine() >> 63) ? 1.0 : -1.0; }

Rng Rng::substream(std::uint64_t tag) const { return Rng(splitmix64(m_seed ^ splitmix64(tag + 0x632be59bd9b4e019ULL))); }

}  // namespace vmlpic
