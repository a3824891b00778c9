#include "vmlpic/diagnostics.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"

namespace vmlpic {

DiagnosticsRecord compute_diagnostics(const ParticleEnsemble& particles, const FieldState& fields, const Grid& grid,
                                      std::span<const double> U, std::span<const double> scores) {
    const int dv = particles.dv;
    DiagnosticsRecord r;
    r.P.assign(dv, 0.0);
    double ek = 0.0;
    for (std::size_t p = 0; p < particles.size(); ++p) {
        double v2 = 0.0;
        for (int i = 0; i < dv; ++i) {
            const double vi = particles.v[p * dv + i];
            v2 += vi * vi;
            r.P[i] += particles.w[p] * vi;
        }
        ek += particles.w[p] * v2;
    }
    r.E_K = 0.5 * ek;
    double e2 = 0.0, b2 = 0.0;
    for (int j = 0; j < fields.cells(); ++j) {
        e2 += fields.E1[j] * fields.E1[j] + fields.E2[j] * fields.E2[j];
        b2 += fields.B3[j] * fields.B3[j];
    }
    r.E_E = 0.5 * grid.eta * e2;
    r.E_B = 0.5 * grid.eta * b2;
    r.E_total = r.E_K + r.E_E + r.E_B;
    r.E_l2 = std::sqrt(grid.eta * e2);
    if (!U.empty() && !scores.empty()) {
        if (U.size() != particles.v.size() || scores.size() != particles.v.size()) {
            throw Error("compute_diagnostics: score/force arrays have the wrong shape");
        }
        double h = 0.0;
        for (std::size_t p = 0; p < particles.size(); ++p) {
            double dot = 0.0;
            for (int i = 0; i < dv; ++i) dot += scores[p * dv + i] * U[p * dv + i];
            h += particles.w[p] * dot;
        }
        r.H_dot = h;
    }
    return r;
}

namespace {

void append_double(std::string& line, double x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
    line.append(buf, ptr);
}

std::string format_row(const DiagnosticsRecord& r) {
    std::string line = std::to_string(r.step);
    for (double x : {r.t, r.E_K, r.E_E, r.E_B, r.E_total, r.H_dot}) {
        line += ',';
        append_double(line, x);
    }
    for (double p : r.P) {
        line += ',';
        append_double(line, p);
    }
    line += ',';
    append_double(line, r.E_l2);
    line += '\n';
    return line;
}

}  // namespace

std::string diagnostics_header(int dv) {
    std::string h = "step,t,E_K,E_E,E_B,E_total,H_dot";
    for (int i = 1; i <= dv; ++i) h += ",P" + std::to_string(i);
    return h + ",E_l2";
}

void write_diagnostics_csv(const std::vector<DiagnosticsRecord>& records, int dv, const std::filesystem::path& path) {
    DiagnosticsWriter writer(path, dv);
    for (const auto& r : records) writer.append(r);
}

DiagnosticsWriter::DiagnosticsWriter(const std::filesystem::path& path, int dv) : m_path(path) {
    m_file = std::fopen(path.c_str(), "w");
    if (!m_file) throw Error("cannot open '" + path.string() + "' for writing");
    const auto header = diagnostics_header(dv) + "\n";
    if (std::fputs(header.c_str(), m_file) < 0) throw Error("write failed for '" + path.string() + "'");
}

DiagnosticsWriter::~DiagnosticsWriter() {
    if (m_file) std::fclose(m_file);
}

void DiagnosticsWriter::append(const DiagnosticsRecord& record) {
    const auto row = format_row(record);
    if (std::fputs(row.c_str(), m_file) < 0 || std::fflush(m_file) != 0) {
        throw Error("write failed for '" + m_path.string() + "'");
    }
}

std::vector<DiagnosticsRecord> read_diagnostics_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::string header;
    std::getline(in, header);
    int columns = 1;
    for (char ch : header) columns += ch == ',';
    const int dv = columns - 8;
    if (dv < 1 || header != diagnostics_header(dv)) throw Error("'" + path.string() + "': unexpected CSV header");
    std::vector<DiagnosticsRecord> out;
    std::string line;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        DiagnosticsRecord r;
        int col = 0;
        while (std::getline(ss, cell, ',')) {
            if (col == 0) {
                r.step = std::stoll(cell);
            } else {
                double x = 0.0;
                const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), x);
                if (ec != std::errc{}) {
                    throw Error("'" + path.string() + "' row " + std::to_string(row) + ": bad number '" + cell + "'");
                }
                vals.push_back(x);
            }
            ++col;
        }
        if (col != columns) throw Error("'" + path.string() + "' row " + std::to_string(row) + ": wrong column count");
        r.t = vals[0];
        r.E_K = vals[1];
        r.E_E = vals[2];
        r.E_B = vals[3];
        r.E_total = vals[4];
        r.H_dot = vals[5];
        r.P.assign(vals.begin() + 6, vals.begin() + 6 + dv);
        r.E_l2 = vals[6 + dv];
        out.push_back(std::move(r));
    }
    return out;
}

void write_snapshot(const ParticleEnsemble& particles, const FieldState& fields, std::uint64_t step,
                    const std::filesystem::path& path, const SimConfig* config) {
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot open '" + path.string() + "' for writing");
        out.write("VMLS", 4);
        detail::write_le<std::uint32_t>(out, 1);
        detail::write_le<std::uint64_t>(out, particles.size());
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(particles.dv));
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(fields.cells()));
        detail::write_doubles(out, particles.x);
        detail::write_doubles(out, particles.v);
        detail::write_doubles(out, particles.w);
        detail::write_doubles(out, fields.E1);
        detail::write_doubles(out, fields.E2);
        detail::write_doubles(out, fields.B3);
        if (!out) throw Error("write failed for '" + path.string() + "'");
    }
    nlohmann::json side;
    side["step"] = step;
    side["rho_ion"] = fields.rho_ion;
    if (config) {
        nlohmann::json cfg;
        for (const auto& [k, v] : config_to_pairs(*config)) cfg[k] = v;
        side["config"] = cfg;
    }
    const auto side_path = path.string() + ".json";
    std::ofstream js(side_path);
    if (!js) throw Error("cannot open '" + side_path + "' for writing");
    js << side.dump(2) << "\n";
}

Snapshot read_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "VMLS") throw Error("'" + path.string() + "' is not a snapshot file");
    const auto what = path.string();
    const auto version = detail::read_le<std::uint32_t>(in, what);
    if (version != 1) throw Error("'" + what + "': unsupported snapshot version " + std::to_string(version));
    const auto n = detail::read_le<std::uint64_t>(in, what);
    const auto dv = detail::read_le<std::uint32_t>(in, what);
    const auto M = detail::read_le<std::uint32_t>(in, what);
    Snapshot snap;
    snap.particles = ParticleEnsemble(n, static_cast<int>(dv));
    snap.fields = FieldState(static_cast<int>(M), static_cast<int>(dv));
    detail::read_doubles(in, snap.particles.x, what);
    detail::read_doubles(in, snap.particles.v, what);
    detail::read_doubles(in, snap.particles.w, what);
    detail::read_doubles(in, snap.fields.E1, what);
    detail::read_doubles(in, snap.fields.E2, what);
    detail::read_doubles(in, snap.fields.B3, what);

    const auto side_path = path.string() + ".json";
    if (std::ifstream js(side_path); js) {
        try {
            const auto side = nlohmann::json::parse(js);
            snap.step = side.value("step", std::uint64_t{0});
            snap.fields.rho_ion = side.value("rho_ion", 1.0);
        } catch (const nlohmann::json::exception& e) {
            throw Error("'" + side_path + "': " + e.what());
        }
    }
    return snap;
}

void write_manifest(const std::filesystem::path& path, const SimConfig& config,
                    const std::vector<std::pair<std::string, std::string>>& notes) {
    nlohmann::json m;
    m["version"] = std::string(kVersion);
    m["seed"] = config.seed;
    nlohmann::json cfg;
    for (const auto& [k, v] : config_to_pairs(config)) cfg[k] = v;
    m["config"] = cfg;
    nlohmann::json nj = nlohmann::json::object();
    for (const auto& [k, v] : notes) nj[k] = v;
    m["notes"] = nj;
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << m.dump(2) << "\n";
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace vmlpic
