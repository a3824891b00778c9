#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <json.hpp>

#include "vmlpic/collision.hpp"
#include "vmlpic/diagnostics.hpp"

using namespace vmlpic;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "vmlpic_test_diagnostics";
    fs::create_directories(dir);
    return dir / name;
}

ParticleEnsemble random_ensemble(std::size_t n, int dv, double L, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> N;
    std::uniform_real_distribution<double> U(0.0, L);
    ParticleEnsemble p(n, dv);
    for (std::size_t q = 0; q < n; ++q) {
        p.x[q] = U(gen);
        p.w[q] = L / n;
        for (int i = 0; i < dv; ++i) p.v[q * dv + i] = N(gen);
    }
    return p;
}

FieldState random_fields(int M, int dv, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> N;
    FieldState f(M, dv);
    for (int j = 0; j < M; ++j) {
        f.E1[j] = N(gen);
        f.E2[j] = N(gen);
        f.B3[j] = N(gen);
    }
    f.rho_ion = 1.0 + 0.01 * N(gen);
    return f;
}

}  // namespace

TEST_CASE("diagnostics of a motionless neutral state") {
    const Grid g(10, 5.0);
    ParticleEnsemble p(20, 3);
    for (std::size_t q = 0; q < 20; ++q) {
        p.x[q] = 0.25 * q;
        p.w[q] = 0.25;
    }
    const FieldState f(10, 3);
    const auto r = compute_diagnostics(p, f, g);
    CHECK(r.E_K == 0.0);
    CHECK(r.E_E == 0.0);
    CHECK(r.E_B == 0.0);
    CHECK(r.E_total == 0.0);
    CHECK(r.E_l2 == 0.0);
    CHECK(r.H_dot == 0.0);
    CHECK(r.P == std::vector<double>{0, 0, 0});
}

TEST_CASE("energies, momentum and field norm") {
    const Grid g(8, 4.0);
    ParticleEnsemble p(2, 2);
    p.x = {0.1, 2.0};
    p.w = {0.5, 1.5};
    p.v = {1, 2, -3, 0.5};
    FieldState f(8, 2);
    for (int j = 0; j < 8; ++j) {
        f.E1[j] = j;
        f.E2[j] = 1.0;
        f.B3[j] = -2.0;
    }
    const auto r = compute_diagnostics(p, f, g);
    CHECK(r.E_K == doctest::Approx(0.5 * (0.5 * 5 + 1.5 * 9.25)).epsilon(1e-15));
    CHECK(r.P[0] == doctest::Approx(0.5 - 4.5).epsilon(1e-15));
    CHECK(r.P[1] == doctest::Approx(1.0 + 0.75).epsilon(1e-15));
    // sum j^2 for j < 8 is 140, plus 8 from E2
    CHECK(r.E_E == doctest::Approx(0.5 * 0.5 * 148).epsilon(1e-15));
    CHECK(r.E_B == doctest::Approx(0.5 * 0.5 * 32).epsilon(1e-15));
    CHECK(r.E_l2 == doctest::Approx(std::sqrt(0.5 * 148)).epsilon(1e-15));
    CHECK(r.E_total == r.E_K + r.E_E + r.E_B);
}

TEST_CASE("unit Maxwellian kinetic energy") {
    const double L = 4 * std::numbers::pi;
    const std::size_t n = 100000;
    const auto p = random_ensemble(n, 3, L, 11);
    const FieldState f(100, 3);
    const auto r = compute_diagnostics(p, f, Grid(100, L));
    const double sigma = 0.5 * L * std::sqrt(6.0 / n);
    CHECK(1.5 * L == doctest::Approx(18.85).epsilon(1e-3));
    CHECK(std::abs(r.E_K - 1.5 * L) < 4 * sigma);
}

TEST_CASE("entropy production estimate") {
    const Grid g(5, 6.0);
    const auto p = random_ensemble(200, 3, 6.0, 3);
    std::mt19937_64 gen(4);
    std::normal_distribution<double> N;
    std::vector<double> s(p.v.size());
    for (auto& x : s) x = 2.0 * N(gen);
    const auto U = collision_force(p, s, CellIndex(p, g), g);
    const auto r = compute_diagnostics(p, FieldState(5, 3), g, U, s);
    double h = 0.0;
    for (std::size_t q = 0; q < p.size(); ++q) {
        for (int i = 0; i < 3; ++i) h += p.w[q] * s[q * 3 + i] * U[q * 3 + i];
    }
    CHECK(r.H_dot == doctest::Approx(h).epsilon(1e-14));
    CHECK(r.H_dot >= 0.0);
    CHECK_THROWS_AS(compute_diagnostics(p, FieldState(5, 3), g, std::span<const double>(U).first(3), s), Error);
}

TEST_CASE("CSV round trip") {
    std::vector<DiagnosticsRecord> rows;
    std::mt19937_64 gen(5);
    std::normal_distribution<double> N;
    for (int k = 0; k < 25; ++k) {
        DiagnosticsRecord r;
        r.step = k;
        r.t = 0.02 * k;
        r.E_K = std::exp(N(gen));
        r.E_E = 1e-300 * std::exp(N(gen));
        r.E_B = 0.1 / 3.0;
        r.E_total = r.E_K + r.E_E + r.E_B;
        r.H_dot = N(gen);
        r.P = {N(gen), -0.0, 1e17 * N(gen)};
        r.E_l2 = std::nextafter(1.0, 2.0);
        rows.push_back(r);
    }
    const auto path = scratch("round_trip.csv");
    write_diagnostics_csv(rows, 3, path);

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "step,t,E_K,E_E,E_B,E_total,H_dot,P1,P2,P3,E_l2");
    CHECK(diagnostics_header(2) == "step,t,E_K,E_E,E_B,E_total,H_dot,P1,P2,E_l2");
    int lines = 0;
    for (std::string line; std::getline(in, line);) ++lines;
    CHECK(lines == 25);

    const auto back = read_diagnostics_csv(path);
    REQUIRE(back.size() == rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        CHECK(back[k].step == rows[k].step);
        CHECK(back[k].t == rows[k].t);
        CHECK(back[k].E_K == rows[k].E_K);
        CHECK(back[k].E_E == rows[k].E_E);
        CHECK(back[k].E_B == rows[k].E_B);
        CHECK(back[k].E_total == rows[k].E_total);
        CHECK(back[k].E_total == back[k].E_K + back[k].E_E + back[k].E_B);
        CHECK(back[k].H_dot == rows[k].H_dot);
        CHECK(back[k].P == rows[k].P);
        CHECK(back[k].E_l2 == rows[k].E_l2);
    }
}

TEST_CASE("incremental writer matches the batch writer") {
    std::vector<DiagnosticsRecord> rows(3);
    for (int k = 0; k < 3; ++k) {
        rows[k].step = k;
        rows[k].P = {0.5 * k, 1.0};
    }
    const auto a = scratch("batch.csv"), b = scratch("incremental.csv");
    write_diagnostics_csv(rows, 2, a);
    {
        DiagnosticsWriter w(b, 2);
        for (const auto& r : rows) w.append(r);
    }
    std::ifstream fa(a), fb(b);
    const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(sa == sb);
}

TEST_CASE("malformed CSV input names the file") {
    const auto path = scratch("bad.csv");
    {
        std::ofstream out(path);
        out << diagnostics_header(2) << "\n0,0,1,2,3,6,0,abc,0,1\n";
    }
    CHECK_THROWS_WITH_AS(read_diagnostics_csv(path), doctest::Contains("bad.csv"), Error);
    {
        std::ofstream out(path);
        out << "step,t\n";
    }
    CHECK_THROWS_WITH_AS(read_diagnostics_csv(path), doctest::Contains("unexpected CSV header"), Error);
    CHECK_THROWS_WITH_AS(read_diagnostics_csv(scratch("missing.csv")), doctest::Contains("missing.csv"), Error);
    CHECK_THROWS_WITH_AS(write_diagnostics_csv({}, 2, "/nonexistent_dir/out.csv"),
                         doctest::Contains("/nonexistent_dir/out.csv"), Error);
}

TEST_CASE("snapshot round trip is bit exact") {
    const double L = 7.5;
    const Grid g(24, L);
    const auto p = random_ensemble(1000, 3, L, 8);
    const auto f = random_fields(24, 3, 9);
    auto cfg = SimConfig::for_preset(Preset::Weibel);
    cfg.seed = 42;
    const auto path = scratch("snap.vmls");
    write_snapshot(p, f, 17, path, &cfg);

    const auto s = read_snapshot(path);
    CHECK(s.step == 17);
    CHECK(s.particles.dv == 3);
    CHECK(s.particles.x == p.x);
    CHECK(s.particles.v == p.v);
    CHECK(s.particles.w == p.w);
    CHECK(s.fields.E1 == f.E1);
    CHECK(s.fields.E2 == f.E2);
    CHECK(s.fields.B3 == f.B3);
    CHECK(s.fields.rho_ion == f.rho_ion);
    CHECK(fs::file_size(path) == 4 + 4 + 8 + 4 + 4 + 8 * (1000 * 5 + 24 * 3));

    std::ifstream js(path.string() + ".json");
    const auto side = nlohmann::json::parse(js);
    CHECK(side["config"]["seed"] == "42");
    CHECK(side["config"]["preset"] == "weibel");

    // diagnostics of the reloaded state agree to round-off
    const auto a = compute_diagnostics(p, f, g), b = compute_diagnostics(s.particles, s.fields, g);
    CHECK(std::abs(a.E_total - b.E_total) <= 1e-15 * a.E_total);
    CHECK(std::abs(a.E_K - b.E_K) <= 1e-15 * a.E_K);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(a.P[i] - b.P[i]) <= 1e-15 * a.E_K);
}

TEST_CASE("snapshot errors name the file") {
    const auto bogus = scratch("bogus.vmls");
    {
        std::ofstream out(bogus, std::ios::binary);
        out << "NOPE";
    }
    CHECK_THROWS_WITH_AS(read_snapshot(bogus), doctest::Contains("bogus.vmls"), Error);

    const auto p = random_ensemble(10, 2, 1.0, 1);
    const auto f = random_fields(4, 2, 2);
    const auto path = scratch("trunc.vmls");
    write_snapshot(p, f, 0, path);
    fs::resize_file(path, fs::file_size(path) - 8);
    CHECK_THROWS_WITH_AS(read_snapshot(path), doctest::Contains("trunc.vmls"), Error);
    CHECK_THROWS_WITH_AS(write_snapshot(p, f, 0, "/nonexistent_dir/s.vmls"), doctest::Contains("/nonexistent_dir"),
                         Error);
}

TEST_CASE("manifest contents") {
    auto cfg = SimConfig::for_preset(Preset::TwoStream);
    cfg.seed = 123;
    const auto path = scratch("manifest.json");
    write_manifest(path, cfg, {{"pretrain", "steps=10"}});
    std::ifstream in(path);
    const auto m = nlohmann::json::parse(in);
    CHECK(m["seed"] == 123);
    CHECK(m.contains("version"));
    CHECK(m["config"]["preset"] == "two_stream");
    CHECK(m["notes"]["pretrain"] == "steps=10");
    CHECK(config_from_pairs(m["config"].get<std::map<std::string, std::string>>()).seed == 123);
}
