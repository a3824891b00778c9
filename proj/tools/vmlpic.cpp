// Command-line driver: `simulate` runs the particle method, `score-test`
// compares score estimators against the analytic initial score.

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vmlpic/core.hpp"
#include "vmlpic/simulation.hpp"

namespace {

struct Overrides {
    std::string config_path;
    std::map<std::string, std::string> values;
};

// Registers --key flags whose values are kept as text and applied on top of
// the config file through the same parser.
void add_config_flags(CLI::App& app, Overrides& o) {
    app.add_option("--config", o.config_path, "key = value configuration file")->check(CLI::ExistingFile);
    const std::pair<const char*, const char*> keys[] = {
        {"--preset", "preset"},   {"--mode", "mode"},       {"--n", "n"},
        {"--M", "M"},             {"--dt", "dt"},           {"--t-final", "t_final"},
        {"--nu", "nu"},           {"--dv", "dv"},           {"--K", "K"},
        {"--estimator", "estimator"}, {"--seed", "seed"}, {"--divergence", "divergence"},
        {"--snapshot-every", "snapshot_every"}, {"--hidden", "hidden"}, {"--L", "L"},
        {"--pretrain-steps", "pretrain_steps"}, {"--bandwidth", "bandwidth"},
    };
    for (const auto& [flag, key] : keys) {
        std::string k = key;
        app.add_option_function<std::string>(flag, [&o, k](const std::string& v) { o.values[k] = v; },
                                              "override config key '" + k + "'");
    }
}

vmlpic::SimConfig resolve(const Overrides& o) {
    std::map<std::string, std::string> pairs;
    if (!o.config_path.empty()) pairs = vmlpic::read_config_file(o.config_path);
    for (const auto& [k, v] : o.values) pairs[k] = v;
    auto cfg = vmlpic::config_from_pairs(pairs);
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Collisional particle-in-cell solver with learned velocity scores"};
    app.set_version_flag("--version", std::string(vmlpic::kVersion));
    app.require_subcommand(1);

    Overrides sim_over;
    std::string out_dir = "run";
    bool trace = false;
    bool quiet = false;
    auto* simulate = app.add_subcommand("simulate", "run a simulation and write diagnostics");
    add_config_flags(*simulate, sim_over);
    simulate->add_option("--out", out_dir, "output directory");
    simulate->add_flag("--trace-stages", trace, "print the per-step stage sequence");
    simulate->add_flag("--quiet", quiet, "suppress progress output");

    Overrides st_over;
    std::string csv_path;
    std::string which = "blob,sbtm";
    auto* score = app.add_subcommand("score-test", "compare estimators with the analytic initial score");
    add_config_flags(*score, st_over);
    score->add_option("--csv", csv_path, "write per-particle scores to this CSV");
    score->add_option("--estimators", which, "comma-separated list of estimators");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) {
            const auto cfg = resolve(sim_over);
            vmlpic::RunOptions opts;
            opts.out_dir = out_dir;
            opts.trace_stages = trace;
            if (!quiet) opts.log = [](const std::string& m) { std::cerr << m << "\n"; };
            vmlpic::Simulation sim(cfg, opts);
            sim.run();
            for (const auto& tag : sim.stage_trace()) std::cout << tag << "\n";
            if (!quiet) std::cerr << "wrote " << out_dir << "\n";
        } else if (score->parsed()) {
            const auto cfg = resolve(st_over);
            std::vector<vmlpic::EstimatorKind> kinds;
            std::size_t start = 0;
            while (start <= which.size()) {
                const auto end = std::min(which.find(',', start), which.size());
                kinds.push_back(vmlpic::parse_estimator(which.substr(start, end - start)));
                start = end + 1;
            }
            std::optional<std::filesystem::path> csv;
            if (!csv_path.empty()) csv = csv_path;
            const auto report = vmlpic::score_test(cfg, kinds, csv);
            for (const auto& e : report.entries) std::printf("%s mse=%.6e\n", e.estimator.c_str(), e.mse);
            if (report.pretrain && !report.pretrain->converged) {
                std::fprintf(stderr, "warning: pretraining stopped at mse %.3e (tolerance %.3e)\n",
                             report.pretrain->mse, report.pretrain->tolerance);
            }
        }
    } catch (const vmlpic::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
