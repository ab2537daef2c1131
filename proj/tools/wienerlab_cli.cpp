#include "wienerlab/runner.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

void print_catalog(bool as_json) {
    const auto& catalog = wienerlab::list_experiments();
    if (as_json) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& e : catalog) {
            nlohmann::json params = nlohmann::json::array();
            for (const auto& p : e.params) {
                params.push_back({{"name", p.name}, {"default", p.default_value}, {"description", p.description}});
            }
            out.push_back({{"name", e.name},
                           {"theorem", e.theorem},
                           {"summary", e.summary},
                           {"fields", e.fields},
                           {"defaults", e.defaults},
                           {"params", params}});
        }
        std::cout << out.dump(2) << '\n';
        return;
    }
    for (const auto& e : catalog) {
        std::cout << e.name << "\n  verifies: " << e.theorem << "\n  " << e.summary << "\n  fields:";
        for (const auto& f : e.fields) std::cout << ' ' << f << '=' << e.defaults[f].dump();
        std::cout << '\n';
        for (const auto& p : e.params) {
            std::cout << "  params." << p.name << " = " << p.default_value.dump() << "  (" << p.description << ")\n";
        }
    }
}

int run_command(const std::string& config_path, std::optional<std::uint64_t> seed,
                std::optional<std::size_t> samples, const std::string& out_dir) {
    nlohmann::json j;
    {
        std::ifstream in(config_path);
        if (!in) {
            std::cerr << "error: cannot open config '" << config_path << "'\n";
            return kExitUsage;
        }
        try {
            in >> j;
        } catch (const nlohmann::json::parse_error& e) {
            std::cerr << "error: " << config_path << " is not valid JSON: " << e.what() << '\n';
            return kExitUsage;
        }
    }
    if (j.is_object()) {
        if (seed) j["seed"] = *seed;
        if (samples) j["n_samples"] = *samples;
    }

    wienerlab::ExperimentConfig config;
    try {
        config = wienerlab::ExperimentConfig::from_json(j);
    } catch (const wienerlab::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    const std::filesystem::path out(out_dir);
    wienerlab::RunReport report;
    try {
        report = wienerlab::run(config, out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << wienerlab::to_string(config.experiment) << " aborted: " << e.what() << '\n';
        return kExitFail;
    }

    const auto report_path = out / (wienerlab::to_string(config.experiment) + "_report.json");
    std::ofstream(report_path) << nlohmann::json(report).dump(2) << '\n';

    std::size_t failed = 0;
    for (const auto& c : report.checks) {
        if (!c.ok()) ++failed;
        std::printf("%-4s %-44s %-9s lhs=%-12.6g rhs=%-12.6g se=%.3g\n", c.ok() ? "ok" : "FAIL",
                    c.name.c_str(), wienerlab::to_string(c.verdict).c_str(), c.lhs, c.rhs, c.se);
    }
    std::printf("%zu checks, %zu failed, %.2f s; report: %s\n", report.checks.size(), failed,
                report.wall_time_s, report_path.string().c_str());
    return report.ok() ? kExitPass : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wiener-space numerical experiments", "wienerlab"};
    app.set_version_flag("--version", wienerlab::version());
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run one experiment from a JSON config");
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> samples;
    std::string out_dir = ".";
    run->add_option("config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--seed", seed, "Override the config seed");
    run->add_option("--samples", samples, "Override n_samples");
    run->add_option("--out", out_dir, "Directory for the report and artifacts")->capture_default_str();

    auto* list = app.add_subcommand("list", "List experiments, their parameters and what they verify");
    bool as_json = false;
    list->add_flag("--json", as_json, "Machine-readable catalog");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitPass : kExitUsage;
    }

    if (*list) {
        print_catalog(as_json);
        return kExitPass;
    }
    return run_command(config_path, seed, samples, out_dir);
}
