#include "wienerlab/runner.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

using namespace wienerlab;
using nlohmann::json;

TEST(Catalog, SevenExperimentsInFixedOrder) {
    const auto& c = list_experiments();
    const std::vector<std::string> expected{"chaos_identities", "clark",        "girsanov",    "ramer",
                                            "inequalities",     "transport",    "monge_ampere"};
    ASSERT_EQ(c.size(), expected.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        EXPECT_EQ(c[i].name, expected[i]);
        EXPECT_EQ(to_string(c[i].id), expected[i]);
        EXPECT_FALSE(c[i].theorem.empty());
        EXPECT_EQ(&list_experiments()[i], &c[i]);
    }
}

TEST(Config, DefaultsAreFilledAndEchoed) {
    const auto c = ExperimentConfig::from_json(json{{"experiment", "transport"}});
    EXPECT_EQ(c.experiment, Experiment::transport);
    EXPECT_EQ(c.n_samples, 200000u);
    EXPECT_EQ(c.params["n_points"], 512);
    EXPECT_EQ(c.params["density"], "wick");
    const json echo = c;
    EXPECT_EQ(ExperimentConfig::from_json(echo).params, c.params);
    EXPECT_EQ(json(ExperimentConfig::from_json(echo)), echo);
}

TEST(Config, RejectsInvalidInput) {
    const std::vector<json> bad{
        json::array(),
        json{{"seed", 1}},
        json{{"experiment", "unknown"}},
        json{{"experiment", "clark"}, {"extra", 1}},
        json{{"experiment", "clark"}, {"seed", 0}},
        json{{"experiment", "clark"}, {"n_samples", -5}},
        json{{"experiment", "clark"}, {"n_samples", 2.5}},
        json{{"experiment", "clark"}, {"dim", "3"}},
        json{{"experiment", "clark"}, {"params", {{"nope", 1}}}},
        json{{"experiment", "clark"}, {"params", {{"slot_counts", json::array()}}}},
        json{{"experiment", "clark"}, {"params", {{"slot_counts", {10, 0}}}}},
        json{{"experiment", "ramer"}, {"params", {{"epsilon", -0.1}}}},
        json{{"experiment", "ramer"}, {"params", {{"epsilon", 1.0}}}},
        json{{"experiment", "transport"}, {"params", {{"density", "gauss"}}}},
        json{{"experiment", "girsanov"}, {"params", {{"drift_scale", -1}}}},
        json{{"experiment", "chaos_identities"}, {"dim", 2}},
    };
    for (const auto& j : bad) EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError) << j.dump();
    EXPECT_NO_THROW(ExperimentConfig::from_json(json{{"experiment", "girsanov"}, {"params", {{"drift_scale", 0}}}}));
}

TEST(CheckResultTest, AcceptedVerdicts) {
    CheckResult c;
    c.verdict = Verdict::saturated;
    EXPECT_TRUE(c.ok());
    c.accepted = {Verdict::fail};
    EXPECT_FALSE(c.ok());
    c.verdict = Verdict::fail;
    EXPECT_TRUE(c.ok());
    const json j = c;
    EXPECT_EQ(j["verdict"], "fail");
    EXPECT_EQ(j["accepted"], json::array({"fail"}));
}

TEST(Run, GirsanovZeroDriftHasZeroResidual) {
    const auto cfg = ExperimentConfig::from_json(
        json{{"experiment", "girsanov"}, {"n_samples", 2000}, {"n_slots", 8}, {"params", {{"drift_scale", 0}}}});
    const auto rep = run(cfg);
    EXPECT_TRUE(rep.ok());
    for (const auto& c : rep.checks) {
        EXPECT_EQ(c.lhs, c.rhs) << c.name;
        if (c.extras.contains("residual")) EXPECT_EQ(c.extras["residual"].get<double>(), 0.0);
    }
}

TEST(Run, TransportSelfCoupling) {
    const auto cfg = ExperimentConfig::from_json(json{{"experiment", "transport"},
                                                      {"n_samples", 100000},
                                                      {"params", {{"density", "one"}, {"n_points", 256}}}});
    const auto rep = run(cfg);
    EXPECT_LE(rep.check("wasserstein_self_coupling").lhs, 0.2);
    EXPECT_TRUE(rep.ok());
    EXPECT_THROW(rep.check("missing"), std::out_of_range);
}

TEST(Run, TooSmallPoolIsReported) {
    try {
        ExperimentConfig::from_json(json{{"experiment", "transport"}, {"n_samples", 1000}});
        FAIL() << "expected a config error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("184320"), std::string::npos) << e.what();
    }
}

TEST(Run, ReportsAreReproducible) {
    const auto cfg = ExperimentConfig::from_json(
        json{{"experiment", "chaos_identities"}, {"n_samples", 5000}, {"seed", 42}, {"order_cap", 4}});
    const auto a = run(cfg);
    const auto b = run(cfg);
    EXPECT_EQ(reproducible_json(a).dump(), reproducible_json(b).dump());
    const json full = a;
    EXPECT_EQ(full["schema_version"], kReportSchemaVersion);
    EXPECT_EQ(full["version"], version());
    EXPECT_TRUE(full.contains("wall_time_s"));
    EXPECT_FALSE(reproducible_json(a).contains("wall_time_s"));
    std::set<std::string> names;
    for (const auto& c : full["checks"]) {
        names.insert(c["name"].get<std::string>());
        const auto v = c["verdict"].get<std::string>();
        EXPECT_TRUE(v == "pass" || v == "fail" || v == "saturated");
    }
    EXPECT_EQ(names.size(), a.checks.size());

    auto other = cfg;
    other.seed = 43;
    EXPECT_NE(reproducible_json(run(other))["checks"].dump(), reproducible_json(a)["checks"].dump());
}

TEST(Run, WritesArtifacts) {
    const auto dir = std::filesystem::temp_directory_path() / "wienerlab_runner_artifacts";
    std::filesystem::remove_all(dir);
    const auto cfg = ExperimentConfig::from_json(json{{"experiment", "transport"},
                                                      {"n_samples", 20000},
                                                      {"params", {{"n_points", 32}, {"repetitions", 4}, {"aux_points", 16}, {"cycles", 100}}}});
    const auto rep = run(cfg, dir);
    for (const auto& a : rep.artifacts) EXPECT_TRUE(std::filesystem::exists(dir / a)) << a;
    std::ifstream plan(dir / "plan.csv");
    std::string header;
    std::getline(plan, header);
    EXPECT_EQ(header, "i,j,mass");
    std::filesystem::remove_all(dir);
}
