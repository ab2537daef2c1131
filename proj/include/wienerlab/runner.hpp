#pragma once

#include "wienerlab/inequality.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace wienerlab {

inline constexpr int kReportSchemaVersion = 1;

std::string version();

enum class Experiment {
    chaos_identities,
    clark,
    girsanov,
    ramer,
    inequalities,
    transport,
    monge_ampere,
};

std::string to_string(Experiment e);
/// Throws ConfigError for unknown names.
Experiment experiment_from_string(const std::string& name);

/// Invalid configuration; the CLI maps it to a usage error.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ParamSpec {
    enum class Kind { positive_number, nonnegative_number, positive_integer, integer_list, choice };

    std::string name;
    Kind kind = Kind::positive_number;
    nlohmann::json default_value;
    std::string description;
    std::vector<std::string> choices;
};

struct ExperimentInfo {
    Experiment id;
    std::string name;
    std::string theorem;
    std::string summary;
    /// Top-level numeric fields the experiment reads.
    std::vector<std::string> fields;
    std::vector<ParamSpec> params;
    nlohmann::json defaults;
};

/// Fixed catalog order.
const std::vector<ExperimentInfo>& list_experiments();
const ExperimentInfo& experiment_info(Experiment e);

struct ExperimentConfig {
    Experiment experiment = Experiment::chaos_identities;
    std::uint64_t seed = 1;
    std::size_t n_samples = 0;
    std::size_t n_slots = 0;
    std::size_t dim = 0;
    std::size_t order_cap = 0;
    /// Every declared parameter, defaults filled in.
    nlohmann::json params = nlohmann::json::object();

    /// Missing fields take the experiment's defaults. Rejects unknown keys,
    /// non-positive numbers and parameters of the wrong kind.
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig defaults(Experiment e);
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);

/// One row of a report. `accepted` lists the verdicts that count as success;
/// sharpness witnesses accept only `fail`.
struct CheckResult {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double se = 0.0;
    Verdict verdict = Verdict::pass;
    std::vector<Verdict> accepted{Verdict::pass, Verdict::saturated};
    nlohmann::json extras = nlohmann::json::object();

    bool ok() const;
};

void to_json(nlohmann::json& j, const CheckResult& c);

struct RunReport {
    ExperimentConfig config;
    std::vector<CheckResult> checks;
    double wall_time_s = 0.0;
    /// Artifact files written next to the report, relative names.
    std::vector<std::string> artifacts;

    bool ok() const;
    const CheckResult& check(const std::string& name) const;
};

void to_json(nlohmann::json& j, const RunReport& r);

/// Report JSON without the wall-time field, for determinism comparisons.
nlohmann::json reproducible_json(const RunReport& r);

/// Runs the experiment deterministically under the config's seed. CSV/JSON
/// artifacts go to `artifact_dir` when given.
RunReport run(const ExperimentConfig& config,
              const std::optional<std::filesystem::path>& artifact_dir = std::nullopt);

}  // namespace wienerlab
