#pragma once

#include "wienerlab/chaos.hpp"
#include "wienerlab/gaussian.hpp"

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace wienerlab {

enum class Verdict { pass, fail, saturated };

std::string to_string(Verdict v);
Verdict verdict_from_string(const std::string& s);

inline constexpr double kVerdictSe = 4.0;

/// Uniform decision rule on slack = rhs - lhs. With combined standard error
/// s = sqrt(lhs_se^2 + rhs_se^2) and tol = 4 s + 1e-12 * max(1, |lhs|, |rhs|):
/// saturated when |slack| <= tol, pass when slack > tol, fail otherwise.
/// The 1e-12 term only absorbs rounding when both sides are exact.
Verdict decide(double lhs, double rhs, double lhs_se, double rhs_se);

struct InequalityReport {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double lhs_se = 0.0;
    double rhs_se = 0.0;
    Verdict verdict = Verdict::saturated;
    std::size_t n_samples = 0;
    /// Cross-checks and closed forms that do not enter the verdict.
    nlohmann::json extras = nlohmann::json::object();
    /// Diagnostics such as "divergent_rhs".
    std::vector<std::string> flags;

    double slack() const { return rhs - lhs; }
    double combined_se() const;

    /// Recomputes the verdict from the current sides.
    void settle();
};

void to_json(nlohmann::json& j, const InequalityReport& r);

/// One compact JSON object per line.
void write_json_lines(std::ostream& os, std::span<const InequalityReport> reports);

/// Gradient field of F returned as coordinates in the slot basis.
using GradientFn = std::function<std::vector<double>(std::span<const double>)>;

/// Central-difference gradient of a black-box functional (step 1e-5).
GradientFn finite_difference_gradient(Functional f, double step = 1e-5);

/// Var F <= E|grad F|^2, both sides exact from the coefficients; Monte Carlo
/// values go to extras.
InequalityReport check_poincare(const ChaosExpansion& f, const SamplePool& pool);

/// Ent(f^2) <= 2 E|grad f|^2 by Monte Carlo. Throws std::domain_error naming
/// the first row where f <= 0.
InequalityReport check_log_sobolev(const Functional& f, const GradientFn& grad,
                                   const SamplePool& pool);
InequalityReport check_log_sobolev(const ChaosExpansion& f, const SamplePool& pool);

/// ||P_t F||_q <= ||F||_p, both sides by Monte Carlo in log scale. The
/// critical relation q - 1 <= e^{2t}(p - 1) is recorded in extras.
InequalityReport check_hypercontractivity(const ChaosExpansion& f, double p, double q, double t,
                                          const SamplePool& pool);

/// Same inequality for F = E(I(h)) using the closed forms
/// ||P_t E(I(h))||_q = exp((q-1) e^{-2t} |h|^2 / 2); Monte Carlo values of
/// both norms are reported in extras as a cross-check.
InequalityReport check_hypercontractivity_wick(const CameronMartinVector& h, double p, double q,
                                               double t, const SamplePool& pool);

/// mu{|F| > c} <= 2 exp(-(c - |E F|)_+^2 / (2 sigma^2)). First-order F
/// certifies sigma = |f_1| itself; higher orders need the caller's sigma
/// (std::invalid_argument otherwise). A Fernique check of
/// E exp(F^2 / (4 sigma^2)) goes to extras.
InequalityReport check_tail_bound(const ChaosExpansion& f, double c, const SamplePool& pool,
                                  std::optional<double> sigma = std::nullopt);
InequalityReport check_tail_bound(const Functional& f, double sigma, double c,
                                  const SamplePool& pool);

enum class CouplingForm {
    /// E exp(F - E F) <= E exp(pi^2/8 |grad F|^2)
    exponential,
    /// E|F - E F| <= pi/2 E|grad F|
    absolute,
};

InequalityReport check_coupling(const ChaosExpansion& f, const SamplePool& pool,
                                CouplingForm form = CouplingForm::exponential);

struct MeyerSpotcheck {
    double p = 2.0;
    std::vector<double> ratios;
    /// Members with zero gradient; reported with ratio 0 and left out of the
    /// band check.
    std::vector<bool> constant_member;
    double min_ratio = 0.0;
    double max_ratio = 0.0;
    double band_lo = 0.1;
    double band_hi = 10.0;
    bool within_band = true;
};

void to_json(nlohmann::json& j, const MeyerSpotcheck& m);

/// ||grad phi||_p / ||(I+L)^{1/2} phi||_p over a family; exact at p = 2,
/// Monte Carlo for p in {1.5, 3}.
MeyerSpotcheck meyer_ratio_spotcheck(std::span<const ChaosExpansion> family, double p,
                                     const SamplePool& pool, double band_lo = 0.1,
                                     double band_hi = 10.0);

}  // namespace wienerlab
