#include "wienerlab/runner.hpp"

#include "wienerlab/chaos.hpp"
#include "wienerlab/gaussian.hpp"
#include "wienerlab/measure.hpp"
#include "wienerlab/stats.hpp"
#include "wienerlab/transport.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#ifndef WIENERLAB_VERSION
#define WIENERLAB_VERSION "0.0.0"
#endif

namespace wienerlab {

using nlohmann::json;

std::string version() { return WIENERLAB_VERSION; }

namespace {

constexpr double kExactTol = 1e-10;

const std::vector<std::string> kExperimentNames{
    "chaos_identities", "clark", "girsanov", "ramer", "inequalities", "transport", "monge_ampere",
};

const std::vector<std::string> kTopLevelFields{"seed", "n_samples", "n_slots", "dim", "order_cap"};

using Kind = ParamSpec::Kind;

std::vector<ExperimentInfo> build_catalog() {
    std::vector<ExperimentInfo> c;
    c.push_back({Experiment::chaos_identities, "chaos_identities",
                 "chaos decomposition; multiplication formula; independence criterion",
                 "Exact coefficient identities (divergence of the derivative is the number operator, "
                 "Hermite products, isometry), pointwise product consistency and the squares test "
                 "of independence.",
                 {"seed", "n_samples", "dim", "order_cap"},
                 {{"points", Kind::positive_integer, 1000, "random points for pointwise product checks", {}},
                  {"expansions", Kind::positive_integer, 20, "random expansions per identity", {}}},
                 {{"seed", 1}, {"n_samples", 100000}, {"n_slots", 3}, {"dim", 3}, {"order_cap", 6}}});
    c.push_back({Experiment::clark, "clark", "Clark formula; Stroock formula",
                 "Predictable-integrand reconstruction at several grid sizes and finite-difference "
                 "recovery of chaos kernels.",
                 {"seed", "n_samples"},
                 {{"slot_counts", Kind::integer_list, json::array({10, 50, 200}), "grid sizes N", {}},
                  {"stroock_dim", Kind::positive_integer, 3, "coordinates of the Stroock test functionals", {}},
                  {"fd_step", Kind::positive_number, kStroockDefaultStep, "finite-difference step", {}}},
                 {{"seed", 1}, {"n_samples", 100000}, {"n_slots", 50}, {"dim", 3}, {"order_cap", 2}}});
    c.push_back({Experiment::girsanov, "girsanov", "Cameron-Martin and Girsanov theorems",
                 "E[F(T w) Lambda] against E[F] for a five-functional suite under a deterministic "
                 "and an adapted drift.",
                 {"seed", "n_samples", "n_slots"},
                 {{"drift_scale", Kind::nonnegative_number, 0.5, "drift amplitude (0 gives u = 0)", {}}},
                 {{"seed", 1}, {"n_samples", 100000}, {"n_slots", 16}, {"dim", 16}, {"order_cap", 1}}});
    c.push_back({Experiment::ramer, "ramer", "Ramer theorem; Carleman-Fredholm determinant",
                 "Ramer density closed form, unit mass and change of measure for the tanh suite, "
                 "det2 product identity and Hilbert-Schmidt bound.",
                 {"seed", "n_samples", "dim"},
                 {{"epsilon", Kind::positive_number, 0.5, "tanh shift amplitude, < 1", {}},
                  {"matrices", Kind::positive_integer, 1000, "random matrices for det2 checks", {}},
                  {"matrix_dim", Kind::positive_integer, 8, "size of the random matrices", {}}},
                 {{"seed", 1}, {"n_samples", 100000}, {"n_slots", 3}, {"dim", 3}, {"order_cap", 1}}});
    c.push_back({Experiment::inequalities, "inequalities",
                 "Poincare, log-Sobolev, hypercontractivity, exponential tail, coupling, Meyer spot check",
                 "Functional inequalities with closed-form sides where available and a 4-SE verdict.",
                 {"seed", "n_samples", "dim"},
                 {{"time", Kind::positive_number, 0.5, "Ornstein-Uhlenbeck time t", {}},
                  {"p", Kind::positive_number, 2.0, "hypercontractivity exponent p > 1", {}}},
                 {{"seed", 1}, {"n_samples", 1000000}, {"n_slots", 2}, {"dim", 2}, {"order_cap", 6}}});
    c.push_back({Experiment::transport, "transport",
                 "Talagrand inequality; transport map construction; cyclic monotonicity; gauge inequality",
                 "Empirical Wasserstein estimates against 2E[L log L], exact OT solver certificates "
                 "and cyclic monotonicity of optimal plans.",
                 {"seed", "n_samples", "dim"},
                 {{"density", Kind::choice, "wick", "L: Wick exponential of e1, or constant one", {"wick", "one"}},
                  {"n_points", Kind::positive_integer, 512, "atoms per empirical measure", {}},
                  {"repetitions", Kind::positive_integer, 20, "resampling repetitions", {}},
                  {"cycles", Kind::positive_integer, 10000, "sampled cycles per length", {}},
                  {"aux_points", Kind::positive_integer, 128, "atoms for triangle and projection checks", {}}},
                 {{"seed", 1}, {"n_samples", 200000}, {"n_slots", 2}, {"dim", 2}, {"order_cap", 1}}});
    c.push_back({Experiment::monge_ampere, "monge_ampere", "finite-dimensional Monge-Ampere equation; Brenier map",
                 "Lambda(x) L(T x) = 1 for Gaussian targets, 1-convexity of the potential and the "
                 "pushforward covariance.",
                 {"seed", "n_samples", "dim"},
                 {{"test_points", Kind::positive_integer, 100, "points per target", {}},
                  {"targets", Kind::positive_integer, 5, "random SPD targets per dimension", {}}},
                 {{"seed", 1}, {"n_samples", 100000}, {"n_slots", 4}, {"dim", 4}, {"order_cap", 1}}});
    return c;
}

void fail_config(const std::string& msg) { throw ConfigError("config: " + msg); }

std::size_t positive_size(const json& v, const std::string& key) {
    if (v.is_number_unsigned() || v.is_number_integer()) {
        const auto x = v.get<std::int64_t>();
        if (x > 0) return static_cast<std::size_t>(x);
    }
    fail_config("'" + key + "' must be a positive integer");
    return 0;
}

json validate_param(const ParamSpec& spec, const json& v) {
    const std::string where = "params." + spec.name;
    switch (spec.kind) {
        case Kind::positive_number:
        case Kind::nonnegative_number: {
            if (!v.is_number()) fail_config("'" + where + "' must be a number");
            const double x = v.get<double>();
            const bool ok = spec.kind == Kind::positive_number ? x > 0.0 : x >= 0.0;
            if (!std::isfinite(x) || !ok) {
                fail_config("'" + where + "' must be " +
                            (spec.kind == Kind::positive_number ? "positive" : "nonnegative"));
            }
            return x;
        }
        case Kind::positive_integer:
            return positive_size(v, where);
        case Kind::integer_list: {
            if (!v.is_array() || v.empty()) fail_config("'" + where + "' must be a nonempty array");
            json out = json::array();
            for (const auto& e : v) out.push_back(positive_size(e, where));
            return out;
        }
        case Kind::choice: {
            if (!v.is_string()) fail_config("'" + where + "' must be a string");
            const auto s = v.get<std::string>();
            if (std::find(spec.choices.begin(), spec.choices.end(), s) == spec.choices.end()) {
                std::string all;
                for (const auto& c : spec.choices) all += (all.empty() ? "" : ", ") + c;
                fail_config("'" + where + "' must be one of " + all);
            }
            return s;
        }
    }
    return v;
}

void check_ranges(const ExperimentConfig& c) {
    const auto& p = c.params;
    switch (c.experiment) {
        case Experiment::chaos_identities:
            if (c.dim < 3) fail_config("chaos_identities needs dim >= 3");
            if (c.order_cap > 8) fail_config("chaos_identities supports order_cap <= 8");
            break;
        case Experiment::clark:
            if (p["fd_step"].get<double>() >= 0.5) fail_config("params.fd_step must be < 0.5");
            if (p["stroock_dim"].get<std::size_t>() < 2) fail_config("params.stroock_dim must be >= 2");
            break;
        case Experiment::girsanov:
            if (c.n_slots < 2) fail_config("girsanov needs n_slots >= 2");
            break;
        case Experiment::ramer:
            if (p["epsilon"].get<double>() >= 1.0) fail_config("params.epsilon must be < 1");
            if (c.dim > 3) fail_config("ramer runs the tanh suite in dim <= 3");
            break;
        case Experiment::inequalities:
            if (p["p"].get<double>() <= 1.0) fail_config("params.p must be > 1");
            if (c.dim < 2) fail_config("inequalities needs dim >= 2");
            break;
        case Experiment::transport: {
            const auto n = p["n_points"].get<std::size_t>();
            if (n > 4096) fail_config("params.n_points must be <= 4096");
            if (n < 2 || p["repetitions"].get<std::size_t>() < 2) {
                fail_config("transport needs n_points >= 2 and repetitions >= 2");
            }
            // each debiased repetition draws n plain rows and 8n candidates, twice
            const WassersteinOptions o;
            const std::size_t need = 2 * (1 + o.candidate_factor) * n * p["repetitions"].get<std::size_t>();
            if (c.n_samples < need) {
                fail_config("transport with n_points = " + std::to_string(n) + " needs n_samples >= " +
                            std::to_string(need));
            }
            break;
        }
        case Experiment::monge_ampere:
            if (c.dim > 16) fail_config("monge_ampere supports dim <= 16");
            break;
    }
}

// Deterministic normals and uniforms keyed by (seed, stream), independent of
// the sample pools.
class Draws {
public:
    Draws(std::uint64_t seed, std::uint32_t stream) : seed_(seed), stream_(stream) {}

    double normal() {
        const auto pair = gaussian_pair(seed_, counter_ / 2, 0, stream_);
        return pair[(counter_++) % 2];
    }
    double uniform() { return counter_uniform(seed_, counter_++, stream_ ^ 0x00ff0000u); }

    Matrix matrix(std::size_t rows, std::size_t cols, double scale = 1.0) {
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index k = 0; k < m.cols(); ++k) m(i, k) = scale * normal();
        return m;
    }

private:
    std::uint64_t seed_;
    std::uint32_t stream_;
    std::uint64_t counter_ = 0;
};

// Streams used by the experiments; pools and ad hoc draws never share one.
enum Stream : std::uint32_t {
    kPoolMain = 0,
    kPoolPoints = 1,
    kPoolAux = 2,
    kPoolAux2 = 3,
    kDrawKernels = 100,
    kDrawMatrices = 101,
    kDrawClouds = 102,
    kClarkBase = 1000,
};

CheckResult bound_check(std::string name, double value, double bound, json extras = json::object()) {
    CheckResult c;
    c.name = std::move(name);
    c.lhs = value;
    c.rhs = bound;
    c.verdict = std::isfinite(value) && value <= bound ? Verdict::pass : Verdict::fail;
    c.extras = std::move(extras);
    return c;
}

CheckResult within_se(std::string name, double estimate, double target, double se, double k,
                      json extras = json::object()) {
    CheckResult c;
    c.name = std::move(name);
    c.lhs = estimate;
    c.rhs = target;
    c.se = se;
    const double tol = k * se + 1e-12 * std::max(1.0, std::abs(target));
    c.verdict = std::abs(estimate - target) <= tol ? Verdict::pass : Verdict::fail;
    extras["k_se"] = k;
    c.extras = std::move(extras);
    return c;
}

CheckResult from_report(std::string name, const InequalityReport& r,
                        std::vector<Verdict> accepted = {Verdict::pass, Verdict::saturated}) {
    CheckResult c;
    c.name = std::move(name);
    c.lhs = r.lhs;
    c.rhs = r.rhs;
    c.se = r.combined_se();
    c.verdict = r.verdict;
    c.accepted = std::move(accepted);
    c.extras = r.extras;
    c.extras["lhs_se"] = r.lhs_se;
    c.extras["rhs_se"] = r.rhs_se;
    c.extras["n"] = r.n_samples;
    if (!r.flags.empty()) c.extras["flags"] = r.flags;
    return c;
}

CheckResult from_density(std::string name, const DensityReport& r) {
    CheckResult c;
    c.name = std::move(name);
    c.lhs = r.lhs;
    c.rhs = r.rhs;
    c.se = r.std_error;
    c.verdict = r.pass ? Verdict::pass : Verdict::fail;
    c.extras = {{"residual", r.residual}, {"mean_weight", r.mean_weight}, {"n", r.n_samples}};
    return c;
}

std::string fmt_number(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

double max_coeff_diff(const ChaosExpansion& a, const ChaosExpansion& b) {
    const ChaosExpansion d = a - b;
    double m = 0.0;
    for (const auto& [n, k] : d.terms())
        for (const auto& [idx, v] : k.entries()) m = std::max(m, std::abs(v));
    return m;
}

double max_coeff(const ChaosExpansion& a) {
    double m = 0.0;
    for (const auto& [n, k] : a.terms())
        for (const auto& [idx, v] : k.entries()) m = std::max(m, std::abs(v));
    return m;
}

SymmetricKernel random_kernel(std::size_t order, std::size_t dim, Draws& draws) {
    SymmetricKernel k(order, dim);
    for (const auto& idx : sorted_multi_indices(order, dim)) k.set(idx, draws.normal() / std::sqrt(factorial(order)));
    return k;
}

ChaosExpansion random_expansion(std::size_t max_order, std::size_t dim, Draws& draws) {
    ChaosExpansion f(dim);
    for (std::size_t n = 0; n <= max_order; ++n) f.add_term(random_kernel(n, dim, draws));
    return f;
}

// ----------------------------------------------------------------------------
// chaos_identities

void run_chaos_identities(const ExperimentConfig& cfg, RunReport& rep, const std::filesystem::path* out) {
    const std::size_t d = cfg.dim;
    const std::size_t cap = cfg.order_cap;
    const auto n_exp = cfg.params["expansions"].get<std::size_t>();
    const auto n_points = cfg.params["points"].get<std::size_t>();
    Draws draws(cfg.seed, kDrawKernels);

    double worst = 0.0;
    for (std::size_t k = 0; k < n_exp; ++k) {
        const auto f = random_expansion(cap, d, draws);
        const double scale = std::max(1.0, max_coeff(f) * static_cast<double>(cap));
        worst = std::max(worst, max_coeff_diff(divergence(derivative(f)), number_op(f)) / scale);
    }
    rep.checks.push_back(bound_check("divergence_of_derivative_is_number_op", worst, kExactTol,
                                     {{"max_order", cap}, {"expansions", n_exp}}));

    const auto e0 = SymmetricKernel::basis(d, 0);
    std::vector<double> unit(d, 0.0);
    unit[0] = 1.0;
    auto hermite_chaos = [&](std::size_t n) {
        return ChaosExpansion::multiple_integral(SymmetricKernel::tensor_power(unit, n));
    };
    {
        const auto h2 = hermite_chaos(2);
        const auto expected = hermite_chaos(4) + 4.0 * h2 + ChaosExpansion::constant(d, 2.0);
        rep.checks.push_back(bound_check("hermite_h2_squared",
                                         max_coeff_diff(multiply(h2, h2, 4), expected), kExactTol));
    }
    {
        // H_m H_n = sum_k C(m,k) C(n,k) k! H_{m+n-2k}
        double table = 0.0;
        for (std::size_t m = 0; m <= 4; ++m) {
            for (std::size_t n = 0; n <= 4; ++n) {
                ChaosExpansion expected(d);
                for (std::size_t k = 0; k <= std::min(m, n); ++k) {
                    const double c = factorial(m) / (factorial(k) * factorial(m - k)) * factorial(n) /
                                     (factorial(k) * factorial(n - k)) * factorial(k);
                    expected += c * hermite_chaos(m + n - 2 * k);
                }
                const auto prod = multiply(hermite_chaos(m), hermite_chaos(n), 8);
                table = std::max(table, max_coeff_diff(prod, expected) / std::max(1.0, max_coeff(expected)));
            }
        }
        rep.checks.push_back(bound_check("hermite_product_table", table, kExactTol, {{"max_factor_order", 4}}));
    }
    {
        // E[I_n(f) I_m(g)] through the product expansion's constant term
        double worst_iso = 0.0;
        for (std::size_t n = 0; n <= 3; ++n) {
            for (std::size_t m = 0; m <= 3; ++m) {
                const auto f = random_kernel(n, d, draws);
                const auto g = random_kernel(m, d, draws);
                const double lhs = multiply(ChaosExpansion::multiple_integral(f),
                                            ChaosExpansion::multiple_integral(g), 6)
                                       .mean();
                const double rhs = n == m ? factorial(n) * kernel_inner(f, g) : 0.0;
                worst_iso = std::max(worst_iso, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
            }
        }
        rep.checks.push_back(bound_check("isometry_exact", worst_iso, kExactTol, {{"max_order", 3}}));
    }

    const SamplePool pool(cfg.seed, cfg.n_samples, d, kPoolMain);
    {
        const auto f = random_kernel(2, d, draws);
        const auto g = random_kernel(2, d, draws);
        const CompiledExpansion cf(ChaosExpansion::multiple_integral(f));
        const CompiledExpansion cg(ChaosExpansion::multiple_integral(g));
        RunningStats s;
        for (std::size_t i = 0; i < pool.size(); ++i) s.push(cf(pool.row(i)) * cg(pool.row(i)));
        rep.checks.push_back(within_se("isometry_monte_carlo", s.mean(), 2.0 * kernel_inner(f, g), s.std_error(), 3.0));
    }
    {
        const SamplePool points(cfg.seed, n_points, d, kPoolPoints);
        double worst_pt = 0.0;
        for (std::size_t k = 0; k < 5; ++k) {
            const auto f = random_expansion(2, d, draws);
            const auto g = random_expansion(2, d, draws);
            const auto fg = multiply(f, g, 4);
            if (out && k == 0) {
                std::ofstream(*out / "product_expansion.json") << json(fg).dump() << '\n';
                rep.artifacts.push_back("product_expansion.json");
            }
            const CompiledExpansion cf(f), cg(g), cfg_(fg);
            for (std::size_t i = 0; i < points.size(); ++i) {
                const double expect = cf(points.row(i)) * cg(points.row(i));
                worst_pt = std::max(worst_pt, std::abs(cfg_(points.row(i)) - expect) / std::max(1.0, std::abs(expect)));
            }
        }
        rep.checks.push_back(bound_check("pointwise_product", worst_pt, 1e-9, {{"points", n_points}}));
    }
    {
        auto squares_cov = [&](const SymmetricKernel& f, const SymmetricKernel& g) {
            const CompiledExpansion cf(ChaosExpansion::multiple_integral(f));
            const CompiledExpansion cg(ChaosExpansion::multiple_integral(g));
            std::vector<double> a(pool.size()), b(pool.size());
            for (std::size_t i = 0; i < pool.size(); ++i) {
                a[i] = std::pow(cf(pool.row(i)), 2);
                b[i] = std::pow(cg(pool.row(i)), 2);
            }
            const double ma = estimate_of(a).mean, mb = estimate_of(b).mean;
            RunningStats psi;
            for (std::size_t i = 0; i < a.size(); ++i) psi.push((a[i] - ma) * (b[i] - mb));
            return psi.estimate();
        };
        const auto f = SymmetricKernel::symmetric_product(e0, SymmetricKernel::basis(d, 1));
        for (const auto& [label, g] : {std::pair{"independent", SymmetricKernel::basis(d, 2)},
                                       std::pair{"dependent", e0}}) {
            const double residual = independence_residual(f, g);
            const auto cov = squares_cov(f, g);
            CheckResult c;
            c.name = std::string("squares_covariance_") + label;
            c.lhs = std::abs(cov.mean);
            c.rhs = 4.0 * cov.std_error;
            c.se = cov.std_error;
            c.verdict = c.lhs <= c.rhs ? Verdict::pass : Verdict::fail;
            if (residual > 0.0) c.accepted = {Verdict::fail};
            c.extras = {{"independence_residual", residual}, {"covariance", cov.mean}};
            rep.checks.push_back(std::move(c));
        }
    }
}

// ----------------------------------------------------------------------------
// clark

void run_clark(const ExperimentConfig& cfg, RunReport& rep) {
    constexpr std::size_t kChunk = 10000;
    std::uint32_t stream = kClarkBase;
    for (const auto& nj : cfg.params["slot_counts"]) {
        const auto n = nj.get<std::size_t>();
        const TimeGrid grid(n);
        const auto h = CameronMartinVector::from_derivative(grid, [](double t) { return std::cos(3 * t); });
        const auto f1 = ChaosExpansion::first_order(h.coords);
        const auto integrand1 = clark_integrand(f1);
        const std::vector<CompiledExpansion> c1(integrand1.begin(), integrand1.end());
        const CompiledExpansion cf1(f1);

        const auto ramp = CameronMartinVector::ramp(grid);
        const auto f2 = ChaosExpansion::multiple_integral(SymmetricKernel::tensor_power(ramp.coords, 2));
        const auto integrand2 = clark_integrand(f2);
        const std::vector<CompiledExpansion> c2(integrand2.begin(), integrand2.end());
        const CompiledExpansion cf2(f2);

        double worst = 0.0;
        RunningStats err;
        for (std::size_t first = 0; first < cfg.n_samples; first += kChunk) {
            const SamplePool pool(cfg.seed, std::min(kChunk, cfg.n_samples - first), n, stream++);
            for (std::size_t i = 0; i < pool.size(); ++i) {
                const auto x = pool.row(i);
                worst = std::max(worst, std::abs(cf1(x) - clark_reconstruct(f1.mean(), c1, x)));
                const double diff = cf2(x) - clark_reconstruct(f2.mean(), c2, x);
                err.push(diff * diff);
            }
        }
        const std::string tag = "_N" + std::to_string(n);
        rep.checks.push_back(bound_check("clark_first_order_exact" + tag, worst, kExactTol));
        rep.checks.push_back(within_se("clark_second_order_error" + tag, err.mean(), 2.0 / static_cast<double>(n),
                                       err.std_error(), 3.0));
    }

    const auto d = cfg.params["stroock_dim"].get<std::size_t>();
    const double step = cfg.params["fd_step"].get<double>();
    const SamplePool pool(cfg.seed, cfg.n_samples, d, kPoolMain);
    std::vector<double> h(d);
    for (std::size_t j = 0; j < d; ++j) h[j] = 0.4 - 0.5 * static_cast<double>(j) + 0.1 * static_cast<double>(j * j);
    SymmetricKernel k2(2, d);
    k2.set({0, 0}, 1.0);
    k2.set({0, 1}, 0.5);
    k2.set({1, 1}, -0.3);
    const std::vector<std::pair<std::string, ChaosExpansion>> suite{
        {"stroock_first_order", ChaosExpansion::constant(d, 0.7) + ChaosExpansion::first_order(h)},
        {"stroock_second_order", ChaosExpansion::multiple_integral(k2)},
    };
    for (const auto& [name, f] : suite) {
        const CompiledExpansion cf(f);
        const auto res = stroock_kernels([&](std::span<const double> x) { return cf(x); }, 2, pool, step);
        double z_max = 0.0, se_max = 0.0;
        for (std::size_t n = 0; n <= 2; ++n) {
            for (const auto& idx : sorted_multi_indices(n, d)) {
                const auto* kt = f.term(n);
                const double exact = kt ? (*kt)(idx) : 0.0;
                const auto* est = res.kernels.term(n);
                const auto* se = res.std_errors.term(n);
                const double e = est ? (*est)(idx) : 0.0;
                const double s = se ? (*se)(idx) : 0.0;
                const double diff = std::abs(e - exact);
                se_max = std::max(se_max, s);
                if (diff > 1e-12) z_max = std::max(z_max, s > 0.0 ? diff / s : std::numeric_limits<double>::infinity());
            }
        }
        rep.checks.push_back(bound_check(name, z_max, 3.0,
                                         {{"statistic", "max |estimate - exact| / se over coefficients"},
                                          {"max_se", se_max}, {"fd_step", step}}));
    }
}

// ----------------------------------------------------------------------------
// girsanov

void run_girsanov(const ExperimentConfig& cfg, RunReport& rep, const std::filesystem::path* out) {
    const std::size_t n = cfg.n_slots;
    const double scale = cfg.params["drift_scale"].get<double>();
    const double rn = std::sqrt(static_cast<double>(n));
    const SamplePool pool(cfg.seed, cfg.n_samples, n, kPoolMain);

    std::vector<double> det(n);
    for (std::size_t j = 0; j < n; ++j) det[j] = scale * (1.0 + static_cast<double>(j) / static_cast<double>(n));
    const std::vector<std::pair<std::string, AdaptedStepProcess>> drifts{
        {"deterministic", AdaptedStepProcess::deterministic(det)},
        {"adapted", AdaptedStepProcess::from_function(n, [scale, rn](std::size_t, std::span<const double> past) {
             double w = 0.0;
             for (double x : past) w += x / rn;
             return scale * std::cos(w);
         })},
    };
    auto path_sum = [rn](std::span<const double> x, std::size_t upto) {
        double w = 0.0;
        for (std::size_t j = 0; j < upto; ++j) w += x[j] / rn;
        return w;
    };
    const std::vector<std::pair<std::string, Functional>> suite{
        {"terminal", [&](std::span<const double> x) { return path_sum(x, n); }},
        {"terminal_square", [&](std::span<const double> x) { return std::pow(path_sum(x, n), 2); }},
        {"exp_midpoint", [&](std::span<const double> x) { return std::exp(path_sum(x, n / 2)); }},
        {"running_max",
         [rn](std::span<const double> x) {
             double w = 0.0, m = 0.0;
             for (double v : x) m = std::max(m, w += v / rn);
             return m;
         }},
        {"terminal_positive", [&](std::span<const double> x) { return path_sum(x, n) > 0.0 ? 1.0 : 0.0; }},
    };

    std::ofstream lines;
    if (out) {
        lines.open(*out / "density_reports.jsonl");
        rep.artifacts.push_back("density_reports.jsonl");
    }
    for (const auto& [dname, u] : drifts) {
        RunningStats weight;
        for (std::size_t i = 0; i < pool.size(); ++i) weight.push(girsanov_weight(u, pool.row(i)));
        rep.checks.push_back(within_se("girsanov_" + dname + "_mean_weight", weight.mean(), 1.0,
                                       weight.std_error(), kDensityRejectSe));
        for (const auto& [fname, f] : suite) {
            const auto r = verify_change_of_measure(f, u, pool);
            const std::string name = "girsanov_" + dname + "_" + fname;
            auto c = from_density(name, r);
            if (lines.is_open()) {
                json j = r;
                j["name"] = name;
                lines << j.dump() << '\n';
            }
            rep.checks.push_back(std::move(c));
        }
    }
}

// ----------------------------------------------------------------------------
// ramer

ShiftMap tanh_shift(double eps, std::vector<std::size_t> sigma) {
    ShiftMap u;
    u.dim = sigma.size();
    u.field = [eps, sigma](std::span<const double> x) {
        Vector v(static_cast<Eigen::Index>(sigma.size()));
        for (std::size_t j = 0; j < sigma.size(); ++j) v(j) = eps * std::tanh(x[sigma[j]]);
        return v;
    };
    u.jacobian = [eps, sigma](std::span<const double> x) {
        Matrix m = Matrix::Zero(sigma.size(), sigma.size());
        for (std::size_t j = 0; j < sigma.size(); ++j) {
            const double t = std::tanh(x[sigma[j]]);
            m(j, sigma[j]) = eps * (1.0 - t * t);
        }
        return m;
    };
    return u;
}

void run_ramer(const ExperimentConfig& cfg, RunReport& rep) {
    {
        const ShiftMap lin = ShiftMap::linear(Matrix::Constant(1, 1, 0.5));
        const double x = 1.0;
        const double got = ramer_density(lin, {&x, 1});
        const double exact = 1.5 * std::exp(-0.625);
        rep.checks.push_back(bound_check("ramer_closed_form_1d", std::abs(got - exact), 1e-12,
                                         {{"value", got}, {"closed_form", exact}}));
    }
    const double eps = cfg.params["epsilon"].get<double>();
    for (std::size_t d = 1; d <= cfg.dim; ++d) {
        const SamplePool pool(cfg.seed, cfg.n_samples, d, kPoolMain + static_cast<std::uint32_t>(d));
        std::vector<std::size_t> sigma(d);
        for (std::size_t j = 0; j < d; ++j) sigma[j] = (j + 1) % d;
        const ShiftMap u = certify(tanh_shift(eps, sigma), pool);
        const std::string tag = "_d" + std::to_string(d);
        rep.checks.push_back(bound_check("ramer_certificate" + tag, *u.operator_norm_bound,
                                         1.0 - 1e-12, {{"hs_bound", *u.hs_norm_bound}}));
        RunningStats mass;
        for (std::size_t i = 0; i < pool.size(); ++i) mass.push(std::abs(ramer_density(u, pool.row(i))));
        rep.checks.push_back(within_se("ramer_unit_mass" + tag, mass.mean(), 1.0, mass.std_error(), kDensityRejectSe));
        const Functional f = [d](std::span<const double> x) {
            double s = std::cos(x[0]);
            if (d > 1) s += x[0] * x[1];
            if (d > 2) s += std::tanh(x[2]);
            return s;
        };
        rep.checks.push_back(from_density("ramer_change_of_measure" + tag, verify_change_of_measure(f, u, pool)));
    }

    const auto count = cfg.params["matrices"].get<std::size_t>();
    const auto md = cfg.params["matrix_dim"].get<std::size_t>();
    Draws draws(cfg.seed, kDrawMatrices);
    double worst = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
        Matrix a = draws.matrix(md, md), b = draws.matrix(md, md);
        // operator norm 0.45 keeps every factor invertible
        a *= 0.45 / operator_norm(a);
        b *= 0.45 / operator_norm(b);
        worst = std::max(worst, det2_product_residual(a, b));
    }
    rep.checks.push_back(bound_check("det2_product_identity", worst, 1e-10, {{"matrices", count}, {"dim", md}}));

    std::size_t violations = 0;
    double max_log_ratio = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < count; ++k) {
        const double s = 0.1 + 1.5 * draws.uniform();
        const Matrix a = draws.matrix(md, md, s / std::sqrt(static_cast<double>(md)));
        const double lhs = std::abs(det2(a));
        const double bound = std::exp(0.5 * a.squaredNorm());
        if (lhs > bound * (1.0 + 1e-12)) ++violations;
        if (lhs > 0.0) max_log_ratio = std::max(max_log_ratio, std::log(lhs) - 0.5 * a.squaredNorm());
    }
    rep.checks.push_back(bound_check("det2_hilbert_schmidt_bound", static_cast<double>(violations), 0.0,
                                     {{"matrices", count}, {"max_log_ratio", max_log_ratio}}));
}

// ----------------------------------------------------------------------------
// inequalities

void run_inequalities(const ExperimentConfig& cfg, RunReport& rep, const std::filesystem::path* out) {
    const std::size_t d = cfg.dim;
    const SamplePool pool(cfg.seed, cfg.n_samples, d, kPoolMain);
    std::vector<InequalityReport> all;
    auto keep = [&](std::string name, InequalityReport r,
                    std::vector<Verdict> accepted = {Verdict::pass, Verdict::saturated}) {
        rep.checks.push_back(from_report(name, r, std::move(accepted)));
        r.name = std::move(name);
        all.push_back(std::move(r));
        return all.back();
    };

    std::vector<double> h(d, 0.0);
    h[0] = 0.6;
    h[1] = 0.8;
    {
        keep("poincare_first_chaos", check_poincare(ChaosExpansion::first_order(h), pool), {Verdict::saturated});
        std::vector<double> g(h);
        for (double& v : g) v *= 1.3;
        const auto r = keep("poincare_second_chaos",
                            check_poincare(ChaosExpansion::multiple_integral(SymmetricKernel::tensor_power(g, 2)), pool));
        const double h4 = std::pow(1.3, 4);
        rep.checks.push_back(bound_check("poincare_second_chaos_slack", std::abs(r.slack() - 2.0 * h4),
                                         1e-12 * std::max(1.0, 2.0 * h4), {{"slack", r.slack()}, {"expected", 2.0 * h4}}));
    }
    for (double s : {0.5, 1.0}) {
        std::vector<double> hs(d, 0.0);
        hs[0] = s;
        const WickExponential e{CameronMartinVector(hs)};
        const Functional f = [&](std::span<const double> x) { return std::sqrt(e(x)); };
        const GradientFn grad = [&](std::span<const double> x) {
            const double v = std::sqrt(e(x));
            std::vector<double> g(hs);
            for (double& gi : g) gi *= 0.5 * v;
            return g;
        };
        const std::string tag = "_h" + fmt_number(s);
        const auto r = keep("log_sobolev" + tag, check_log_sobolev(f, grad, pool), {Verdict::saturated});
        rep.checks.push_back(within_se("log_sobolev_entropy" + tag, r.lhs, 0.5 * s * s, r.lhs_se, 3.0));
        rep.checks.push_back(within_se("log_sobolev_energy" + tag, r.rhs, 0.5 * s * s, r.rhs_se, 3.0));
    }
    {
        const double t = cfg.params["time"].get<double>();
        const double p = cfg.params["p"].get<double>();
        const double q = std::exp(2.0 * t) * (p - 1.0) + 1.0;
        const CameronMartinVector hv(h);
        const auto r = keep("hypercontractivity_critical", check_hypercontractivity_wick(hv, p, q, t, pool),
                            {Verdict::saturated});
        rep.checks.push_back(within_se("hypercontractivity_lhs_monte_carlo", r.extras["lhs_mc"].get<double>(), r.lhs,
                                       r.extras["lhs_mc_se"].get<double>(), 3.0));
        rep.checks.push_back(within_se("hypercontractivity_rhs_monte_carlo", r.extras["rhs_mc"].get<double>(), r.rhs,
                                       r.extras["rhs_mc_se"].get<double>(), 3.0));
        keep("hypercontractivity_beyond_critical", check_hypercontractivity_wick(hv, p, q + 0.5, t, pool),
             {Verdict::fail});
    }
    {
        const auto f = ChaosExpansion::first_order(h);
        for (double c : {1.0, 2.0, 3.0}) {
            const std::string tag = "_c" + fmt_number(c);
            const auto r = keep("tail_bound" + tag, check_tail_bound(f, c, pool));
            rep.checks.push_back(within_se("tail_exact" + tag, r.lhs, 2.0 * normal_upper_tail(c), r.lhs_se, 3.0));
        }
    }
    {
        const auto f = ChaosExpansion::first_order(h);
        keep("coupling_exponential", check_coupling(f, pool, CouplingForm::exponential));
        keep("coupling_absolute", check_coupling(f, pool, CouplingForm::absolute));
    }
    {
        std::vector<ChaosExpansion> family{
            ChaosExpansion::first_order(h),
            ChaosExpansion::multiple_integral(SymmetricKernel::tensor_power(h, 2)),
            ChaosExpansion::first_order(h) + 0.5 * ChaosExpansion::multiple_integral(SymmetricKernel::tensor_power(h, 3)),
        };
        for (double p : {1.5, 2.0, 3.0}) {
            const auto m = meyer_ratio_spotcheck(family, p, pool);
            CheckResult c;
            c.name = "meyer_ratio_p" + fmt_number(p);
            c.lhs = m.min_ratio;
            c.rhs = m.max_ratio;
            c.verdict = m.within_band ? Verdict::pass : Verdict::fail;
            c.extras = m;
            rep.checks.push_back(std::move(c));
        }
    }
    if (out) {
        std::ofstream os(*out / "inequality_reports.jsonl");
        write_json_lines(os, all);
        rep.artifacts.push_back("inequality_reports.jsonl");
    }
}

// ----------------------------------------------------------------------------
// transport

double brute_force_assignment(const Matrix& c) {
    std::vector<std::size_t> perm(static_cast<std::size_t>(c.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < perm.size(); ++i) s += c(i, perm[i]);
        best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(c.rows());
}

void run_transport(const ExperimentConfig& cfg, RunReport& rep, const std::filesystem::path* out) {
    const std::size_t d = cfg.dim;
    const auto n_points = cfg.params["n_points"].get<std::size_t>();
    const auto aux = cfg.params["aux_points"].get<std::size_t>();
    WassersteinOptions opts;
    opts.repetitions = cfg.params["repetitions"].get<std::size_t>();
    const bool wick = cfg.params["density"].get<std::string>() == "wick";

    std::vector<InequalityReport> reports;
    const WickExponential e1{CameronMartinVector::unit(d, 0)};
    const Density l = wick ? Density([&](std::span<const double> x) { return e1(x); })
                           : Density([](std::span<const double>) { return 1.0; });
    {
        const SamplePool pool(cfg.seed, cfg.n_samples, d, kPoolMain);
        auto r = talagrand_check(l, pool, n_points, wick ? 1.0 : 0.0, opts);
        rep.checks.push_back(from_report("talagrand", r));
        if (wick) {
            CheckResult c;
            c.name = "talagrand_estimate_window";
            c.lhs = r.lhs;
            c.rhs = 1.0;
            c.se = r.lhs_se;
            c.verdict = r.lhs >= 0.85 && r.lhs <= 1.15 ? Verdict::pass : Verdict::fail;
            c.extras = {{"window", {0.85, 1.15}}, {"n_points", n_points}};
            rep.checks.push_back(std::move(c));
        } else {
            rep.checks.push_back(bound_check("wasserstein_self_coupling", r.lhs, 0.2, {{"n_points", n_points}}));
            rep.checks.back().se = r.lhs_se;
        }
        r.name = "talagrand";
        reports.push_back(r);
    }

    Draws draws(cfg.seed, kDrawClouds);
    {
        double worst = 0.0, cert = 0.0;
        std::size_t instances = 0;
        for (std::size_t n = 1; n <= 7; ++n) {
            for (std::size_t dd = 1; dd <= 3; ++dd) {
                for (int trial = 0; trial < 5; ++trial, ++instances) {
                    const PointCloud a(draws.matrix(n, dd)), b(draws.matrix(n, dd));
                    const auto plan = solve_discrete_ot(a, b);
                    worst = std::max(worst, std::abs(plan.cost - brute_force_assignment(squared_distances(a, b))));
                    cert = std::max(cert, plan.optimality_residual);
                }
            }
        }
        rep.checks.push_back(bound_check("ot_brute_force", worst, 1e-12, {{"instances", instances}}));
        rep.checks.push_back(bound_check("ot_certificate_small", cert, 1e-8));
    }
    {
        const PointCloud a(draws.matrix(64, d)), b(draws.matrix(64, d));
        const auto plan = solve_discrete_ot(a, b);
        rep.checks.push_back(bound_check("ot_certificate", plan.optimality_residual, 1e-8,
                                         {{"marginal_error", plan.marginal_error}, {"solver", plan.solver}}));
        const auto cycles = cfg.params["cycles"].get<std::size_t>();
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 2; k <= 6; ++k)
            worst = std::max(worst, cyclic_monotonicity_residual(plan, k, cycles, cfg.seed + k));
        rep.checks.push_back(bound_check("cyclic_monotonicity", worst, 1e-8, {{"cycles_per_length", cycles}}));

        double exhaustive = -std::numeric_limits<double>::infinity();
        for (int trial = 0; trial < 10; ++trial) {
            const auto p8 = solve_discrete_ot(PointCloud(draws.matrix(8, d)), PointCloud(draws.matrix(8, d)));
            exhaustive = std::max(exhaustive, cyclic_monotonicity_residual_exhaustive(p8, 4));
        }
        rep.checks.push_back(bound_check("cyclic_monotonicity_exhaustive", exhaustive, 1e-8, {{"max_cycle", 4}}));

        if (out) {
            std::ofstream src(*out / "source.csv"), tgt(*out / "target.csv"), pl(*out / "plan.csv");
            a.write_csv(src);
            b.write_csv(tgt);
            plan.write_csv(pl);
            rep.artifacts.insert(rep.artifacts.end(), {"source.csv", "target.csv", "plan.csv"});
        }
    }
    {
        Matrix x(4, 1), y(4, 1);
        x << 0.0, 1.0, 2.0, 3.0;
        y << 0.5, 1.5, 2.5, 3.5;
        TransportPlan plan = solve_discrete_ot(PointCloud(x), PointCloud(y));
        for (auto& e : plan.entries) {
            if (e.i == 0) e.j = 1;
            else if (e.i == 1) e.j = 0;
        }
        const double r = cyclic_monotonicity_residual_exhaustive(plan, 2);
        CheckResult c;
        c.name = "cyclic_monotonicity_swapped_detected";
        c.lhs = r;
        c.rhs = 0.0;
        c.verdict = r > 0.0 ? Verdict::pass : Verdict::fail;
        c.extras = {{"expected", 1.0}};
        rep.checks.push_back(std::move(c));
    }
    {
        WassersteinOptions small = opts;
        small.repetitions = std::min<std::size_t>(opts.repetitions, 10);
        const SamplePool pool(cfg.seed, 2 * 3 * small.repetitions * aux * (1 + 2 * small.candidate_factor), d, kPoolAux);
        std::vector<double> h2(d, 0.0);
        h2[d > 1 ? 1 : 0] = d > 1 ? 1.0 : -1.0;
        const WickExponential e2{CameronMartinVector(h2)};
        auto r = triangle_check(l, [&](std::span<const double> x) { return e2(x); }, pool, aux, small);
        rep.checks.push_back(from_report("triangle", r));
        r.name = "triangle";
        reports.push_back(r);

        std::vector<std::size_t> dims(d);
        std::iota(dims.begin(), dims.end(), 1);
        const SamplePool mpool(cfg.seed, 2 * small.repetitions * aux * (1 + small.candidate_factor), d, kPoolAux2);
        const auto m = dim_monotonicity_check(l, dims, mpool, aux, small);
        CheckResult c;
        c.name = "projection_monotonicity";
        c.lhs = m.estimates.front().estimate;
        c.rhs = m.estimates.back().estimate;
        c.se = m.estimates.back().std_error;
        c.verdict = m.nondecreasing ? Verdict::pass : Verdict::fail;
        c.extras = {{"dims", m.dims}, {"estimates", m.estimates}};
        rep.checks.push_back(std::move(c));
    }
    {
        const SamplePool pool(cfg.seed, std::min<std::size_t>(cfg.n_samples, 100000), d, kPoolAux + 10);
        for (double a : {0.0, 1.0, 2.0}) {
            auto r = gauge_check(a, pool);
            const std::string name = "gauge_a" + fmt_number(a);
            rep.checks.push_back(from_report(name, r));
            r.name = name;
            reports.push_back(r);
        }
    }
    if (out) {
        std::ofstream os(*out / "inequality_reports.jsonl");
        write_json_lines(os, reports);
        rep.artifacts.push_back("inequality_reports.jsonl");
    }
}

// ----------------------------------------------------------------------------
// monge_ampere

void run_monge_ampere(const ExperimentConfig& cfg, RunReport& rep) {
    {
        const Matrix cov = Matrix::Constant(1, 1, 4.0);
        const auto t = gaussian_brenier(cov);
        const double x = 1.0;
        const double lambda = monge_ampere_lambda(t, {&x, 1});
        const Vector y = t.apply({&x, 1});
        const double ratio = gaussian_density_ratio(cov, {y.data(), 1});
        rep.checks.push_back(bound_check("monge_ampere_1d_spot", std::abs(lambda * ratio - 1.0), 1e-15,
                                         {{"lambda", lambda}, {"density_ratio", ratio}, {"product", lambda * ratio}}));
    }
    const auto points = cfg.params["test_points"].get<std::size_t>();
    const auto targets = cfg.params["targets"].get<std::size_t>();
    Draws draws(cfg.seed, kDrawMatrices);
    Matrix last_cov;
    for (std::size_t d = 1; d <= cfg.dim; ++d) {
        double worst = 0.0, min_eig = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < targets; ++k) {
            const Matrix g = draws.matrix(d, d);
            const Matrix cov = g * g.transpose() + 0.3 * Matrix::Identity(d, d);
            worst = std::max(worst, monge_ampere_residual(cov, draws.matrix(points, d)));
            min_eig = std::min(min_eig, gaussian_brenier(cov).min_hessian_eigenvalue());
            last_cov = cov;
        }
        const std::string tag = "_d" + std::to_string(d);
        rep.checks.push_back(bound_check("monge_ampere_residual" + tag, worst, 1e-8, {{"targets", targets}, {"points", points}}));
        CheckResult c;
        c.name = "brenier_one_convex" + tag;
        c.lhs = min_eig;
        c.rhs = -1.0 + 1e-12;
        c.verdict = min_eig >= c.rhs ? Verdict::pass : Verdict::fail;
        rep.checks.push_back(std::move(c));
    }
    const auto t = gaussian_brenier(last_cov);
    const SamplePool pool(cfg.seed, cfg.n_samples, cfg.dim, kPoolMain);
    Matrix emp = Matrix::Zero(cfg.dim, cfg.dim);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const Vector y = t.apply(pool.row(i));
        emp += y * y.transpose();
    }
    emp /= static_cast<double>(pool.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < cfg.dim; ++i)
        for (std::size_t k = 0; k < cfg.dim; ++k)
            worst = std::max(worst, std::abs(emp(i, k) - last_cov(i, k)) / std::sqrt(last_cov(i, i) * last_cov(k, k)));
    rep.checks.push_back(bound_check("brenier_pushforward_covariance", worst, 5.0 / std::sqrt(static_cast<double>(pool.size())),
                                     {{"statistic", "max |cov_emp - cov| / sqrt(cov_ii cov_kk)"}}));
}

}  // namespace

std::string to_string(Experiment e) { return kExperimentNames.at(static_cast<std::size_t>(e)); }

Experiment experiment_from_string(const std::string& name) {
    const auto it = std::find(kExperimentNames.begin(), kExperimentNames.end(), name);
    if (it == kExperimentNames.end()) fail_config("unknown experiment '" + name + "'");
    return static_cast<Experiment>(it - kExperimentNames.begin());
}

const std::vector<ExperimentInfo>& list_experiments() {
    static const std::vector<ExperimentInfo> catalog = build_catalog();
    return catalog;
}

const ExperimentInfo& experiment_info(Experiment e) {
    return list_experiments().at(static_cast<std::size_t>(e));
}

ExperimentConfig ExperimentConfig::defaults(Experiment e) {
    return from_json({{"experiment", to_string(e)}});
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    if (!j.is_object()) fail_config("top level must be a JSON object");
    if (!j.contains("experiment") || !j["experiment"].is_string()) {
        fail_config("'experiment' is required and must be a string");
    }
    ExperimentConfig c;
    c.experiment = experiment_from_string(j["experiment"].get<std::string>());
    const auto& info = experiment_info(c.experiment);

    for (const auto& [key, value] : j.items()) {
        if (key == "experiment" || key == "params") continue;
        if (std::find(kTopLevelFields.begin(), kTopLevelFields.end(), key) == kTopLevelFields.end()) {
            fail_config("unknown key '" + key + "'");
        }
    }
    auto field = [&](const std::string& key) {
        return positive_size(j.contains(key) ? j[key] : info.defaults[key], key);
    };
    c.seed = field("seed");
    c.n_samples = field("n_samples");
    c.n_slots = field("n_slots");
    c.dim = field("dim");
    c.order_cap = field("order_cap");

    const json given = j.contains("params") ? j["params"] : json::object();
    if (!given.is_object()) fail_config("'params' must be an object");
    for (const auto& [key, value] : given.items()) {
        const bool known = std::any_of(info.params.begin(), info.params.end(),
                                       [&](const ParamSpec& p) { return p.name == key; });
        if (!known) fail_config("unknown parameter 'params." + key + "' for " + info.name);
    }
    for (const auto& spec : info.params) {
        c.params[spec.name] = validate_param(spec, given.contains(spec.name) ? given[spec.name] : spec.default_value);
    }
    check_ranges(c);
    return c;
}

void to_json(json& j, const ExperimentConfig& c) {
    j = json{{"experiment", to_string(c.experiment)},
             {"seed", c.seed},
             {"n_samples", c.n_samples},
             {"n_slots", c.n_slots},
             {"dim", c.dim},
             {"order_cap", c.order_cap},
             {"params", c.params}};
}

bool CheckResult::ok() const {
    return std::find(accepted.begin(), accepted.end(), verdict) != accepted.end();
}

void to_json(json& j, const CheckResult& c) {
    json accepted = json::array();
    for (auto v : c.accepted) accepted.push_back(to_string(v));
    j = json{{"name", c.name}, {"lhs", c.lhs},          {"rhs", c.rhs},   {"se", c.se},
             {"verdict", to_string(c.verdict)}, {"accepted", accepted}, {"ok", c.ok()}, {"extras", c.extras}};
}

bool RunReport::ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.ok(); });
}

const CheckResult& RunReport::check(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return c;
    throw std::out_of_range("RunReport: no check named '" + name + "'");
}

json reproducible_json(const RunReport& r) {
    return json{{"schema_version", kReportSchemaVersion},
                {"version", version()},
                {"config", r.config},
                {"checks", r.checks},
                {"artifacts", r.artifacts},
                {"ok", r.ok()}};
}

void to_json(json& j, const RunReport& r) {
    j = reproducible_json(r);
    j["wall_time_s"] = r.wall_time_s;
}

RunReport run(const ExperimentConfig& config, const std::optional<std::filesystem::path>& artifact_dir) {
    const auto start = std::chrono::steady_clock::now();
    if (artifact_dir) std::filesystem::create_directories(*artifact_dir);
    const std::filesystem::path* out = artifact_dir ? &*artifact_dir : nullptr;
    RunReport rep;
    rep.config = config;
    switch (config.experiment) {
        case Experiment::chaos_identities: run_chaos_identities(config, rep, out); break;
        case Experiment::clark: run_clark(config, rep); break;
        case Experiment::girsanov: run_girsanov(config, rep, out); break;
        case Experiment::ramer: run_ramer(config, rep); break;
        case Experiment::inequalities: run_inequalities(config, rep, out); break;
        case Experiment::transport: run_transport(config, rep, out); break;
        case Experiment::monge_ampere: run_monge_ampere(config, rep); break;
    }
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

}  // namespace wienerlab
