#include "wienerlab/inequality.hpp"
#include "wienerlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace wienerlab {

namespace {

void require_pool(const SamplePool& pool, std::size_t dim, const char* what) {
    if (pool.size() == 0) throw std::invalid_argument(std::string(what) + ": empty pool");
    if (pool.dim() != dim) {
        throw std::invalid_argument(std::string(what) + ": pool dimension " +
                                    std::to_string(pool.dim()) + " vs " + std::to_string(dim));
    }
}

class CompiledGradient {
public:
    explicit CompiledGradient(const ChaosExpansion& f) {
        const auto g = derivative(f);
        for (const auto& c : g.components) comps_.emplace_back(c);
    }

    double norm_sq(std::span<const double> x) const {
        double s = 0.0;
        for (const auto& c : comps_) {
            const double v = c(x);
            s += v * v;
        }
        return s;
    }

private:
    std::vector<CompiledExpansion> comps_;
};

/// (E|X|^r)^{1/r} from samples of log|X|, with its delta-method error.
Estimate lr_norm(const LogMeanExp& acc, double r) {
    const double norm = std::exp(acc.log_mean() / r);
    return {norm, norm * acc.relative_std_error() / r, acc.count()};
}

double exact_poincare_rhs(const ChaosExpansion& f) {
    double s = 0.0;
    for (const auto& [n, k] : f.terms()) {
        s += static_cast<double>(n) * factorial(n) * k.norm_sq();
    }
    return s;
}

}  // namespace

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::saturated: return "saturated";
    }
    return "fail";
}

Verdict verdict_from_string(const std::string& s) {
    if (s == "pass") return Verdict::pass;
    if (s == "fail") return Verdict::fail;
    if (s == "saturated") return Verdict::saturated;
    throw std::invalid_argument("unknown verdict '" + s + "'");
}

Verdict decide(double lhs, double rhs, double lhs_se, double rhs_se) {
    if (!std::isfinite(lhs) || !std::isfinite(rhs)) return Verdict::fail;
    const double se = std::sqrt(lhs_se * lhs_se + rhs_se * rhs_se);
    const double tol = kVerdictSe * se + 1e-12 * std::max({1.0, std::abs(lhs), std::abs(rhs)});
    const double slack = rhs - lhs;
    if (std::abs(slack) <= tol) return Verdict::saturated;
    return slack > 0.0 ? Verdict::pass : Verdict::fail;
}

double InequalityReport::combined_se() const {
    return std::sqrt(lhs_se * lhs_se + rhs_se * rhs_se);
}

void InequalityReport::settle() { verdict = decide(lhs, rhs, lhs_se, rhs_se); }

void to_json(nlohmann::json& j, const InequalityReport& r) {
    j = nlohmann::json{{"name", r.name},         {"lhs", r.lhs},
                       {"rhs", r.rhs},           {"slack", r.slack()},
                       {"lhs_se", r.lhs_se},     {"rhs_se", r.rhs_se},
                       {"verdict", to_string(r.verdict)},
                       {"n", r.n_samples},       {"extras", r.extras},
                       {"flags", r.flags}};
}

void write_json_lines(std::ostream& os, std::span<const InequalityReport> reports) {
    for (const auto& r : reports) os << nlohmann::json(r).dump() << '\n';
}

GradientFn finite_difference_gradient(Functional f, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("finite_difference_gradient: step must be > 0");
    return [f = std::move(f), step](std::span<const double> x) {
        std::vector<double> work(x.begin(), x.end()), g(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) {
            work[k] = x[k] + step;
            const double up = f(work);
            work[k] = x[k] - step;
            const double down = f(work);
            work[k] = x[k];
            g[k] = (up - down) / (2.0 * step);
        }
        return g;
    };
}

// ---------------------------------------------------------------------------

InequalityReport check_poincare(const ChaosExpansion& f, const SamplePool& pool) {
    require_pool(pool, f.dim(), "check_poincare");
    InequalityReport r;
    r.name = "poincare";
    r.lhs = f.variance();
    r.rhs = exact_poincare_rhs(f);
    r.n_samples = pool.size();

    const CompiledExpansion fc(f);
    const CompiledGradient grad(f);
    RunningStats values, energy;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        values.push(fc(pool.row(i)));
        energy.push(grad.norm_sq(pool.row(i)));
    }
    r.extras["lhs_mc"] = values.variance();
    r.extras["rhs_mc"] = energy.mean();
    r.extras["rhs_mc_se"] = energy.std_error();
    r.settle();
    return r;
}

InequalityReport check_log_sobolev(const Functional& f, const GradientFn& grad,
                                   const SamplePool& pool) {
    if (pool.size() == 0) throw std::invalid_argument("check_log_sobolev: empty pool");
    const std::size_t m = pool.size();
    std::vector<double> g(m);
    RunningStats g_stats, energy;
    for (std::size_t i = 0; i < m; ++i) {
        const auto x = pool.row(i);
        const double v = f(x);
        if (!(v > 0.0)) {
            throw std::domain_error("check_log_sobolev: f(x) = " + std::to_string(v) +
                                    " is not positive at row " + std::to_string(i));
        }
        g[i] = v * v;
        g_stats.push(g[i]);
        double e = 0.0;
        for (double d : grad(x)) e += d * d;
        energy.push(e);
    }
    const double mean_g = g_stats.mean();
    const double log_mean_g = std::log(mean_g);
    // Ent(g) = E[g log g] - E g log E g; influence g log g - (log E g + 1) g
    RunningStats ent, influence;
    for (double v : g) {
        const double glg = v * std::log(v);
        ent.push(glg);
        influence.push(glg - (log_mean_g + 1.0) * v);
    }
    InequalityReport r;
    r.name = "log_sobolev";
    r.lhs = ent.mean() - mean_g * log_mean_g;
    r.lhs_se = influence.std_error();
    r.rhs = 2.0 * energy.mean();
    r.rhs_se = 2.0 * energy.std_error();
    r.n_samples = m;
    r.extras["mean_f2"] = mean_g;
    r.settle();
    return r;
}

InequalityReport check_log_sobolev(const ChaosExpansion& f, const SamplePool& pool) {
    require_pool(pool, f.dim(), "check_log_sobolev");
    auto fc = std::make_shared<CompiledExpansion>(f);
    auto grad = derivative(f);
    auto comps = std::make_shared<std::vector<CompiledExpansion>>();
    for (const auto& c : grad.components) comps->emplace_back(c);
    return check_log_sobolev(
        [fc](std::span<const double> x) { return (*fc)(x); },
        [comps](std::span<const double> x) {
            std::vector<double> g;
            g.reserve(comps->size());
            for (const auto& c : *comps) g.push_back(c(x));
            return g;
        },
        pool);
}

// ---------------------------------------------------------------------------

namespace {

void validate_exponents(double p, double q, double t) {
    if (!(p > 1.0) || !(q > 1.0)) throw std::invalid_argument("hypercontractivity: p, q must be > 1");
    if (!(t >= 0.0)) throw std::invalid_argument("hypercontractivity: t must be >= 0");
}

void record_regime(InequalityReport& r, double p, double q, double t) {
    const double critical_q = std::exp(2.0 * t) * (p - 1.0) + 1.0;
    r.extras["p"] = p;
    r.extras["q"] = q;
    r.extras["t"] = t;
    r.extras["critical_q"] = critical_q;
    r.extras["contractive_regime"] = q <= critical_q * (1.0 + 1e-12);
}

}  // namespace

InequalityReport check_hypercontractivity(const ChaosExpansion& f, double p, double q, double t,
                                          const SamplePool& pool) {
    validate_exponents(p, q, t);
    require_pool(pool, f.dim(), "check_hypercontractivity");
    const CompiledExpansion fc(f);
    const CompiledExpansion ptf(ou_semigroup(f, t));
    LogMeanExp lhs_acc, rhs_acc;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto x = pool.row(i);
        lhs_acc.push(q * std::log(std::abs(ptf(x))));
        rhs_acc.push(p * std::log(std::abs(fc(x))));
    }
    const Estimate lhs = lr_norm(lhs_acc, q), rhs = lr_norm(rhs_acc, p);
    InequalityReport r;
    r.name = "hypercontractivity";
    r.lhs = lhs.mean;
    r.lhs_se = lhs.std_error;
    r.rhs = rhs.mean;
    r.rhs_se = rhs.std_error;
    r.n_samples = pool.size();
    if (lhs_acc.divergent()) r.flags.push_back("divergent_lhs");
    if (rhs_acc.divergent()) r.flags.push_back("divergent_rhs");
    record_regime(r, p, q, t);
    r.settle();
    return r;
}

InequalityReport check_hypercontractivity_wick(const CameronMartinVector& h, double p, double q,
                                               double t, const SamplePool& pool) {
    validate_exponents(p, q, t);
    require_pool(pool, h.dim(), "check_hypercontractivity_wick");
    const double s = h.norm_sq();
    const double r_t = std::exp(-t);
    InequalityReport r;
    r.name = "hypercontractivity_wick";
    r.lhs = std::exp(0.5 * (q - 1.0) * r_t * r_t * s);
    r.rhs = std::exp(0.5 * (p - 1.0) * s);
    r.n_samples = pool.size();

    // P_t E(I(h)) = E(I(e^{-t} h)); both logs are affine in x
    LogMeanExp lhs_acc, rhs_acc;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto x = pool.row(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) dot += h.coords[j] * x[j];
        lhs_acc.push(q * (r_t * dot - 0.5 * r_t * r_t * s));
        rhs_acc.push(p * (dot - 0.5 * s));
    }
    const Estimate lhs_mc = lr_norm(lhs_acc, q), rhs_mc = lr_norm(rhs_acc, p);
    r.extras["lhs_mc"] = lhs_mc.mean;
    r.extras["lhs_mc_se"] = lhs_mc.std_error;
    r.extras["rhs_mc"] = rhs_mc.mean;
    r.extras["rhs_mc_se"] = rhs_mc.std_error;
    record_regime(r, p, q, t);
    r.settle();
    return r;
}

// ---------------------------------------------------------------------------

namespace {

double tail_bound(double c, double mean, double sigma) {
    const double gap = std::max(0.0, c - std::abs(mean));
    return 2.0 * std::exp(-gap * gap / (2.0 * sigma * sigma));
}

void fill_tail_lhs(InequalityReport& r, const std::vector<double>& values, double c,
                   double sigma) {
    const double m = static_cast<double>(values.size());
    std::size_t hits = 0;
    LogMeanExp fernique;
    const double lambda = 1.0 / (4.0 * sigma * sigma);
    for (double v : values) {
        if (std::abs(v) > c) ++hits;
        fernique.push(lambda * v * v);
    }
    const double prob = static_cast<double>(hits) / m;
    r.lhs = prob;
    r.lhs_se = std::sqrt(prob * (1.0 - prob) / m);
    r.n_samples = values.size();
    r.extras["c"] = c;
    r.extras["sigma"] = sigma;
    r.extras["fernique_lambda"] = lambda;
    r.extras["fernique_mean"] = fernique.estimate().mean;
    r.extras["fernique_se"] = fernique.estimate().std_error;
    r.extras["fernique_finite"] = !fernique.divergent() && std::isfinite(fernique.log_mean());
}

}  // namespace

InequalityReport check_tail_bound(const ChaosExpansion& f, double c, const SamplePool& pool,
                                  std::optional<double> sigma) {
    require_pool(pool, f.dim(), "check_tail_bound");
    if (!(c >= 0.0)) throw std::invalid_argument("check_tail_bound: threshold must be >= 0");
    if (!sigma) {
        if (f.max_order() > 1) {
            throw std::invalid_argument(
                "check_tail_bound: missing certificate for sup |grad F|_H (order > 1)");
        }
        const auto it = f.terms().find(1);
        sigma = it == f.terms().end() ? 0.0 : it->second.norm();
    }
    if (!(*sigma >= 0.0)) throw std::invalid_argument("check_tail_bound: sigma must be >= 0");
    const double mean = f.mean();

    InequalityReport r;
    r.name = "tail_bound";
    const CompiledExpansion fc(f);
    std::vector<double> values(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) values[i] = fc(pool.row(i));

    if (*sigma == 0.0) {
        // F is a constant
        r.rhs = std::abs(mean) > c ? 1.0 : 0.0;
        r.lhs = r.rhs;
        r.n_samples = pool.size();
        r.extras["c"] = c;
        r.extras["sigma"] = 0.0;
        r.settle();
        return r;
    }
    fill_tail_lhs(r, values, c, *sigma);
    r.rhs = tail_bound(c, mean, *sigma);
    if (f.max_order() <= 1) {
        r.extras["exact_tail"] = normal_upper_tail((c - mean) / *sigma) +
                                 normal_upper_tail((c + mean) / *sigma);
        const double lambda = 1.0 / (4.0 * *sigma * *sigma);
        const double a = 1.0 - 2.0 * lambda * *sigma * *sigma;
        r.extras["fernique_exact"] =
            std::exp(lambda * mean * mean / a) / std::sqrt(a);
    }
    r.settle();
    return r;
}

InequalityReport check_tail_bound(const Functional& f, double sigma, double c,
                                  const SamplePool& pool) {
    if (pool.size() == 0) throw std::invalid_argument("check_tail_bound: empty pool");
    if (!(sigma > 0.0)) throw std::invalid_argument("check_tail_bound: sigma must be > 0");
    if (!(c >= 0.0)) throw std::invalid_argument("check_tail_bound: threshold must be >= 0");
    std::vector<double> values(pool.size());
    RunningStats mean;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        values[i] = f(pool.row(i));
        mean.push(values[i]);
    }
    InequalityReport r;
    r.name = "tail_bound";
    fill_tail_lhs(r, values, c, sigma);
    const double m = mean.mean();
    r.rhs = tail_bound(c, m, sigma);
    const double gap = std::max(0.0, c - std::abs(m));
    r.rhs_se = r.rhs * gap / (sigma * sigma) * mean.std_error();
    r.extras["mean"] = m;
    r.settle();
    return r;
}

// ---------------------------------------------------------------------------

InequalityReport check_coupling(const ChaosExpansion& f, const SamplePool& pool,
                                CouplingForm form) {
    require_pool(pool, f.dim(), "check_coupling");
    const CompiledExpansion fc(f);
    const CompiledGradient grad(f);
    const double mean = f.mean();
    InequalityReport r;
    r.n_samples = pool.size();
    if (form == CouplingForm::exponential) {
        r.name = "coupling_exponential";
        LogMeanExp lhs, rhs;
        const double k = std::numbers::pi * std::numbers::pi / 8.0;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            const auto x = pool.row(i);
            lhs.push(fc(x) - mean);
            rhs.push(k * grad.norm_sq(x));
        }
        const Estimate l = lhs.estimate(), rr = rhs.estimate();
        r.lhs = l.mean;
        r.lhs_se = l.std_error;
        r.rhs = rr.mean;
        r.rhs_se = rr.std_error;
        r.extras["log_lhs"] = lhs.log_mean();
        r.extras["log_rhs"] = rhs.log_mean();
        if (lhs.divergent() || !std::isfinite(l.mean)) r.flags.push_back("divergent_lhs");
        if (rhs.divergent() || !std::isfinite(rr.mean)) r.flags.push_back("divergent_rhs");
    } else {
        r.name = "coupling_absolute";
        RunningStats lhs, rhs;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            const auto x = pool.row(i);
            lhs.push(std::abs(fc(x) - mean));
            rhs.push(0.5 * std::numbers::pi * std::sqrt(grad.norm_sq(x)));
        }
        r.lhs = lhs.mean();
        r.lhs_se = lhs.std_error();
        r.rhs = rhs.mean();
        r.rhs_se = rhs.std_error();
    }
    r.settle();
    return r;
}

// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const MeyerSpotcheck& m) {
    j = nlohmann::json{{"p", m.p},
                       {"ratios", m.ratios},
                       {"constant_member", m.constant_member},
                       {"min_ratio", m.min_ratio},
                       {"max_ratio", m.max_ratio},
                       {"band", {m.band_lo, m.band_hi}},
                       {"within_band", m.within_band}};
}

MeyerSpotcheck meyer_ratio_spotcheck(std::span<const ChaosExpansion> family, double p,
                                     const SamplePool& pool, double band_lo, double band_hi) {
    if (family.empty()) throw std::invalid_argument("meyer_ratio_spotcheck: empty family");
    if (p != 1.5 && p != 2.0 && p != 3.0) {
        throw std::invalid_argument("meyer_ratio_spotcheck: p must be one of 1.5, 2, 3");
    }
    if (!(band_lo > 0.0) || !(band_hi > band_lo)) {
        throw std::invalid_argument("meyer_ratio_spotcheck: invalid band");
    }
    MeyerSpotcheck out;
    out.p = p;
    out.band_lo = band_lo;
    out.band_hi = band_hi;
    bool any = false;
    for (const auto& f : family) {
        const double grad_sq = exact_poincare_rhs(f);
        const bool constant = grad_sq == 0.0;
        double ratio = 0.0;
        if (!constant) {
            if (p == 2.0) {
                double denom = 0.0;
                for (const auto& [n, k] : f.terms()) {
                    denom += (1.0 + static_cast<double>(n)) * factorial(n) * k.norm_sq();
                }
                ratio = std::sqrt(grad_sq / denom);
            } else {
                require_pool(pool, f.dim(), "meyer_ratio_spotcheck");
                const CompiledGradient grad(f);
                const CompiledExpansion lifted(
                    spectral_apply(f, [](std::size_t n) { return std::sqrt(1.0 + static_cast<double>(n)); }));
                LogMeanExp num, den;
                for (std::size_t i = 0; i < pool.size(); ++i) {
                    const auto x = pool.row(i);
                    num.push(0.5 * p * std::log(grad.norm_sq(x)));
                    den.push(p * std::log(std::abs(lifted(x))));
                }
                ratio = std::exp((num.log_mean() - den.log_mean()) / p);
            }
        }
        out.ratios.push_back(ratio);
        out.constant_member.push_back(constant);
        if (constant) continue;
        if (!any) {
            out.min_ratio = out.max_ratio = ratio;
            any = true;
        } else {
            out.min_ratio = std::min(out.min_ratio, ratio);
            out.max_ratio = std::max(out.max_ratio, ratio);
        }
    }
    out.within_band = !any || (out.min_ratio >= band_lo && out.max_ratio <= band_hi);
    return out;
}

}  // namespace wienerlab
