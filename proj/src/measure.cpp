#include "wienerlab/measure.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace wienerlab {

namespace {

void require_dims(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                    std::to_string(a) + " vs " + std::to_string(b) + ")");
    }
}

std::size_t highest_direction(const ChaosExpansion& f, bool& any) {
    std::size_t top = 0;
    any = false;
    for (const auto& [n, kernel] : f.terms()) {
        for (const auto& [idx, v] : kernel.entries()) {
            if (v == 0.0 || idx.empty()) continue;
            any = true;
            top = std::max<std::size_t>(top, idx.back());
        }
    }
    return top;
}

}  // namespace

// ---------------------------------------------------------------------------
// Adapted processes and the Ito integral

AdaptedStepProcess AdaptedStepProcess::from_function(std::size_t n_slots, SlotFunction fn) {
    if (n_slots == 0) throw std::invalid_argument("AdaptedStepProcess: n_slots must be >= 1");
    if (!fn) throw std::invalid_argument("AdaptedStepProcess: empty slot function");
    AdaptedStepProcess p;
    p.n_slots_ = n_slots;
    p.fn_ = std::move(fn);
    return p;
}

AdaptedStepProcess AdaptedStepProcess::from_chaos(std::vector<ChaosExpansion> slots) {
    if (slots.empty()) throw std::invalid_argument("AdaptedStepProcess: no slots");
    const std::size_t n = slots.size();
    for (std::size_t j = 0; j < n; ++j) {
        require_dims(slots[j].dim(), n, "AdaptedStepProcess::from_chaos");
        bool any = false;
        const auto top = highest_direction(slots[j], any);
        if (any && top >= j) {
            throw std::invalid_argument("AdaptedStepProcess: slot " + std::to_string(j) +
                                        " depends on direction " + std::to_string(top) +
                                        " (not adapted)");
        }
    }
    AdaptedStepProcess p;
    p.n_slots_ = n;
    p.chaos_ = std::move(slots);
    for (const auto& c : p.chaos_) p.compiled_.emplace_back(c);
    return p;
}

AdaptedStepProcess AdaptedStepProcess::deterministic(std::vector<double> values) {
    const std::size_t n = values.size();
    std::vector<ChaosExpansion> slots;
    slots.reserve(n);
    for (double v : values) slots.push_back(ChaosExpansion::constant(n, v));
    return from_chaos(std::move(slots));
}

double AdaptedStepProcess::value(std::size_t slot, std::span<const double> coords) const {
    require_dims(coords.size(), n_slots_, "AdaptedStepProcess::value");
    if (slot >= n_slots_) throw std::out_of_range("AdaptedStepProcess::value: slot out of range");
    if (!compiled_.empty()) return compiled_[slot](coords);
    return fn_(slot, coords.first(slot));
}

std::vector<double> AdaptedStepProcess::values(std::span<const double> coords) const {
    std::vector<double> out(n_slots_);
    for (std::size_t j = 0; j < n_slots_; ++j) out[j] = value(j, coords);
    return out;
}

double ito_integral(const AdaptedStepProcess& k, const Path& path) {
    require_dims(k.n_slots(), path.n_slots(), "ito_integral");
    const auto coords = path.coords();
    double total = 0.0;
    for (std::size_t j = 0; j < k.n_slots(); ++j) total += k.value(j, coords) * path.increment(j);
    return total;
}

// ---------------------------------------------------------------------------
// Wick exponential and Girsanov

WickExponential::WickExponential(CameronMartinVector h, std::size_t order_cap)
    : h_(std::move(h)), cap_(order_cap), chaos_(h_.dim()) {
    for (std::size_t n = 0; n <= cap_; ++n) {
        SymmetricKernel k = SymmetricKernel::tensor_power(h_.coords, n);
        k *= 1.0 / factorial(n);
        chaos_.add_term(k);
    }
}

double WickExponential::operator()(std::span<const double> coords) const {
    require_dims(coords.size(), h_.dim(), "WickExponential");
    double dot = 0.0;
    for (std::size_t j = 0; j < coords.size(); ++j) dot += h_.coords[j] * coords[j];
    return std::exp(dot - 0.5 * h_.norm_sq());
}

double WickExponential::truncation_bound() const {
    const double s = h_.norm_sq();
    return std::exp(s) * std::pow(s, static_cast<double>(cap_ + 1)) / factorial(cap_ + 1);
}

double WickExponential::truncation_error_sq() const {
    const double s = h_.norm_sq();
    // tail of the exponential series, summed directly to avoid cancellation
    double term = 1.0;
    for (std::size_t n = 1; n <= cap_ + 1; ++n) term *= s / static_cast<double>(n);
    double total = 0.0;
    for (std::size_t n = cap_ + 1; n < cap_ + 200 && term > 0.0; ++n) {
        total += term;
        if (term < 1e-18 * total) break;
        term *= s / static_cast<double>(n + 1);
    }
    return total;
}

double WickExponential::lp_norm(double h_norm, double p) {
    return std::exp(0.5 * (p - 1.0) * h_norm * h_norm);
}

double girsanov_weight(const AdaptedStepProcess& u, std::span<const double> coords) {
    require_dims(coords.size(), u.n_slots(), "girsanov_weight");
    const double n = static_cast<double>(u.n_slots());
    const double inv_sqrt_n = 1.0 / std::sqrt(n);
    double stoch = 0.0, energy = 0.0;
    for (std::size_t j = 0; j < u.n_slots(); ++j) {
        const double a = u.value(j, coords);
        stoch += a * coords[j] * inv_sqrt_n;
        energy += a * a / n;
    }
    return std::exp(-stoch - 0.5 * energy);
}

Coords girsanov_shift(const AdaptedStepProcess& u, std::span<const double> coords) {
    require_dims(coords.size(), u.n_slots(), "girsanov_shift");
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(u.n_slots()));
    Coords out(coords.begin(), coords.end());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += u.value(j, coords) * inv_sqrt_n;
    return out;
}

// ---------------------------------------------------------------------------
// Carleman-Fredholm determinant

double det2(const Matrix& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("det2: matrix must be square");
    if (a.rows() == 0) return 1.0;
    const Matrix m = Matrix::Identity(a.rows(), a.cols()) + a;
    const Eigen::PartialPivLU<Matrix> lu(m);
    const Matrix& packed = lu.matrixLU();
    double log_abs = 0.0;
    int sign = lu.permutationP().determinant();
    for (Eigen::Index i = 0; i < packed.rows(); ++i) {
        const double d = packed(i, i);
        if (d == 0.0) return 0.0;
        if (d < 0.0) sign = -sign;
        log_abs += std::log(std::abs(d));
    }
    return sign * std::exp(log_abs - a.trace());
}

double det2_product_residual(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument("det2_product_residual: shape mismatch");
    }
    // (I+A)(I+B) = I + (A + B + AB)
    const Matrix c = a + b + a * b;
    const double lhs = det2(a) * det2(b);
    const double rhs = std::exp((a * b).trace()) * det2(c);
    return std::abs(lhs - rhs);
}

double operator_norm(const Matrix& a, int max_iter) {
    if (a.size() == 0) return 0.0;
    const Matrix ata = a.transpose() * a;
    Vector v = Vector::Ones(ata.cols()).normalized();
    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Vector w = ata * v;
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        w /= norm;
        const double next = w.dot(ata * w);
        v = w;
        if (std::abs(next - lambda) <= 1e-14 * std::max(1.0, next)) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return std::sqrt(std::max(0.0, lambda));
}

// ---------------------------------------------------------------------------
// Shift maps and the Ramer density

Matrix ShiftMap::jacobian_at(std::span<const double> x) const {
    require_dims(x.size(), dim, "ShiftMap::jacobian_at");
    if (jacobian) return jacobian(x);
    // one-sided quotients at steps h and h/2: for a smooth field the gap
    // between forward and backward quotients halves with the step, at a
    // kink it does not
    const auto n = static_cast<Eigen::Index>(dim);
    const Vector base = field(x);
    std::vector<double> work(x.begin(), x.end());
    auto eval = [&](std::size_t k, double offset) {
        work[k] = x[k] + offset;
        Vector v = field(work);
        work[k] = x[k];
        return v;
    };
    Matrix central_h(n, n), central_h2(n, n), gap_h(n, n), gap_h2(n, n);
    const double h = kJacobianStep;
    for (std::size_t k = 0; k < dim; ++k) {
        const auto c = static_cast<Eigen::Index>(k);
        const Vector fp = eval(k, h), fm = eval(k, -h);
        const Vector fp2 = eval(k, 0.5 * h), fm2 = eval(k, -0.5 * h);
        central_h.col(c) = (fp - fm) / (2.0 * h);
        central_h2.col(c) = (fp2 - fm2) / h;
        gap_h.col(c) = (fp - 2.0 * base + fm) / h;
        gap_h2.col(c) = (fp2 - 2.0 * base + fm2) / (0.5 * h);
    }
    const double scale = 1.0 + central_h.cwiseAbs().maxCoeff();
    const double g1 = gap_h.cwiseAbs().maxCoeff(), g2 = gap_h2.cwiseAbs().maxCoeff();
    const bool kink_at_point = g2 > 1e-6 * scale && g2 > 0.75 * g1;
    const bool kink_nearby = (central_h - central_h2).cwiseAbs().maxCoeff() > 1e-3 * scale;
    if (kink_at_point || kink_nearby) {
        throw std::domain_error("ShiftMap: field is not differentiable at the sample point");
    }
    return central_h;
}

ShiftMap ShiftMap::from_chaos(const HValuedExpansion& u) {
    const std::size_t d = u.dim();
    std::vector<CompiledExpansion> comps(u.components.begin(), u.components.end());
    std::vector<std::vector<CompiledExpansion>> jac;
    jac.reserve(d);
    for (const auto& c : u.components) {
        const auto g = derivative(c);
        jac.emplace_back(g.components.begin(), g.components.end());
    }
    ShiftMap s;
    s.dim = d;
    s.field = [comps](std::span<const double> x) {
        Vector v(static_cast<Eigen::Index>(comps.size()));
        for (std::size_t i = 0; i < comps.size(); ++i) v(static_cast<Eigen::Index>(i)) = comps[i](x);
        return v;
    };
    s.jacobian = [jac](std::span<const double> x) {
        const auto n = static_cast<Eigen::Index>(jac.size());
        Matrix m(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index k = 0; k < n; ++k) m(i, k) = jac[i][k](x);
        return m;
    };
    return s;
}

ShiftMap ShiftMap::from_adapted(const AdaptedStepProcess& u) {
    if (!u.chaos_backed()) {
        throw std::invalid_argument("ShiftMap::from_adapted: needs a chaos-backed process");
    }
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(u.n_slots()));
    HValuedExpansion field;
    for (const auto& c : u.chaos_slots()) field.components.push_back(inv_sqrt_n * c);
    return from_chaos(field);
}

ShiftMap ShiftMap::linear(const Matrix& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("ShiftMap::linear: matrix must be square");
    ShiftMap s;
    s.dim = static_cast<std::size_t>(a.rows());
    s.field = [a](std::span<const double> x) {
        const Eigen::Map<const Vector> v(x.data(), static_cast<Eigen::Index>(x.size()));
        return Vector(a * v);
    };
    s.jacobian = [a](std::span<const double>) { return a; };
    const double op = operator_norm(a);
    s.operator_norm_bound = op;
    s.hs_norm_bound = a.norm();
    return s;
}

ShiftMap certify(ShiftMap u, const SamplePool& pool, std::size_t max_rows) {
    require_dims(pool.dim(), u.dim, "certify");
    if (pool.size() == 0) throw std::invalid_argument("certify: empty pool");
    double op = 0.0, hs = 0.0;
    const std::size_t rows = std::min(max_rows, pool.size());
    for (std::size_t i = 0; i < rows; ++i) {
        const Matrix j = u.jacobian_at(pool.row(i));
        op = std::max(op, operator_norm(j));
        hs = std::max(hs, j.norm());
    }
    u.operator_norm_bound = kCertificateMargin * op;
    u.hs_norm_bound = kCertificateMargin * hs;
    return u;
}

double finite_dim_divergence(const ShiftMap& u, std::span<const double> x) {
    const Vector v = u(x);
    const Eigen::Map<const Vector> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    return v.dot(xv) - u.jacobian_at(x).trace();
}

double ramer_density(const ShiftMap& u, std::span<const double> x) {
    if (!u.operator_norm_bound) {
        throw std::domain_error("ramer_density: shift has no operator-norm certificate");
    }
    if (!(*u.operator_norm_bound < 1.0)) {
        throw std::domain_error("ramer_density: certified bound " +
                                std::to_string(*u.operator_norm_bound) + " is not < 1");
    }
    require_dims(x.size(), u.dim, "ramer_density");
    const Vector v = u(x);
    const Matrix j = u.jacobian_at(x);
    const Eigen::Map<const Vector> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    const double div = v.dot(xv) - j.trace();
    return std::abs(det2(j)) * std::exp(-div - 0.5 * v.squaredNorm());
}

// ---------------------------------------------------------------------------
// Change-of-measure verification

void to_json(nlohmann::json& j, const DensityReport& r) {
    j = nlohmann::json{{"lhs", r.lhs}, {"rhs", r.rhs},        {"residual", r.residual},
                       {"se", r.std_error}, {"n", r.n_samples}, {"pass", r.pass}};
}

namespace {

DensityReport finish_report(double lhs, double rhs, double mean_weight, const RunningStats& psi,
                            std::size_t n) {
    DensityReport r;
    r.lhs = lhs;
    r.rhs = rhs;
    r.residual = lhs - rhs;
    r.std_error = psi.std_error();
    r.n_samples = n;
    r.mean_weight = mean_weight;
    r.pass = std::abs(r.residual) <= kDensityRejectSe * r.std_error;
    return r;
}

}  // namespace

DensityReport verify_change_of_measure(const Functional& f, const ShiftMap& u,
                                       const SamplePool& pool) {
    require_dims(pool.dim(), u.dim, "verify_change_of_measure");
    const std::size_t m = pool.size();
    if (m == 0) throw std::invalid_argument("verify_change_of_measure: empty pool");
    std::vector<double> shifted(m), weight(m), plain(m);
    std::vector<double> tx(u.dim);
    for (std::size_t i = 0; i < m; ++i) {
        const auto x = pool.row(i);
        const double lam = ramer_density(u, x);
        const Vector v = u(x);
        for (std::size_t k = 0; k < u.dim; ++k) tx[k] = x[k] + v(static_cast<Eigen::Index>(k));
        shifted[i] = f(tx) * lam;
        weight[i] = lam;
        plain[i] = f(x);
    }
    const double m_shift = estimate_of(shifted).mean;
    const double m_weight = estimate_of(weight).mean;
    const double m_plain = estimate_of(plain).mean;
    // delta method for mean(shifted) - mean(weight) * mean(plain)
    RunningStats psi;
    for (std::size_t i = 0; i < m; ++i) {
        psi.push((shifted[i] - m_shift) - m_plain * (weight[i] - m_weight) -
                 m_weight * (plain[i] - m_plain));
    }
    return finish_report(m_shift, m_weight * m_plain, m_weight, psi, m);
}

DensityReport verify_change_of_measure(const Functional& f, const AdaptedStepProcess& u,
                                       const SamplePool& pool) {
    require_dims(pool.dim(), u.n_slots(), "verify_change_of_measure");
    const std::size_t m = pool.size();
    if (m == 0) throw std::invalid_argument("verify_change_of_measure: empty pool");
    RunningStats lhs, rhs, weight, psi;
    for (std::size_t i = 0; i < m; ++i) {
        const auto x = pool.row(i);
        const double lam = girsanov_weight(u, x);
        const double a = f(girsanov_shift(u, x)) * lam;
        const double b = f(x);
        lhs.push(a);
        rhs.push(b);
        weight.push(lam);
        psi.push(a - b);
    }
    return finish_report(lhs.mean(), rhs.mean(), weight.mean(), psi, m);
}

}  // namespace wienerlab
