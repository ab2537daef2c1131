#include "wienerlab/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

namespace wienerlab {

namespace {

struct Run {
    std::uint32_t value;
    std::uint32_t count;
};

std::vector<Run> runs_of(const MultiIndex& idx) {
    std::vector<Run> runs;
    for (auto v : idx) {
        if (!runs.empty() && runs.back().value == v) {
            ++runs.back().count;
        } else {
            runs.push_back({v, 1});
        }
    }
    return runs;
}

MultiIndex merge(const MultiIndex& a, const MultiIndex& b) {
    MultiIndex out;
    out.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

/// Calls fn(sub, rest) for every distinct sub-multiset `sub` of size m of the
/// sorted multi-index `idx`, with rest = idx minus sub.
void for_each_submultiset(const MultiIndex& idx, std::size_t m,
                          const std::function<void(const MultiIndex&, const MultiIndex&)>& fn) {
    const auto runs = runs_of(idx);
    std::vector<std::uint32_t> take(runs.size(), 0);
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t r, std::size_t left) {
        if (r == runs.size()) {
            if (left != 0) return;
            MultiIndex sub, rest;
            for (std::size_t i = 0; i < runs.size(); ++i) {
                sub.insert(sub.end(), take[i], runs[i].value);
                rest.insert(rest.end(), runs[i].count - take[i], runs[i].value);
            }
            fn(sub, rest);
            return;
        }
        const std::size_t hi = std::min<std::size_t>(runs[r].count, left);
        for (std::size_t k = 0; k <= hi; ++k) {
            take[r] = static_cast<std::uint32_t>(k);
            rec(r + 1, left - k);
        }
        take[r] = 0;
    };
    rec(0, m);
}

void require_dims(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                    std::to_string(a) + " vs " + std::to_string(b) + ")");
    }
}

/// R[A, B] = sum over sorted K of multiplicity(K) f[A+K] g[B+K].
std::map<std::pair<MultiIndex, MultiIndex>, double> contraction_pairs(const SymmetricKernel& f,
                                                                      const SymmetricKernel& g,
                                                                      std::size_t m) {
    std::map<MultiIndex, std::vector<std::pair<MultiIndex, double>>> g_by_core;
    for (const auto& [idx, gv] : g.entries()) {
        for_each_submultiset(idx, m, [&](const MultiIndex& core, const MultiIndex& rest) {
            g_by_core[core].emplace_back(rest, gv);
        });
    }
    std::map<std::pair<MultiIndex, MultiIndex>, double> out;
    for (const auto& [idx, fv] : f.entries()) {
        for_each_submultiset(idx, m, [&](const MultiIndex& core, const MultiIndex& rest) {
            auto it = g_by_core.find(core);
            if (it == g_by_core.end()) return;
            const double w = multiplicity(core) * fv;
            for (const auto& [grest, gv] : it->second) out[{rest, grest}] += w * gv;
        });
    }
    return out;
}

}  // namespace

double factorial(std::size_t n) {
    double r = 1.0;
    for (std::size_t k = 2; k <= n; ++k) r *= static_cast<double>(k);
    return r;
}

double multiplicity(const MultiIndex& idx) {
    double denom = 1.0;
    for (const auto& run : runs_of(idx)) denom *= factorial(run.count);
    return factorial(idx.size()) / denom;
}

double hermite(std::size_t n, double x) {
    double prev = 1.0;
    if (n == 0) return prev;
    double cur = x;
    for (std::size_t k = 1; k < n; ++k) {
        const double next = x * cur - static_cast<double>(k) * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

std::vector<MultiIndex> sorted_multi_indices(std::size_t order, std::size_t dim) {
    std::vector<MultiIndex> out;
    if (order == 0) {
        out.emplace_back();
        return out;
    }
    if (dim == 0) return out;
    MultiIndex idx(order, 0);
    while (true) {
        out.push_back(idx);
        std::size_t pos = order;
        while (pos > 0 && idx[pos - 1] == dim - 1) --pos;
        if (pos == 0) break;
        const auto v = idx[pos - 1] + 1;
        for (std::size_t k = pos - 1; k < order; ++k) idx[k] = v;
    }
    return out;
}

// ---------------------------------------------------------------------------
// SymmetricKernel

SymmetricKernel::SymmetricKernel(std::size_t order, std::size_t dim) : order_(order), dim_(dim) {
    if (dim == 0) throw std::invalid_argument("SymmetricKernel: dim must be >= 1");
}

MultiIndex SymmetricKernel::canonical(MultiIndex idx) const {
    if (idx.size() != order_) {
        throw std::invalid_argument("SymmetricKernel: index length " + std::to_string(idx.size()) +
                                    " does not match order " + std::to_string(order_));
    }
    for (auto v : idx) {
        if (v >= dim_) throw std::out_of_range("SymmetricKernel: direction out of range");
    }
    std::sort(idx.begin(), idx.end());
    return idx;
}

double SymmetricKernel::operator()(MultiIndex idx) const {
    auto it = entries_.find(canonical(std::move(idx)));
    return it == entries_.end() ? 0.0 : it->second;
}

void SymmetricKernel::set(MultiIndex idx, double value) {
    entries_[canonical(std::move(idx))] = value;
}

void SymmetricKernel::add(MultiIndex idx, double value) {
    entries_[canonical(std::move(idx))] += value;
}

bool SymmetricKernel::is_zero() const {
    return std::all_of(entries_.begin(), entries_.end(),
                       [](const auto& e) { return e.second == 0.0; });
}

double SymmetricKernel::norm_sq() const {
    double s = 0.0;
    for (const auto& [idx, v] : entries_) s += multiplicity(idx) * v * v;
    return s;
}

double SymmetricKernel::norm() const { return std::sqrt(norm_sq()); }

void SymmetricKernel::prune(double tol) {
    std::erase_if(entries_, [tol](const auto& e) { return std::abs(e.second) <= tol; });
}

SymmetricKernel& SymmetricKernel::operator+=(const SymmetricKernel& other) {
    if (other.order_ != order_) throw std::invalid_argument("SymmetricKernel +=: order mismatch");
    require_dims(dim_, other.dim_, "SymmetricKernel +=");
    for (const auto& [idx, v] : other.entries_) entries_[idx] += v;
    return *this;
}

SymmetricKernel& SymmetricKernel::operator*=(double s) {
    for (auto& [idx, v] : entries_) v *= s;
    return *this;
}

SymmetricKernel SymmetricKernel::scalar(std::size_t dim, double c) {
    SymmetricKernel k(0, dim);
    k.entries_[{}] = c;
    return k;
}

SymmetricKernel SymmetricKernel::basis(std::size_t dim, std::size_t j) {
    SymmetricKernel k(1, dim);
    k.set({static_cast<std::uint32_t>(j)}, 1.0);
    return k;
}

SymmetricKernel SymmetricKernel::from_vector(std::span<const double> h) {
    SymmetricKernel k(1, h.size());
    for (std::size_t j = 0; j < h.size(); ++j) {
        if (h[j] != 0.0) k.entries_[{static_cast<std::uint32_t>(j)}] = h[j];
    }
    return k;
}

SymmetricKernel SymmetricKernel::tensor_power(std::span<const double> h, std::size_t n) {
    SymmetricKernel k(n, h.size());
    std::vector<std::uint32_t> support;
    for (std::size_t j = 0; j < h.size(); ++j) {
        if (h[j] != 0.0) support.push_back(static_cast<std::uint32_t>(j));
    }
    if (n == 0) {
        k.entries_[{}] = 1.0;
        return k;
    }
    if (support.empty()) return k;
    for (const auto& local : sorted_multi_indices(n, support.size())) {
        MultiIndex idx(n);
        double v = 1.0;
        for (std::size_t s = 0; s < n; ++s) {
            idx[s] = support[local[s]];
            v *= h[idx[s]];
        }
        k.entries_[idx] = v;
    }
    return k;
}

SymmetricKernel SymmetricKernel::symmetric_product(const SymmetricKernel& f,
                                                   const SymmetricKernel& g) {
    return contract(f, g, 0);
}

SymmetricKernel operator+(SymmetricKernel a, const SymmetricKernel& b) {
    a += b;
    return a;
}

SymmetricKernel operator*(double s, SymmetricKernel f) {
    f *= s;
    return f;
}

double kernel_inner(const SymmetricKernel& f, const SymmetricKernel& g) {
    require_dims(f.dim(), g.dim(), "kernel_inner");
    if (f.order() != g.order()) return 0.0;
    double s = 0.0;
    for (const auto& [idx, fv] : f.entries()) {
        auto it = g.entries().find(idx);
        if (it != g.entries().end()) s += multiplicity(idx) * fv * it->second;
    }
    return s;
}

SymmetricKernel contract(const SymmetricKernel& f, const SymmetricKernel& g, std::size_t m) {
    require_dims(f.dim(), g.dim(), "contract");
    if (m > std::min(f.order(), g.order())) {
        throw std::out_of_range("contract: order " + std::to_string(m) + " exceeds min(" +
                                std::to_string(f.order()) + ", " + std::to_string(g.order()) + ")");
    }
    SymmetricKernel out(f.order() + g.order() - 2 * m, f.dim());
    for (const auto& [ab, v] : contraction_pairs(f, g, m)) {
        const auto& [a, b] = ab;
        const MultiIndex c = merge(a, b);
        out.add(c, multiplicity(a) * multiplicity(b) / multiplicity(c) * v);
    }
    return out;
}

double unsymmetrized_contraction_norm_sq(const SymmetricKernel& f, const SymmetricKernel& g,
                                         std::size_t m) {
    require_dims(f.dim(), g.dim(), "unsymmetrized_contraction_norm_sq");
    if (m > std::min(f.order(), g.order())) {
        throw std::out_of_range("unsymmetrized_contraction_norm_sq: contraction order too large");
    }
    double s = 0.0;
    for (const auto& [ab, v] : contraction_pairs(f, g, m)) {
        s += multiplicity(ab.first) * multiplicity(ab.second) * v * v;
    }
    return s;
}

SymmetricKernel contract_vector(const SymmetricKernel& f, std::span<const double> h) {
    require_dims(f.dim(), h.size(), "contract_vector");
    if (f.order() == 0) throw std::out_of_range("contract_vector: order-0 kernel");
    SymmetricKernel out(f.order() - 1, f.dim());
    for (const auto& [idx, fv] : f.entries()) {
        for (const auto& run : runs_of(idx)) {
            if (h[run.value] == 0.0) continue;
            MultiIndex rest = idx;
            rest.erase(std::find(rest.begin(), rest.end(), run.value));
            out.add(std::move(rest), fv * h[run.value]);
        }
    }
    return out;
}

double independence_residual(const SymmetricKernel& f, const SymmetricKernel& g) {
    if (f.order() == 0 || g.order() == 0) {
        throw std::invalid_argument("independence_residual: order-0 kernels are not allowed");
    }
    return std::sqrt(unsymmetrized_contraction_norm_sq(f, g, 1));
}

// ---------------------------------------------------------------------------
// ChaosExpansion

ChaosExpansion::ChaosExpansion(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("ChaosExpansion: dim must be >= 1");
}

const SymmetricKernel* ChaosExpansion::term(std::size_t n) const {
    auto it = terms_.find(n);
    return it == terms_.end() ? nullptr : &it->second;
}

void ChaosExpansion::add_term(const SymmetricKernel& f) {
    require_dims(dim_, f.dim(), "ChaosExpansion::add_term");
    auto it = terms_.find(f.order());
    if (it == terms_.end()) {
        terms_.emplace(f.order(), f);
    } else {
        it->second += f;
    }
}

std::size_t ChaosExpansion::max_order() const {
    std::size_t n = 0;
    for (const auto& [order, kernel] : terms_) {
        if (!kernel.is_zero()) n = std::max(n, order);
    }
    return n;
}

double ChaosExpansion::mean() const {
    const auto* k = term(0);
    return k ? (*k)({}) : 0.0;
}

double ChaosExpansion::l2_norm_sq() const {
    double s = 0.0;
    for (const auto& [n, kernel] : terms_) s += factorial(n) * kernel.norm_sq();
    return s;
}

double ChaosExpansion::variance() const {
    double s = 0.0;
    for (const auto& [n, kernel] : terms_) {
        if (n > 0) s += factorial(n) * kernel.norm_sq();
    }
    return s;
}

void ChaosExpansion::prune(double tol) {
    for (auto& [n, kernel] : terms_) kernel.prune(tol);
    std::erase_if(terms_, [](const auto& t) { return t.second.entries().empty(); });
}

ChaosExpansion& ChaosExpansion::operator+=(const ChaosExpansion& other) {
    require_dims(dim_, other.dim_, "ChaosExpansion +=");
    for (const auto& [n, kernel] : other.terms_) add_term(kernel);
    return *this;
}

ChaosExpansion& ChaosExpansion::operator-=(const ChaosExpansion& other) {
    return *this += (-1.0) * other;
}

ChaosExpansion& ChaosExpansion::operator*=(double s) {
    for (auto& [n, kernel] : terms_) kernel *= s;
    return *this;
}

ChaosExpansion ChaosExpansion::constant(std::size_t dim, double c) {
    ChaosExpansion f(dim);
    f.add_term(SymmetricKernel::scalar(dim, c));
    return f;
}

ChaosExpansion ChaosExpansion::first_order(std::span<const double> h) {
    ChaosExpansion f(h.size());
    f.add_term(SymmetricKernel::from_vector(h));
    return f;
}

ChaosExpansion ChaosExpansion::multiple_integral(const SymmetricKernel& k) {
    ChaosExpansion f(k.dim());
    f.add_term(k);
    return f;
}

ChaosExpansion operator+(ChaosExpansion a, const ChaosExpansion& b) {
    a += b;
    return a;
}

ChaosExpansion operator-(ChaosExpansion a, const ChaosExpansion& b) {
    a -= b;
    return a;
}

ChaosExpansion operator*(double s, ChaosExpansion f) {
    f *= s;
    return f;
}

double expectation_product(const ChaosExpansion& f, const ChaosExpansion& g) {
    require_dims(f.dim(), g.dim(), "expectation_product");
    double s = 0.0;
    for (const auto& [n, kernel] : f.terms()) {
        if (const auto* other = g.term(n)) s += factorial(n) * kernel_inner(kernel, *other);
    }
    return s;
}

ChaosExpansion multiply(const ChaosExpansion& f, const ChaosExpansion& g, std::size_t order_cap) {
    require_dims(f.dim(), g.dim(), "multiply");
    if (f.max_order() + g.max_order() > order_cap) {
        throw std::domain_error("multiply: product order " +
                                std::to_string(f.max_order() + g.max_order()) +
                                " exceeds order cap " + std::to_string(order_cap));
    }
    ChaosExpansion out(f.dim());
    for (const auto& [p, fk] : f.terms()) {
        for (const auto& [q, gk] : g.terms()) {
            for (std::size_t m = 0; m <= std::min(p, q); ++m) {
                // p! q! / (m! (p-m)! (q-m)!)
                const double c =
                    factorial(p) * factorial(q) / (factorial(m) * factorial(p - m) * factorial(q - m));
                SymmetricKernel k = contract(fk, gk, m);
                k *= c;
                out.add_term(k);
            }
        }
    }
    return out;
}

double evaluate(const ChaosExpansion& f, std::span<const double> coords) {
    return CompiledExpansion(f)(coords);
}

CompiledExpansion::CompiledExpansion(const ChaosExpansion& f) : dim_(f.dim()) {
    std::vector<bool> used(dim_, false);
    offsets_.push_back(0);
    for (const auto& [n, kernel] : f.terms()) {
        for (const auto& [idx, v] : kernel.entries()) {
            if (v == 0.0) continue;
            coeffs_.push_back(multiplicity(idx) * v);
            for (const auto& run : runs_of(idx)) {
                factors_.push_back({run.value, run.count});
                max_power_ = std::max<std::size_t>(max_power_, run.count);
                used[run.value] = true;
            }
            offsets_.push_back(static_cast<std::uint32_t>(factors_.size()));
        }
    }
    for (std::uint32_t j = 0; j < dim_; ++j) {
        if (used[j]) used_directions_.push_back(j);
    }
}

double CompiledExpansion::operator()(std::span<const double> coords) const {
    require_dims(coords.size(), dim_, "evaluate");
    const std::size_t stride = max_power_ + 1;
    thread_local std::vector<double> table;
    table.resize(dim_ * stride);
    for (auto j : used_directions_) {
        double* h = table.data() + j * stride;
        const double x = coords[j];
        h[0] = 1.0;
        if (stride > 1) h[1] = x;
        for (std::size_t k = 1; k + 1 < stride; ++k) h[k + 1] = x * h[k] - static_cast<double>(k) * h[k - 1];
    }
    double total = 0.0;
    for (std::size_t t = 0; t < coeffs_.size(); ++t) {
        double term = coeffs_[t];
        for (auto i = offsets_[t]; i < offsets_[t + 1]; ++i) {
            term *= table[factors_[i].direction * stride + factors_[i].power];
        }
        total += term;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Malliavin operators

HValuedExpansion::HValuedExpansion(std::size_t dim) {
    components.reserve(dim);
    for (std::size_t j = 0; j < dim; ++j) components.emplace_back(dim);
}

HValuedExpansion HValuedExpansion::constant(std::span<const double> h) {
    HValuedExpansion u(h.size());
    for (std::size_t j = 0; j < h.size(); ++j) {
        if (h[j] != 0.0) u.components[j] = ChaosExpansion::constant(h.size(), h[j]);
    }
    return u;
}

double expectation_h_inner(const HValuedExpansion& u, const HValuedExpansion& v) {
    require_dims(u.dim(), v.dim(), "expectation_h_inner");
    double s = 0.0;
    for (std::size_t j = 0; j < u.dim(); ++j) s += expectation_product(u.components[j], v.components[j]);
    return s;
}

std::vector<double> evaluate(const HValuedExpansion& u, std::span<const double> coords) {
    std::vector<double> out(u.dim());
    for (std::size_t j = 0; j < u.dim(); ++j) out[j] = evaluate(u.components[j], coords);
    return out;
}

HValuedExpansion derivative(const ChaosExpansion& f) {
    HValuedExpansion grad(f.dim());
    std::vector<std::map<std::size_t, SymmetricKernel>> parts(f.dim());
    for (const auto& [n, kernel] : f.terms()) {
        if (n == 0) continue;
        for (const auto& [idx, v] : kernel.entries()) {
            for (const auto& run : runs_of(idx)) {
                MultiIndex rest = idx;
                rest.erase(std::find(rest.begin(), rest.end(), run.value));
                auto& slot = parts[run.value];
                auto it = slot.try_emplace(n - 1, n - 1, f.dim()).first;
                it->second.add(std::move(rest), static_cast<double>(n) * v);
            }
        }
    }
    for (std::size_t j = 0; j < f.dim(); ++j) {
        for (const auto& [order, kernel] : parts[j]) grad.components[j].add_term(kernel);
    }
    return grad;
}

ChaosExpansion divergence(const HValuedExpansion& u) {
    const std::size_t d = u.dim();
    if (d == 0) throw std::invalid_argument("divergence: empty field");
    ChaosExpansion out(d);
    for (std::size_t j = 0; j < d; ++j) {
        require_dims(u.components[j].dim(), d, "divergence");
        for (const auto& [n, kernel] : u.components[j].terms()) {
            SymmetricKernel lifted(n + 1, d);
            for (const auto& [idx, v] : kernel.entries()) {
                MultiIndex c = idx;
                c.insert(std::upper_bound(c.begin(), c.end(), static_cast<std::uint32_t>(j)),
                         static_cast<std::uint32_t>(j));
                lifted.add(c, multiplicity(idx) / multiplicity(c) * v);
            }
            out.add_term(lifted);
        }
    }
    return out;
}

ChaosExpansion number_op(const ChaosExpansion& f) {
    return spectral_apply(f, [](std::size_t n) { return static_cast<double>(n); });
}

ChaosExpansion ou_semigroup(const ChaosExpansion& f, double t) {
    if (!(t >= 0.0)) throw std::domain_error("ou_semigroup: t must be >= 0");
    return spectral_apply(f, [t](std::size_t n) { return std::exp(-static_cast<double>(n) * t); });
}

Estimate mehler_apply(const Functional& f, double t, std::span<const double> x,
                      const SamplePool& pool) {
    if (!(t >= 0.0)) throw std::domain_error("mehler_apply: t must be >= 0");
    if (pool.size() == 0) throw std::invalid_argument("mehler_apply: empty pool");
    require_dims(x.size(), pool.dim(), "mehler_apply");
    const double a = std::exp(-t);
    const double b = std::sqrt(-std::expm1(-2.0 * t));
    std::vector<double> z(x.size());
    RunningStats stats;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto y = pool.row(i);
        for (std::size_t j = 0; j < z.size(); ++j) z[j] = a * x[j] + b * y[j];
        stats.push(f(z));
    }
    return stats.estimate();
}

ChaosExpansion cm_shift_chaos(const ChaosExpansion& f, const CameronMartinVector& h) {
    require_dims(f.dim(), h.dim(), "cm_shift_chaos");
    ChaosExpansion out(f.dim());
    for (const auto& [p, kernel] : f.terms()) {
        // I_p(f)(w + h) = sum_i C(p, i) I_{p-i}((f, h^{(x)i}))
        SymmetricKernel contracted = kernel;
        for (std::size_t i = 0; i <= p; ++i) {
            if (i > 0) contracted = contract_vector(contracted, h.coords);
            SymmetricKernel k = contracted;
            k *= factorial(p) / (factorial(i) * factorial(p - i));
            out.add_term(k);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stroock kernels

namespace {

struct Stencil {
    std::vector<std::vector<double>> offsets;  // per point, per direction in runs
    std::vector<double> weights;
    std::vector<std::uint32_t> directions;
    double abs_weight_sum = 0.0;
};

/// Tensor product of 1-d central difference stencils for d^m / dx^m with
/// spacing h: sum_k (-1)^k C(m, k) f(x + (m/2 - k) h) / h^m.
Stencil mixed_stencil(const MultiIndex& idx, double h) {
    const auto runs = runs_of(idx);
    Stencil s;
    for (const auto& r : runs) s.directions.push_back(r.value);
    const double scale = std::pow(h, -static_cast<double>(idx.size()));
    std::vector<std::uint32_t> k(runs.size(), 0);
    while (true) {
        double w = scale;
        std::vector<double> off(runs.size());
        for (std::size_t r = 0; r < runs.size(); ++r) {
            const std::uint32_t m = runs[r].count;
            const double binom = factorial(m) / (factorial(k[r]) * factorial(m - k[r]));
            w *= (k[r] % 2 ? -1.0 : 1.0) * binom;
            off[r] = (0.5 * m - k[r]) * h;
        }
        s.offsets.push_back(std::move(off));
        s.weights.push_back(w);
        s.abs_weight_sum += std::abs(w);
        std::size_t r = 0;
        while (r < runs.size()) {
            if (++k[r] <= runs[r].count) break;
            k[r] = 0;
            ++r;
        }
        if (r == runs.size()) break;
    }
    return s;
}

double apply_stencil(const Functional& f, const Stencil& s, std::span<const double> x,
                     std::vector<double>& work) {
    // Stencil weights of an order >= 1 difference sum to zero; subtracting
    // f(x) keeps constants exactly annihilated.
    work.assign(x.begin(), x.end());
    const double base = f(x);
    double total = 0.0;
    for (std::size_t p = 0; p < s.weights.size(); ++p) {
        for (std::size_t r = 0; r < s.directions.size(); ++r) {
            work[s.directions[r]] = x[s.directions[r]] + s.offsets[p][r];
        }
        total += s.weights[p] * (f(work) - base);
    }
    return total;
}

}  // namespace

StroockResult stroock_kernels(const Functional& f, std::size_t max_order, const SamplePool& pool,
                              double fd_step) {
    if (pool.size() == 0) throw std::invalid_argument("stroock_kernels: empty pool");
    if (!(fd_step > 0.0)) throw std::domain_error("stroock_kernels: fd_step must be > 0");
    if (max_order > kStroockMaxOrder) {
        throw std::domain_error("stroock_kernels: max_order must be <= " +
                                std::to_string(kStroockMaxOrder));
    }
    const std::size_t d = pool.dim();
    StroockResult result{ChaosExpansion(d), ChaosExpansion(d), ChaosExpansion(d)};
    constexpr double eps = std::numeric_limits<double>::epsilon();

    RunningStats abs_f;
    {
        RunningStats mean_f;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            const double v = f(pool.row(i));
            mean_f.push(v);
            abs_f.push(std::abs(v));
        }
        result.kernels.add_term(SymmetricKernel::scalar(d, mean_f.mean()));
        result.std_errors.add_term(SymmetricKernel::scalar(d, mean_f.std_error()));
        result.step_errors.add_term(SymmetricKernel::scalar(d, 0.0));
    }

    std::vector<double> work(d);
    for (std::size_t n = 1; n <= max_order; ++n) {
        SymmetricKernel est(n, d), se(n, d), step(n, d);
        const double nfact = factorial(n);
        for (const auto& idx : sorted_multi_indices(n, d)) {
            const Stencil coarse = mixed_stencil(idx, fd_step);
            const Stencil fine = mixed_stencil(idx, 0.5 * fd_step);
            RunningStats sc, sf;
            for (std::size_t i = 0; i < pool.size(); ++i) {
                const auto x = pool.row(i);
                sc.push(apply_stencil(f, coarse, x, work));
                sf.push(apply_stencil(f, fine, x, work));
            }
            const double step_err = 4.0 / 3.0 * std::abs(sc.mean() - sf.mean());
            const double rounding = 4.0 * eps * coarse.abs_weight_sum * abs_f.mean();
            const double total = std::sqrt(sc.std_error() * sc.std_error() + step_err * step_err +
                                           rounding * rounding);
            est.set(idx, sc.mean() / nfact);
            se.set(idx, total / nfact);
            step.set(idx, step_err / nfact);
        }
        result.kernels.add_term(est);
        result.std_errors.add_term(se);
        result.step_errors.add_term(step);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Adaptedness and the Clark integrand

ChaosExpansion restrict_to_prefix(const ChaosExpansion& f, std::size_t k) {
    if (k > f.dim()) throw std::out_of_range("restrict_to_prefix: k exceeds dim");
    ChaosExpansion out(f.dim());
    for (const auto& [n, kernel] : f.terms()) {
        SymmetricKernel kept(n, f.dim());
        for (const auto& [idx, v] : kernel.entries()) {
            // sorted: the largest direction is last
            if (idx.empty() || idx.back() < k) kept.set(idx, v);
        }
        out.add_term(kept);
    }
    return out;
}

ChaosExpansion project_adapted(const ChaosExpansion& f, std::size_t slot) {
    if (slot < 1 || slot > f.dim()) {
        throw std::out_of_range("project_adapted: slot " + std::to_string(slot) +
                                " outside [1, " + std::to_string(f.dim()) + "]");
    }
    return restrict_to_prefix(f, slot);
}

std::vector<ChaosExpansion> clark_integrand(const ChaosExpansion& f) {
    const auto grad = derivative(f);
    const double density = std::sqrt(static_cast<double>(f.dim()));
    std::vector<ChaosExpansion> out;
    out.reserve(f.dim());
    for (std::size_t j = 0; j < f.dim(); ++j) {
        out.push_back(density * restrict_to_prefix(grad.components[j], j));
    }
    return out;
}

double clark_reconstruct(double mean, std::span<const CompiledExpansion> integrand,
                         std::span<const double> coords) {
    require_dims(integrand.size(), coords.size(), "clark_reconstruct");
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(coords.size()));
    double total = mean;
    for (std::size_t j = 0; j < coords.size(); ++j) {
        total += integrand[j](coords) * coords[j] * inv_sqrt_n;
    }
    return total;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const ChaosExpansion& f) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& [n, kernel] : f.terms()) {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& [idx, v] : kernel.entries()) {
            entries.push_back({{"index", idx}, {"coeff", v}});
        }
        terms.push_back({{"order", n}, {"entries", std::move(entries)}});
    }
    j = nlohmann::json{{"dim", f.dim()}, {"terms", std::move(terms)}};
}

ChaosExpansion chaos_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("dim") || !j.contains("terms")) {
        throw std::invalid_argument("ChaosExpansion JSON: expected {dim, terms}");
    }
    const auto dim = j.at("dim").get<std::size_t>();
    ChaosExpansion f(dim);
    for (const auto& term : j.at("terms")) {
        const auto order = term.at("order").get<std::size_t>();
        SymmetricKernel k(order, dim);
        for (const auto& e : term.at("entries")) {
            auto idx = e.at("index").get<MultiIndex>();
            if (idx.size() != order) {
                throw std::invalid_argument("ChaosExpansion JSON: index length != order");
            }
            if (!std::is_sorted(idx.begin(), idx.end())) {
                throw std::invalid_argument("ChaosExpansion JSON: index must be sorted");
            }
            k.add(std::move(idx), e.at("coeff").get<double>());
        }
        f.add_term(k);
    }
    return f;
}

}  // namespace wienerlab
