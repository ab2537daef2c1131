#pragma once

// Finite Wiener-chaos expansions over d basis directions.
//
// Normalization: a SymmetricKernel stores the entries f[i1,...,in] of a
// fully symmetric tensor, keyed by the sorted multi-index. Permuted indices
// share the stored value, so
//
//     ||f||^2 = sum over sorted idx of multiplicity(idx) * f[idx]^2,
//
// with multiplicity(idx) = n! / prod_j m_j! for a multi-index visiting
// direction j exactly m_j times. The multiple integral then satisfies
// E[I_n(f)^2] = n! ||f||^2, and on a sorted index it evaluates to
//
//     I_n(e_{i1} (x) ... (x) e_{in}) symmetrized = prod_j H_{m_j}(x_j)
//
// with probabilists' Hermite polynomials H_k. Hence I_n(f)(x) =
// sum_idx multiplicity(idx) * f[idx] * prod_j H_{m_j}(x_j).

#include "wienerlab/gaussian.hpp"
#include "wienerlab/stats.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace wienerlab {

using MultiIndex = std::vector<std::uint32_t>;

inline constexpr std::size_t kDefaultOrderCap = 6;

/// n! / prod m_j! for a sorted multi-index.
double multiplicity(const MultiIndex& idx);

double factorial(std::size_t n);

/// Probabilists' Hermite polynomial H_n(x).
double hermite(std::size_t n, double x);

/// All sorted multi-indices of the given order over `dim` directions.
std::vector<MultiIndex> sorted_multi_indices(std::size_t order, std::size_t dim);

class SymmetricKernel {
public:
    SymmetricKernel(std::size_t order, std::size_t dim);

    std::size_t order() const { return order_; }
    std::size_t dim() const { return dim_; }

    /// Tensor entry for any (not necessarily sorted) index.
    double operator()(MultiIndex idx) const;
    void set(MultiIndex idx, double value);
    void add(MultiIndex idx, double value);

    const std::map<MultiIndex, double>& entries() const { return entries_; }
    bool is_zero() const;

    double norm_sq() const;
    double norm() const;

    /// Drop stored entries with |coeff| <= tol.
    void prune(double tol = 0.0);

    SymmetricKernel& operator+=(const SymmetricKernel& other);
    SymmetricKernel& operator*=(double s);

    static SymmetricKernel scalar(std::size_t dim, double c);
    static SymmetricKernel basis(std::size_t dim, std::size_t j);
    static SymmetricKernel from_vector(std::span<const double> h);
    static SymmetricKernel tensor_power(std::span<const double> h, std::size_t n);

    /// Symmetrized tensor product f (x)^ g.
    static SymmetricKernel symmetric_product(const SymmetricKernel& f, const SymmetricKernel& g);

    friend bool operator==(const SymmetricKernel&, const SymmetricKernel&) = default;

private:
    MultiIndex canonical(MultiIndex idx) const;

    std::size_t order_;
    std::size_t dim_;
    std::map<MultiIndex, double> entries_;
};

SymmetricKernel operator+(SymmetricKernel a, const SymmetricKernel& b);
SymmetricKernel operator*(double s, SymmetricKernel f);

/// <f, g> in L^2[0,1]^n.
double kernel_inner(const SymmetricKernel& f, const SymmetricKernel& g);

/// Contraction of order m, symmetrized: order p + q - 2m.
SymmetricKernel contract(const SymmetricKernel& f, const SymmetricKernel& g, std::size_t m);

/// ||f (x)_m g||^2 of the contraction before symmetrization, as a function
/// on [0,1]^{p+q-2m}.
double unsymmetrized_contraction_norm_sq(const SymmetricKernel& f, const SymmetricKernel& g,
                                         std::size_t m);

/// Contract one slot of f against the vector h.
SymmetricKernel contract_vector(const SymmetricKernel& f, std::span<const double> h);

/// ||f (x)_1 g||; zero exactly when I_p(f) and I_q(g) are independent.
double independence_residual(const SymmetricKernel& f, const SymmetricKernel& g);

/// F = sum_n I_n(f_n), finitely many orders.
class ChaosExpansion {
public:
    explicit ChaosExpansion(std::size_t dim);

    std::size_t dim() const { return dim_; }
    const std::map<std::size_t, SymmetricKernel>& terms() const { return terms_; }

    /// Kernel of order n, or nullptr when absent.
    const SymmetricKernel* term(std::size_t n) const;

    /// Adds I_n(f) to the expansion.
    void add_term(const SymmetricKernel& f);

    std::size_t max_order() const;

    double mean() const;
    /// E[F^2] = sum_n n! ||f_n||^2.
    double l2_norm_sq() const;
    double variance() const;

    void prune(double tol = 0.0);

    ChaosExpansion& operator+=(const ChaosExpansion& other);
    ChaosExpansion& operator-=(const ChaosExpansion& other);
    ChaosExpansion& operator*=(double s);

    static ChaosExpansion constant(std::size_t dim, double c);
    /// I_1(h) = delta h.
    static ChaosExpansion first_order(std::span<const double> h);
    /// I_n(f).
    static ChaosExpansion multiple_integral(const SymmetricKernel& f);

    friend bool operator==(const ChaosExpansion&, const ChaosExpansion&) = default;

private:
    std::size_t dim_;
    std::map<std::size_t, SymmetricKernel> terms_;
};

ChaosExpansion operator+(ChaosExpansion a, const ChaosExpansion& b);
ChaosExpansion operator-(ChaosExpansion a, const ChaosExpansion& b);
ChaosExpansion operator*(double s, ChaosExpansion f);

/// E[F G] = sum_n n! <f_n, g_n>.
double expectation_product(const ChaosExpansion& f, const ChaosExpansion& g);

/// Exact product through the multiplication formula. Throws
/// std::domain_error when the result would exceed `order_cap`.
ChaosExpansion multiply(const ChaosExpansion& f, const ChaosExpansion& g,
                        std::size_t order_cap = kDefaultOrderCap);

double evaluate(const ChaosExpansion& f, std::span<const double> coords);

/// Flattened evaluator for repeated pointwise evaluation in Monte Carlo loops.
class CompiledExpansion {
public:
    explicit CompiledExpansion(const ChaosExpansion& f);

    std::size_t dim() const { return dim_; }
    double operator()(std::span<const double> coords) const;

private:
    struct Factor {
        std::uint32_t direction;
        std::uint32_t power;
    };
    std::size_t dim_;
    std::size_t max_power_ = 0;
    std::vector<std::uint32_t> used_directions_;
    std::vector<double> coeffs_;
    std::vector<std::uint32_t> offsets_;
    std::vector<Factor> factors_;
};

/// H-valued expansion: component j is the coefficient along basis direction j.
struct HValuedExpansion {
    std::vector<ChaosExpansion> components;

    HValuedExpansion() = default;
    explicit HValuedExpansion(std::size_t dim);
    explicit HValuedExpansion(std::vector<ChaosExpansion> c) : components(std::move(c)) {}

    std::size_t dim() const { return components.size(); }
    /// Constant field h.
    static HValuedExpansion constant(std::span<const double> h);
};

/// E[(u, v)_H].
double expectation_h_inner(const HValuedExpansion& u, const HValuedExpansion& v);

/// Evaluate every component at coords.
std::vector<double> evaluate(const HValuedExpansion& u, std::span<const double> coords);

/// Gross-Sobolev derivative.
HValuedExpansion derivative(const ChaosExpansion& f);

/// Divergence (Skorokhod integral), the adjoint of derivative.
ChaosExpansion divergence(const HValuedExpansion& u);

/// L I_n = n I_n.
ChaosExpansion number_op(const ChaosExpansion& f);

/// P_t I_n = e^{-nt} I_n. Throws for t < 0.
ChaosExpansion ou_semigroup(const ChaosExpansion& f, double t);

/// Order-n kernel scaled by weight(n).
template <typename Weight>
ChaosExpansion spectral_apply(const ChaosExpansion& f, Weight weight) {
    ChaosExpansion out(f.dim());
    for (const auto& [n, kernel] : f.terms()) {
        SymmetricKernel k = kernel;
        k *= weight(n);
        out.add_term(k);
    }
    return out;
}

/// Monte Carlo Mehler formula: P_t f(x) = E[f(e^{-t} x + sqrt(1 - e^{-2t}) Y)].
Estimate mehler_apply(const Functional& f, double t, std::span<const double> x,
                      const SamplePool& pool);

/// Expansion of w -> F(w + h).
ChaosExpansion cm_shift_chaos(const ChaosExpansion& f, const CameronMartinVector& h);

/// Kernels E[grad^n f] / n! estimated by central differences over a pool.
struct StroockResult {
    ChaosExpansion kernels;
    /// Combined standard error per coefficient (statistical, step, rounding).
    ChaosExpansion std_errors;
    /// |D(h) - D(h/2)| * 4/3, the step-halving estimate of discretization error.
    ChaosExpansion step_errors;
};

inline constexpr std::size_t kStroockMaxOrder = 4;
inline constexpr double kStroockDefaultStep = 1e-3;

StroockResult stroock_kernels(const Functional& f, std::size_t max_order, const SamplePool& pool,
                              double fd_step = kStroockDefaultStep);

/// Keep only coefficients whose directions are all < k (0 <= k <= dim):
/// conditional expectation on the first k slots.
ChaosExpansion restrict_to_prefix(const ChaosExpansion& f, std::size_t k);

/// E[F | F_{j/N}] for 1 <= slot <= dim.
ChaosExpansion project_adapted(const ChaosExpansion& f, std::size_t slot);

/// Predictable Clark integrand: entry j (0-based) is the value of
/// E[D_s F | F_s] on slot j, i.e. sqrt(N) * E[(grad F)_j | first j slots].
std::vector<ChaosExpansion> clark_integrand(const ChaosExpansion& f);

/// E[F] + sum_j integrand_j(x) * dW_j with dW_j = x_j / sqrt(N).
double clark_reconstruct(double mean, std::span<const CompiledExpansion> integrand,
                         std::span<const double> coords);

void to_json(nlohmann::json& j, const ChaosExpansion& f);
ChaosExpansion chaos_from_json(const nlohmann::json& j);

}  // namespace wienerlab
