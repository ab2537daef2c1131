#pragma once

#include "wienerlab/chaos.hpp"
#include "wienerlab/gaussian.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace wienerlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Step process a_j on N slots whose slot-j value depends only on the
/// coordinates of earlier slots.
///
/// Function-backed processes only ever see the prefix x[0..j), so they are
/// adapted by construction. Chaos-backed processes are checked on
/// construction: slot j may only use directions < j.
class AdaptedStepProcess {
public:
    using SlotFunction = std::function<double(std::size_t slot, std::span<const double> past)>;

    static AdaptedStepProcess from_function(std::size_t n_slots, SlotFunction fn);
    static AdaptedStepProcess from_chaos(std::vector<ChaosExpansion> slots);
    static AdaptedStepProcess deterministic(std::vector<double> values);

    std::size_t n_slots() const { return n_slots_; }
    bool chaos_backed() const { return !chaos_.empty(); }
    const std::vector<ChaosExpansion>& chaos_slots() const { return chaos_; }

    double value(std::size_t slot, std::span<const double> coords) const;
    std::vector<double> values(std::span<const double> coords) const;

private:
    AdaptedStepProcess() = default;

    std::size_t n_slots_ = 0;
    SlotFunction fn_;
    std::vector<ChaosExpansion> chaos_;
    std::vector<CompiledExpansion> compiled_;
};

/// sum_j a_j * (W_{(j+1)/N} - W_{j/N}).
double ito_integral(const AdaptedStepProcess& k, const Path& path);

/// Wick exponential E(I(h)) = exp(delta h - |h|^2 / 2) with its truncated
/// chaos form sum_{n <= cap} I_n(h^{(x)n}) / n!.
class WickExponential {
public:
    explicit WickExponential(CameronMartinVector h, std::size_t order_cap = kDefaultOrderCap);

    const CameronMartinVector& direction() const { return h_; }
    std::size_t order_cap() const { return cap_; }
    const ChaosExpansion& truncated() const { return chaos_; }

    /// Exact value exp(<h, x> - |h|^2 / 2).
    double operator()(std::span<const double> coords) const;

    /// exp(|h|^2) |h|^{2(cap+1)} / (cap+1)!, a bound on the squared L^2
    /// distance between the exact and truncated forms.
    double truncation_bound() const;

    /// Exact squared L^2 remainder sum_{n > cap} |h|^{2n} / n!.
    double truncation_error_sq() const;

    /// ||E(I(h))||_p = exp((p - 1) |h|^2 / 2).
    static double lp_norm(double h_norm, double p);

private:
    CameronMartinVector h_;
    std::size_t cap_;
    ChaosExpansion chaos_;
};

/// exp(-sum u_j dW_j - 1/2 sum u_j^2 / N) with u evaluated at coords.
double girsanov_weight(const AdaptedStepProcess& u, std::span<const double> coords);

/// Coordinates of the drifted path W + integral_0^. u_s ds:
/// x_j + u_j(x) / sqrt(N).
Coords girsanov_shift(const AdaptedStepProcess& u, std::span<const double> coords);

/// Carleman-Fredholm determinant det_2(I + A) = det(I + A) exp(-trace A).
double det2(const Matrix& a);

/// |det2(I+A) det2(I+B) - exp(trace AB) det2((I+A)(I+B))|.
double det2_product_residual(const Matrix& a, const Matrix& b);

/// Spectral norm via power iteration on A^T A.
double operator_norm(const Matrix& a, int max_iter = 200);

/// Perturbation u of the identity in coordinates, T(x) = x + u(x).
struct ShiftMap {
    using Field = std::function<Vector(std::span<const double>)>;
    using Jacobian = std::function<Matrix(std::span<const double>)>;

    std::size_t dim = 0;
    Field field;
    /// Exact Jacobian; when empty, central differences with step 1e-4.
    Jacobian jacobian;
    /// Certified sup of ||grad u|| (operator norm); Ramer requires < 1.
    std::optional<double> operator_norm_bound;
    /// Certified sup of the Hilbert-Schmidt norm.
    std::optional<double> hs_norm_bound;

    Vector operator()(std::span<const double> x) const { return field(x); }
    Matrix jacobian_at(std::span<const double> x) const;

    static ShiftMap from_chaos(const HValuedExpansion& u);
    /// Coordinate form of an adapted drift: u_j(x) / sqrt(N). Requires a
    /// chaos-backed process so the Jacobian is exact.
    static ShiftMap from_adapted(const AdaptedStepProcess& u);
    static ShiftMap linear(const Matrix& a);
};

inline constexpr double kJacobianStep = 1e-4;
inline constexpr double kCertificateMargin = 1.1;

/// Sets both norm bounds to 1.1 times the largest value seen over the first
/// `max_rows` pool rows (operator norm by power iteration).
ShiftMap certify(ShiftMap u, const SamplePool& pool, std::size_t max_rows = 2000);

/// delta u(x) = <u(x), x> - trace grad u(x).
double finite_dim_divergence(const ShiftMap& u, std::span<const double> x);

/// |det2(I + grad u)| exp(-delta u - |u|^2 / 2). Throws std::domain_error
/// when u carries no certificate or the certified bound is >= 1.
double ramer_density(const ShiftMap& u, std::span<const double> x);

struct DensityReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
    /// Sample mean of the density weight.
    double mean_weight = 1.0;
    bool pass = true;

    double estimate() const { return lhs; }
};

void to_json(nlohmann::json& j, const DensityReport& r);

inline constexpr double kDensityRejectSe = 4.0;

/// E[F(T x) Lambda_u(x)] against E[Lambda_u] E[F] for an anticipative shift.
DensityReport verify_change_of_measure(const Functional& f, const ShiftMap& u,
                                       const SamplePool& pool);

/// E[F(x + U(x)) Lambda(x)] against E[F] for an adapted drift.
DensityReport verify_change_of_measure(const Functional& f, const AdaptedStepProcess& u,
                                       const SamplePool& pool);

}  // namespace wienerlab
