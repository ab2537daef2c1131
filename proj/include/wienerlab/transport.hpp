#pragma once

#include "wienerlab/gaussian.hpp"
#include "wienerlab/inequality.hpp"
#include "wienerlab/measure.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace wienerlab {

/// Weighted empirical measure; row i of `points` is atom i.
class PointCloud {
public:
    /// Uniform weights 1/n.
    explicit PointCloud(Matrix points);
    /// Weights must be finite, nonnegative and sum to 1 within 1e-9; they
    /// are rescaled so the sum is 1 to rounding.
    PointCloud(Matrix points, Vector weights);

    static PointCloud from_rows(const SamplePool& pool, std::size_t first, std::size_t count,
                                std::size_t dims);

    std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(points_.cols()); }
    const Matrix& points() const { return points_; }
    const Vector& weights() const { return weights_; }
    bool uniform() const;

    /// First `m` coordinates of every atom.
    PointCloud project(std::size_t m) const;

    /// Header `weight,x1,...,xd`, 17 significant digits.
    void write_csv(std::ostream& os) const;
    static PointCloud read_csv(std::istream& is);

private:
    Matrix points_;
    Vector weights_;
};

struct PlanEntry {
    std::size_t i = 0;
    std::size_t j = 0;
    double mass = 0.0;
};

struct TransportPlan {
    std::shared_ptr<const PointCloud> source;
    std::shared_ptr<const PointCloud> target;
    /// Nonzero cells sorted by (i, j).
    std::vector<PlanEntry> entries;
    double cost = 0.0;
    /// Dual potentials with u_i + v_j <= c_ij (exact solvers only).
    std::vector<double> u;
    std::vector<double> v;
    /// Complementary-slackness residual: max of dual infeasibility and
    /// |c_ij - u_i - v_j| over the support. NaN for entropic plans.
    double optimality_residual = 0.0;
    /// max |row sum - a_i|, |col sum - b_j|.
    double marginal_error = 0.0;
    std::optional<double> entropic_epsilon;
    std::string solver;

    Matrix dense() const;
    /// Header `i,j,mass`.
    void write_csv(std::ostream& os) const;
};

struct SolveOptions {
    /// Sinkhorn in log scale instead of an exact solver.
    bool entropic = false;
    double epsilon = 1e-2;
    std::size_t max_size = 4096;
    int sinkhorn_max_iter = 5000;
};

Matrix squared_distances(const PointCloud& a, const PointCloud& b);

/// Exact optimal plan for squared Euclidean cost. Uniform clouds of equal
/// size use the Hungarian method, other weights a transportation network
/// simplex. Throws std::length_error above `max_size` atoms and
/// std::invalid_argument on mismatched dimensions.
TransportPlan solve_discrete_ot(const PointCloud& source, const PointCloud& target,
                                const SolveOptions& options = {});

/// max over sampled k-cycles of support pairs of sum <y_i, x_{s(i)} - x_i>.
double cyclic_monotonicity_residual(const TransportPlan& plan, std::size_t cycle_len,
                                    std::size_t trials, std::uint64_t seed = 0);
/// Every subset of size <= max_len and every permutation of it.
double cyclic_monotonicity_residual_exhaustive(const TransportPlan& plan, std::size_t max_len = 4);

using Density = Functional;
using Pushforward = std::function<Coords(std::span<const double>)>;

struct WassersteinOptions {
    std::size_t repetitions = 20;
    /// Candidates per target atom for importance resampling.
    std::size_t candidate_factor = 8;
    /// Subtracts half the self-transport cost of each side, computed on
    /// independent copies; needs twice the pool rows.
    bool debiased = true;
    /// Only the first `dims` coordinates enter the cost (0 = all).
    std::size_t dims = 0;
};

struct WassersteinEstimate {
    double estimate = 0.0;
    /// Standard error of the mean over repetitions.
    double std_error = 0.0;
    std::vector<double> repetitions;
    double mean_density = 1.0;
    double effective_sample_fraction = 1.0;
    /// E[L] on the pool deviates from 1 by more than 4 SE.
    bool renormalized = false;
    /// Effective sample size below n_points.
    bool degenerate = false;
};

void to_json(nlohmann::json& j, const WassersteinEstimate& w);

/// d_H^2(L mu, mu) from disjoint pool blocks: n_points plain rows against
/// n_points rows drawn from `candidate_factor * n_points` rows by systematic
/// resampling with weights L.
WassersteinEstimate wasserstein_sq(const Density& l, const SamplePool& pool, std::size_t n_points,
                                   const WassersteinOptions& options = {});

/// d_H^2(L1 mu, L2 mu); an empty density stands for mu itself.
WassersteinEstimate wasserstein_sq_between(const Density& l1, const Density& l2,
                                           const SamplePool& pool, std::size_t n_points,
                                           const WassersteinOptions& options = {});

/// d_H^2(T mu, mu) using pushed-forward rows directly, for targets whose
/// density ratio has no second moment.
WassersteinEstimate wasserstein_sq_pushforward(const Pushforward& t, const SamplePool& pool,
                                               std::size_t n_points,
                                               const WassersteinOptions& options = {});

/// d_H^2(L mu, mu) <= 2 E[L log L]. The right side is Monte Carlo unless a
/// closed form is supplied.
InequalityReport talagrand_check(const Density& l, const SamplePool& pool, std::size_t n_points,
                                 std::optional<double> rhs_closed_form = std::nullopt,
                                 const WassersteinOptions& options = {});

/// d(nu1, nu2) <= d(nu1, mu) + d(nu2, mu) from three estimates.
InequalityReport triangle_check(const Density& l1, const Density& l2, const SamplePool& pool,
                                std::size_t n_points, const WassersteinOptions& options = {});

struct DimMonotonicity {
    std::vector<std::size_t> dims;
    std::vector<WassersteinEstimate> estimates;
    /// est[k+1] >= est[k] - 2 SE for every consecutive pair.
    bool nondecreasing = true;
};

/// Estimates under the projections onto the first m coordinates, sharing
/// one set of resampled atoms across m.
DimMonotonicity dim_monotonicity_check(const Density& l, std::span<const std::size_t> dims,
                                       const SamplePool& pool, std::size_t n_points,
                                       const WassersteinOptions& options = {});

/// Brenier map from N(0, I) to N(0, cov): T(x) = A x with A = cov^{1/2}.
struct GaussianBrenier {
    Matrix a;
    Matrix cov;

    Vector apply(std::span<const double> x) const;
    /// phi(x) = 1/2 <(A - I) x, x>, so T = I + grad phi.
    double potential(std::span<const double> x) const;
    Matrix potential_hessian() const;
    /// Smallest eigenvalue of the potential's Hessian.
    double min_hessian_eigenvalue() const;
    /// Hessian >= -I + 1e-12.
    bool one_convex() const;
};

GaussianBrenier gaussian_brenier(const Matrix& cov_target);

/// Lambda(x) = det2(I + hess phi) exp(-L phi - |grad phi|^2 / 2),
/// L phi = <grad phi, x> - trace hess phi.
double monge_ampere_lambda(const GaussianBrenier& t, std::span<const double> x);

/// dN(0, cov)/dN(0, I) at y.
double gaussian_density_ratio(const Matrix& cov, std::span<const double> y);

/// max |Lambda(x) L(T x) - 1| over the rows of `points`.
double monge_ampere_residual(const Matrix& cov_target, const Matrix& points);

/// mu(A) <= exp(-E[q_A^2] / 2) for A = {x_1 >= a}, q_A = (a - x_1)_+;
/// mu(A) is exact.
InequalityReport gauge_check(double a, const SamplePool& pool);

}  // namespace wienerlab
