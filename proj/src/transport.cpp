#include "wienerlab/transport.hpp"
#include "wienerlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace wienerlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Point clouds

PointCloud::PointCloud(Matrix points) : points_(std::move(points)) {
    if (points_.rows() == 0) throw std::invalid_argument("PointCloud: no points");
    weights_ = Vector::Constant(points_.rows(), 1.0 / static_cast<double>(points_.rows()));
}

PointCloud::PointCloud(Matrix points, Vector weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
    if (points_.rows() == 0) throw std::invalid_argument("PointCloud: no points");
    if (weights_.size() != points_.rows()) {
        throw std::invalid_argument("PointCloud: weight count does not match point count");
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < weights_.size(); ++i) {
        const double w = weights_(i);
        if (!std::isfinite(w) || w < 0.0) {
            throw std::invalid_argument("PointCloud: weight " + std::to_string(i) +
                                        " is negative or not finite");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("PointCloud: weights sum to " + format17(sum) + ", not 1");
    }
    weights_ /= sum;
}

PointCloud PointCloud::from_rows(const SamplePool& pool, std::size_t first, std::size_t count,
                                 std::size_t dims) {
    if (dims == 0 || dims > pool.dim()) dims = pool.dim();
    if (first + count > pool.size()) throw std::out_of_range("PointCloud::from_rows: past pool end");
    Matrix pts(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dims));
    for (std::size_t r = 0; r < count; ++r) {
        const auto row = pool.row(first + r);
        for (std::size_t c = 0; c < dims; ++c) pts(r, c) = row[c];
    }
    return PointCloud(std::move(pts));
}

bool PointCloud::uniform() const {
    const double w = 1.0 / static_cast<double>(size());
    return (weights_.array() - w).abs().maxCoeff() <= 1e-15;
}

PointCloud PointCloud::project(std::size_t m) const {
    if (m == 0 || m > dim()) throw std::invalid_argument("PointCloud::project: bad dimension");
    return PointCloud(points_.leftCols(static_cast<Eigen::Index>(m)), weights_);
}

void PointCloud::write_csv(std::ostream& os) const {
    os << "weight";
    for (std::size_t c = 0; c < dim(); ++c) os << ",x" << (c + 1);
    os << '\n';
    for (Eigen::Index r = 0; r < points_.rows(); ++r) {
        os << format17(weights_(r));
        for (Eigen::Index c = 0; c < points_.cols(); ++c) os << ',' << format17(points_(r, c));
        os << '\n';
    }
}

PointCloud PointCloud::read_csv(std::istream& is) {
    auto split = [](std::string line) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> out;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        return out;
    };
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("PointCloud CSV: missing header");
    const auto header = split(line);
    if (header.size() < 2 || header[0] != "weight") {
        throw std::invalid_argument("PointCloud CSV: header must be weight,x1,...,xd");
    }
    for (std::size_t c = 1; c < header.size(); ++c) {
        if (header[c] != "x" + std::to_string(c)) {
            throw std::invalid_argument("PointCloud CSV: unexpected column '" + header[c] + "'");
        }
    }
    const std::size_t d = header.size() - 1;
    std::vector<double> w, xs;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        if (cells.size() != d + 1) {
            throw std::invalid_argument("PointCloud CSV: line " + std::to_string(line_no) +
                                        " has " + std::to_string(cells.size()) + " columns");
        }
        for (std::size_t c = 0; c <= d; ++c) {
            char* end = nullptr;
            const double v = std::strtod(cells[c].c_str(), &end);
            if (end == cells[c].c_str() || *end != '\0') {
                throw std::invalid_argument("PointCloud CSV: bad number on line " +
                                            std::to_string(line_no));
            }
            (c == 0 ? w : xs).push_back(v);
        }
    }
    if (w.empty()) throw std::invalid_argument("PointCloud CSV: no rows");
    Matrix pts(static_cast<Eigen::Index>(w.size()), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < w.size(); ++r)
        for (std::size_t c = 0; c < d; ++c) pts(r, c) = xs[r * d + c];
    return PointCloud(std::move(pts), Eigen::Map<Vector>(w.data(), static_cast<Eigen::Index>(w.size())));
}

// ---------------------------------------------------------------------------
// Plans

Matrix TransportPlan::dense() const {
    const auto n = static_cast<Eigen::Index>(source ? source->size() : 0);
    const auto m = static_cast<Eigen::Index>(target ? target->size() : 0);
    Matrix out = Matrix::Zero(n, m);
    for (const auto& e : entries) out(e.i, e.j) += e.mass;
    return out;
}

void TransportPlan::write_csv(std::ostream& os) const {
    os << "i,j,mass\n";
    for (const auto& e : entries) os << e.i << ',' << e.j << ',' << format17(e.mass) << '\n';
}

Matrix squared_distances(const PointCloud& a, const PointCloud& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("squared_distances: dimension mismatch");
    // coordinates as columns so each atom is contiguous
    const Matrix xt = a.points().transpose();
    const Matrix yt = b.points().transpose();
    const Eigen::Index d = xt.rows();
    Matrix c(xt.cols(), yt.cols());
    for (Eigen::Index j = 0; j < yt.cols(); ++j) {
        const double* y = yt.data() + j * d;
        for (Eigen::Index i = 0; i < xt.cols(); ++i) {
            const double* x = xt.data() + i * d;
            double s = 0.0;
            for (Eigen::Index k = 0; k < d; ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
            c(i, j) = s;
        }
    }
    return c;
}

namespace {

struct Solution {
    std::vector<PlanEntry> entries;
    std::vector<double> u, v;
};

/// Shortest augmenting paths with potentials; n <= m, rows all assigned.
Solution hungarian(const Matrix& cost, double row_mass) {
    // row-major so the inner scan over columns is contiguous
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> c = cost;
    const auto n = static_cast<std::size_t>(c.rows());
    const auto m = static_cast<std::size_t>(c.cols());
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    std::vector<char> used(m + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            const double* row = c.data() + (i0 - 1) * m;
            const double ui = u[i0];
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = row[j - 1] - ui - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    Solution s;
    for (std::size_t j = 1; j <= m; ++j) {
        if (p[j] != 0) s.entries.push_back({p[j] - 1, j - 1, row_mass});
    }
    s.u.assign(u.begin() + 1, u.end());
    s.v.assign(v.begin() + 1, v.end());
    return s;
}

/// Transportation simplex: northwest-corner start, MODI duals, cycle pivots
/// on the basis spanning tree.
Solution network_simplex(const Matrix& c, const Vector& a, const Vector& b) {
    const std::size_t n = static_cast<std::size_t>(c.rows());
    const std::size_t m = static_cast<std::size_t>(c.cols());
    struct Cell {
        std::size_t i, j;
        double x;
    };
    std::vector<Cell> basis;
    basis.reserve(n + m - 1);
    {
        std::size_t i = 0, j = 0;
        double ra = a(0), rb = b(0);
        while (true) {
            const double x = std::min(ra, rb);
            basis.push_back({i, j, x});
            ra -= x;
            rb -= x;
            if (i == n - 1 && j == m - 1) break;
            if (j == m - 1 || (i < n - 1 && ra <= rb)) {
                ++i;
                ra = a(static_cast<Eigen::Index>(i));
            } else {
                ++j;
                rb = b(static_cast<Eigen::Index>(j));
            }
        }
    }

    const std::size_t nodes = n + m;
    std::vector<double> u(n), v(m);
    std::vector<std::vector<std::size_t>> adj(nodes);
    std::vector<std::size_t> parent_edge(nodes);
    std::vector<char> seen(nodes);
    const double scale = 1.0 + c.cwiseAbs().maxCoeff();
    const std::size_t max_iter = 50 * (n + m) * (n + m) + 1000;

    auto rebuild_adjacency = [&] {
        for (auto& l : adj) l.clear();
        for (std::size_t e = 0; e < basis.size(); ++e) {
            adj[basis[e].i].push_back(e);
            adj[n + basis[e].j].push_back(e);
        }
    };
    auto other_end = [&](std::size_t e, std::size_t node) {
        return node < n ? n + basis[e].j : basis[e].i;
    };
    // BFS from `root`, recording for each node the tree edge to its parent
    auto bfs = [&](std::size_t root, auto&& visit) {
        std::fill(seen.begin(), seen.end(), 0);
        std::queue<std::size_t> q;
        q.push(root);
        seen[root] = 1;
        while (!q.empty()) {
            const std::size_t node = q.front();
            q.pop();
            for (std::size_t e : adj[node]) {
                const std::size_t next = other_end(e, node);
                if (seen[next]) continue;
                seen[next] = 1;
                parent_edge[next] = e;
                visit(node, next, e);
                q.push(next);
            }
        }
    };

    for (std::size_t iter = 0;; ++iter) {
        if (iter > max_iter) throw std::runtime_error("network_simplex: iteration limit reached");
        rebuild_adjacency();
        u[0] = 0.0;
        bfs(0, [&](std::size_t node, std::size_t next, std::size_t e) {
            const double cost = c(basis[e].i, basis[e].j);
            if (node < n) v[next - n] = cost - u[node];
            else u[next] = cost - v[node - n];
        });

        double best = -1e-12 * scale;
        std::size_t ei = n, ej = m;
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t i = 0; i < n; ++i) {
                const double r = c(i, j) - u[i] - v[j];
                if (r < best) {
                    best = r;
                    ei = i;
                    ej = j;
                }
            }
        }
        if (ei == n) break;

        // cycle: entering cell plus the tree path from column ej back to row ei
        bfs(ei, [](std::size_t, std::size_t, std::size_t) {});
        std::vector<std::size_t> path;
        for (std::size_t node = n + ej; node != ei;) {
            const std::size_t e = parent_edge[node];
            path.push_back(e);
            node = other_end(e, node);
        }
        double theta = kInf;
        std::size_t leaving = path.front();
        for (std::size_t k = 0; k < path.size(); k += 2) {
            if (basis[path[k]].x < theta) {
                theta = basis[path[k]].x;
                leaving = path[k];
            }
        }
        for (std::size_t k = 0; k < path.size(); ++k) {
            basis[path[k]].x += (k % 2 == 0 ? -theta : theta);
        }
        basis[leaving] = {ei, ej, theta};
    }

    Solution s;
    for (const auto& cell : basis) {
        if (cell.x > 0.0) s.entries.push_back({cell.i, cell.j, cell.x});
    }
    std::sort(s.entries.begin(), s.entries.end(),
              [](const PlanEntry& l, const PlanEntry& r) { return std::tie(l.i, l.j) < std::tie(r.i, r.j); });
    s.u = u;
    s.v = v;
    return s;
}

double log_sum_exp(const std::vector<double>& xs) {
    double mx = -kInf;
    for (double x : xs) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - mx);
    return mx + std::log(s);
}

std::vector<PlanEntry> sinkhorn(const Matrix& c, const Vector& a, const Vector& b, double eps,
                                int max_iter) {
    const auto n = static_cast<std::size_t>(c.rows());
    const auto m = static_cast<std::size_t>(c.cols());
    std::vector<double> f(n, 0.0), g(m, 0.0), la(n), lb(m), work;
    for (std::size_t i = 0; i < n; ++i) la[i] = a(i) > 0.0 ? std::log(a(i)) : -kInf;
    for (std::size_t j = 0; j < m; ++j) lb[j] = b(j) > 0.0 ? std::log(b(j)) : -kInf;
    auto log_plan = [&](std::size_t i, std::size_t j) {
        return la[i] + lb[j] + (f[i] + g[j] - c(i, j)) / eps;
    };
    // warm-started annealing from the cost scale down to the target epsilon
    const double target = eps;
    eps = std::max(target, c.maxCoeff());
    for (int it = 0; it < max_iter; ++it) {
        work.resize(m);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) work[j] = lb[j] + (g[j] - c(i, j)) / eps;
            f[i] = -eps * log_sum_exp(work);
        }
        work.resize(n);
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t i = 0; i < n; ++i) work[i] = la[i] + (f[i] - c(i, j)) / eps;
            g[j] = -eps * log_sum_exp(work);
        }
        if (eps > target) {
            eps = std::max(target, 0.5 * eps);
            continue;
        }
        if (it % 10 == 9) {
            double err = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double row = 0.0;
                for (std::size_t j = 0; j < m; ++j) row += std::exp(log_plan(i, j));
                err = std::max(err, std::abs(row - a(i)));
            }
            if (err < 1e-12) break;
        }
    }
    std::vector<PlanEntry> out;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double mass = std::exp(log_plan(i, j));
            if (mass > 0.0) out.push_back({i, j, mass});
        }
    }
    return out;
}

}  // namespace

TransportPlan solve_discrete_ot(const PointCloud& source, const PointCloud& target,
                                const SolveOptions& options) {
    if (source.dim() != target.dim()) {
        throw std::invalid_argument("solve_discrete_ot: clouds have different dimensions");
    }
    if (source.size() > options.max_size || target.size() > options.max_size) {
        throw std::length_error("solve_discrete_ot: " + std::to_string(source.size()) + " x " +
                                std::to_string(target.size()) + " atoms exceeds the exact cap of " +
                                std::to_string(options.max_size) +
                                "; set SolveOptions::entropic for the Sinkhorn approximation");
    }
    const Matrix c = squared_distances(source, target);
    TransportPlan plan;
    plan.source = std::make_shared<const PointCloud>(source);
    plan.target = std::make_shared<const PointCloud>(target);

    if (options.entropic) {
        if (!(options.epsilon > 0.0)) throw std::invalid_argument("solve_discrete_ot: epsilon must be > 0");
        plan.entries = sinkhorn(c, source.weights(), target.weights(), options.epsilon,
                                options.sinkhorn_max_iter);
        plan.entropic_epsilon = options.epsilon;
        plan.optimality_residual = std::numeric_limits<double>::quiet_NaN();
        plan.solver = "sinkhorn";
    } else {
        Solution s;
        if (source.size() == target.size() && source.uniform() && target.uniform()) {
            s = hungarian(c, 1.0 / static_cast<double>(source.size()));
            plan.solver = "hungarian";
        } else {
            s = network_simplex(c, source.weights(), target.weights());
            plan.solver = "network_simplex";
        }
        plan.entries = std::move(s.entries);
        plan.u = std::move(s.u);
        plan.v = std::move(s.v);
        double residual = 0.0;
        for (Eigen::Index j = 0; j < c.cols(); ++j) {
            for (Eigen::Index i = 0; i < c.rows(); ++i) {
                residual = std::max(residual, plan.u[i] + plan.v[j] - c(i, j));
            }
        }
        for (const auto& e : plan.entries) {
            residual = std::max(residual, std::abs(c(e.i, e.j) - plan.u[e.i] - plan.v[e.j]));
        }
        plan.optimality_residual = residual;
    }

    Vector rows = Vector::Zero(c.rows()), cols = Vector::Zero(c.cols());
    for (const auto& e : plan.entries) {
        plan.cost += e.mass * c(e.i, e.j);
        rows(e.i) += e.mass;
        cols(e.j) += e.mass;
    }
    plan.marginal_error = std::max((rows - source.weights()).cwiseAbs().maxCoeff(),
                                   (cols - target.weights()).cwiseAbs().maxCoeff());
    return plan;
}

// ---------------------------------------------------------------------------
// Cyclic monotonicity

namespace {

struct SupportPair {
    Vector x, y;
};

std::vector<SupportPair> support_pairs(const TransportPlan& plan) {
    if (!plan.source || !plan.target) throw std::invalid_argument("cyclic monotonicity: plan has no clouds");
    std::vector<SupportPair> out;
    for (const auto& e : plan.entries) {
        if (e.mass <= 0.0) continue;
        out.push_back({plan.source->points().row(static_cast<Eigen::Index>(e.i)).transpose(),
                       plan.target->points().row(static_cast<Eigen::Index>(e.j)).transpose()});
    }
    if (out.empty()) throw std::invalid_argument("cyclic monotonicity: empty support");
    return out;
}

double cycle_sum(const std::vector<SupportPair>& s, const std::vector<std::size_t>& idx,
                 const std::vector<std::size_t>& sigma) {
    double total = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        total += s[idx[k]].y.dot(s[idx[sigma[k]]].x - s[idx[k]].x);
    }
    return total;
}

}  // namespace

double cyclic_monotonicity_residual(const TransportPlan& plan, std::size_t cycle_len,
                                    std::size_t trials, std::uint64_t seed) {
    if (cycle_len < 2 || cycle_len > 6) {
        throw std::invalid_argument("cyclic_monotonicity_residual: cycle length must be in [2, 6]");
    }
    const auto s = support_pairs(plan);
    const std::size_t k = std::min(cycle_len, s.size());
    if (k < 2) return 0.0;
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(s.size()), sigma(k);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t r = 0; r < k; ++r) sigma[r] = (r + 1) % k;
    double worst = -kInf;
    for (std::size_t t = 0; t < trials; ++t) {
        for (std::size_t r = 0; r < k; ++r) {
            std::uniform_int_distribution<std::size_t> pick(r, s.size() - 1);
            std::swap(order[r], order[pick(rng)]);
        }
        const std::vector<std::size_t> idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
        worst = std::max(worst, cycle_sum(s, idx, sigma));
    }
    return worst;
}

double cyclic_monotonicity_residual_exhaustive(const TransportPlan& plan, std::size_t max_len) {
    const auto s = support_pairs(plan);
    if (s.size() > 16) {
        throw std::invalid_argument("cyclic_monotonicity_residual_exhaustive: support too large");
    }
    double worst = 0.0;
    const std::size_t n = s.size();
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        const auto size = static_cast<std::size_t>(__builtin_popcount(mask));
        if (size < 2 || size > max_len) continue;
        std::vector<std::size_t> idx;
        for (std::size_t b = 0; b < n; ++b)
            if (mask & (1u << b)) idx.push_back(b);
        std::vector<std::size_t> sigma(size);
        std::iota(sigma.begin(), sigma.end(), 0);
        while (std::next_permutation(sigma.begin(), sigma.end())) {
            worst = std::max(worst, cycle_sum(s, idx, sigma));
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Wasserstein estimation

void to_json(nlohmann::json& j, const WassersteinEstimate& w) {
    j = nlohmann::json{{"estimate", w.estimate},
                       {"se", w.std_error},
                       {"repetitions", w.repetitions},
                       {"mean_density", w.mean_density},
                       {"effective_sample_fraction", w.effective_sample_fraction},
                       {"renormalized", w.renormalized},
                       {"degenerate", w.degenerate}};
}

namespace {

constexpr std::uint32_t kResampleStream = 0x5eed0001u;

struct Sampler {
    const SamplePool& pool;
    std::size_t n_points;
    std::size_t dims;
    std::size_t factor;
    std::uint64_t seed;
    std::size_t cursor = 0;
    std::uint64_t draws = 0;
    RunningStats density;
    double min_ess_fraction = 1.0;
    double ess_fraction_sum = 0.0;
    std::size_t resamples = 0;

    std::size_t rows_needed(bool weighted) const { return weighted ? factor * n_points : n_points; }

    void require(std::size_t rows) const {
        if (cursor + rows > pool.size()) {
            throw std::invalid_argument("wasserstein: pool has " + std::to_string(pool.size()) +
                                        " rows, the requested estimate needs more (raise the sample count)");
        }
    }

    PointCloud plain() {
        require(n_points);
        auto cloud = PointCloud::from_rows(pool, cursor, n_points, dims);
        cursor += n_points;
        return cloud;
    }

    PointCloud reweighted(const Density& l) {
        if (!l) return plain();
        const std::size_t k = factor * n_points;
        require(k);
        std::vector<double> w(k);
        double total = 0.0, total_sq = 0.0;
        for (std::size_t r = 0; r < k; ++r) {
            const double v = l(pool.row(cursor + r));
            if (!std::isfinite(v) || v < 0.0) {
                throw std::domain_error("wasserstein: density is negative or not finite at row " +
                                        std::to_string(cursor + r));
            }
            w[r] = v;
            density.push(v);
            total += v;
            total_sq += v * v;
        }
        if (!(total > 0.0)) throw std::domain_error("wasserstein: density vanishes on every candidate");
        const double ess = total * total / total_sq;
        const double frac = ess / static_cast<double>(n_points);
        min_ess_fraction = std::min(min_ess_fraction, frac);
        ess_fraction_sum += ess / static_cast<double>(k);
        ++resamples;

        // systematic resampling
        const double u0 = counter_uniform(seed, draws++, kResampleStream);
        const std::size_t d = dims == 0 ? pool.dim() : dims;
        Matrix pts(static_cast<Eigen::Index>(n_points), static_cast<Eigen::Index>(d));
        double cum = w[0];
        std::size_t src = 0;
        for (std::size_t i = 0; i < n_points; ++i) {
            const double target = (u0 + static_cast<double>(i)) / static_cast<double>(n_points) * total;
            while (cum < target && src + 1 < k) cum += w[++src];
            const auto row = pool.row(cursor + src);
            for (std::size_t c = 0; c < d; ++c) pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c];
        }
        cursor += k;
        return PointCloud(std::move(pts));
    }
};

double ot_cost(const PointCloud& a, const PointCloud& b) { return solve_discrete_ot(a, b).cost; }

WassersteinEstimate summarize(const std::vector<double>& reps, const Sampler& s) {
    WassersteinEstimate w;
    w.repetitions = reps;
    RunningStats st;
    for (double r : reps) st.push(r);
    w.estimate = st.mean();
    w.std_error = st.std_error();
    if (s.density.count() > 0) {
        w.mean_density = s.density.mean();
        w.renormalized = std::abs(w.mean_density - 1.0) > 4.0 * s.density.std_error();
        w.effective_sample_fraction = s.ess_fraction_sum / static_cast<double>(s.resamples);
        w.degenerate = s.min_ess_fraction < 1.0;
    }
    return w;
}

Sampler make_sampler(const SamplePool& pool, std::size_t n_points, const WassersteinOptions& o) {
    if (n_points < 2) throw std::invalid_argument("wasserstein: n_points must be >= 2");
    if (o.repetitions < 2) throw std::invalid_argument("wasserstein: need at least 2 repetitions");
    if (o.candidate_factor < 1) throw std::invalid_argument("wasserstein: candidate_factor must be >= 1");
    if (o.dims > pool.dim()) throw std::invalid_argument("wasserstein: dims exceeds pool dimension");
    return Sampler{pool, n_points, o.dims, o.candidate_factor, pool.seed().value_or(0), 0, 0, {}, 1.0, 0.0, 0};
}

}  // namespace

WassersteinEstimate wasserstein_sq_between(const Density& l1, const Density& l2,
                                           const SamplePool& pool, std::size_t n_points,
                                           const WassersteinOptions& options) {
    Sampler s = make_sampler(pool, n_points, options);
    std::vector<double> reps;
    for (std::size_t r = 0; r < options.repetitions; ++r) {
        const PointCloud a = s.reweighted(l1);
        const PointCloud b = s.reweighted(l2);
        double est = ot_cost(a, b);
        if (options.debiased) {
            const PointCloud a2 = s.reweighted(l1);
            const PointCloud b2 = s.reweighted(l2);
            est -= 0.5 * (ot_cost(a, a2) + ot_cost(b, b2));
        }
        reps.push_back(est);
    }
    return summarize(reps, s);
}

WassersteinEstimate wasserstein_sq(const Density& l, const SamplePool& pool, std::size_t n_points,
                                   const WassersteinOptions& options) {
    if (!l) throw std::invalid_argument("wasserstein_sq: empty density");
    return wasserstein_sq_between(l, Density{}, pool, n_points, options);
}

WassersteinEstimate wasserstein_sq_pushforward(const Pushforward& t, const SamplePool& pool,
                                               std::size_t n_points,
                                               const WassersteinOptions& options) {
    if (!t) throw std::invalid_argument("wasserstein_sq_pushforward: empty map");
    Sampler s = make_sampler(pool, n_points, options);
    const std::size_t d = options.dims == 0 ? pool.dim() : options.dims;
    auto pushed = [&] {
        s.require(n_points);
        Matrix pts(static_cast<Eigen::Index>(n_points), static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < n_points; ++i) {
            const Coords y = t(pool.row(s.cursor + i));
            if (y.size() != pool.dim()) throw std::invalid_argument("wasserstein_sq_pushforward: map changed dimension");
            for (std::size_t c = 0; c < d; ++c) pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = y[c];
        }
        s.cursor += n_points;
        return PointCloud(std::move(pts));
    };
    std::vector<double> reps;
    for (std::size_t r = 0; r < options.repetitions; ++r) {
        const PointCloud a = s.plain();
        const PointCloud b = pushed();
        double est = ot_cost(a, b);
        if (options.debiased) {
            const PointCloud a2 = s.plain();
            const PointCloud b2 = pushed();
            est -= 0.5 * (ot_cost(a, a2) + ot_cost(b, b2));
        }
        reps.push_back(est);
    }
    return summarize(reps, s);
}

InequalityReport talagrand_check(const Density& l, const SamplePool& pool, std::size_t n_points,
                                 std::optional<double> rhs_closed_form,
                                 const WassersteinOptions& options) {
    const auto w = wasserstein_sq(l, pool, n_points, options);
    RunningStats ent;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const double v = l(pool.row(i));
        ent.push(v > 0.0 ? 2.0 * v * std::log(v) : 0.0);
    }
    InequalityReport r;
    r.name = "talagrand";
    r.lhs = w.estimate;
    r.lhs_se = w.std_error;
    r.n_samples = pool.size();
    if (rhs_closed_form) {
        r.rhs = *rhs_closed_form;
        r.rhs_se = 0.0;
    } else {
        r.rhs = ent.mean();
        r.rhs_se = ent.std_error();
    }
    r.extras["rhs_mc"] = ent.mean();
    r.extras["rhs_mc_se"] = ent.std_error();
    r.extras["wasserstein"] = w;
    r.extras["n_points"] = n_points;
    if (w.renormalized) r.flags.push_back("renormalized_density");
    if (w.degenerate) r.flags.push_back("degenerate_density");
    r.settle();
    return r;
}

InequalityReport triangle_check(const Density& l1, const Density& l2, const SamplePool& pool,
                                std::size_t n_points, const WassersteinOptions& options) {
    const auto d12 = wasserstein_sq_between(l1, l2, pool, n_points, options);
    const auto d1 = wasserstein_sq_between(l1, Density{}, pool, n_points, options);
    const auto d2 = wasserstein_sq_between(l2, Density{}, pool, n_points, options);
    auto root = [](const WassersteinEstimate& w) {
        const double v = std::sqrt(std::max(0.0, w.estimate));
        const double se = v > 0.0 ? w.std_error / (2.0 * v) : std::sqrt(w.std_error);
        return std::pair{v, se};
    };
    const auto [a, sa] = root(d12);
    const auto [b, sb] = root(d1);
    const auto [c, sc] = root(d2);
    InequalityReport r;
    r.name = "triangle";
    r.lhs = a;
    r.lhs_se = sa;
    r.rhs = b + c;
    r.rhs_se = std::sqrt(sb * sb + sc * sc);
    r.n_samples = pool.size();
    r.extras["d12_sq"] = d12;
    r.extras["d1_sq"] = d1;
    r.extras["d2_sq"] = d2;
    r.settle();
    return r;
}

DimMonotonicity dim_monotonicity_check(const Density& l, std::span<const std::size_t> dims,
                                       const SamplePool& pool, std::size_t n_points,
                                       const WassersteinOptions& options) {
    if (dims.empty()) throw std::invalid_argument("dim_monotonicity_check: no dimensions");
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (dims[k] == 0 || dims[k] > pool.dim() || (k > 0 && dims[k] <= dims[k - 1])) {
            throw std::invalid_argument("dim_monotonicity_check: dims must increase within [1, pool dim]");
        }
    }
    WassersteinOptions full = options;
    full.dims = 0;
    Sampler s = make_sampler(pool, n_points, full);
    std::vector<std::vector<double>> reps(dims.size());
    for (std::size_t r = 0; r < options.repetitions; ++r) {
        const PointCloud a = s.plain();
        const PointCloud b = l ? s.reweighted(l) : s.plain();
        std::optional<PointCloud> a2, b2;
        if (options.debiased) {
            a2.emplace(s.plain());
            b2.emplace(l ? s.reweighted(l) : s.plain());
        }
        for (std::size_t k = 0; k < dims.size(); ++k) {
            const std::size_t m = dims[k];
            double est = ot_cost(a.project(m), b.project(m));
            if (options.debiased) {
                est -= 0.5 * (ot_cost(a.project(m), a2->project(m)) +
                              ot_cost(b.project(m), b2->project(m)));
            }
            reps[k].push_back(est);
        }
    }
    DimMonotonicity out;
    out.dims.assign(dims.begin(), dims.end());
    for (const auto& rk : reps) out.estimates.push_back(summarize(rk, s));
    for (std::size_t k = 0; k + 1 < out.estimates.size(); ++k) {
        const auto& lo = out.estimates[k];
        const auto& hi = out.estimates[k + 1];
        const double se = std::sqrt(lo.std_error * lo.std_error + hi.std_error * hi.std_error);
        if (hi.estimate < lo.estimate - 2.0 * se) out.nondecreasing = false;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gaussian Brenier map and Monge-Ampere

GaussianBrenier gaussian_brenier(const Matrix& cov_target) {
    if (cov_target.rows() != cov_target.cols() || cov_target.rows() == 0) {
        throw std::invalid_argument("gaussian_brenier: covariance must be square and nonempty");
    }
    const double norm = cov_target.cwiseAbs().maxCoeff();
    if ((cov_target - cov_target.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, norm)) {
        throw std::invalid_argument("gaussian_brenier: covariance is not symmetric");
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> es(cov_target);
    if (!(es.eigenvalues().minCoeff() > 0.0)) {
        throw std::invalid_argument("gaussian_brenier: covariance is not positive definite");
    }
    GaussianBrenier g;
    g.cov = cov_target;
    g.a = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    g.a = 0.5 * (g.a + g.a.transpose());
    return g;
}

Vector GaussianBrenier::apply(std::span<const double> x) const {
    const Eigen::Map<const Vector> v(x.data(), static_cast<Eigen::Index>(x.size()));
    return a * v;
}

double GaussianBrenier::potential(std::span<const double> x) const {
    const Eigen::Map<const Vector> v(x.data(), static_cast<Eigen::Index>(x.size()));
    return 0.5 * v.dot(potential_hessian() * v);
}

Matrix GaussianBrenier::potential_hessian() const {
    return a - Matrix::Identity(a.rows(), a.cols());
}

double GaussianBrenier::min_hessian_eigenvalue() const {
    return Eigen::SelfAdjointEigenSolver<Matrix>(potential_hessian()).eigenvalues().minCoeff();
}

bool GaussianBrenier::one_convex() const { return min_hessian_eigenvalue() >= -1.0 + 1e-12; }

double monge_ampere_lambda(const GaussianBrenier& t, std::span<const double> x) {
    if (x.size() != static_cast<std::size_t>(t.a.rows())) {
        throw std::invalid_argument("monge_ampere_lambda: dimension mismatch");
    }
    const Eigen::Map<const Vector> v(x.data(), static_cast<Eigen::Index>(x.size()));
    const Matrix hess = t.potential_hessian();
    const Vector grad = hess * v;
    const double l_phi = grad.dot(v) - hess.trace();
    return std::abs(det2(hess)) * std::exp(-l_phi - 0.5 * grad.squaredNorm());
}

double gaussian_density_ratio(const Matrix& cov, std::span<const double> y) {
    if (y.size() != static_cast<std::size_t>(cov.rows())) {
        throw std::invalid_argument("gaussian_density_ratio: dimension mismatch");
    }
    const Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("gaussian_density_ratio: covariance not SPD");
    const Eigen::Map<const Vector> v(y.data(), static_cast<Eigen::Index>(y.size()));
    const Vector z = llt.matrixL().solve(v);
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < cov.rows(); ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
    return std::exp(-0.5 * log_det - 0.5 * z.squaredNorm() + 0.5 * v.squaredNorm());
}

double monge_ampere_residual(const Matrix& cov_target, const Matrix& points) {
    const GaussianBrenier t = gaussian_brenier(cov_target);
    if (points.cols() != cov_target.rows()) {
        throw std::invalid_argument("monge_ampere_residual: points have the wrong dimension");
    }
    double worst = 0.0;
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
        const Vector x = points.row(r).transpose();
        const Vector y = t.apply({x.data(), static_cast<std::size_t>(x.size())});
        const double prod = monge_ampere_lambda(t, {x.data(), static_cast<std::size_t>(x.size())}) *
                            gaussian_density_ratio(cov_target, {y.data(), static_cast<std::size_t>(y.size())});
        worst = std::max(worst, std::abs(prod - 1.0));
    }
    return worst;
}

InequalityReport gauge_check(double a, const SamplePool& pool) {
    if (pool.size() == 0 || pool.dim() == 0) throw std::invalid_argument("gauge_check: empty pool");
    RunningStats q2;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const double q = std::max(0.0, a - pool.row(i)[0]);
        q2.push(q * q);
    }
    InequalityReport r;
    r.name = "gauge";
    r.lhs = normal_upper_tail(a);
    r.rhs = std::exp(-0.5 * q2.mean());
    r.rhs_se = 0.5 * r.rhs * q2.std_error();
    r.n_samples = pool.size();
    r.extras["a"] = a;
    r.extras["mean_q_sq"] = q2.mean();
    r.settle();
    return r;
}

}  // namespace wienerlab
