#pragma once

// Test-only reference implementations. These deliberately avoid the
// library's sorted-index bookkeeping: tensors are dense, symmetrization is an
// explicit average over axis permutations, and multiple integrals are summed
// over every full index.

#include "wienerlab/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

struct DenseTensor {
    std::size_t order = 0;
    std::size_t dim = 0;
    std::vector<double> data;

    DenseTensor(std::size_t n, std::size_t d) : order(n), dim(d), data(ipow(d, n), 0.0) {}

    static std::size_t ipow(std::size_t b, std::size_t e) {
        std::size_t r = 1;
        while (e--) r *= b;
        return r;
    }

    std::vector<std::uint32_t> unflatten(std::size_t flat) const {
        std::vector<std::uint32_t> idx(order);
        for (std::size_t s = order; s-- > 0;) {
            idx[s] = static_cast<std::uint32_t>(flat % dim);
            flat /= dim;
        }
        return idx;
    }

    std::size_t flatten(const std::vector<std::uint32_t>& idx) const {
        std::size_t f = 0;
        for (auto v : idx) f = f * dim + v;
        return f;
    }

    double norm_sq() const {
        double s = 0.0;
        for (double v : data) s += v * v;
        return s;
    }
};

inline DenseTensor dense(const wienerlab::SymmetricKernel& k) {
    DenseTensor t(k.order(), k.dim());
    for (std::size_t f = 0; f < t.data.size(); ++f) t.data[f] = k(t.unflatten(f));
    return t;
}

/// R[a, b] = sum_k f[a, k] g[b, k]; pairs the last m slots of each tensor.
inline DenseTensor contract_dense(const DenseTensor& f, const DenseTensor& g, std::size_t m) {
    const std::size_t p = f.order, q = g.order, d = f.dim;
    DenseTensor out(p + q - 2 * m, d);
    for (std::size_t flat = 0; flat < out.data.size(); ++flat) {
        const auto ab = out.unflatten(flat);
        double s = 0.0;
        for (std::size_t kf = 0; kf < DenseTensor::ipow(d, m); ++kf) {
            std::vector<std::uint32_t> k(m);
            std::size_t tmp = kf;
            for (std::size_t s2 = m; s2-- > 0;) {
                k[s2] = static_cast<std::uint32_t>(tmp % d);
                tmp /= d;
            }
            std::vector<std::uint32_t> fi(ab.begin(), ab.begin() + (p - m));
            fi.insert(fi.end(), k.begin(), k.end());
            std::vector<std::uint32_t> gi(ab.begin() + (p - m), ab.end());
            gi.insert(gi.end(), k.begin(), k.end());
            s += f.data[f.flatten(fi)] * g.data[g.flatten(gi)];
        }
        out.data[flat] = s;
    }
    return out;
}

inline DenseTensor symmetrize(const DenseTensor& t) {
    DenseTensor out(t.order, t.dim);
    std::vector<std::size_t> perm(t.order);
    std::iota(perm.begin(), perm.end(), 0);
    double count = 0.0;
    do {
        for (std::size_t flat = 0; flat < t.data.size(); ++flat) {
            const auto idx = t.unflatten(flat);
            std::vector<std::uint32_t> permuted(t.order);
            for (std::size_t s = 0; s < t.order; ++s) permuted[s] = idx[perm[s]];
            out.data[flat] += t.data[t.flatten(permuted)];
        }
        count += 1.0;
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (double& v : out.data) v /= count;
    return out;
}

inline double hermite_ref(std::size_t n, double x) {
    // explicit monomial forms up to order 8
    switch (n) {
        case 0: return 1.0;
        case 1: return x;
        case 2: return x * x - 1.0;
        case 3: return x * x * x - 3.0 * x;
        case 4: return std::pow(x, 4) - 6.0 * x * x + 3.0;
        case 5: return std::pow(x, 5) - 10.0 * std::pow(x, 3) + 15.0 * x;
        case 6: return std::pow(x, 6) - 15.0 * std::pow(x, 4) + 45.0 * x * x - 15.0;
        case 7: return std::pow(x, 7) - 21.0 * std::pow(x, 5) + 105.0 * std::pow(x, 3) - 105.0 * x;
        case 8:
            return std::pow(x, 8) - 28.0 * std::pow(x, 6) + 210.0 * std::pow(x, 4) -
                   420.0 * x * x + 105.0;
        default: return wienerlab::hermite(n, x);
    }
}

/// I_n(f)(x) = sum over every full index of f[idx] * prod_j H_{m_j}(x_j).
inline double evaluate_brute(const wienerlab::ChaosExpansion& f, const std::vector<double>& x) {
    double total = 0.0;
    for (const auto& [n, kernel] : f.terms()) {
        const DenseTensor t = dense(kernel);
        for (std::size_t flat = 0; flat < t.data.size(); ++flat) {
            if (t.data[flat] == 0.0) continue;
            const auto idx = t.unflatten(flat);
            std::vector<std::size_t> counts(t.dim, 0);
            for (auto v : idx) ++counts[v];
            double w = 1.0;
            for (std::size_t j = 0; j < t.dim; ++j) w *= hermite_ref(counts[j], x[j]);
            total += t.data[flat] * w;
        }
    }
    return total;
}

inline wienerlab::SymmetricKernel random_kernel(std::size_t order, std::size_t dim,
                                                std::mt19937_64& rng, double density = 0.7) {
    std::uniform_real_distribution<double> u(-1.0, 1.0), keep(0.0, 1.0);
    wienerlab::SymmetricKernel k(order, dim);
    for (const auto& idx : wienerlab::sorted_multi_indices(order, dim)) {
        if (keep(rng) < density) k.set(idx, u(rng));
    }
    return k;
}

inline wienerlab::ChaosExpansion random_expansion(std::size_t max_order, std::size_t dim,
                                                  std::mt19937_64& rng, double density = 0.7) {
    wienerlab::ChaosExpansion f(dim);
    for (std::size_t n = 0; n <= max_order; ++n) f.add_term(random_kernel(n, dim, rng, density));
    return f;
}

inline double max_coeff_diff(const wienerlab::ChaosExpansion& a,
                             const wienerlab::ChaosExpansion& b) {
    double m = 0.0;
    const auto diff = a - b;
    for (const auto& [n, k] : diff.terms()) {
        for (const auto& [idx, v] : k.entries()) m = std::max(m, std::abs(v));
    }
    return m;
}

/// Gauss-Hermite rule for the standard normal weight (Golub-Welsch).
struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussHermite(std::size_t n) {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t k = 1; k < n; ++k) {
            J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
        for (std::size_t k = 0; k < n; ++k) {
            nodes.push_back(es.eigenvalues()(k));
            const double v0 = es.eigenvectors()(0, k);
            weights.push_back(v0 * v0);
        }
    }

    /// Tensor-product expectation of f over N(0, I_d).
    template <typename F>
    double expect(std::size_t d, F&& f) const {
        const std::size_t n = nodes.size();
        std::vector<std::size_t> k(d, 0);
        std::vector<double> x(d);
        double total = 0.0;
        while (true) {
            double w = 1.0;
            for (std::size_t j = 0; j < d; ++j) {
                x[j] = nodes[k[j]];
                w *= weights[k[j]];
            }
            total += w * f(x);
            std::size_t j = 0;
            while (j < d && ++k[j] == n) k[j++] = 0;
            if (j == d) break;
        }
        return total;
    }
};

}  // namespace oracle
