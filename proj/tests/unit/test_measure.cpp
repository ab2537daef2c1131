#include "wienerlab/measure.hpp"
#include "wienerlab/stats.hpp"

#include "oracles.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

using namespace wienerlab;

namespace {

// W_{j/N} as a first-order expansion in the first j directions.
ChaosExpansion path_value(std::size_t n, std::size_t j) {
    std::vector<double> h(n, 0.0);
    for (std::size_t i = 0; i < j; ++i) h[i] = 1.0 / std::sqrt(static_cast<double>(n));
    return ChaosExpansion::first_order(h);
}

Matrix random_matrix(std::size_t d, std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> g;
    Matrix a(d, d);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index k = 0; k < a.cols(); ++k) a(i, k) = scale * g(rng);
    return a;
}

// u(x)_j = eps * tanh(x_{sigma(j)}) with its exact Jacobian.
ShiftMap tanh_shift(double eps, std::vector<std::size_t> sigma, bool exact_jacobian) {
    ShiftMap u;
    u.dim = sigma.size();
    u.field = [eps, sigma](std::span<const double> x) {
        Vector v(static_cast<Eigen::Index>(sigma.size()));
        for (std::size_t j = 0; j < sigma.size(); ++j) v(j) = eps * std::tanh(x[sigma[j]]);
        return v;
    };
    if (exact_jacobian) {
        u.jacobian = [eps, sigma](std::span<const double> x) {
            Matrix m = Matrix::Zero(sigma.size(), sigma.size());
            for (std::size_t j = 0; j < sigma.size(); ++j) {
                const double t = std::tanh(x[sigma[j]]);
                m(j, sigma[j]) = eps * (1.0 - t * t);
            }
            return m;
        };
    }
    return u;
}

}  // namespace

// ---------------------------------------------------------------------------
// Ito integral

TEST(Ito, ConstantOneGivesTerminalValue) {
    const TimeGrid grid(8);
    const SamplePool pool(5, 20, 8);
    const auto one = AdaptedStepProcess::deterministic(std::vector<double>(8, 1.0));
    const auto zero = AdaptedStepProcess::deterministic(std::vector<double>(8, 0.0));
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const Path p = synthesize_path(pool.row(i), grid);
        EXPECT_NEAR(ito_integral(one, p), p[8], 1e-13);
        EXPECT_EQ(ito_integral(zero, p), 0.0);
    }
}

TEST(Ito, RejectsNonAdaptedChaos) {
    const std::size_t n = 4;
    std::vector<ChaosExpansion> slots;
    for (std::size_t j = 0; j < n; ++j) slots.push_back(path_value(n, j));
    EXPECT_NO_THROW(AdaptedStepProcess::from_chaos(slots));
    // slot 2 peeks at its own increment
    slots[2] = path_value(n, 3);
    EXPECT_THROW(AdaptedStepProcess::from_chaos(slots), std::invalid_argument);
    slots[2] = ChaosExpansion::constant(n, 1.0);
    slots[0] = path_value(n, 1);
    EXPECT_THROW(AdaptedStepProcess::from_chaos(slots), std::invalid_argument);
}

TEST(Ito, FunctionBackedSeesOnlyThePast) {
    const auto k = AdaptedStepProcess::from_function(6, [](std::size_t slot, std::span<const double> past) {
        EXPECT_EQ(past.size(), slot);
        return static_cast<double>(past.size());
    });
    const SamplePool pool(1, 3, 6);
    const auto v = k.values(pool.row(0));
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(v[j], static_cast<double>(j));
}

TEST(Ito, IsometryForBrownianIntegrand) {
    const std::size_t n = 16;
    std::vector<ChaosExpansion> slots;
    for (std::size_t j = 0; j < n; ++j) slots.push_back(path_value(n, j));
    const auto k = AdaptedStepProcess::from_chaos(slots);
    const TimeGrid grid(n);
    const SamplePool pool(77, 100000, n);
    RunningStats sq, energy;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const double v = ito_integral(k, synthesize_path(pool.row(i), grid));
        sq.push(v * v);
        double e = 0.0;
        for (double a : k.values(pool.row(i))) e += a * a;
        energy.push(e / static_cast<double>(n));
    }
    // sum_{j=1}^N (j-1)/N^2
    const double oracle = static_cast<double>(n - 1) / (2.0 * static_cast<double>(n));
    EXPECT_NEAR(sq.mean(), oracle, 3.0 * sq.std_error());
    EXPECT_NEAR(energy.mean(), oracle, 3.0 * energy.std_error());
}

TEST(Ito, IsometryForNonlinearIntegrand) {
    const std::size_t n = 10;
    const auto k = AdaptedStepProcess::from_function(n, [n](std::size_t, std::span<const double> past) {
        double w = 0.0;
        for (double x : past) w += x / std::sqrt(static_cast<double>(n));
        return std::sin(w) + 0.5;
    });
    const TimeGrid grid(n);
    const SamplePool pool(78, 100000, n);
    RunningStats diff;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const double v = ito_integral(k, synthesize_path(pool.row(i), grid));
        double e = 0.0;
        for (double a : k.values(pool.row(i))) e += a * a;
        diff.push(v * v - e / static_cast<double>(n));
    }
    EXPECT_NEAR(diff.mean(), 0.0, 3.0 * diff.std_error());
}

// ---------------------------------------------------------------------------
// Wick exponential

TEST(Wick, ZeroDirectionIsConstantOne) {
    const WickExponential e(CameronMartinVector(Coords(5, 0.0)));
    EXPECT_DOUBLE_EQ(e.truncated().mean(), 1.0);
    EXPECT_DOUBLE_EQ(e.truncated().variance(), 0.0);
    const SamplePool pool(2, 10, 5);
    for (std::size_t i = 0; i < pool.size(); ++i) EXPECT_DOUBLE_EQ(e(pool.row(i)), 1.0);
}

TEST(Wick, MeanOneAndSecondMoment) {
    const TimeGrid grid(12);
    const WickExponential e(CameronMartinVector::ramp(grid));
    const SamplePool pool(31, 100000, 12);
    RunningStats m1, m2;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const double v = e(pool.row(i));
        m1.push(v);
        m2.push(v * v);
    }
    EXPECT_NEAR(m1.mean(), 1.0, 3.0 * m1.std_error());
    // ||E||_2 = sqrt(E[E^2]); delta-method standard error
    const double norm = std::sqrt(m2.mean());
    const double se = m2.std_error() / (2.0 * norm);
    EXPECT_NEAR(norm, std::exp(0.5), 3.0 * se);
    EXPECT_NEAR(WickExponential::lp_norm(1.0, 2.0), 1.6487212707001282, 1e-15);
}

TEST(Wick, TruncationErrorWithinBound) {
    for (double s : {0.1, 0.5, 1.0, 2.0}) {
        const WickExponential e(CameronMartinVector({s, 0.0, 0.0}), 5);
        const double exact = std::exp(s * s) - e.truncated().l2_norm_sq();
        EXPECT_NEAR(e.truncation_error_sq(), exact, 1e-12 * std::exp(s * s));
        EXPECT_LE(e.truncation_error_sq(), e.truncation_bound());
    }
}

TEST(Wick, TruncatedFormConvergesPointwise) {
    const WickExponential e(CameronMartinVector({0.2, -0.1}), 6);
    const SamplePool pool(9, 50, 2);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto x = pool.row(i);
        EXPECT_NEAR(evaluate(e.truncated(), x), e(x), 1e-5);
    }
}

TEST(Wick, ExponentialMartingaleAtEveryTime) {
    const std::size_t n = 6;
    const TimeGrid grid(n);
    const WickExponential e(CameronMartinVector::ramp(grid), 4);
    const SamplePool pool(12, 50000, n);
    for (std::size_t slot = 1; slot <= n; ++slot) {
        const auto proj = project_adapted(e.truncated(), slot);
        EXPECT_DOUBLE_EQ(proj.mean(), 1.0);
        const CompiledExpansion c(proj);
        RunningStats s;
        for (std::size_t i = 0; i < pool.size(); ++i) s.push(c(pool.row(i)));
        EXPECT_NEAR(s.mean(), 1.0, 3.0 * s.std_error() + 1e-12) << "slot " << slot;
    }
}

// ---------------------------------------------------------------------------
// Girsanov

TEST(Girsanov, ZeroDriftHasUnitWeight) {
    const auto u = AdaptedStepProcess::deterministic(std::vector<double>(7, 0.0));
    const SamplePool pool(3, 10, 7);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        EXPECT_EQ(girsanov_weight(u, pool.row(i)), 1.0);
        const auto shifted = girsanov_shift(u, pool.row(i));
        for (std::size_t j = 0; j < 7; ++j) EXPECT_EQ(shifted[j], pool.row(i)[j]);
    }
}

TEST(Girsanov, ConstantDriftMeanWeight) {
    const std::size_t n = 10;
    const auto u = AdaptedStepProcess::deterministic(std::vector<double>(n, 0.8));
    const SamplePool pool(4, 100000, n);
    RunningStats w;
    for (std::size_t i = 0; i < pool.size(); ++i) w.push(girsanov_weight(u, pool.row(i)));
    EXPECT_NEAR(w.mean(), 1.0, 3.0 * w.std_error());
}

TEST(Girsanov, DeterministicDriftOnLinearFunctional) {
    const std::size_t n = 8;
    std::vector<double> h(n);
    for (std::size_t j = 0; j < n; ++j) h[j] = 0.3 * static_cast<double>(j + 1) / n;
    const auto u = AdaptedStepProcess::deterministic(h);
    const SamplePool pool(5, 100000, n);
    const auto r = verify_change_of_measure([](std::span<const double> x) { return x[0]; }, u, pool);
    EXPECT_LE(std::abs(r.residual), 3.0 * r.std_error);
    EXPECT_TRUE(r.pass);
}

TEST(Girsanov, CameronMartinExponentialFunctional) {
    const std::size_t n = 4;
    // h = e_1 in coordinates, drift u_1 = sqrt(N)
    std::vector<double> drift(n, 0.0);
    drift[0] = std::sqrt(static_cast<double>(n));
    const auto u = AdaptedStepProcess::deterministic(drift);
    const SamplePool pool(6, 100000, n);
    const Functional f = [](std::span<const double> x) { return std::exp(x[0]); };
    const auto r = verify_change_of_measure(f, u, pool);
    EXPECT_NEAR(r.lhs, std::exp(0.5), 4.0 * r.std_error + 0.05);
    EXPECT_LE(std::abs(r.residual), 4.0 * r.std_error);

    // same shift as an anticipative map with zero Jacobian
    ShiftMap cm = ShiftMap::linear(Matrix::Zero(n, n));
    cm.field = [n](std::span<const double>) {
        Vector v = Vector::Zero(n);
        v(0) = 1.0;
        return v;
    };
    const auto rr = verify_change_of_measure(f, cm, pool);
    EXPECT_LE(std::abs(rr.residual), 4.0 * rr.std_error);
    EXPECT_NEAR(rr.rhs, std::exp(0.5), 0.05);
}

TEST(Girsanov, NonlinearAdaptedDrift) {
    const std::size_t n = 12;
    const auto u = AdaptedStepProcess::from_function(n, [n](std::size_t, std::span<const double> past) {
        double w = 0.0;
        for (double x : past) w += x / std::sqrt(static_cast<double>(n));
        return std::cos(w);
    });
    const SamplePool pool(8, 100000, n);
    const Functional f = [n](std::span<const double> x) {
        double w = 0.0, mx = 0.0;
        for (double v : x) {
            w += v / std::sqrt(static_cast<double>(n));
            mx = std::max(mx, w);
        }
        return mx;
    };
    const auto r = verify_change_of_measure(f, u, pool);
    EXPECT_TRUE(r.pass) << r.residual << " se " << r.std_error;
    EXPECT_NEAR(r.mean_weight, 1.0, 0.02);
}

// ---------------------------------------------------------------------------
// Carleman-Fredholm determinant

TEST(Det2, Examples) {
    EXPECT_DOUBLE_EQ(det2(Matrix::Zero(5, 5)), 1.0);
    Vector v = Vector::Zero(4);
    v(1) = 1.0;
    EXPECT_NEAR(det2(0.5 * v * v.transpose()), 1.5 * std::exp(-0.5), 1e-14);
    EXPECT_NEAR(det2(0.5 * v * v.transpose()), 0.90980, 5e-6);
    Matrix nil = Matrix::Zero(6, 6);
    for (int i = 0; i < 6; ++i)
        for (int k = 0; k < i; ++k) nil(i, k) = 0.7 * (i - k) - 1.1;
    EXPECT_NEAR(det2(nil), 1.0, 1e-12);
    Matrix sing = Matrix::Zero(3, 3);
    sing(0, 0) = -1.0;
    EXPECT_EQ(det2(sing), 0.0);
}

TEST(Det2, MatchesEigenvalueProduct) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix a = random_matrix(6, rng, 0.3);
        const Eigen::EigenSolver<Matrix> es(a);
        std::complex<double> prod = 1.0;
        for (Eigen::Index i = 0; i < 6; ++i) {
            const auto l = es.eigenvalues()(i);
            prod *= (1.0 + l) * std::exp(-l);
        }
        EXPECT_NEAR(det2(a), prod.real(), 1e-11);
    }
}

TEST(Det2, HilbertSchmidtBound) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t d = 1 + trial % 9;
        const Matrix a = random_matrix(d, rng, 0.2 + 0.001 * trial);
        EXPECT_LE(std::abs(det2(a)), std::exp(0.5 * a.squaredNorm()) * (1.0 + 1e-12));
    }
}

TEST(Det2, ProductIdentity) {
    EXPECT_EQ(det2_product_residual(Matrix::Zero(3, 3), Matrix::Zero(3, 3)), 0.0);
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        Matrix a = random_matrix(8, rng, 1.0), b = random_matrix(8, rng, 1.0);
        // spectral radius <= operator norm = 0.45
        a *= 0.45 / operator_norm(a);
        b *= 0.45 / operator_norm(b);
        EXPECT_LE(det2_product_residual(a, b), 1e-10);
        EXPECT_LE(det2_product_residual(a, -a), 1e-12);
    }
    EXPECT_THROW(det2_product_residual(Matrix::Zero(2, 2), Matrix::Zero(3, 3)),
                 std::invalid_argument);
}

TEST(Det2, OperatorNormMatchesSvd) {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 30; ++trial) {
        const Matrix a = random_matrix(5, rng, 1.0);
        const Eigen::JacobiSVD<Matrix> svd(a);
        EXPECT_NEAR(operator_norm(a), svd.singularValues()(0), 1e-6);
    }
}

// ---------------------------------------------------------------------------
// Ramer

TEST(Ramer, ZeroShiftHasUnitDensity) {
    const ShiftMap u = ShiftMap::linear(Matrix::Zero(3, 3));
    const SamplePool pool(1, 10, 3);
    for (std::size_t i = 0; i < pool.size(); ++i) EXPECT_EQ(ramer_density(u, pool.row(i)), 1.0);
}

TEST(Ramer, OneDimensionalJacobiExample) {
    Matrix a(1, 1);
    a(0, 0) = 0.5;
    const ShiftMap u = ShiftMap::linear(a);
    const double x = 1.0;
    const double expected = 1.5 * std::exp(-0.625);
    EXPECT_NEAR(ramer_density(u, std::span<const double>(&x, 1)), expected, 1e-14);
    EXPECT_NEAR(expected, 0.802892, 5e-7);
    // independent form (1+c) exp(-c x^2 - c^2 x^2 / 2) at another point
    const double y = -1.7, c = 0.5;
    EXPECT_NEAR(ramer_density(u, std::span<const double>(&y, 1)),
                (1 + c) * std::exp(-c * y * y - c * c * y * y / 2), 1e-14);
}

TEST(Ramer, RejectsUncertifiedOrLargeShifts) {
    ShiftMap u = tanh_shift(0.5, {0, 1}, true);
    const std::vector<double> x{0.1, 0.2};
    EXPECT_THROW(ramer_density(u, x), std::domain_error);
    u.operator_norm_bound = 1.0;
    EXPECT_THROW(ramer_density(u, x), std::domain_error);
    u.operator_norm_bound = 0.55;
    EXPECT_NO_THROW(ramer_density(u, x));

    Matrix big = Matrix::Identity(2, 2) * 1.2;
    EXPECT_THROW(ramer_density(ShiftMap::linear(big), x), std::domain_error);
}

TEST(Ramer, RejectsNonDifferentiableBlackBox) {
    ShiftMap u;
    u.dim = 2;
    u.field = [](std::span<const double> x) {
        Vector v(2);
        v(0) = 0.4 * std::abs(x[1]);
        v(1) = 0.0;
        return v;
    };
    u.operator_norm_bound = 0.44;
    const std::vector<double> kink{0.3, 0.0}, near{0.3, 7e-5}, smooth{0.3, 0.8};
    EXPECT_THROW(ramer_density(u, kink), std::domain_error);
    EXPECT_THROW(ramer_density(u, near), std::domain_error);
    EXPECT_NO_THROW(ramer_density(u, smooth));
}

TEST(Ramer, FiniteDifferenceJacobianMatchesExact) {
    const ShiftMap exact = tanh_shift(0.6, {2, 0, 1}, true);
    const ShiftMap fd = tanh_shift(0.6, {2, 0, 1}, false);
    const SamplePool pool(15, 100, 3);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto x = pool.row(i);
        EXPECT_LE((exact.jacobian_at(x) - fd.jacobian_at(x)).cwiseAbs().maxCoeff(), 1e-7);
    }
}

TEST(Ramer, CertificateFromPool) {
    const SamplePool pool(16, 3000, 3);
    const ShiftMap u = certify(tanh_shift(0.5, {1, 2, 0}, false), pool);
    ASSERT_TRUE(u.operator_norm_bound.has_value());
    EXPECT_LE(*u.operator_norm_bound, 0.55 + 1e-9);
    EXPECT_GE(*u.operator_norm_bound, 0.5);
    EXPECT_GE(*u.hs_norm_bound, *u.operator_norm_bound - 1e-12);
}

TEST(Ramer, TanhSuiteUnitMassByQuadrature) {
    const oracle::GaussHermite gh(90);
    const std::vector<std::vector<std::size_t>> perms{{0, 1, 2}, {1, 2, 0}, {2, 1, 0}};
    for (const auto& sigma : perms) {
        ShiftMap u = tanh_shift(0.5, sigma, true);
        u.operator_norm_bound = 0.5;
        const double mass = gh.expect(3, [&](const std::vector<double>& x) {
            return std::abs(ramer_density(u, x));
        });
        EXPECT_NEAR(mass, 1.0, 1e-6);
    }
}

TEST(Ramer, TanhSuiteMonteCarlo) {
    const SamplePool pool(17, 100000, 3);
    const std::vector<std::vector<std::size_t>> perms{{0, 1, 2}, {1, 2, 0}, {2, 1, 0}};
    const Functional f = [](std::span<const double> x) {
        return std::cos(x[0]) + x[1] * x[2] + std::tanh(x[2]);
    };
    for (const auto& sigma : perms) {
        const ShiftMap u = certify(tanh_shift(0.5, sigma, false), pool);
        RunningStats mass;
        for (std::size_t i = 0; i < pool.size(); ++i) mass.push(ramer_density(u, pool.row(i)));
        EXPECT_NEAR(mass.mean(), 1.0, 3.0 * mass.std_error());
        const auto r = verify_change_of_measure(f, u, pool);
        EXPECT_TRUE(r.pass) << r.residual << " se " << r.std_error;
        EXPECT_GE(r.std_error, 0.0);
    }
}

TEST(Ramer, DegeneratesToGirsanovForAdaptedShift) {
    const std::size_t n = 8;
    std::vector<ChaosExpansion> slots;
    slots.push_back(ChaosExpansion::constant(n, 0.3));
    for (std::size_t j = 1; j < n; ++j) {
        ChaosExpansion s = ChaosExpansion::constant(n, 0.1 * static_cast<double>(j));
        s = s + 0.2 * ChaosExpansion::first_order(Coords([&] {
                Coords h(n, 0.0);
                h[j - 1] = 1.0;
                return h;
            }()));
        if (j >= 2) {
            SymmetricKernel k(2, n);
            k.set({static_cast<std::uint32_t>(j - 2), static_cast<std::uint32_t>(j - 2)}, 0.05);
            k.set({0, static_cast<std::uint32_t>(j - 1)}, 0.03);
            s = s + ChaosExpansion::multiple_integral(k);
        }
        slots.push_back(s);
    }
    const auto adapted = AdaptedStepProcess::from_chaos(slots);
    const SamplePool pool(18, 500, n);
    const ShiftMap u = certify(ShiftMap::from_adapted(adapted), pool);
    ASSERT_LT(*u.operator_norm_bound, 1.0);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto x = pool.row(i);
        const Matrix j = u.jacobian_at(x);
        EXPECT_EQ(j.trace(), 0.0);
        EXPECT_NEAR(det2(j), 1.0, 1e-14);
        const double g = girsanov_weight(adapted, x);
        EXPECT_NEAR(ramer_density(u, x), g, 1e-12 * std::max(1.0, g));
    }
}

TEST(DensityReportJson, Fields) {
    DensityReport r;
    r.lhs = 1.0;
    r.rhs = 1.5;
    r.residual = -0.5;
    r.std_error = 0.1;
    r.n_samples = 10;
    r.pass = false;
    const nlohmann::json j = r;
    EXPECT_EQ(j.at("lhs"), 1.0);
    EXPECT_EQ(j.at("rhs"), 1.5);
    EXPECT_EQ(j.at("residual"), -0.5);
    EXPECT_EQ(j.at("se"), 0.1);
    EXPECT_EQ(j.at("n"), 10);
    EXPECT_EQ(j.at("pass"), false);
}

TEST(DensityReportJson, ZeroShiftHasZeroResidual) {
    const SamplePool pool(19, 1000, 3);
    const auto r = verify_change_of_measure([](std::span<const double> x) { return x[0] * x[1]; },
                                            ShiftMap::linear(Matrix::Zero(3, 3)), pool);
    EXPECT_NEAR(r.residual, 0.0, 1e-15);
    EXPECT_TRUE(r.pass);
}
