#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace wienerlab {

/// Monte Carlo estimate of an expectation together with its standard error.
struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

/// Streaming mean / variance (Welford). Single pass, order-dependent only
/// through rounding, so a fixed iteration order gives reproducible results.
class RunningStats {
public:
    void push(double x) {
        ++n_;
        const double delta = x - mean_;
        mean_ += delta / static_cast<double>(n_);
        m2_ += delta * (x - mean_);
    }

    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const {
        return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
    }
    double std_error() const {
        return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }
    Estimate estimate() const { return {mean(), std_error(), n_}; }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Streaming estimator of E[exp(Z)] kept in log scale.
///
/// Accumulates sum exp(z - m) and sum exp(2(z - m)) against the running
/// maximum m, rescaling when m grows, so exponents far beyond the double
/// range never overflow. The relative standard error is exact in the same
/// sense as RunningStats.
class LogMeanExp {
public:
    void push(double z) {
        if (std::isnan(z)) {
            nonfinite_ = true;
            return;
        }
        if (std::isinf(z)) {
            if (z > 0) nonfinite_ = true;
            ++n_;
            return;
        }
        ++n_;
        if (z > max_) {
            const double scale = std::exp(max_ - z);
            sum_ *= scale;
            sum_sq_ *= scale * scale;
            max_ = z;
        }
        const double e = std::exp(z - max_);
        sum_ += e;
        sum_sq_ += e * e;
    }

    std::size_t count() const { return n_; }
    bool divergent() const { return nonfinite_; }

    /// log of the sample mean of exp(z).
    double log_mean() const {
        if (n_ == 0 || sum_ <= 0.0) return -std::numeric_limits<double>::infinity();
        return max_ + std::log(sum_ / static_cast<double>(n_));
    }

    /// Standard error of the sample mean divided by the sample mean.
    double relative_std_error() const {
        if (n_ < 2 || sum_ <= 0.0) return 0.0;
        const double n = static_cast<double>(n_);
        const double mean = sum_ / n;
        const double var = std::max(0.0, (sum_sq_ / n - mean * mean) * n / (n - 1.0));
        return std::sqrt(var / n) / mean;
    }

    Estimate estimate() const {
        const double m = std::exp(log_mean());
        return {m, m * relative_std_error(), n_};
    }

private:
    std::size_t n_ = 0;
    double max_ = -std::numeric_limits<double>::infinity();
    double sum_ = 0.0;
    double sum_sq_ = 0.0;
    bool nonfinite_ = false;
};

inline Estimate estimate_of(std::span<const double> xs) {
    RunningStats s;
    for (double x : xs) s.push(x);
    return s.estimate();
}

/// Standard normal upper tail 1 - Phi(x).
inline double normal_upper_tail(double x) {
    return 0.5 * std::erfc(x / std::sqrt(2.0));
}

}  // namespace wienerlab
