#pragma once

// Finite truncation of the classical Wiener space on [0,1].
//
// Coordinates: a sample w is represented by the Gaussian coordinates
// gamma_j = integral of g_j dW, where g_j = sqrt(N) * 1_{slot j} is the
// normalized slot indicator basis of L^2[0,1]. Paths are then
// W_t = sum_j gamma_j * e_j(t) with e_j(t) = integral_0^t g_j.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wienerlab {

using Coords = std::vector<double>;
using Functional = std::function<double(std::span<const double>)>;

/// N uniform slots of [0,1]; slot j (0-based) is [j/N, (j+1)/N), the last
/// slot also containing t = 1.
class TimeGrid {
public:
    explicit TimeGrid(std::size_t n_slots);

    std::size_t n_slots() const { return n_slots_; }
    double dt() const { return 1.0 / static_cast<double>(n_slots_); }
    double node(std::size_t j) const { return static_cast<double>(j) * dt(); }

    /// Slot index containing t in [0,1].
    std::size_t slot_of(double t) const;

    /// g_j(t) = sqrt(N) on slot j, zero elsewhere.
    double basis(std::size_t j, double t) const;

    /// e_j(t) = integral_0^t g_j(s) ds.
    double integrated_basis(std::size_t j, double t) const;

private:
    std::size_t n_slots_;
};

/// Element of the Cameron-Martin space, stored by its coordinates
/// (h, e_j)_H = integral of hdot * g_j.
struct CameronMartinVector {
    Coords coords;

    CameronMartinVector() = default;
    explicit CameronMartinVector(Coords c) : coords(std::move(c)) {}

    std::size_t dim() const { return coords.size(); }
    double norm_sq() const;
    double norm() const;

    /// h(t) on the grid's time axis; h(0) = 0.
    double value_at(const TimeGrid& grid, double t) const;

    /// Project a derivative hdot onto the basis (Simpson rule per slot).
    static CameronMartinVector from_derivative(const TimeGrid& grid,
                                               const std::function<double(double)>& hdot);

    /// h(t) = t, i.e. hdot = 1; unit H-norm for every N.
    static CameronMartinVector ramp(const TimeGrid& grid);

    /// k-th basis direction of dimension d.
    static CameronMartinVector unit(std::size_t d, std::size_t k);
};

double cm_inner(const CameronMartinVector& h, const CameronMartinVector& k);

/// Translate a sample by h in coordinates.
Coords shift_coords(std::span<const double> coords, const CameronMartinVector& h);

/// Brownian path stored at grid nodes W_{j/N}, j = 0..N.
class Path {
public:
    explicit Path(std::vector<double> values);

    const std::vector<double>& values() const { return values_; }
    std::size_t n_slots() const { return values_.size() - 1; }
    double operator[](std::size_t j) const { return values_[j]; }

    /// W_{(j+1)/N} - W_{j/N}.
    double increment(std::size_t j) const { return values_[j + 1] - values_[j]; }

    /// Linear interpolation between nodes. Only node values are exact.
    double at(double t) const;

    /// Gaussian coordinates recovered from increments: sqrt(N) * dW_j.
    Coords coords() const;

private:
    std::vector<double> values_;
};

Path synthesize_path(std::span<const double> coords, const TimeGrid& grid);

/// Philox4x32-10 counter-based generator.
///
/// Every output block is a pure function of (key, counter), so any
/// partition of the counter space across workers reproduces the serial
/// stream bit for bit.
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Block generate(Block counter, Key key);
    static Key key_from_seed(std::uint64_t seed);
};

/// Two independent standard normals for counter (a, b, c, d) under a seed.
std::array<double, 2> gaussian_pair(std::uint64_t seed, std::uint64_t row,
                                    std::uint32_t block, std::uint32_t stream);

/// Uniform in [0,1) from the same counter scheme.
double counter_uniform(std::uint64_t seed, std::uint64_t row, std::uint32_t stream);

/// M x d matrix of i.i.d. standard Gaussian coordinates.
///
/// Row r, columns (2k, 2k+1) come from Philox counter (r, k, stream) under
/// the key derived from the seed. Distinct stream ids give independent pools
/// for the same seed.
class SamplePool {
public:
    SamplePool(std::uint64_t seed, std::size_t n_samples, std::size_t dim,
               std::uint32_t stream = 0);

    /// Pool from explicit rows (e.g. CSV import); carries no seed.
    SamplePool(std::vector<double> row_major, std::size_t dim);

    std::size_t size() const { return n_samples_; }
    std::size_t dim() const { return dim_; }
    std::optional<std::uint64_t> seed() const { return seed_; }
    std::uint32_t stream() const { return stream_; }

    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * dim_, dim_};
    }
    const std::vector<double>& data() const { return data_; }

    /// Rows [first, first + count) as a new pool (no seed lineage).
    SamplePool slice(std::size_t first, std::size_t count) const;

    void write_csv(std::ostream& os) const;
    static SamplePool read_csv(std::istream& is);

    friend bool operator==(const SamplePool& a, const SamplePool& b) {
        return a.dim_ == b.dim_ && a.data_ == b.data_;
    }

private:
    std::size_t n_samples_;
    std::size_t dim_;
    std::optional<std::uint64_t> seed_;
    std::uint32_t stream_ = 0;
    std::vector<double> data_;
};

}  // namespace wienerlab
