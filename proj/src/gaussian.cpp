#include "wienerlab/gaussian.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace wienerlab {

namespace {

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                    std::to_string(a) + " vs " + std::to_string(b) + ")");
    }
}

}  // namespace

TimeGrid::TimeGrid(std::size_t n_slots) : n_slots_(n_slots) {
    if (n_slots == 0) throw std::invalid_argument("TimeGrid: n_slots must be >= 1");
}

std::size_t TimeGrid::slot_of(double t) const {
    if (!(t >= 0.0 && t <= 1.0)) throw std::out_of_range("TimeGrid: t outside [0,1]");
    const auto j = static_cast<std::size_t>(t * static_cast<double>(n_slots_));
    return std::min(j, n_slots_ - 1);
}

double TimeGrid::basis(std::size_t j, double t) const {
    return slot_of(t) == j ? std::sqrt(static_cast<double>(n_slots_)) : 0.0;
}

double TimeGrid::integrated_basis(std::size_t j, double t) const {
    const double lo = node(j);
    const double covered = std::clamp(t - lo, 0.0, dt());
    return std::sqrt(static_cast<double>(n_slots_)) * covered;
}

double CameronMartinVector::norm_sq() const {
    double s = 0.0;
    for (double c : coords) s += c * c;
    return s;
}

double CameronMartinVector::norm() const { return std::sqrt(norm_sq()); }

double CameronMartinVector::value_at(const TimeGrid& grid, double t) const {
    require_same_dim(coords.size(), grid.n_slots(), "CameronMartinVector::value_at");
    double v = 0.0;
    for (std::size_t j = 0; j < coords.size(); ++j) v += coords[j] * grid.integrated_basis(j, t);
    return v;
}

CameronMartinVector CameronMartinVector::from_derivative(
    const TimeGrid& grid, const std::function<double(double)>& hdot) {
    Coords c(grid.n_slots());
    const double scale = std::sqrt(static_cast<double>(grid.n_slots()));
    for (std::size_t j = 0; j < c.size(); ++j) {
        const double a = grid.node(j);
        const double b = grid.node(j + 1);
        const double simpson = (b - a) / 6.0 * (hdot(a) + 4.0 * hdot(0.5 * (a + b)) + hdot(b));
        c[j] = scale * simpson;
    }
    return CameronMartinVector(std::move(c));
}

CameronMartinVector CameronMartinVector::ramp(const TimeGrid& grid) {
    const double v = 1.0 / std::sqrt(static_cast<double>(grid.n_slots()));
    return CameronMartinVector(Coords(grid.n_slots(), v));
}

CameronMartinVector CameronMartinVector::unit(std::size_t d, std::size_t k) {
    if (k >= d) throw std::out_of_range("CameronMartinVector::unit: index out of range");
    Coords c(d, 0.0);
    c[k] = 1.0;
    return CameronMartinVector(std::move(c));
}

double cm_inner(const CameronMartinVector& h, const CameronMartinVector& k) {
    require_same_dim(h.dim(), k.dim(), "cm_inner");
    double s = 0.0;
    for (std::size_t j = 0; j < h.dim(); ++j) s += h.coords[j] * k.coords[j];
    return s;
}

Coords shift_coords(std::span<const double> coords, const CameronMartinVector& h) {
    require_same_dim(coords.size(), h.dim(), "shift_coords");
    Coords out(coords.begin(), coords.end());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += h.coords[j];
    return out;
}

Path::Path(std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() < 2) throw std::invalid_argument("Path: need at least two nodes");
    if (values_.front() != 0.0) throw std::invalid_argument("Path: W_0 must be 0");
}

double Path::at(double t) const {
    if (!(t >= 0.0 && t <= 1.0)) throw std::out_of_range("Path::at: t outside [0,1]");
    const double n = static_cast<double>(n_slots());
    const double x = t * n;
    const auto j = std::min(static_cast<std::size_t>(x), n_slots() - 1);
    const double frac = x - static_cast<double>(j);
    return values_[j] + frac * (values_[j + 1] - values_[j]);
}

Coords Path::coords() const {
    const double scale = std::sqrt(static_cast<double>(n_slots()));
    Coords c(n_slots());
    for (std::size_t j = 0; j < c.size(); ++j) c[j] = scale * increment(j);
    return c;
}

Path synthesize_path(std::span<const double> coords, const TimeGrid& grid) {
    require_same_dim(coords.size(), grid.n_slots(), "synthesize_path");
    const double scale = 1.0 / std::sqrt(static_cast<double>(grid.n_slots()));
    std::vector<double> w(coords.size() + 1, 0.0);
    for (std::size_t j = 0; j < coords.size(); ++j) w[j + 1] = w[j] + coords[j] * scale;
    return Path(std::move(w));
}

// ---------------------------------------------------------------------------
// Philox4x32-10

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline double to_unit(std::uint32_t a, std::uint32_t b) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(a) << 32) | b) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Block Philox4x32::generate(Block ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kPhiloxW0;
            key[1] += kPhiloxW1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

Philox4x32::Key Philox4x32::key_from_seed(std::uint64_t seed) {
    return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

std::array<double, 2> gaussian_pair(std::uint64_t seed, std::uint64_t row,
                                    std::uint32_t block, std::uint32_t stream) {
    const auto out = Philox4x32::generate(
        {static_cast<std::uint32_t>(row), static_cast<std::uint32_t>(row >> 32), block, stream},
        Philox4x32::key_from_seed(seed));
    const double u1 = 1.0 - to_unit(out[0], out[1]);  // (0, 1]
    const double u2 = to_unit(out[2], out[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
}

double counter_uniform(std::uint64_t seed, std::uint64_t row, std::uint32_t stream) {
    const auto out = Philox4x32::generate(
        {static_cast<std::uint32_t>(row), static_cast<std::uint32_t>(row >> 32), 0xFFFFFFFFu,
         stream},
        Philox4x32::key_from_seed(seed));
    return to_unit(out[0], out[1]);
}

SamplePool::SamplePool(std::uint64_t seed, std::size_t n_samples, std::size_t dim,
                       std::uint32_t stream)
    : n_samples_(n_samples), dim_(dim), seed_(seed), stream_(stream) {
    if (dim == 0) throw std::invalid_argument("SamplePool: dim must be >= 1");
    data_.resize(n_samples * dim);
    for (std::size_t r = 0; r < n_samples; ++r) {
        double* out = data_.data() + r * dim;
        for (std::size_t k = 0; 2 * k < dim; ++k) {
            const auto g = gaussian_pair(seed, r, static_cast<std::uint32_t>(k), stream);
            out[2 * k] = g[0];
            if (2 * k + 1 < dim) out[2 * k + 1] = g[1];
        }
    }
}

SamplePool::SamplePool(std::vector<double> row_major, std::size_t dim)
    : n_samples_(dim ? row_major.size() / dim : 0), dim_(dim), data_(std::move(row_major)) {
    if (dim == 0) throw std::invalid_argument("SamplePool: dim must be >= 1");
    if (data_.size() % dim != 0) throw std::invalid_argument("SamplePool: ragged data");
}

SamplePool SamplePool::slice(std::size_t first, std::size_t count) const {
    if (first + count > n_samples_) throw std::out_of_range("SamplePool::slice: out of range");
    std::vector<double> rows(data_.begin() + static_cast<std::ptrdiff_t>(first * dim_),
                             data_.begin() + static_cast<std::ptrdiff_t>((first + count) * dim_));
    return SamplePool(std::move(rows), dim_);
}

void SamplePool::write_csv(std::ostream& os) const {
    for (std::size_t j = 0; j < dim_; ++j) os << (j ? "," : "") << 'g' << (j + 1);
    os << '\n';
    char buf[32];
    for (std::size_t r = 0; r < n_samples_; ++r) {
        for (std::size_t j = 0; j < dim_; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", data_[r * dim_ + j]);
            if (j) os << ',';
            os << buf;
        }
        os << '\n';
    }
}

SamplePool SamplePool::read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("SamplePool CSV: missing header");
    std::size_t dim = 0;
    {
        std::stringstream header(line);
        std::string cell;
        while (std::getline(header, cell, ',')) {
            if (!cell.empty() && cell.back() == '\r') cell.pop_back();
            if (cell != "g" + std::to_string(dim + 1)) {
                throw std::invalid_argument("SamplePool CSV: bad header cell '" + cell + "'");
            }
            ++dim;
        }
    }
    if (dim == 0) throw std::invalid_argument("SamplePool CSV: empty header");
    std::vector<double> data;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::stringstream row(line);
        std::string cell;
        std::size_t count = 0;
        while (std::getline(row, cell, ',')) {
            if (!cell.empty() && cell.back() == '\r') cell.pop_back();
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size()) {
                throw std::invalid_argument("SamplePool CSV: bad number on line " +
                                            std::to_string(line_no));
            }
            data.push_back(v);
            ++count;
        }
        if (count != dim) {
            throw std::invalid_argument("SamplePool CSV: wrong column count on line " +
                                        std::to_string(line_no));
        }
    }
    return SamplePool(std::move(data), dim);
}

}  // namespace wienerlab
