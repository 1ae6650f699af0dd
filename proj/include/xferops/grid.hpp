#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

#include "errors.hpp"

namespace xferops {

using cplx = std::complex<double>;

// Tolerance for "is this sampled function still nonnegative" checks.
inline constexpr double kEpsFp = 0x1p-40;

// Dyadic partition of [0,1) into M = 2^level half-open cells [i/M,(i+1)/M).
class DyadicGrid {
public:
    explicit DyadicGrid(int level) : level_(level) {
        if (level < 1 || level > 30) throw DomainError("DyadicGrid: level out of range");
        size_ = std::size_t{1} << level;
    }

    int level() const { return level_; }
    std::size_t size() const { return size_; }

    double left(std::size_t i) const { return static_cast<double>(i) / static_cast<double>(size_); }
    double right(std::size_t i) const { return static_cast<double>(i + 1) / static_cast<double>(size_); }
    double midpoint(std::size_t i) const {
        return (static_cast<double>(i) + 0.5) / static_cast<double>(size_);
    }

    // Cell containing x; x is wrapped into [0,1).
    std::size_t cell_of(double x) const {
        double y = x - std::floor(x);
        auto i = static_cast<std::size_t>(y * static_cast<double>(size_));
        return i >= size_ ? size_ - 1 : i;
    }

    DyadicGrid refined(int extra = 1) const { return DyadicGrid(level_ + extra); }

    bool operator==(const DyadicGrid& o) const { return level_ == o.level_; }
    bool operator!=(const DyadicGrid& o) const { return level_ != o.level_; }

private:
    int level_;
    std::size_t size_;
};

enum class Scalar { real, complex };

// Piecewise-constant function on a dyadic grid, stored as midpoint samples.
// Evaluation anywhere in [0,1) is by cell lookup, never interpolation.
class GridFunction {
public:
    GridFunction(DyadicGrid grid, std::vector<cplx> values, Scalar kind = Scalar::complex)
        : grid_(grid), values_(std::move(values)), kind_(kind) {
        if (values_.size() != grid_.size()) throw GridMismatch("GridFunction: wrong sample count");
    }

    static GridFunction constant(DyadicGrid grid, cplx v, Scalar kind = Scalar::real) {
        return GridFunction(grid, std::vector<cplx>(grid.size(), v), kind);
    }

    static GridFunction sample(DyadicGrid grid, const std::function<cplx(double)>& f,
                               Scalar kind = Scalar::complex) {
        std::vector<cplx> v(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) v[i] = f(grid.midpoint(i));
        return GridFunction(grid, std::move(v), kind);
    }

    static GridFunction sample_real(DyadicGrid grid, const std::function<double(double)>& f) {
        std::vector<cplx> v(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) v[i] = cplx(f(grid.midpoint(i)), 0.0);
        return GridFunction(grid, std::move(v), Scalar::real);
    }

    const DyadicGrid& grid() const { return grid_; }
    int level() const { return grid_.level(); }
    std::size_t size() const { return values_.size(); }
    Scalar kind() const { return kind_; }

    cplx value(std::size_t i) const { return values_[i]; }
    cplx& value(std::size_t i) { return values_[i]; }
    double real_value(std::size_t i) const { return values_[i].real(); }
    const std::vector<cplx>& values() const { return values_; }

    cplx operator()(double x) const { return values_[grid_.cell_of(x)]; }

    // One dyadic refinement step duplicates every sample (exact embedding).
    GridFunction refined(int extra = 1) const {
        if (extra == 0) return *this;
        GridFunction f = *this;
        for (int k = 0; k < extra; ++k) {
            std::vector<cplx> v(f.size() * 2);
            for (std::size_t i = 0; i < f.size(); ++i) v[2 * i] = v[2 * i + 1] = f.values_[i];
            f = GridFunction(f.grid_.refined(), std::move(v), f.kind_);
        }
        return f;
    }

    GridFunction to_level(int level) const {
        if (level < grid_.level()) throw GridMismatch("GridFunction::to_level: cannot coarsen");
        return refined(level - grid_.level());
    }

    // Projection onto a coarser grid by cell averaging.
    GridFunction coarsened_to(int level) const {
        if (level > grid_.level()) throw GridMismatch("coarsened_to: target finer than source");
        int steps = grid_.level() - level;
        std::vector<cplx> v = values_;
        for (int k = 0; k < steps; ++k) {
            std::vector<cplx> w(v.size() / 2);
            for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.5 * (v[2 * i] + v[2 * i + 1]);
            v = std::move(w);
        }
        return GridFunction(DyadicGrid(level), std::move(v), kind_);
    }

    double sup_norm() const {
        double m = 0.0;
        for (const auto& v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    bool is_nonneg(double eps = kEpsFp) const {
        for (const auto& v : values_)
            if (v.real() < -eps || std::abs(v.imag()) > eps) return false;
        return true;
    }

    GridFunction conjugated() const {
        std::vector<cplx> v(values_.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::conj(values_[i]);
        return GridFunction(grid_, std::move(v), kind_);
    }

    GridFunction abs_squared() const {
        std::vector<cplx> v(values_.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = cplx(std::norm(values_[i]), 0.0);
        return GridFunction(grid_, std::move(v), Scalar::real);
    }

    // Elementwise sqrt of a nonnegative real function; tiny negatives clamp to 0.
    GridFunction sqrt_real() const {
        std::vector<cplx> v(values_.size());
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] = cplx(std::sqrt(std::max(0.0, values_[i].real())), 0.0);
        return GridFunction(grid_, std::move(v), Scalar::real);
    }

    // Elementwise reciprocal sqrt with the 0 -> 0 convention.
    GridFunction rsqrt_or_zero() const {
        std::vector<cplx> v(values_.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            double w = values_[i].real();
            v[i] = (w > 0.0) ? cplx(1.0 / std::sqrt(w), 0.0) : cplx(0.0, 0.0);
        }
        return GridFunction(grid_, std::move(v), Scalar::real);
    }

private:
    DyadicGrid grid_;
    std::vector<cplx> values_;
    Scalar kind_;
};

inline Scalar join_kind(Scalar a, Scalar b) {
    return (a == Scalar::complex || b == Scalar::complex) ? Scalar::complex : Scalar::real;
}

// Bring two functions to the common (finer) grid.
inline std::pair<GridFunction, GridFunction> common_refine(const GridFunction& a,
                                                           const GridFunction& b) {
    int lvl = std::max(a.level(), b.level());
    return {a.to_level(lvl), b.to_level(lvl)};
}

inline GridFunction operator+(const GridFunction& a, const GridFunction& b) {
    auto [x, y] = common_refine(a, b);
    std::vector<cplx> v(x.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = x.value(i) + y.value(i);
    return GridFunction(x.grid(), std::move(v), join_kind(a.kind(), b.kind()));
}

inline GridFunction operator-(const GridFunction& a, const GridFunction& b) {
    auto [x, y] = common_refine(a, b);
    std::vector<cplx> v(x.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = x.value(i) - y.value(i);
    return GridFunction(x.grid(), std::move(v), join_kind(a.kind(), b.kind()));
}

inline GridFunction operator*(const GridFunction& a, const GridFunction& b) {
    auto [x, y] = common_refine(a, b);
    std::vector<cplx> v(x.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = x.value(i) * y.value(i);
    return GridFunction(x.grid(), std::move(v), join_kind(a.kind(), b.kind()));
}

inline GridFunction operator*(cplx s, const GridFunction& a) {
    std::vector<cplx> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = s * a.value(i);
    return GridFunction(a.grid(), std::move(v), Scalar::complex);
}

inline GridFunction operator*(double s, const GridFunction& a) {
    std::vector<cplx> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = s * a.value(i);
    return GridFunction(a.grid(), std::move(v), a.kind());
}

inline double sup_distance(const GridFunction& a, const GridFunction& b) {
    auto [x, y] = common_refine(a, b);
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x.value(i) - y.value(i)));
    return m;
}

} // namespace xferops
