#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"

namespace xferops {

// One affine piece x -> slope*x + offset on the half-open domain [lo, hi).
struct AffineBranch {
    double lo = 0.0;
    double hi = 1.0;
    double slope = 1.0;
    double offset = 0.0;

    double apply(double x) const { return slope * x + offset; }
    // Inverse on the image interval.
    double invert(double y) const { return (y - offset) / slope; }
    double image_lo() const { return slope >= 0 ? apply(lo) : apply(hi); }
    double image_hi() const { return slope >= 0 ? apply(hi) : apply(lo); }
    bool image_contains(double y) const {
        double a = image_lo(), b = image_hi();
        return y >= a && y < b;
    }
};

// Piecewise-affine onto self-map of [0,1); values are wrapped mod 1.
class PiecewiseAffineMap {
public:
    PiecewiseAffineMap(std::string name, std::vector<AffineBranch> branches)
        : name_(std::move(name)), branches_(std::move(branches)) {}

    const std::string& name() const { return name_; }
    const std::vector<AffineBranch>& branches() const { return branches_; }

    double operator()(double x) const {
        double y = x - std::floor(x);
        for (const auto& b : branches_) {
            if (y >= b.lo && y < b.hi) {
                double v = b.apply(y);
                v -= std::floor(v);
                return v;
            }
        }
        // y == 1-epsilon rounding: fall back to the last branch
        double v = branches_.back().apply(y);
        return v - std::floor(v);
    }

    // All preimages of y under the map (one per branch whose image covers y).
    std::vector<double> preimages(double y) const {
        std::vector<double> xs;
        for (const auto& b : branches_)
            if (b.image_contains(y)) xs.push_back(b.invert(y));
        return xs;
    }

    static PiecewiseAffineMap doubling() {
        return PiecewiseAffineMap("doubling",
                                  {{0.0, 0.5, 2.0, 0.0}, {0.5, 1.0, 2.0, -1.0}});
    }

    static PiecewiseAffineMap reflection() {
        return PiecewiseAffineMap("reflection", {{0.0, 1.0, -1.0, 1.0}});
    }

    static PiecewiseAffineMap identity() {
        return PiecewiseAffineMap("identity", {{0.0, 1.0, 1.0, 0.0}});
    }

    // Two expanding branches x/u and (x-u)/(1-u); the left inverse of the
    // contraction pair {u*x, (1-u)*x + u}.
    static PiecewiseAffineMap two_branch_expander(double u) {
        if (!(u > 0.0 && u < 1.0)) throw DomainError("two_branch_expander: u outside (0,1)");
        return PiecewiseAffineMap("expander_u",
                                  {{0.0, u, 1.0 / u, 0.0},
                                   {u, 1.0, 1.0 / (1.0 - u), -u / (1.0 - u)}});
    }

private:
    std::string name_;
    std::vector<AffineBranch> branches_;
};

// f∘map materialized one level finer than f. For slope ±2^k maps with dyadic
// breakpoints this representation is exact on piecewise-constant functions.
inline GridFunction compose(const GridFunction& f, const PiecewiseAffineMap& map) {
    DyadicGrid out = f.grid().refined();
    std::vector<cplx> v(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) v[i] = f(map(out.midpoint(i)));
    return GridFunction(out, std::move(v), f.kind());
}

inline GridFunction compose_iter(const GridFunction& f, const PiecewiseAffineMap& map, int times) {
    GridFunction g = f;
    for (int k = 0; k < times; ++k) g = compose(g, map);
    return g;
}

} // namespace xferops
