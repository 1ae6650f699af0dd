#pragma once

// Shared fixture zoo for the test suites: the two doubling-family operators,
// the averaging integral operator, a weighted doubling operator with a known
// non-constant harmonic density, and the standing measures.

#include <xferops/core.hpp>
#include <xferops/maps.hpp>
#include <xferops/measure.hpp>
#include <xferops/rng.hpp>
#include <xferops/transfer.hpp>

namespace fixtures {

using namespace xferops;

inline DyadicGrid grid12() { return DyadicGrid(12); }

inline CellMeasure lebesgue(DyadicGrid g) { return CellMeasure::lebesgue(g); }
inline CellMeasure arcsine(DyadicGrid g) { return CellMeasure::arcsine(g); }
inline CellMeasure delta0(DyadicGrid g) { return CellMeasure::point_mass(g, 0.0); }

// density 2x via exact CDF x^2
inline CellMeasure linear_density(DyadicGrid g) {
    return CellMeasure::from_cdf(g, [](double x) { return x * x; });
}

// density 1 + cos(2 pi x) via exact CDF x + sin(2 pi x)/(2 pi)
inline CellMeasure cosine_density(DyadicGrid g) {
    return CellMeasure::from_cdf(
        g, [](double x) { return x + std::sin(2.0 * M_PI * x) / (2.0 * M_PI); });
}

inline GridFunction one(DyadicGrid g) { return GridFunction::constant(g, 1.0); }

inline GridFunction e1(DyadicGrid g) {
    return GridFunction::sample(g, [](double x) {
        return cplx(std::cos(2.0 * M_PI * x), std::sin(2.0 * M_PI * x));
    });
}

inline GridFunction cosf1(DyadicGrid g) {
    return GridFunction::sample_real(g, [](double x) { return std::cos(2.0 * M_PI * x); });
}

inline GridFunction sinf1(DyadicGrid g) {
    return GridFunction::sample_real(g, [](double x) { return std::sin(2.0 * M_PI * x); });
}

inline GridFunction ident(DyadicGrid g) {
    return GridFunction::sample_real(g, [](double x) { return x; });
}

inline GridFunction random_real(DyadicGrid g, CounterRng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<cplx> v(g.size());
    for (auto& x : v) x = cplx(rng.uniform(lo, hi), 0.0);
    return GridFunction(g, std::move(v), Scalar::real);
}

inline GridFunction random_complex(DyadicGrid g, CounterRng& rng) {
    std::vector<cplx> v(g.size());
    for (auto& x : v) x = cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    return GridFunction(g, std::move(v), Scalar::complex);
}

inline CellMeasure random_probability(DyadicGrid g, CounterRng& rng) {
    std::vector<double> m(g.size());
    double s = 0.0;
    for (auto& x : m) {
        x = rng.uniform(0.0, 1.0);
        s += x;
    }
    for (auto& x : m) x /= s;
    return CellMeasure(g, std::move(m));
}

// Doubling operator rescaled through a strictly positive harmonic density h:
// branch weights w_j(x) = h(x) / (2 h(tau_j x)), so R(h) = h exactly and
// R(1) != 1. The companion normalized operator is R'(f) = R(fh)/h.
inline TransferOp weighted_doubling(DyadicGrid g, const GridFunction& h) {
    std::size_t M = g.size();
    std::vector<cplx> w0(M), w1(M);
    for (std::size_t i = 0; i < M; ++i) {
        double hx = h.value(i).real();
        w0[i] = 0.5 * hx / h.value(i / 2).real();
        w1[i] = 0.5 * hx / h.value(M / 2 + i / 2).real();
    }
    BranchSystem sys;
    sys.branches = {{0.5, 0.0, WeightFn::grid(GridFunction(g, std::move(w0), Scalar::real))},
                    {0.5, 0.5, WeightFn::grid(GridFunction(g, std::move(w1), Scalar::real))}};
    sys.endo = PiecewiseAffineMap::doubling();
    return branch_ifs(g, std::move(sys));
}

// positive density with unit integral against Lebesgue midpoints
inline GridFunction harmonic_density(DyadicGrid g) {
    GridFunction h =
        GridFunction::sample_real(g, [](double x) { return 1.0 + 0.5 * std::cos(2.0 * M_PI * x); });
    double s = integrate_real(h, CellMeasure::lebesgue(g));
    return (1.0 / s) * h;
}

// two-map contraction {u x, (1-u) x + u} with equal weights as a transfer op
inline TransferOp ifs_u_op(DyadicGrid g, double u) {
    BranchSystem sys;
    sys.branches = {{u, 0.0, WeightFn::constant(0.5)}, {1.0 - u, u, WeightFn::constant(0.5)}};
    sys.endo = PiecewiseAffineMap::two_branch_expander(u);
    return branch_ifs(g, std::move(sys));
}

} // namespace fixtures
