#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "maps.hpp"
#include "measure.hpp"

namespace xferops {

namespace detail {
// Bring (f, lambda) to a common grid. Only refinement is allowed; coarsening a
// function is lossy and coarsening a measure against a finer function would
// silently change the pairing.
inline std::pair<GridFunction, CellMeasure> align(const GridFunction& f, const CellMeasure& lam) {
    int lvl = std::max(f.level(), lam.level());
    return {f.to_level(lvl), lam.to_level(lvl)};
}
} // namespace detail

// Bilinear pairing ∫ f dλ: midpoint values against cell masses, plus atoms
// evaluated through f's cell lookup. Summation order is fixed (cells ascending,
// then atoms) so repeated runs are bit-identical.
inline cplx integrate(const GridFunction& f, const CellMeasure& lam) {
    auto [g, mu] = detail::align(f, lam);
    cplx s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += g.value(i) * mu.mass(i);
    for (const auto& a : mu.atoms()) s += g(a.pos) * a.mass;
    return s;
}

inline double integrate_real(const GridFunction& f, const CellMeasure& lam) {
    return integrate(f, lam).real();
}

// ⟨f,g⟩_λ, conjugate-linear in the first argument.
inline cplx inner(const GridFunction& f, const GridFunction& g, const CellMeasure& lam) {
    int lvl = std::max({f.level(), g.level(), lam.level()});
    GridFunction a = f.to_level(lvl);
    GridFunction b = g.to_level(lvl);
    CellMeasure mu = lam.to_level(lvl);
    cplx s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += std::conj(a.value(i)) * b.value(i) * mu.mass(i);
    for (const auto& at : mu.atoms()) s += std::conj(a(at.pos)) * b(at.pos) * at.mass;
    return s;
}

inline double norm_l2(const GridFunction& f, const CellMeasure& lam) {
    return std::sqrt(std::max(0.0, inner(f, f, lam).real()));
}

// Radon-Nikodym derivative dλ/dμ as the cellwise mass ratio. Cells where both
// vanish give 0; λ-mass on a μ-null cell (or a λ-atom off μ's atom set) is the
// absolute-continuity failure signal.
inline GridFunction rn_derivative(const CellMeasure& lam_in, const CellMeasure& mu_in) {
    int lvl = std::max(lam_in.level(), mu_in.level());
    CellMeasure lam = lam_in.to_level(lvl);
    CellMeasure mu = mu_in.to_level(lvl);
    std::vector<cplx> v(lam.size());
    for (std::size_t i = 0; i < lam.size(); ++i) {
        if (mu.mass(i) > 0.0) {
            v[i] = cplx(lam.mass(i) / mu.mass(i), 0.0);
        } else if (lam.mass(i) == 0.0) {
            v[i] = 0.0;
        } else {
            throw NotAbsolutelyContinuous("rn_derivative: lambda-mass on mu-null cell " +
                                          std::to_string(i));
        }
    }
    for (const auto& a : lam.atoms()) {
        bool matched = false;
        for (const auto& b : mu.atoms())
            if (b.pos == a.pos && b.mass > 0.0) matched = true;
        if (!matched && a.mass > 0.0)
            throw NotAbsolutelyContinuous("rn_derivative: lambda-atom off mu's atom set");
    }
    return GridFunction(DyadicGrid(lvl), std::move(v), Scalar::real);
}

struct Pushforward {
    CellMeasure measure;
    bool approximate = false; // some image boundary missed the target grid
};

// λ∘map⁻¹ with exact interval-overlap proportions. Cell mass is spread
// uniformly over the affine image of (cell ∩ branch domain); atoms move to
// their image points exactly. Mass is conserved by construction.
inline Pushforward pushforward(const CellMeasure& lam, const PiecewiseAffineMap& map) {
    const DyadicGrid& g = lam.grid();
    const auto M = static_cast<double>(g.size());
    CellMeasure out(g);
    bool approx = false;

    auto on_grid = [&](double v) {
        double t = v * M;
        return std::abs(t - std::round(t)) < 1e-12;
    };

    // distribute `mass` uniformly over [a,b) (already wrapped pieces)
    auto deposit = [&](double a, double b, double mass) {
        if (mass <= 0.0 || b <= a) return;
        double len = b - a;
        std::size_t i0 = g.cell_of(a);
        std::size_t i1 = g.cell_of(std::nextafter(b, a)); // cell containing b-
        for (std::size_t i = i0; i <= i1 && i < g.size(); ++i) {
            double lo = std::max(a, g.left(i));
            double hi = std::min(b, g.right(i));
            if (hi > lo) out.mass(i) += mass * (hi - lo) / len;
        }
    };

    for (const auto& br : map.branches()) {
        if (br.slope == 0.0) throw DomainError("pushforward: degenerate branch");
        for (std::size_t c = 0; c < g.size(); ++c) {
            double lo = std::max(br.lo, g.left(c));
            double hi = std::min(br.hi, g.right(c));
            if (hi <= lo || lam.mass(c) == 0.0) continue;
            double part = lam.mass(c) * (hi - lo) * M; // fraction of the cell
            double ia = br.apply(lo), ib = br.apply(hi);
            if (ia > ib) std::swap(ia, ib);
            if (!on_grid(ia) || !on_grid(ib)) approx = true;
            // wrap the image interval into [0,1)
            double shift = std::floor(ia);
            ia -= shift;
            ib -= shift;
            if (ib <= 1.0) {
                deposit(ia, ib, part);
            } else {
                double w1 = (1.0 - ia) / (ib - ia);
                deposit(ia, 1.0, part * w1);
                deposit(0.0, ib - 1.0, part * (1.0 - w1));
            }
        }
    }

    for (const auto& a : lam.atoms()) out.add_atom(map(a.pos), a.mass);
    return {out, approx};
}

} // namespace xferops
