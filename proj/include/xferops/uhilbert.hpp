#pragma once

#include <cmath>
#include <vector>

#include "core.hpp"
#include "errors.hpp"
#include "maps.hpp"
#include "measure.hpp"
#include "transfer.hpp"

namespace xferops {

// Half-density f sqrt(lambda), kept as the pair plus its canonical amplitude
// a_i = f(x_i) sqrt(lambda(cell i)). Amplitudes decide equality and inner
// products; the pair is retained because the shift needs f and lambda
// separately. Atom-carrying measures are outside this realization.
class HalfDensity {
public:
    HalfDensity(GridFunction f, CellMeasure lam)
        : f_(std::move(f)), lam_(std::move(lam)) {
        if (lam_.has_atoms()) throw DomainError("HalfDensity: atoms are not representable");
        int lvl = std::max(f_.level(), lam_.level());
        f_ = f_.to_level(lvl);
        lam_ = lam_.to_level(lvl);
    }

    static HalfDensity unit(const CellMeasure& lam) {
        return HalfDensity(GridFunction::constant(lam.grid(), 1.0), lam);
    }

    const GridFunction& density_part() const { return f_; }
    const CellMeasure& measure() const { return lam_; }
    int level() const { return f_.level(); }
    std::size_t size() const { return f_.size(); }

    cplx amplitude(std::size_t i) const {
        return f_.value(i) * std::sqrt(lam_.mass(i));
    }

    double norm() const {
        double s = 0.0;
        for (std::size_t i = 0; i < size(); ++i) s += std::norm(amplitude(i));
        return std::sqrt(s);
    }

    HalfDensity refined(int extra = 1) const {
        return HalfDensity(f_.refined(extra), lam_.refined(extra));
    }

    HalfDensity to_level(int lvl) const { return refined(lvl - level()); }

private:
    GridFunction f_;
    CellMeasure lam_;
};

// <f1 sqrt(l1), f2 sqrt(l2)> as the amplitude pairing on the common grid;
// independent of any dominating measure by construction.
inline cplx uh_inner(const HalfDensity& v, const HalfDensity& w) {
    int lvl = std::max(v.level(), w.level());
    HalfDensity a = v.to_level(lvl);
    HalfDensity b = w.to_level(lvl);
    cplx s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a.amplitude(i)) * b.amplitude(i);
    return s;
}

inline double uh_distance(const HalfDensity& v, const HalfDensity& w) {
    int lvl = std::max(v.level(), w.level());
    HalfDensity a = v.to_level(lvl);
    HalfDensity b = w.to_level(lvl);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a.amplitude(i) - b.amplitude(i));
    return std::sqrt(s);
}

// Same route as the explicit pairing through a dominating measure mu:
// integral of conj(f1) f2 sqrt(dl1/dmu dl2/dmu) dmu. Used to test that the
// amplitude form does not depend on the choice of mu.
inline cplx uh_inner_via(const HalfDensity& v, const HalfDensity& w, const CellMeasure& mu) {
    int lvl = std::max({v.level(), w.level(), mu.level()});
    HalfDensity a = v.to_level(lvl);
    HalfDensity b = w.to_level(lvl);
    CellMeasure m = mu.to_level(lvl);
    GridFunction da = rn_derivative(a.measure(), m);
    GridFunction db = rn_derivative(b.measure(), m);
    cplx s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double root = std::sqrt(da.value(i).real() * db.value(i).real());
        s += std::conj(a.density_part().value(i)) * b.density_part().value(i) * root * m.mass(i);
    }
    return s;
}

// d(lambda R)/d lambda one level finer than lambda. For the dyadic branch
// pair every fine cell receives mass from a single (cell, branch) source, so
// no averaging of distinct sources occurs and the operator identities stay
// grid-exact downstream.
inline GridFunction fine_derivative(const TransferOp& R, const CellMeasure& lam) {
    auto fine = R.adjoint_measure_fine(lam);
    if (fine) return rn_derivative(*fine, lam.refined(fine->level() - lam.level()));
    return rn_derivative(R.adjoint_measure(lam), lam).refined();
}

// S-hat (f sqrt(lambda)) = (f∘sigma) sqrt(lambda R), returned as the in-class
// representative ((f∘sigma) sqrt(W-fine)) sqrt(refine lambda). Isometric when
// R is unital.
inline HalfDensity s_hat(const TransferOp& R, const PiecewiseAffineMap& sigma,
                         const HalfDensity& v) {
    GridFunction w = fine_derivative(R, v.measure());
    GridFunction fs = compose(v.density_part(), sigma);
    return HalfDensity(fs * w.sqrt_real(), v.measure().refined());
}

// R-hat (f sqrt(lambda)) = R(f / sqrt(W)) sqrt(lambda) with the 0-on-{W=0}
// convention; amplitude stranded on a zero-weight cell means the vector has a
// component outside the shift's range.
inline HalfDensity r_hat(const TransferOp& R, const HalfDensity& v) {
    GridFunction w = fine_derivative(R, v.measure());
    GridFunction f = v.density_part().to_level(w.level());
    CellMeasure lam = v.measure().to_level(w.level());
    std::vector<cplx> q(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        double wv = w.value(i).real();
        if (wv > 0.0) {
            q[i] = f.value(i) / std::sqrt(wv);
        } else if (std::abs(f.value(i)) * lam.mass(i) > 1e-14) {
            throw WeightZeroLoss("r_hat: amplitude on a zero-weight cell");
        } else {
            q[i] = 0.0;
        }
    }
    GridFunction quotient(f.grid(), std::move(q), f.kind());
    return HalfDensity(R.apply(quotient), lam);
}

// P_K sqrt(lambda) = (1/sqrt(W)) sqrt(lambda R): the projection of the square
// root of lambda onto the image sector, by the closed formula.
inline HalfDensity project_k_sqrt(const TransferOp& R, const CellMeasure& lam) {
    auto fine = R.adjoint_measure_fine(lam);
    GridFunction w = fine_derivative(R, lam);
    CellMeasure lamR = fine ? *fine : R.adjoint_measure(lam).refined();
    return HalfDensity(w.rsqrt_or_zero(), lamR);
}

// ---------------------------------------------------------------------------
// Ergodic averages A_N = (1/N) sum_{k<=N} P_k, P_k = prod_{j<k} sqrt(W∘sigma^j)

struct ErgodicReport {
    GridFunction a_n;                      // the recursion iterate itself
    std::vector<double> norms;             // |A_k|_{L2(lambda)}, k = 1..N
    std::vector<double> product_term_norm; // |P_k|_{L2}/(k+1), k = 1..N
};

namespace detail {

// Equal-weight branch operator whose branches invert sigma; the reference
// operator for pushing products of W∘sigma^j back to level zero.
inline TransferOp sigma_reference_op(DyadicGrid grid, const PiecewiseAffineMap& sigma) {
    BranchSystem sys;
    double p = 1.0 / static_cast<double>(sigma.branches().size());
    for (const auto& b : sigma.branches()) {
        // inverse of y = slope x + offset on the branch image
        sys.branches.push_back({1.0 / b.slope, -b.offset / b.slope, WeightFn::constant(p)});
    }
    sys.endo = sigma;
    return branch_ifs(grid, std::move(sys));
}

} // namespace detail

// Chain c_k = integral sqrt(prod_{j<k} W∘sigma^j) dlambda, evaluated by the
// stable adjoint-direction recursion u_{k+1} = R0(sqrt(W) u_k) with R0 the
// equal-weight branch operator of sigma (R0 must preserve lambda). Dyadic
// midpoints reach the zero set of sigma's derivative chain in finitely many
// steps, so the forward orbit recursion is unusable for the integrals.
inline std::vector<double> sqrt_norm_chain(const GridFunction& W, const PiecewiseAffineMap& sigma,
                                           const CellMeasure& lam, int n) {
    TransferOp R0 = detail::sigma_reference_op(W.grid(), sigma);
    GridFunction sqrtW = W.sqrt_real();
    std::vector<double> out;
    GridFunction u = GridFunction::constant(W.grid(), 1.0);
    for (int k = 1; k <= n; ++k) {
        u = R0.apply(sqrtW * u);
        out.push_back(integrate_real(u, lam));
    }
    return out;
}

// Same recursion without the square root: integral prod_{j<k} W∘sigma^j
// dlambda, which stays exactly 1 when lambda R = W dlambda with a unital R.
inline std::vector<double> l1_norm_chain(const GridFunction& W, const PiecewiseAffineMap& sigma,
                                         const CellMeasure& lam, int n) {
    TransferOp R0 = detail::sigma_reference_op(W.grid(), sigma);
    std::vector<double> out;
    GridFunction u = GridFunction::constant(W.grid(), 1.0);
    for (int k = 1; k <= n; ++k) {
        u = R0.apply(W * u);
        out.push_back(integrate_real(u, lam));
    }
    return out;
}

// A_N by the stable Cesaro recursion pointwise, plus the norm trace by the
// Gram identity <P_j, P_k> = c_{|j-k|}: the pull-out property collapses every
// cross moment to a chain entry, so |A_N|^2 = (N + 2 sum (N-l) c_l)/N^2.
inline ErgodicReport ergodic_average(const GridFunction& W, const PiecewiseAffineMap& sigma,
                                     int N, const CellMeasure& lam) {
    if (!W.is_nonneg()) throw DomainError("ergodic_average: W must be nonnegative");

    ErgodicReport rep{GridFunction::constant(W.grid(), 0.0), {}, {}};

    // pointwise recursion in log space to survive |W| > 1 products
    const DyadicGrid& g = W.grid();
    std::vector<double> orbit(g.size());
    std::vector<double> logp(g.size(), 0.0);
    std::vector<bool> dead(g.size(), false);
    std::vector<double> a(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) orbit[i] = g.midpoint(i);
    for (int k = 1; k <= N; ++k) {
        // P_k = P_{k-1} * sqrt(W∘sigma^{k-1})
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (k > 1) orbit[i] = sigma(orbit[i]);
            if (dead[i]) continue;
            double wv = (k == 1 ? W.value(i).real() : W(orbit[i]).real());
            if (wv <= 0.0)
                dead[i] = true;
            else
                logp[i] += 0.5 * std::log(wv);
            double pk = dead[i] ? 0.0 : std::exp(logp[i]);
            a[i] = (static_cast<double>(k - 1) * a[i] + pk) / static_cast<double>(k);
        }
    }
    std::vector<cplx> av(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) av[i] = cplx(a[i], 0.0);
    rep.a_n = GridFunction(g, std::move(av), Scalar::real);

    std::vector<double> c = sqrt_norm_chain(W, sigma, lam, N);
    std::vector<double> d = l1_norm_chain(W, sigma, lam, N);
    for (int k = 1; k <= N; ++k) {
        double s = static_cast<double>(k); // c_0 terms on the diagonal
        for (int l = 1; l < k; ++l)
            s += 2.0 * static_cast<double>(k - l) * c[static_cast<std::size_t>(l - 1)];
        rep.norms.push_back(std::sqrt(std::max(0.0, s)) / static_cast<double>(k));
        rep.product_term_norm.push_back(
            std::sqrt(std::max(0.0, d[static_cast<std::size_t>(k - 1)])) /
            static_cast<double>(k + 1));
    }
    return rep;
}

} // namespace xferops
