#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "errors.hpp"
#include "maps.hpp"
#include "measure.hpp"
#include "transfer.hpp"

namespace xferops {

struct IterateResult {
    CellMeasure measure;
    bool converged = false;
    int iterations = 0;
    double last_increment = 0.0;
};

// Left fixed-point search: lambda <- lambda R until the TV increment stalls.
// Non-convergence is reported, not thrown; the left Perron-Frobenius problem
// has no uniceness guarantee here.
inline IterateResult invariant_measure(const TransferOp& R, const CellMeasure& init,
                                       int max_iter = 200, double tol = 1e-12) {
    IterateResult res{init, false, 0, 0.0};
    for (int k = 0; k < max_iter; ++k) {
        CellMeasure next = R.adjoint_measure(res.measure);
        res.last_increment = total_variation(next, res.measure);
        res.measure = std::move(next);
        res.iterations = k + 1;
        if (res.last_increment < tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

struct HarmonicResult {
    GridFunction h;
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;
};

// Right fixed-point search: sup-normalized power iteration for Rh = h.
inline HarmonicResult harmonic_function(const TransferOp& R, const GridFunction& init,
                                        int max_iter = 200, double tol = 1e-10) {
    if (!init.is_nonneg() || init.sup_norm() == 0.0)
        throw ZeroLimit("harmonic_function: need a nonnegative nonzero start");
    GridFunction h = (1.0 / init.sup_norm()) * init;
    HarmonicResult res{h, false, 0, 0.0};
    for (int k = 0; k < max_iter; ++k) {
        GridFunction next = R.apply(res.h);
        double s = next.sup_norm();
        if (s == 0.0) throw ZeroLimit("harmonic_function: iterate collapsed to zero");
        next = (1.0 / s) * next;
        res.residual = sup_distance(R.apply(next), next);
        res.h = std::move(next);
        res.iterations = k + 1;
        if (res.residual < tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

enum class Tristate { no, yes, undetermined };

// Membership verdicts for one (R, lambda, sigma) triple, mirroring the four
// measure sets: lambdaR << lambda, lambdaR = lambda, lambda∘sigma^-1 = lambda,
// and lambda in the image M1 R.
struct MeasureClassReport {
    bool in_L = false;
    bool in_L1 = false;
    bool in_fix = false;
    Tristate in_K1 = Tristate::undetermined;
    std::optional<GridFunction> W;
    std::map<std::string, double> residuals;

    json to_json() const {
        json j;
        j["L"] = in_L;
        j["L1"] = in_L1;
        j["Fix"] = in_fix;
        if (in_K1 == Tristate::undetermined)
            j["K1"] = nullptr;
        else
            j["K1"] = (in_K1 == Tristate::yes);
        j["residuals"] = residuals;
        return j;
    }
};

// The K1 test follows the sigma-algebra criterion: lambda in K1 iff
// W = d(lambdaR)/dlambda is measurable for sigma^-1(B), i.e. constant on the
// fibers {branch preimages of t}. Cells carrying no lambda-mass are excluded
// (the criterion is an a.e. statement).
inline MeasureClassReport classify(const TransferOp& R, const CellMeasure& lam,
                                   const PiecewiseAffineMap& sigma, double tol = 1e-10) {
    MeasureClassReport rep;
    CellMeasure lamR = R.adjoint_measure(lam);

    try {
        rep.W = rn_derivative(lamR, lam);
        rep.in_L = true;
    } catch (const NotAbsolutelyContinuous&) {
        rep.in_L = false;
    }

    double tv_l1 = total_variation(lamR, lam);
    rep.residuals["L1_tv"] = tv_l1;
    rep.in_L1 = tv_l1 < tol;

    double tv_fix = total_variation(pushforward(lam, sigma).measure, lam);
    rep.residuals["Fix_tv"] = tv_fix;
    rep.in_fix = tv_fix < tol;

    // direct diagnostic for K1: (lambda∘sigma^-1) R vs lambda
    CellMeasure pushed = pushforward(lam, sigma).measure;
    rep.residuals["K1_tv"] = total_variation(R.adjoint_measure(pushed), lam);

    if (!rep.in_L) {
        rep.in_K1 = Tristate::undetermined;
        return rep;
    }

    const GridFunction& W = *rep.W;
    const DyadicGrid& g = W.grid();
    CellMeasure lam_g = lam.to_level(g.level());
    double fiber = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto pre = sigma.preimages(g.midpoint(i));
        double lo = 0.0, hi = 0.0;
        bool first = true;
        for (double y : pre) {
            std::size_t c = g.cell_of(y);
            if (lam_g.cell_total(c) <= 0.0) continue; // a.e.-lambda exclusion
            double w = W.value(c).real();
            if (first) {
                lo = hi = w;
                first = false;
            } else {
                lo = std::min(lo, w);
                hi = std::max(hi, w);
            }
        }
        if (!first) fiber = std::max(fiber, hi - lo);
    }
    rep.residuals["K1_fiber"] = fiber;
    rep.in_K1 = fiber < tol ? Tristate::yes : Tristate::no;
    return rep;
}

// d(lambda R^k)/dlambda for k = 1..n, computed two ways: by iterating the
// adjoint, and by the cocycle product of Q = d(lambdaR)/dlambda composed with
// powers of sigma. Disagreement signals a broken pull-out assumption.
inline std::vector<GridFunction> rn_chain(const TransferOp& R, const CellMeasure& lam,
                                          const PiecewiseAffineMap& sigma, int n,
                                          std::optional<double> tol_opt = std::nullopt) {
    double tol = tol_opt ? *tol_opt : 64.0 / static_cast<double>(lam.grid().size());
    GridFunction Q = rn_derivative(R.adjoint_measure(lam), lam);
    std::vector<GridFunction> chain;
    CellMeasure lamRk = lam;
    GridFunction product = GridFunction::constant(lam.grid(), 1.0);
    GridFunction Qk = Q; // Q∘sigma^k, carried one level finer per composition
    for (int k = 1; k <= n; ++k) {
        lamRk = R.adjoint_measure(lamRk);
        GridFunction direct = rn_derivative(lamRk, lam);
        product = product * Qk;
        double err = sup_distance(direct, product.coarsened_to(direct.level()));
        if (err > tol)
            throw ChainMismatch("rn_chain: methods disagree at k=" + std::to_string(k) +
                                " by " + std::to_string(err));
        chain.push_back(direct);
        Qk = compose(Q, sigma);
        for (int j = 1; j < k; ++j) Qk = compose(Qk, sigma);
    }
    return chain;
}

struct Abs1Report {
    GridFunction lhs; // d(lambda R)/d(mu R)
    GridFunction rhs; // (d lambda/d mu)∘sigma
    double max_discrepancy = 0.0;
    bool pass = false;
};

// Substitution rule for derivatives of image measures:
// d(lambda R)/d(mu R) = (d lambda/d mu)∘sigma, compared cellwise on cells
// that carry mu R mass.
inline Abs1Report abs1_check(const TransferOp& R, const CellMeasure& lam, const CellMeasure& mu,
                             const PiecewiseAffineMap& sigma,
                             std::optional<double> tol_opt = std::nullopt) {
    double tol = tol_opt ? *tol_opt : 64.0 / static_cast<double>(lam.grid().size());
    (void)rn_derivative(lam, mu); // precondition lambda << mu
    CellMeasure lamR = R.adjoint_measure(lam);
    CellMeasure muR = R.adjoint_measure(mu);
    GridFunction lhs = rn_derivative(lamR, muR);
    GridFunction rhs = compose(rn_derivative(lam, mu), sigma);

    GridFunction lhs_f = lhs.to_level(rhs.level());
    CellMeasure muR_f = muR.to_level(rhs.level());
    double worst = 0.0;
    for (std::size_t i = 0; i < rhs.size(); ++i) {
        if (muR_f.mass(i) <= 0.0) continue;
        worst = std::max(worst, std::abs(lhs_f.value(i) - rhs.value(i)));
    }
    return {std::move(lhs), std::move(rhs), worst, worst < tol};
}

} // namespace xferops
