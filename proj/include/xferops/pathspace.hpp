#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "core.hpp"
#include "errors.hpp"
#include "invariant.hpp"
#include "maps.hpp"
#include "measure.hpp"
#include "rng.hpp"
#include "transfer.hpp"

namespace xferops {

// cell masses h(x) dlambda(x)
inline CellMeasure density_measure(const GridFunction& h, const CellMeasure& lam) {
    int lvl = std::max(h.level(), lam.level());
    GridFunction hf = h.to_level(lvl);
    CellMeasure mu = lam.to_level(lvl);
    CellMeasure out(mu.grid());
    for (std::size_t i = 0; i < mu.size(); ++i) out.mass(i) = mu.mass(i) * hf.value(i).real();
    for (const auto& a : mu.atoms()) {
        double w = a.mass * hf(a.pos).real();
        if (w > 0.0) out.add_atom(a.pos, w);
    }
    return out;
}

// Everything needed to build the path-space measure: a transfer operator, a
// harmonic density h with ∫h dλ = 1, the base measure, and (when the operator
// commutes with one) the endomorphism whose inverse orbits carry the paths.
struct PathSpec {
    TransferOp R;
    GridFunction h;
    CellMeasure lambda;
    std::optional<PiecewiseAffineMap> sigma;
    int horizon = 8;

    void validate(double tol = 1e-10) const {
        if (!h.is_nonneg()) throw DomainError("PathSpec: h must be nonnegative");
        double mass = integrate_real(h, lambda);
        if (std::abs(mass - 1.0) > tol)
            throw DomainError("PathSpec: h dlambda has mass " + std::to_string(mass));
        if (sigma) {
            CounterRng rng(0x5eed);
            if (!check_pullout(R, *sigma, 3, rng).pass)
                throw DomainError("PathSpec: operator does not intertwine with sigma");
        }
    }
};

struct PathBatch {
    std::size_t n_paths = 0;
    int n_steps = 0;                 // states per path = n_steps + 1
    std::vector<double> states;      // row-major [path][step]
    std::vector<double> weights;     // one per path
    std::uint64_t seed = 0;

    double state(std::size_t p, int k) const {
        return states[p * static_cast<std::size_t>(n_steps + 1) + static_cast<std::size_t>(k)];
    }
};

// x0 ~ h dlambda by inverse CDF over cells (uniform jitter inside the chosen
// cell) and atoms; then n Markov moves through the operator's h-reweighted
// kernel. Paths run backward under sigma: sigma(x_{k+1}) = x_k.
inline PathBatch sample_paths(const PathSpec& spec, std::size_t n_paths, int n_steps,
                              CounterRng& rng) {
    CellMeasure nu = density_measure(spec.h, spec.lambda);
    const DyadicGrid& g = nu.grid();

    struct Bin {
        double cum;
        bool atom;
        std::size_t cell;
        double pos;
    };
    std::vector<Bin> bins;
    double cum = 0.0;
    for (std::size_t i = 0; i < nu.size(); ++i) {
        if (nu.mass(i) <= 0.0) continue;
        cum += nu.mass(i);
        bins.push_back({cum, false, i, 0.0});
    }
    for (const auto& a : nu.atoms()) {
        cum += a.mass;
        bins.push_back({cum, true, 0, a.pos});
    }
    if (bins.empty() || cum <= 0.0) throw DomainError("sample_paths: initial law has no mass");

    PathBatch batch;
    batch.n_paths = n_paths;
    batch.n_steps = n_steps;
    batch.seed = rng.seed();
    batch.states.resize(n_paths * static_cast<std::size_t>(n_steps + 1));
    batch.weights.assign(n_paths, 1.0);

    for (std::size_t p = 0; p < n_paths; ++p) {
        CounterRng sub = rng.split(p);
        double u = sub.next_double() * cum;
        auto it = std::lower_bound(bins.begin(), bins.end(), u,
                                   [](const Bin& b, double v) { return b.cum < v; });
        if (it == bins.end()) --it;
        double x = it->atom ? it->pos
                            : g.left(it->cell) + sub.next_double() / static_cast<double>(g.size());
        batch.states[p * static_cast<std::size_t>(n_steps + 1)] = x;
        for (int k = 1; k <= n_steps; ++k) {
            x = spec.R.step(x, spec.h, sub);
            batch.states[p * static_cast<std::size_t>(n_steps + 1) + k] = x;
        }
    }
    return batch;
}

// Largest circle-distance violation of sigma(x_{k+1}) = x_k over the batch.
inline double solenoid_residual(const PathBatch& batch, const PiecewiseAffineMap& sigma) {
    double worst = 0.0;
    for (std::size_t p = 0; p < batch.n_paths; ++p) {
        for (int k = 0; k + 1 <= batch.n_steps; ++k) {
            double d = std::abs(sigma(batch.state(p, k + 1)) - batch.state(p, k));
            worst = std::max(worst, std::min(d, 1.0 - d));
        }
    }
    return worst;
}

// E[ f0∘pi_0 ... fn∘pi_n ] by the nested moment formula: fold from the inner
// slot, multiplying by h first.
inline cplx moment_exact(const PathSpec& spec, std::span<const GridFunction> fs) {
    if (fs.empty()) return cplx(1.0, 0.0);
    GridFunction acc = fs.back() * spec.h;
    for (std::size_t k = fs.size() - 1; k-- > 0;) acc = fs[k] * spec.R.apply(acc);
    return integrate(acc, spec.lambda);
}

inline cplx moment_exact(const PathSpec& spec, std::initializer_list<GridFunction> fs) {
    std::vector<GridFunction> v(fs);
    return moment_exact(spec, std::span<const GridFunction>(v));
}

struct McMoment {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

// Monte Carlo counterpart of moment_exact over a sampled batch (real part).
inline McMoment mc_moment(const PathBatch& batch, std::span<const GridFunction> fs) {
    McMoment m;
    m.n = batch.n_paths;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t p = 0; p < batch.n_paths; ++p) {
        cplx prod = 1.0;
        for (std::size_t k = 0; k < fs.size(); ++k) prod *= fs[k](batch.state(p, static_cast<int>(k)));
        double v = prod.real() * batch.weights[p];
        sum += v;
        sumsq += v * v;
    }
    double n = static_cast<double>(batch.n_paths);
    m.mean = sum / n;
    double var = std::max(0.0, sumsq / n - m.mean * m.mean);
    m.std_error = std::sqrt(var / n);
    return m;
}

// E(f∘pi_{n+k} | F_n) = R^k(f)∘pi_n; the value does not depend on n.
inline GridFunction cond_expect(const PathSpec& spec, const GridFunction& f, int k) {
    return spec.R.apply_n(f, k);
}

// ---------------------------------------------------------------------------
// Cylinder functions: finite products of factors f∘pi_level.

class CylinderFn {
public:
    CylinderFn() = default;
    CylinderFn(int level, GridFunction f) { factors_.emplace_back(level, std::move(f)); }

    static CylinderFn product(std::vector<std::pair<int, GridFunction>> factors) {
        CylinderFn c;
        c.factors_ = std::move(factors);
        c.merge_();
        return c;
    }

    const std::vector<std::pair<int, GridFunction>>& factors() const { return factors_; }
    int max_level() const {
        int m = 0;
        for (const auto& [lvl, f] : factors_) m = std::max(m, lvl);
        return m;
    }

    CylinderFn& multiply(int level, const GridFunction& f) {
        factors_.emplace_back(level, f);
        merge_();
        return *this;
    }

    CylinderFn conjugated() const {
        CylinderFn c;
        for (const auto& [lvl, f] : factors_) c.factors_.emplace_back(lvl, f.conjugated());
        return c;
    }

    // per-path-slot functions for the moment formula; identity where absent
    std::vector<GridFunction> slots(DyadicGrid base) const {
        std::vector<GridFunction> out(static_cast<std::size_t>(max_level()) + 1,
                                      GridFunction::constant(base, 1.0));
        for (const auto& [lvl, f] : factors_)
            out[static_cast<std::size_t>(lvl)] = out[static_cast<std::size_t>(lvl)] * f;
        return out;
    }

private:
    void merge_() {
        std::sort(factors_.begin(), factors_.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<std::pair<int, GridFunction>> merged;
        for (auto& [lvl, f] : factors_) {
            if (!merged.empty() && merged.back().first == lvl)
                merged.back().second = merged.back().second * f;
            else
                merged.emplace_back(lvl, std::move(f));
        }
        factors_ = std::move(merged);
    }

    std::vector<std::pair<int, GridFunction>> factors_;
};

// L2(P) pairing <xi, eta> = E[conj(xi) eta], conjugate-linear on the left.
inline cplx pair_moment(const PathSpec& spec, const CylinderFn& xi, const CylinderFn& eta) {
    CylinderFn prod = xi.conjugated();
    for (const auto& [lvl, f] : eta.factors()) prod.multiply(lvl, f);
    auto fs = prod.slots(spec.R.grid());
    return moment_exact(spec, std::span<const GridFunction>(fs));
}

inline double cyl_norm(const PathSpec& spec, const CylinderFn& xi) {
    return std::sqrt(std::max(0.0, pair_moment(spec, xi, xi).real()));
}

// E[xi | F_k]: factors above level k collapse downward through powers of R.
inline CylinderFn project(const PathSpec& spec, const CylinderFn& xi, int k) {
    std::vector<std::pair<int, GridFunction>> fs(xi.factors().begin(), xi.factors().end());
    std::sort(fs.begin(), fs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    while (!fs.empty() && fs.back().first > k) {
        auto [lvl, f] = fs.back();
        fs.pop_back();
        int target = fs.empty() ? k : std::max(k, fs.back().first);
        GridFunction g = spec.R.apply_n(f, lvl - target);
        if (!fs.empty() && fs.back().first == target)
            fs.back().second = fs.back().second * g;
        else
            fs.emplace_back(target, std::move(g));
    }
    return CylinderFn::product(std::move(fs));
}

// Weight W = d(lambda R)/d lambda for the spec's base measure.
inline GridFunction path_weight(const PathSpec& spec) {
    return rn_derivative(spec.R.adjoint_measure(spec.lambda), spec.lambda);
}

// U xi = (xi∘sigma-shift) sqrt(W∘pi_0): factors drop one level, level-0
// factors compose with sigma. Unitary only when {W = 0} carries no
// lambda-mass.
inline CylinderFn scaling_apply(const PathSpec& spec, const CylinderFn& xi) {
    if (!spec.sigma) throw DomainError("scaling_apply: spec has no endomorphism");
    GridFunction W = path_weight(spec);
    CellMeasure lam = spec.lambda.to_level(W.level());
    for (std::size_t i = 0; i < W.size(); ++i)
        if (lam.mass(i) > 0.0 && W.value(i).real() == 0.0)
            throw NotUnitary("scaling_apply: W vanishes on a cell of positive mass");

    std::vector<std::pair<int, GridFunction>> fs;
    for (const auto& [lvl, f] : xi.factors()) {
        if (lvl >= 1)
            fs.emplace_back(lvl - 1, f);
        else
            fs.emplace_back(0, compose(f, *spec.sigma));
    }
    CylinderFn out = CylinderFn::product(std::move(fs));
    out.multiply(0, W.sqrt_real());
    return out;
}

// U* xi = (xi∘shift) / sqrt(W∘pi_1): factors climb one level.
inline CylinderFn scaling_adjoint(const PathSpec& spec, const CylinderFn& xi) {
    GridFunction W = path_weight(spec);
    std::vector<std::pair<int, GridFunction>> fs;
    for (const auto& [lvl, f] : xi.factors()) fs.emplace_back(lvl + 1, f);
    CylinderFn out = CylinderFn::product(std::move(fs));
    out.multiply(1, W.rsqrt_or_zero());
    return out;
}

// rho(f): multiplication by f∘pi_0.
inline CylinderFn rho_mult(const GridFunction& f, const CylinderFn& xi) {
    CylinderFn out = xi;
    out.multiply(0, f);
    return out;
}

// ---------------------------------------------------------------------------

struct RenormReport {
    double max_abs_delta = 0.0;
    double max_rel_delta = 0.0;
    bool pass = false;
};

// The moments of (R, h, lambda) with h folded into the innermost slot must
// match the moments of the normalized operator R'(f) = R(fh)/h taken against
// h dlambda. The two routes generate the same path measure.
inline RenormReport renorm_equiv_check(const TransferOp& R, const GridFunction& h,
                                       const CellMeasure& lam, int n, int trials,
                                       CounterRng& rng, double tol = 1e-9) {
    PathSpec raw{R, h, lam, std::nullopt, n};
    PathSpec normd{normalize(R, h), GridFunction::constant(R.grid(), 1.0),
                   density_measure(h, lam), std::nullopt, n};
    RenormReport rep;
    for (int t = 0; t < trials; ++t) {
        std::vector<GridFunction> fs;
        for (int k = 0; k <= n; ++k) {
            std::vector<cplx> v(R.grid().size());
            for (auto& x : v) x = cplx(rng.uniform(0.0, 2.0), 0.0);
            fs.emplace_back(R.grid(), std::move(v), Scalar::real);
        }
        cplx lhs = moment_exact(raw, std::span<const GridFunction>(fs));
        cplx rhs = moment_exact(normd, std::span<const GridFunction>(fs));
        double delta = std::abs(lhs - rhs);
        rep.max_abs_delta = std::max(rep.max_abs_delta, delta);
        rep.max_rel_delta = std::max(rep.max_rel_delta, delta / std::max(1.0, std::abs(lhs)));
    }
    rep.pass = rep.max_rel_delta < tol;
    return rep;
}

} // namespace xferops
