#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "core.hpp"
#include "errors.hpp"
#include "maps.hpp"
#include "measure.hpp"
#include "rng.hpp"
#include "transfer.hpp"

namespace xferops {

// Finite system of affine contractions with probability weights; optionally
// the expanding endomorphism that inverts every branch.
struct AffineIFS {
    struct Map {
        double slope = 0.5;  // |slope| < 1
        double offset = 0.0; // image stays inside [0,1)
        double weight = 0.5; // > 0, sum to 1
    };
    std::vector<Map> maps;
    std::optional<PiecewiseAffineMap> endo;

    void validate() const {
        double sum = 0.0, cmax = 0.0;
        for (const auto& m : maps) {
            if (m.weight <= 0.0) throw DomainError("AffineIFS: weights must be positive");
            sum += m.weight;
            cmax = std::max(cmax, std::abs(m.slope));
        }
        if (std::abs(sum - 1.0) > 1e-12) throw DomainError("AffineIFS: weights must sum to 1");
        if (cmax >= 1.0) throw DomainError("AffineIFS: maps must contract");
    }

    // equal-weight pair {u x, (1-u) x + u} with its expanding endomorphism
    static AffineIFS two_maps(double u) {
        if (!(u > 0.0 && u < 1.0)) throw DomainError("AffineIFS: u outside (0,1)");
        AffineIFS s;
        s.maps = {{u, 0.0, 0.5}, {1.0 - u, u, 0.5}};
        s.endo = PiecewiseAffineMap::two_branch_expander(u);
        return s;
    }

    TransferOp as_transfer_op(DyadicGrid grid) const {
        BranchSystem sys;
        for (const auto& m : maps)
            sys.branches.push_back({m.slope, m.offset, WeightFn::constant(m.weight)});
        sys.endo = endo;
        json extra;
        extra["branches"] = json::array();
        for (const auto& m : maps)
            extra["branches"].push_back(
                {{"slope", m.slope}, {"offset", m.offset}, {"weight", m.weight}});
        return branch_ifs(grid, std::move(sys), std::move(extra));
    }
};

struct EquilibriumResult {
    CellMeasure measure;
    bool converged = false;
    int iterations = 0;
    double last_increment = 0.0;
};

// Fixed point of mu -> sum_j p_j mu∘tau_j^{-1} from the uniform start, with
// the exact interval-overlap pushforward so non-dyadic contractions do not
// drift the moments.
inline EquilibriumResult equilibrium_measure(const AffineIFS& ifs, DyadicGrid grid,
                                             double tol = 1e-12, int max_iter = 400) {
    ifs.validate();
    std::vector<PiecewiseAffineMap> maps;
    for (const auto& m : ifs.maps)
        maps.emplace_back("branch", std::vector<AffineBranch>{{0.0, 1.0, m.slope, m.offset}});

    EquilibriumResult res{CellMeasure::lebesgue(grid), false, 0, 0.0};
    for (int k = 0; k < max_iter; ++k) {
        CellMeasure next(grid);
        for (std::size_t j = 0; j < maps.size(); ++j) {
            CellMeasure part = pushforward(res.measure, maps[j]).measure;
            for (std::size_t i = 0; i < next.size(); ++i)
                next.mass(i) += ifs.maps[j].weight * part.mass(i);
            for (const auto& a : part.atoms()) next.add_atom(a.pos, ifs.maps[j].weight * a.mass);
        }
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

// Random-branch orbit; the post-burn-in empirical histogram samples the
// equilibrium measure.
inline std::vector<double> chaos_game(const AffineIFS& ifs, std::size_t n_samples,
                                      std::size_t burn_in, CounterRng& rng) {
    ifs.validate();
    std::vector<double> out;
    out.reserve(n_samples);
    double x = rng.next_double();
    for (std::size_t k = 0; k < burn_in + n_samples; ++k) {
        double pick = rng.next_double();
        double acc = 0.0;
        const AffineIFS::Map* chosen = &ifs.maps.back();
        for (const auto& m : ifs.maps) {
            acc += m.weight;
            if (pick < acc) {
                chosen = &m;
                break;
            }
        }
        x = chosen->slope * x + chosen->offset;
        if (k >= burn_in) out.push_back(x);
    }
    return out;
}

inline CellMeasure histogram(const std::vector<double>& samples, DyadicGrid grid) {
    CellMeasure m(grid);
    if (samples.empty()) return m;
    double w = 1.0 / static_cast<double>(samples.size());
    for (double x : samples) m.mass(grid.cell_of(x)) += w;
    return m;
}

struct StabilityReport {
    double max_residual = 0.0;
    bool pass = false;
};

// sigma∘tau_j = id on grid midpoints, checked in plain double arithmetic.
inline StabilityReport stability_check(const AffineIFS& ifs, const PiecewiseAffineMap& sigma,
                                       DyadicGrid grid, double tol = 1e-10) {
    StabilityReport rep;
    for (const auto& m : ifs.maps) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            double x = grid.midpoint(i);
            rep.max_residual = std::max(rep.max_residual,
                                        std::abs(sigma(m.slope * x + m.offset) - x));
        }
    }
    rep.pass = rep.max_residual < tol;
    return rep;
}

struct GStabilityReport {
    double max_residual = 0.0;
    double fraction_violating = 0.0;
    bool stable = false;
};

// sigma(G(x,y)) = x sampled over (x,y) ~ lambda_ref x nu. Equivalent to the
// intertwining identity for the induced operator.
inline GStabilityReport g_stability_test(const KernelSpec& spec, const PiecewiseAffineMap& sigma,
                                         std::size_t samples, CounterRng& rng,
                                         double tol = 1e-9) {
    GStabilityReport rep;
    std::size_t bad = 0;
    for (std::size_t k = 0; k < samples; ++k) {
        double x = rng.next_double();
        double u = rng.next_double();
        double pick = rng.next_double();
        double acc = 0.0;
        int i = 0;
        for (std::size_t j = 0; j < spec.weights.size(); ++j) {
            acc += spec.weights[j];
            if (pick < acc) {
                i = static_cast<int>(j);
                break;
            }
        }
        double r = std::abs(sigma(spec.G(x, u, i)) - x);
        rep.max_residual = std::max(rep.max_residual, r);
        if (r > tol) ++bad;
    }
    rep.fraction_violating = static_cast<double>(bad) / static_cast<double>(samples);
    rep.stable = rep.max_residual < tol;
    return rep;
}

// Similarity dimension -ln 2 / ln u of the two-map family in its singular
// regime u <= 1/2.
inline double scaling_dimension(double u) {
    if (!(u > 0.0 && u <= 0.5)) throw DomainError("scaling_dimension: u outside (0, 1/2]");
    return -std::log(2.0) / std::log(u);
}

// Moments of the two-map equilibrium measure solved exactly from the
// self-similarity relation: m_k = (u^k m_k + sum_i C(k,i)(1-u)^i u^{k-i} m_i)/2.
inline std::vector<double> equilibrium_moments_oracle(double u, int max_order) {
    std::vector<double> m(static_cast<std::size_t>(max_order) + 1, 0.0);
    m[0] = 1.0;
    std::vector<std::vector<double>> binom(static_cast<std::size_t>(max_order) + 1);
    for (int n = 0; n <= max_order; ++n) {
        binom[static_cast<std::size_t>(n)].assign(static_cast<std::size_t>(n) + 1, 1.0);
        for (int k = 1; k < n; ++k)
            binom[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)] =
                binom[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(k - 1)] +
                binom[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(k)];
    }
    for (int k = 1; k <= max_order; ++k) {
        double rhs = 0.0;
        for (int i = 0; i < k; ++i)
            rhs += binom[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] *
                   std::pow(1.0 - u, i) * std::pow(u, k - i) * m[static_cast<std::size_t>(i)];
        double self = 0.5 * (std::pow(u, k) + std::pow(1.0 - u, k));
        m[static_cast<std::size_t>(k)] = 0.5 * rhs / (1.0 - self);
    }
    return m;
}

} // namespace xferops
