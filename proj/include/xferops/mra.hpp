#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "core.hpp"
#include "errors.hpp"
#include "maps.hpp"
#include "pathspace.hpp"
#include "transfer.hpp"

namespace xferops {

// Orthogonal splitting of f∘pi_n into detail layers plus the base term
// R^n(f)∘pi_0. Detail k is R^{n-k}f - (R^{n-k+1}f)∘sigma carried at level k;
// every detail is killed by R, which is what makes the layers orthogonal
// under the path measure.
struct Decomposition {
    GridFunction base;
    std::vector<GridFunction> details; // index k-1 holds the level-k detail
    int n = 0;
    double ortho_residual = 0.0;
    double recon_residual = 0.0;
    double parseval_residual = 0.0;
};

inline Decomposition decompose(const PathSpec& spec, const GridFunction& f, int n) {
    if (!spec.sigma) throw NotDecomposable("decompose: spec has no endomorphism");
    {
        CounterRng probe(0xdec0);
        if (!check_pullout(spec.R, *spec.sigma, 2, probe).pass)
            throw NotDecomposable("decompose: operator fails the intertwining identity");
    }

    std::vector<GridFunction> powers; // R^j f
    powers.push_back(f);
    for (int j = 1; j <= n; ++j) powers.push_back(spec.R.apply(powers.back()));

    Decomposition dec{powers[static_cast<std::size_t>(n)], {}, n, 0.0, 0.0, 0.0};
    for (int k = 1; k <= n; ++k) {
        const GridFunction& a = powers[static_cast<std::size_t>(n - k)];
        const GridFunction& b = powers[static_cast<std::size_t>(n - k + 1)];
        dec.details.push_back(a.refined() - compose(b, *spec.sigma));
    }

    // cylinder parts and their pairings
    std::vector<CylinderFn> parts;
    parts.emplace_back(0, dec.base);
    for (int k = 1; k <= n; ++k) parts.emplace_back(k, dec.details[static_cast<std::size_t>(k - 1)]);
    CylinderFn whole(n, f);

    double ortho = 0.0;
    std::vector<double> part_norm2(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) {
        part_norm2[i] = pair_moment(spec, parts[i], parts[i]).real();
        for (std::size_t j = i + 1; j < parts.size(); ++j)
            ortho = std::max(ortho, std::abs(pair_moment(spec, parts[i], parts[j])));
    }
    dec.ortho_residual = ortho;

    // Reconstruction: on the solenoid pi_k = sigma^{n-k}∘pi_n, so every part
    // rewrites as a level-n cylinder and the residual is the L2(P)-norm of a
    // single grid function. The quadratic-form expansion would drown the
    // telescoping in sqrt(eps) cancellation noise.
    {
        GridFunction diff = dec.base; // placeholder, reassigned below
        GridFunction acc = compose_iter(dec.base, *spec.sigma, n);
        for (int k = 1; k <= n; ++k)
            acc = acc + compose_iter(dec.details[static_cast<std::size_t>(k - 1)], *spec.sigma,
                                     n - k);
        diff = f.to_level(acc.level()) - acc;
        CylinderFn as_cyl(n, diff);
        dec.recon_residual = std::sqrt(
            std::max(0.0, pair_moment(spec, as_cyl, as_cyl).real()));
    }

    double sum2 = 0.0;
    for (double v : part_norm2) sum2 += v;
    dec.parseval_residual = std::abs(pair_moment(spec, whole, whole).real() - sum2);
    return dec;
}

// ---------------------------------------------------------------------------
// Classical scale-space expansion in L2(dx) under the doubling chain:
// f = sum_k S^k u_k + S^{K+1} R^{K+1} f with u_k = R^k f - S R^{k+1} f in
// ker R and S g = g∘sigma.

struct HaarExpansion {
    std::vector<GridFunction> native;   // u_k at one finer level than f
    std::vector<GridFunction> embedded; // S^k u_k
    GridFunction tail;                  // S^{K+1} R^{K+1} f
    std::vector<double> energies;       // |u_k|^2, equal to |S^k u_k|^2
    double tail_energy = 0.0;
    double parseval_residual = 0.0;
    double recon_residual = 0.0;
    std::vector<double> ker_residuals;
    std::vector<double> e1_periodicity; // quotient diagnostic, reported only

    HaarExpansion() : tail(GridFunction::constant(DyadicGrid(1), 0.0)) {}
};

inline HaarExpansion haar_expand(const GridFunction& f, int n_max) {
    DyadicGrid g = f.grid();
    TransferOp R = haar_doubling(g);
    auto sigma = PiecewiseAffineMap::doubling();
    CellMeasure leb = CellMeasure::lebesgue(g);

    std::vector<GridFunction> powers;
    powers.push_back(f);
    for (int j = 1; j <= n_max + 1; ++j) powers.push_back(R.apply(powers.back()));

    HaarExpansion ex;
    double energy_sum = 0.0;
    for (int k = 0; k <= n_max; ++k) {
        GridFunction u = powers[static_cast<std::size_t>(k)].refined() -
                         compose(powers[static_cast<std::size_t>(k + 1)], sigma);
        ex.ker_residuals.push_back(R.apply(u).sup_norm());
        double e = inner(u, u, leb).real();
        ex.energies.push_back(e);
        energy_sum += e;
        GridFunction emb = compose_iter(u, sigma, k);
        // periodicity of the quotient by e1((2^k - 1) x): how close the
        // embedded detail is to the single-character form
        {
            double period = std::pow(2.0, -static_cast<double>(k));
            std::size_t shift = static_cast<std::size_t>(
                std::llround(period * static_cast<double>(emb.size())));
            double worst = 0.0;
            double freq = std::pow(2.0, k) - 1.0;
            auto quot = [&](std::size_t i) {
                double x = emb.grid().midpoint(i);
                cplx e1v(std::cos(2.0 * M_PI * freq * x), std::sin(2.0 * M_PI * freq * x));
                return emb.value(i) / e1v;
            };
            if (shift > 0 && shift < emb.size()) {
                for (std::size_t i = 0; i + shift < emb.size(); i += 7)
                    worst = std::max(worst, std::abs(quot(i) - quot(i + shift)));
            }
            ex.e1_periodicity.push_back(worst);
        }
        ex.embedded.push_back(std::move(emb));
        ex.native.push_back(std::move(u));
    }
    ex.tail = compose_iter(powers[static_cast<std::size_t>(n_max + 1)], sigma, n_max + 1);
    ex.tail_energy = inner(ex.tail, ex.tail, leb).real();

    double f2 = inner(f, f, leb).real();
    ex.parseval_residual = std::abs(f2 - energy_sum - ex.tail_energy);

    GridFunction recon = ex.tail;
    for (const auto& emb : ex.embedded) recon = recon + emb.to_level(ex.tail.level());
    ex.recon_residual = sup_distance(recon, f);
    return ex;
}

// ---------------------------------------------------------------------------
// Wavelet filter layer

struct WaveletFilter {
    std::vector<cplx> coeffs; // masking coefficients a_k
    int scale = 2;            // N

    cplx m0(double t) const {
        cplx s = 0.0;
        for (std::size_t k = 0; k < coeffs.size(); ++k) {
            double th = 2.0 * M_PI * static_cast<double>(k) * t;
            s += coeffs[k] * cplx(std::cos(th), std::sin(th));
        }
        return s;
    }

    static WaveletFilter haar() { return {{cplx(M_SQRT1_2, 0.0), cplx(M_SQRT1_2, 0.0)}, 2}; }
    static WaveletFilter degenerate() { return {{cplx(1.0, 0.0)}, 2}; }
};

// R_{m0} f(t) = (1/N) sum_k |m0|^2 f at (t+k)/N, as a branch operator with
// weights |m0((t+k)/N)|^2 / N frozen on the native grid.
inline TransferOp filter_operator(const WaveletFilter& w, DyadicGrid grid) {
    int N = w.scale;
    BranchSystem sys;
    for (int k = 0; k < N; ++k) {
        double slope = 1.0 / static_cast<double>(N);
        double offset = static_cast<double>(k) / static_cast<double>(N);
        auto weight_at = [w, slope, offset](double x) {
            return std::norm(w.m0(slope * x + offset)) * slope;
        };
        GridFunction wg = GridFunction::sample_real(grid, weight_at);
        sys.branches.push_back({slope, offset, WeightFn::grid_with_exact(std::move(wg), weight_at)});
    }
    if (N == 2) sys.endo = PiecewiseAffineMap::doubling();
    json extra;
    extra["m0_coeffs"] = json::array();
    for (const auto& c : w.coeffs) extra["m0_coeffs"].push_back({c.real(), c.imag()});
    return branch_ifs(grid, std::move(sys), std::move(extra));
}

// Truncated scaling product: phi_hat(t) ~ prod_{k=1..K} m0(t/N^k)/sqrt(N).
inline cplx cascade_fourier_at(const WaveletFilter& w, double t, int K) {
    double rootN = std::sqrt(static_cast<double>(w.scale));
    cplx prod = 1.0;
    double s = t;
    for (int k = 1; k <= K; ++k) {
        s /= static_cast<double>(w.scale);
        prod *= w.m0(s) / rootN;
    }
    return prod;
}

inline std::vector<cplx> cascade_fourier(const WaveletFilter& w, const std::vector<double>& ts,
                                         int K) {
    double rootN = std::sqrt(static_cast<double>(w.scale));
    if (std::abs(w.m0(0.0) - cplx(rootN, 0.0)) > 1e-8)
        throw NonConvergentCascade("cascade_fourier: m0(0) != sqrt(N)");
    std::vector<cplx> out(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) out[i] = cascade_fourier_at(w, ts[i], K);
    return out;
}

// Lattice sum h(t) = sum_{|n| <= lattice} |phi_hat(t+n)|^2. The omitted tail
// is bounded by 2 sup|sin|^2-type terms / (pi^2 lattice); callers pick the
// lattice to their tolerance.
inline double h_phi(const WaveletFilter& w, double t, int K, int lattice) {
    double s = 0.0;
    for (int n = -lattice; n <= lattice; ++n)
        s += std::norm(cascade_fourier_at(w, t + static_cast<double>(n), K));
    return s;
}

struct K0Trial {
    double line_integral = 0.0;   // int |f phi_hat|^2 dt over |t| <= T
    double circle_integral = 0.0; // int_0^1 |f|^2 h_phi dt
    double delta = 0.0;
    bool pass = false;
};

struct K0Report {
    std::vector<K0Trial> trials;
    double tol = 0.0;
    bool pass = true;
};

// Isometry of the 1-periodic embedding f -> f phi_hat: both sides computed by
// midpoint quadrature, the line integral truncated to |t| <= T with tail
// 1/(pi^2 T) for the unit-mass scaling function.
inline K0Report k0_isometry_check(const WaveletFilter& w, int trials, CounterRng& rng,
                                  int K = 30, double T = 512.0, int steps_per_unit = 128,
                                  int lattice = 4096, double tol = 1e-3) {
    K0Report rep;
    rep.tol = tol;

    // cache h_phi on a unit-interval grid
    int hsteps = 256;
    std::vector<double> hvals(static_cast<std::size_t>(hsteps));
    for (int i = 0; i < hsteps; ++i)
        hvals[static_cast<std::size_t>(i)] = h_phi(w, (i + 0.5) / hsteps, K, lattice);

    for (int t = 0; t < trials; ++t) {
        // random trig polynomial with a handful of modes, normalized to unit
        // L2(0,1) mass
        std::vector<cplx> c(4);
        double norm2 = 0.0;
        for (auto& v : c) {
            v = cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
            norm2 += std::norm(v);
        }
        for (auto& v : c) v /= std::sqrt(norm2);
        auto f = [&](double x) {
            cplx s = 0.0;
            for (std::size_t k = 0; k < c.size(); ++k) {
                double th = 2.0 * M_PI * static_cast<double>(k) * x;
                s += c[k] * cplx(std::cos(th), std::sin(th));
            }
            return s;
        };

        K0Trial trial;
        double dt = 1.0 / steps_per_unit;
        long n_steps = std::lround(2.0 * T * steps_per_unit);
        for (long i = 0; i < n_steps; ++i) {
            double x = -T + (static_cast<double>(i) + 0.5) * dt;
            trial.line_integral += std::norm(f(x) * cascade_fourier_at(w, x, K)) * dt;
        }
        for (int i = 0; i < hsteps; ++i) {
            double x = (i + 0.5) / hsteps;
            trial.circle_integral += std::norm(f(x)) * hvals[static_cast<std::size_t>(i)] / hsteps;
        }
        trial.delta = std::abs(trial.line_integral - trial.circle_integral);
        trial.pass = trial.delta < tol;
        rep.pass = rep.pass && trial.pass;
        rep.trials.push_back(trial);
    }
    return rep;
}

} // namespace xferops
