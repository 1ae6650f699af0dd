#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "maps.hpp"
#include "measure.hpp"
#include "rng.hpp"

namespace xferops {

using json = nlohmann::json;

// Branch weight: a constant or a piecewise-constant function frozen on the
// operator's native grid. Freezing keeps every weight lookup identical across
// refinement levels, which is what makes the operator algebra grid-exact.
// Atoms are exact points, so they read the analytic form when one exists.
struct WeightFn {
    std::optional<GridFunction> fn; // piecewise-constant when set
    double c = 0.0;
    std::function<double(double)> exact_fn; // optional pointwise form

    static WeightFn constant(double v) { return WeightFn{std::nullopt, v, {}}; }
    static WeightFn grid(GridFunction g) { return WeightFn{std::move(g), 0.0, {}}; }
    static WeightFn grid_with_exact(GridFunction g, std::function<double(double)> e) {
        return WeightFn{std::move(g), 0.0, std::move(e)};
    }

    double at(double x) const { return fn ? fn->operator()(x).real() : c; }
    double at_exact(double x) const { return exact_fn ? exact_fn(x) : at(x); }
    bool is_const() const { return !fn.has_value(); }
};

struct Branch {
    double slope = 0.5;
    double offset = 0.0;
    WeightFn weight;

    double apply(double x) const {
        double y = slope * x + offset;
        return y - std::floor(y);
    }
};

struct BranchSystem {
    std::vector<Branch> branches;
    std::optional<PiecewiseAffineMap> endo;
};

// Kernel form (x,(u,i)) -> X with nu = (uniform du on [0,1)) x (weights p_i).
struct KernelSpec {
    std::string name;
    std::function<double(double x, double u, int i)> G;
    std::vector<double> weights; // p_i > 0, sum 1

    static KernelSpec mean_kernel() {
        return {"mean_kernel",
                [](double x, double u, int i) { return i == 0 ? u * x : (1.0 - u) * x + u; },
                {0.5, 0.5}};
    }

    static KernelSpec identity_kernel() {
        return {"identity", [](double x, double, int) { return x; }, {1.0}};
    }

    // IFS-with-frozen-parameter: u is pinned, only the coin i is random.
    static KernelSpec frozen_mean_kernel(double u0) {
        return {"mean_kernel_frozen",
                [u0](double x, double, int i) { return i == 0 ? u0 * x : (1.0 - u0) * x + u0; },
                {0.5, 0.5}};
    }
};

class TransferOpImpl {
public:
    virtual ~TransferOpImpl() = default;
    virtual std::string kind() const = 0;
    // Positive operator applied to midpoint samples; output on f's grid.
    virtual GridFunction apply(const GridFunction& f) const = 0;
    // Adjoint action on measures, exactly dual to apply on indicators.
    virtual CellMeasure adjoint(const CellMeasure& lam) const = 0;
    // One-level-finer adjoint where each fine cell has a single source; only
    // branch systems of the form {(x+k)/N} admit it.
    virtual std::optional<CellMeasure> adjoint_fine(const CellMeasure&) const {
        return std::nullopt;
    }
    // Markov transition x -> y drawn from the h-reweighted kernel
    // mu(dy|x) h(y)/h(x).
    virtual double step(double x, const GridFunction& h, CounterRng& rng) const = 0;
    virtual json describe() const = 0;
    virtual const BranchSystem* branch_system() const { return nullptr; }
};

class TransferOp {
public:
    TransferOp(std::shared_ptr<const TransferOpImpl> impl, DyadicGrid grid)
        : impl_(std::move(impl)), grid_(grid) {}

    const DyadicGrid& grid() const { return grid_; }
    std::string kind() const { return impl_->kind(); }

    GridFunction apply(const GridFunction& f) const { return impl_->apply(f); }

    GridFunction apply_n(const GridFunction& f, int n) const {
        GridFunction g = f;
        for (int k = 0; k < n; ++k) g = impl_->apply(g);
        return g;
    }

    CellMeasure adjoint_measure(const CellMeasure& lam) const { return impl_->adjoint(lam); }

    std::optional<CellMeasure> adjoint_measure_fine(const CellMeasure& lam) const {
        return impl_->adjoint_fine(lam);
    }

    double step(double x, const GridFunction& h, CounterRng& rng) const {
        return impl_->step(x, h, rng);
    }

    json describe() const { return impl_->describe(); }
    const BranchSystem* branch_system() const { return impl_->branch_system(); }

    bool is_unital(double tol = 1e-12) const {
        GridFunction one = GridFunction::constant(grid_, 1.0);
        return sup_distance(apply(one), one) < tol;
    }

private:
    std::shared_ptr<const TransferOpImpl> impl_;
    DyadicGrid grid_;
};

// ---------------------------------------------------------------------------
// Branch operators: (Rf)(x) = sum_j w_j(x) f(tau_j(x))

class BranchOp final : public TransferOpImpl {
public:
    BranchOp(std::string kind, DyadicGrid grid, BranchSystem sys, json extra = json::object())
        : kind_(std::move(kind)), grid_(grid), sys_(std::move(sys)), extra_(std::move(extra)) {}

    std::string kind() const override { return kind_; }
    const BranchSystem* branch_system() const override { return &sys_; }

    GridFunction apply(const GridFunction& f) const override {
        std::vector<cplx> out(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) {
            double x = f.grid().midpoint(i);
            cplx s = 0.0;
            for (const auto& b : sys_.branches) s += b.weight.at(x) * f(b.apply(x));
            out[i] = s;
        }
        return GridFunction(f.grid(), std::move(out), f.kind());
    }

    CellMeasure adjoint(const CellMeasure& lam) const override {
        CellMeasure out(lam.grid());
        for (std::size_t c = 0; c < lam.size(); ++c) {
            if (lam.mass(c) == 0.0) continue;
            double x = lam.grid().midpoint(c);
            for (const auto& b : sys_.branches) {
                double w = b.weight.at(x);
                if (w == 0.0) continue;
                out.mass(lam.grid().cell_of(b.apply(x))) += lam.mass(c) * w;
            }
        }
        for (const auto& a : lam.atoms()) {
            for (const auto& b : sys_.branches) {
                double w = b.weight.at_exact(a.pos);
                if (w > 0.0 && a.mass > 0.0) out.add_atom(b.apply(a.pos), a.mass * w);
            }
        }
        return out;
    }

    std::optional<CellMeasure> adjoint_fine(const CellMeasure& lam) const override {
        int r = dyadic_family_log2_();
        if (r < 0) return std::nullopt;
        CellMeasure out(lam.grid().refined(r));
        std::size_t Q = lam.size();
        for (std::size_t c = 0; c < Q; ++c) {
            if (lam.mass(c) == 0.0) continue;
            double x = lam.grid().midpoint(c);
            for (std::size_t j = 0; j < sys_.branches.size(); ++j)
                out.mass(c + j * Q) += lam.mass(c) * sys_.branches[j].weight.at(x);
        }
        for (const auto& a : lam.atoms()) {
            for (const auto& b : sys_.branches) {
                double w = b.weight.at_exact(a.pos);
                if (w > 0.0 && a.mass > 0.0) out.add_atom(b.apply(a.pos), a.mass * w);
            }
        }
        return out;
    }

    double step(double x, const GridFunction& h, CounterRng& rng) const override {
        double hx = h(x).real();
        if (hx <= 0.0) throw KernelNotStochastic("step: h vanishes at current state");
        std::vector<double> p(sys_.branches.size());
        double sum = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) {
            const auto& b = sys_.branches[j];
            p[j] = b.weight.at_exact(x) * h(b.apply(x)).real() / hx;
            sum += p[j];
        }
        if (std::abs(sum - 1.0) > 1e-8)
            throw KernelNotStochastic("step: branch probabilities sum to " + std::to_string(sum));
        double u = rng.next_double() * sum;
        double acc = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) {
            acc += p[j];
            if (u < acc || j + 1 == p.size()) return sys_.branches[j].apply(x);
        }
        return sys_.branches.back().apply(x);
    }

    json describe() const override {
        json j = extra_;
        j["kind"] = kind_;
        return j;
    }

private:
    // Branches of the form tau_k(x) = (x+k)/N, N = 2^r: returns r, else -1.
    int dyadic_family_log2_() const {
        std::size_t n = sys_.branches.size();
        if (n < 2 || (n & (n - 1)) != 0) return -1;
        double inv = 1.0 / static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k) {
            const auto& b = sys_.branches[k];
            if (b.slope != inv || b.offset != static_cast<double>(k) * inv) return -1;
        }
        int r = 0;
        while ((std::size_t{1} << r) < n) ++r;
        return r;
    }

    std::string kind_;
    DyadicGrid grid_;
    BranchSystem sys_;
    json extra_;
};

// (Rf)(x) = (f(x/2) + f((x+1)/2)) / 2
inline TransferOp haar_doubling(DyadicGrid grid) {
    BranchSystem sys;
    sys.branches = {{0.5, 0.0, WeightFn::constant(0.5)}, {0.5, 0.5, WeightFn::constant(0.5)}};
    sys.endo = PiecewiseAffineMap::doubling();
    return TransferOp(std::make_shared<BranchOp>("haar_doubling", grid, std::move(sys)), grid);
}

// (Rf)(x) = cos^2(pi x/2) f(x/2) + sin^2(pi x/2) f((x+1)/2), weights frozen on
// the native grid with w1 := 1 - w0 so R(1) = 1 holds exactly.
inline TransferOp filter_doubling(DyadicGrid grid) {
    GridFunction w0 = GridFunction::sample_real(grid, [](double x) {
        double c = std::cos(0.5 * M_PI * x);
        return c * c;
    });
    std::vector<cplx> w1v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) w1v[i] = 1.0 - w0.value(i).real();
    GridFunction w1(grid, std::move(w1v), Scalar::real);
    auto w0_exact = [](double x) {
        double c = std::cos(0.5 * M_PI * x);
        return c * c;
    };
    auto w1_exact = [w0_exact](double x) { return 1.0 - w0_exact(x); };
    BranchSystem sys;
    sys.branches = {{0.5, 0.0, WeightFn::grid_with_exact(std::move(w0), w0_exact)},
                    {0.5, 0.5, WeightFn::grid_with_exact(std::move(w1), w1_exact)}};
    sys.endo = PiecewiseAffineMap::doubling();
    json extra;
    extra["m0_coeffs"] = {{M_SQRT1_2, 0.0}, {M_SQRT1_2, 0.0}};
    return TransferOp(std::make_shared<BranchOp>("filter_doubling", grid, std::move(sys), extra),
                      grid);
}

inline TransferOp branch_ifs(DyadicGrid grid, BranchSystem sys, json extra = json::object()) {
    return TransferOp(std::make_shared<BranchOp>("branch_ifs", grid, std::move(sys), std::move(extra)),
                      grid);
}

// ---------------------------------------------------------------------------
// Mean of the two one-sided averages:
// (Rf)(x) = ((1/x) int_0^x f + (1/(1-x)) int_x^1 f) / 2

class MeanIntegralOp final : public TransferOpImpl {
public:
    explicit MeanIntegralOp(DyadicGrid grid) : grid_(grid) {}

    std::string kind() const override { return "mean_integral"; }

    GridFunction apply(const GridFunction& f) const override {
        // exact prefix sums of cell averages; midpoints stay clear of the
        // endpoint singularities
        std::size_t n = f.size();
        double w = 1.0 / static_cast<double>(n);
        std::vector<cplx> prefix(n + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + f.value(i) * w;
        cplx total = prefix[n];
        std::vector<cplx> out(n);
        for (std::size_t i = 0; i < n; ++i) {
            double x = f.grid().midpoint(i);
            cplx up_to_mid = prefix[i] + 0.5 * w * f.value(i);
            out[i] = 0.5 * (up_to_mid / x + (total - up_to_mid) / (1.0 - x));
        }
        return GridFunction(f.grid(), std::move(out), f.kind());
    }

    CellMeasure adjoint(const CellMeasure& lam) const override {
        // Each source point x spreads as (1/x on [0,x] + 1/(1-x) on [x,1])/2
        // with exact cell overlaps; cell masses scatter from their midpoints,
        // which is exactly dual to apply on indicators. Atoms scatter from
        // their true positions so point masses are not displaced.
        const DyadicGrid& g = lam.grid();
        std::size_t n = g.size();
        double M = static_cast<double>(n);
        CellMeasure out(g);
        std::vector<double> diff(n + 1, 0.0);

        auto scatter_point = [&](double x, double w) {
            if (w <= 0.0) return;
            if (x <= 0.0) {
                // limit kernel at 0: (delta_0 + Lebesgue)/2
                out.add_atom(0.0, 0.5 * w);
                diff[0] += 0.5 * w / M;
                diff[n] -= 0.5 * w / M;
                return;
            }
            std::size_t cx = g.cell_of(x);
            double lrate = 0.5 * w / x;
            double rrate = 0.5 * w / (1.0 - x);
            diff[0] += lrate / M;
            diff[cx] -= lrate / M;
            out.mass(cx) += lrate * (x - g.left(cx)) + rrate * (g.right(cx) - x);
            diff[cx + 1] += rrate / M;
            diff[n] -= rrate / M;
        };

        for (std::size_t c = 0; c < n; ++c) scatter_point(g.midpoint(c), lam.mass(c));
        for (const auto& a : lam.atoms()) scatter_point(a.pos, a.mass);

        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += diff[i];
            out.mass(i) += acc;
        }
        return out;
    }

    double step(double x, const GridFunction& h, CounterRng& rng) const override {
        double hsup = h.sup_norm();
        for (int tries = 0; tries < 10000; ++tries) {
            double y = (rng.next_double() < 0.5) ? rng.next_double() * x
                                                 : x + rng.next_double() * (1.0 - x);
            if (h(y).real() >= rng.next_double() * hsup) return y;
        }
        throw KernelNotStochastic("mean_integral step: rejection sampler starved");
    }

    json describe() const override { return json{{"kind", "mean_integral"}}; }

private:
    DyadicGrid grid_;
};

inline TransferOp mean_integral(DyadicGrid grid) {
    return TransferOp(std::make_shared<MeanIntegralOp>(grid), grid);
}

// ---------------------------------------------------------------------------
// (Rf)(x) = int f(G(x,y)) dnu(y), nu = uniform(du) x (p_i); deterministic
// product midpoint quadrature in u.

class KernelGOp final : public TransferOpImpl {
public:
    KernelGOp(DyadicGrid grid, KernelSpec spec, int quadrature)
        : grid_(grid), spec_(std::move(spec)), quad_(quadrature) {
        if (quad_ < 1) throw DomainError("kernel_g: quadrature count must be >= 1");
    }

    std::string kind() const override { return "kernel_g"; }

    GridFunction apply(const GridFunction& f) const override {
        std::vector<cplx> out(f.size());
        for (std::size_t c = 0; c < f.size(); ++c) {
            double x = f.grid().midpoint(c);
            cplx s = 0.0;
            for (int q = 0; q < quad_; ++q) {
                double u = (q + 0.5) / quad_;
                for (std::size_t i = 0; i < spec_.weights.size(); ++i)
                    s += spec_.weights[i] * f(spec_.G(x, u, static_cast<int>(i)));
            }
            out[c] = s / static_cast<double>(quad_);
        }
        return GridFunction(f.grid(), std::move(out), f.kind());
    }

    CellMeasure adjoint(const CellMeasure& lam) const override {
        CellMeasure out(lam.grid());
        auto scatter = [&](double x, double w) {
            for (int q = 0; q < quad_; ++q) {
                double u = (q + 0.5) / quad_;
                for (std::size_t i = 0; i < spec_.weights.size(); ++i) {
                    double y = spec_.G(x, u, static_cast<int>(i));
                    out.mass(lam.grid().cell_of(y)) += w * spec_.weights[i] / quad_;
                }
            }
        };
        for (std::size_t c = 0; c < lam.size(); ++c)
            if (lam.mass(c) > 0.0) scatter(lam.grid().midpoint(c), lam.mass(c));
        for (const auto& a : lam.atoms()) scatter(a.pos, a.mass);
        return out;
    }

    double step(double x, const GridFunction& h, CounterRng& rng) const override {
        double hsup = h.sup_norm();
        for (int tries = 0; tries < 10000; ++tries) {
            double pick = rng.next_double();
            std::size_t i = 0;
            double acc = 0.0;
            for (; i < spec_.weights.size(); ++i) {
                acc += spec_.weights[i];
                if (pick < acc) break;
            }
            if (i >= spec_.weights.size()) i = spec_.weights.size() - 1;
            double y = spec_.G(x, rng.next_double(), static_cast<int>(i));
            if (h(y).real() >= rng.next_double() * hsup) return y;
        }
        throw KernelNotStochastic("kernel_g step: rejection sampler starved");
    }

    json describe() const override {
        return json{{"kind", "kernel_g"}, {"name", spec_.name}, {"quadrature", quad_}};
    }

private:
    DyadicGrid grid_;
    KernelSpec spec_;
    int quad_;
};

inline TransferOp kernel_g(DyadicGrid grid, KernelSpec spec, int quadrature) {
    return TransferOp(std::make_shared<KernelGOp>(grid, std::move(spec), quadrature), grid);
}

// ---------------------------------------------------------------------------
// R'(f) = R(f h)/h with the 0/0 -> 0 convention.

class NormalizedOp final : public TransferOpImpl {
public:
    NormalizedOp(TransferOp inner, GridFunction h) : inner_(std::move(inner)), h_(std::move(h)) {}

    std::string kind() const override { return "normalized"; }

    GridFunction apply(const GridFunction& f) const override {
        GridFunction u = inner_.apply(f * h_);
        GridFunction hh = h_.to_level(u.level());
        double scale = u.sup_norm();
        std::vector<cplx> out(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) {
            double hv = hh.value(i).real();
            if (hv != 0.0) {
                out[i] = u.value(i) / hv;
            } else if (std::abs(u.value(i)) <= 1e-12 * std::max(1.0, scale)) {
                out[i] = 0.0;
            } else {
                throw HarmonicZeroDivision("normalized apply: mass escapes through zero of h");
            }
        }
        return GridFunction(u.grid(), std::move(out), f.kind());
    }

    CellMeasure adjoint(const CellMeasure& lam) const override {
        // lambda R' = h d((lambda/h) R): exact dual of apply
        CellMeasure mu(lam.grid());
        GridFunction hh = h_.to_level(lam.level());
        for (std::size_t i = 0; i < lam.size(); ++i) {
            double hv = hh.value(i).real();
            if (hv != 0.0)
                mu.mass(i) = lam.mass(i) / hv;
            else if (lam.mass(i) > 0.0)
                throw HarmonicZeroDivision("normalized adjoint: lambda-mass on zero of h");
        }
        for (const auto& a : lam.atoms()) {
            double hv = hh(a.pos).real();
            if (hv == 0.0) throw HarmonicZeroDivision("normalized adjoint: atom on zero of h");
            mu.add_atom(a.pos, a.mass / hv);
        }
        CellMeasure nu = inner_.adjoint_measure(mu);
        GridFunction hn = h_.to_level(nu.level());
        CellMeasure out(nu.grid());
        for (std::size_t i = 0; i < nu.size(); ++i) out.mass(i) = nu.mass(i) * hn.value(i).real();
        for (const auto& a : nu.atoms()) out.add_atom(a.pos, a.mass * hn(a.pos).real());
        return out;
    }

    double step(double x, const GridFunction& h, CounterRng& rng) const override {
        return inner_.step(x, h_ * h, rng);
    }

    json describe() const override {
        return json{{"kind", "normalized"}, {"inner", inner_.describe()}};
    }

    const BranchSystem* branch_system() const override { return inner_.branch_system(); }

private:
    TransferOp inner_;
    GridFunction h_;
};

// Rescale R by a harmonic density h: R'(f) = R(fh)/h.
inline TransferOp normalize(const TransferOp& R, const GridFunction& h, double tol = 1e-9) {
    if (!h.is_nonneg()) throw NotHarmonic("normalize: h must be nonnegative");
    double resid = sup_distance(R.apply(h), h);
    if (resid > tol)
        throw NotHarmonic("normalize: h is not harmonic, residual " + std::to_string(resid));
    return TransferOp(std::make_shared<NormalizedOp>(R, h), R.grid());
}

// ---------------------------------------------------------------------------

struct PulloutReport {
    double max_residual = 0.0;
    double tol = 0.0;
    bool pass = false;
};

// Draws random bounded pairs (f,g) and compares R((f∘σ)g) with f R(g). For
// branch operators the left side is evaluated pointwise through the branch
// maps, which is exact on piecewise-constant data, so stable systems pass at
// float precision. Operators without branch structure use the grid pipeline
// and fail with an order-one residual when no endomorphism is compatible.
inline PulloutReport check_pullout(const TransferOp& R, const PiecewiseAffineMap& sigma,
                                   int trials, CounterRng& rng,
                                   std::optional<double> tol_opt = std::nullopt) {
    const DyadicGrid& g = R.grid();
    double tol = tol_opt ? *tol_opt : 1e-10;
    PulloutReport rep;
    rep.tol = tol;
    const BranchSystem* sys = R.branch_system();
    for (int t = 0; t < std::max(1, trials); ++t) {
        auto rand_fn = [&](CounterRng& r) {
            std::vector<cplx> v(g.size());
            for (auto& x : v) x = cplx(r.uniform(-1.0, 1.0), 0.0);
            return GridFunction(g, std::move(v), Scalar::real);
        };
        GridFunction f = rand_fn(rng);
        GridFunction h = rand_fn(rng);
        double resid = 0.0;
        if (sys) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                double x = g.midpoint(i);
                cplx lhs = 0.0, rg = 0.0;
                for (const auto& b : sys->branches) {
                    double y = b.apply(x);
                    double w = b.weight.at(x);
                    lhs += w * f(sigma(y)) * h(y);
                    rg += w * h(y);
                }
                resid = std::max(resid, std::abs(lhs - f.value(i) * rg));
            }
        } else {
            GridFunction lhs = R.apply(compose(f, sigma) * h.refined());
            GridFunction rhs = (f * R.apply(h)).refined();
            resid = sup_distance(lhs, rhs);
        }
        rep.max_residual = std::max(rep.max_residual, resid);
    }
    rep.pass = rep.max_residual < tol;
    return rep;
}

// ---------------------------------------------------------------------------
// JSON descriptors

inline TransferOp op_from_json(const json& j, DyadicGrid grid) {
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "haar_doubling") return haar_doubling(grid);
    if (kind == "filter_doubling") return filter_doubling(grid);
    if (kind == "mean_integral") return mean_integral(grid);
    if (kind == "branch_ifs") {
        BranchSystem sys;
        for (const auto& b : j.at("branches")) {
            Branch br;
            br.slope = b.at("slope").get<double>();
            br.offset = b.at("offset").get<double>();
            br.weight = WeightFn::constant(b.at("weight").get<double>());
            sys.branches.push_back(br);
        }
        return branch_ifs(grid, std::move(sys));
    }
    if (kind == "kernel_g") {
        std::string name = j.value("name", "mean_kernel");
        int quad = j.value("quadrature", 64);
        if (name == "mean_kernel") return kernel_g(grid, KernelSpec::mean_kernel(), quad);
        if (name == "identity") return kernel_g(grid, KernelSpec::identity_kernel(), quad);
        throw DomainError("op_from_json: unknown kernel name " + name);
    }
    throw DomainError("op_from_json: unknown kind " + kind);
}

} // namespace xferops
