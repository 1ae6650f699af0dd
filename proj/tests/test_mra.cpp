#include <doctest.h>

#include <xferops/mra.hpp>

#include "fixtures.hpp"

using namespace xferops;
using namespace fixtures;

namespace {

PathSpec spec_haar(DyadicGrid g) {
    return {haar_doubling(g), one(g), lebesgue(g), PiecewiseAffineMap::doubling(), 8};
}

PathSpec spec_filter(DyadicGrid g) {
    return {filter_doubling(g), one(g), lebesgue(g), PiecewiseAffineMap::doubling(), 8};
}

} // namespace

TEST_CASE("decompose: first character carries a single detail layer") {
    DyadicGrid g = grid12();
    PathSpec spec = spec_haar(g);
    Decomposition dec = decompose(spec, e1(g), 1);
    CHECK(dec.base.sup_norm() < 1e-10);
    REQUIRE(dec.details.size() == 1);
    // the single detail holds all the energy of f∘pi_1
    double detail2 = pair_moment(spec, CylinderFn(1, dec.details[0]),
                                 CylinderFn(1, dec.details[0]))
                         .real();
    CHECK(detail2 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(dec.ortho_residual < 1e-9);
    CHECK(dec.recon_residual < 1e-9);
}

TEST_CASE("decompose: constants never shed detail") {
    DyadicGrid g(10);
    for (const PathSpec& spec : {spec_haar(g), spec_filter(g)}) {
        Decomposition dec = decompose(spec, one(g), 3);
        CHECK(sup_distance(dec.base, one(g)) < 1e-12);
        for (const auto& d : dec.details) CHECK(d.sup_norm() < 1e-12);
    }
}

TEST_CASE("decompose: orthogonality, reconstruction, kernel membership") {
    DyadicGrid g = grid12();
    CounterRng rng(61);
    for (const PathSpec& spec : {spec_haar(g), spec_filter(g)}) {
        for (int t = 0; t < 5; ++t) {
            int n = 1 + static_cast<int>(rng.next_index(4));
            GridFunction f = random_real(g, rng);
            double f2 = pair_moment(spec, CylinderFn(n, f), CylinderFn(n, f)).real();
            Decomposition dec = decompose(spec, f, n);
            CHECK(dec.ortho_residual < 1e-9 * std::max(1.0, f2));
            CHECK(dec.recon_residual < 1e-9);
            CHECK(dec.parseval_residual < 1e-10 * std::max(1.0, f2));
            for (const auto& d : dec.details)
                CHECK(spec.R.apply(d).sup_norm() < 1e-9);
        }
    }
}

TEST_CASE("decompose: refuses operators without the intertwining identity") {
    DyadicGrid g(10);
    PathSpec spec{mean_integral(g), one(g), arcsine(g), PiecewiseAffineMap::reflection(), 4};
    CHECK_THROWS_AS((void)decompose(spec, ident(g), 2), NotDecomposable);
}

TEST_CASE("haar_expand: constants and characters") {
    DyadicGrid g(10);
    HaarExpansion flat = haar_expand(one(g), 4);
    for (const auto& u : flat.native) CHECK(u.sup_norm() < 1e-12);
    CHECK(sup_distance(flat.tail, one(g).to_level(flat.tail.level())) < 1e-12);

    HaarExpansion ex = haar_expand(e1(g), 4);
    CHECK(ex.energies[0] == doctest::Approx(1.0).epsilon(1e-9));
    for (std::size_t k = 1; k < ex.energies.size(); ++k) CHECK(ex.energies[k] < 1e-20);
    // and the quotient by the first character is constant at level 0
    CHECK(ex.e1_periodicity[0] < 1e-9);
}

TEST_CASE("haar_expand: random data reconstructs with Parseval") {
    DyadicGrid g(10);
    CounterRng rng(62);
    CellMeasure leb = lebesgue(g);
    for (int t = 0; t < 3; ++t) {
        GridFunction f = random_real(g, rng);
        double f2 = inner(f, f, leb).real();
        HaarExpansion ex = haar_expand(f, 8);
        CHECK(ex.recon_residual < 1e-10);
        CHECK(ex.parseval_residual < 1e-9 * std::max(1.0, f2));
        for (double kr : ex.ker_residuals) CHECK(kr < 1e-9);
        // energy ordering: partial sums climb toward the total
        double acc = 0.0;
        for (double e : ex.energies) {
            acc += e;
            CHECK(acc <= f2 + 1e-9);
        }
        // the tail approaches the mean under the ergodic averaging
        double mean = integrate_real(f, leb);
        CHECK(sup_distance(ex.tail, GridFunction::constant(ex.tail.grid(), mean)) <
              0.5 * f.sup_norm());
    }
}

TEST_CASE("filter_operator: haar coefficients reproduce both doubling operators") {
    DyadicGrid g = grid12();
    CounterRng rng(63);
    TransferOp from_filter = filter_operator(WaveletFilter::haar(), g);
    TransferOp direct = filter_doubling(g);
    CHECK(sup_distance(from_filter.apply(one(g)), one(g)) < 1e-12);
    for (int t = 0; t < 10; ++t) {
        GridFunction f = random_real(g, rng);
        CHECK(sup_distance(from_filter.apply(f), direct.apply(f)) < 1e-12);
    }

    // |m0| = 1: plain halving of branches
    TransferOp degen = filter_operator(WaveletFilter::degenerate(), g);
    TransferOp haar = haar_doubling(g);
    for (int t = 0; t < 5; ++t) {
        GridFunction f = random_real(g, rng);
        CHECK(sup_distance(degen.apply(f), haar.apply(f)) < 1e-12);
    }
}

TEST_CASE("cascade_fourier: the infinite cosine product is sin(pi t)/(pi t)") {
    WaveletFilter w = WaveletFilter::haar();
    std::vector<double> ts;
    for (double t = -8.0; t <= 8.0; t += 1.0 / 64.0) ts.push_back(t);
    auto phis = cascade_fourier(w, ts, 30);
    double worst = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        double t = ts[i];
        double sinc = t == 0.0 ? 1.0 : std::abs(std::sin(M_PI * t) / (M_PI * t));
        worst = std::max(worst, std::abs(std::abs(phis[i]) - sinc));
    }
    CHECK(worst < 1e-6);
    CHECK(cascade_fourier_at(w, 0.0, 30) == cplx(1.0, 0.0));
    CHECK_THROWS_AS((void)cascade_fourier(WaveletFilter::degenerate(), ts, 10),
                    NonConvergentCascade);
}

TEST_CASE("h_phi: unit lattice mass and fixed point of the filter operator") {
    WaveletFilter w = WaveletFilter::haar();
    CounterRng rng(64);
    // pointwise: the lattice sum is 1 up to the documented 2/(pi^2 n) tail
    for (int t = 0; t < 8; ++t) {
        double x = rng.next_double();
        CHECK(std::abs(h_phi(w, x, 30, 4096) - 1.0) < 1e-4);
    }
    // fixed point on a coarse grid
    DyadicGrid g(6);
    GridFunction h =
        GridFunction::sample_real(g, [&](double x) { return h_phi(w, x, 30, 2048); });
    GridFunction rh = filter_operator(w, g).apply(h);
    CHECK(sup_distance(rh, h) < 1e-4);
}

TEST_CASE("k0 isometry: line and circle integrals agree under truncation") {
    WaveletFilter w = WaveletFilter::haar();
    CounterRng rng(65);
    K0Report rep = k0_isometry_check(w, 3, rng, 30, 512.0, 128, 2048, 1e-3);
    CHECK(rep.pass);
    for (const auto& t : rep.trials) {
        CHECK(t.circle_integral == doctest::Approx(1.0).epsilon(2e-3));
        CHECK(t.delta < 1e-3);
    }
}
