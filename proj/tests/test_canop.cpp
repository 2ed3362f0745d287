#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "germcanop/canop.hpp"
#include "germcanop/errors.hpp"
#include "germcanop/families.hpp"
#include "germcanop/germ.hpp"

using namespace germcanop;

namespace {

const cdouble kI(0.0, 1.0);

VolumeForm unit_form() {
    VolumeForm f;
    f.a = ScalarField::constant(2, cdouble(1.0, 0.0));
    return f;
}

// Compactly supported smooth bump on (-w, w), equal to e^0 = 1 at 0.
ScalarField bump_field(double w) {
    return ScalarField::finite_difference(1, [w](const Vec& y) {
        const double s = (y[0] / w) * (y[0] / w);
        if (s >= 1.0) return cdouble(0.0, 0.0);
        return cdouble(std::exp(1.0 - 1.0 / (1.0 - s)), 0.0);
    });
}

IChart quadratic_momentum_chart(cdouble alpha, cdouble beta, double half) {
    IChart c;
    c.I = IndexSet::empty_set(1);
    c.S = ScalarField::analytic(
        1,
        [alpha, beta](const Vec& p) {
            return 0.5 * alpha * p[0] * p[0] + beta * p[0];
        },
        [alpha, beta](const Vec& p) {
            CVec g(1);
            g[0] = alpha * p[0] + beta;
            return g;
        },
        [alpha](const Vec&) {
            CMat h(1, 1);
            h(0, 0) = alpha;
            return h;
        });
    c.d = Dissipation{ScalarField::constant(1, cdouble(0.0, 0.0)),
                      Box{vec1(-half), vec1(half)}};
    c.foot = VectorField({ScalarField::constant(1, cdouble(0.0, 0.0)),
                          ScalarField::constant(1, cdouble(0.0, 0.0))});
    return c;
}

double rel_grid_error(const WaveFunction& u, const WaveFunction& v) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < u.samples.size(); ++i) {
        num = std::max(num, std::abs(u.samples[i] - v.samples[i]));
        den = std::max(den, std::abs(u.samples[i]));
    }
    return num / den;
}

}  // namespace

TEST_CASE("chart densities of the Gaussian point germ") {
    Germ g = gaussian_point_germ();
    VolumeForm form = unit_form();
    // Position chart: S = (i/2) q^2, so det(I - i S'') = 2.
    ChartDensity pos = chart_density(form, g.atlas[0], g);
    CHECK(std::abs(pos.a_I(vec1(0.1)) - cdouble(2.0, 0.0)) < 1e-8);
    CHECK(std::abs(pos.ln_a_I(vec1(0.1)) - std::log(2.0)) < 1e-8);
    // Momentum chart: dual Gaussian phase plus the -i pi/2 Fourier factor.
    ChartDensity mom = chart_density(form, g.atlas[1], g);
    CHECK(std::abs(mom.ln_a_I(vec1(0.2)) -
                   cdouble(std::log(2.0), -M_PI / 2.0)) < 1e-8);
    // Branch invariant: exp(stored ln) equals the density.
    for (double y : {-0.3, 0.0, 0.25}) {
        cdouble a = mom.a_I(vec1(y));
        CHECK(std::abs(std::exp(mom.ln_a_I(vec1(y))) - a) < 1e-10 * std::abs(a));
    }
}

TEST_CASE("flat momentum chart density is the pure Fourier phase") {
    IChart flat = quadratic_momentum_chart(cdouble(0.0, 0.0),
                                           cdouble(0.0, 0.0), 0.5);
    ChartDensity d = chart_density(unit_form(), flat, gaussian_point_germ());
    CHECK(std::abs(d.ln_a_I(vec1(0.1)) - cdouble(0.0, -M_PI / 2.0)) < 1e-12);
    CHECK(std::abs(d.a_I(vec1(0.1)) - cdouble(0.0, -1.0)) < 1e-12);
}

TEST_CASE("position-chart operator is the pointwise Gaussian") {
    Germ g = gaussian_point_germ();
    ChartDensity unit{ScalarField::constant(1, cdouble(1.0, 0.0)),
                      ScalarField::constant(1, cdouble(0.0, 0.0))};
    Amplitude one{0, ScalarField::constant(1, cdouble(1.0, 0.0))};
    const double h = 1.0 / 64.0;
    GridSpec grid{vec1(-0.4), vec1(0.4), {81}};
    WaveFunction psi = local_canop(g.atlas[0], unit, one, h, grid);
    for (int i = 0; i < 81; ++i) {
        const double q = grid.node1(i);
        CHECK(std::abs(psi.samples[i] - std::exp(-q * q / (2.0 * h))) < 1e-9);
    }
}

TEST_CASE("momentum-chart operator reproduces the Gaussian integral") {
    Germ g = gaussian_point_germ();
    ChartDensity dens = chart_density(unit_form(), g.atlas[1], g);
    Amplitude one{1, ScalarField::constant(1, cdouble(1.0, 0.0))};
    const double h = 1.0 / 256.0;
    GridSpec grid{vec1(-0.25), vec1(0.25), {51}};
    WaveFunction psi = local_canop(g.atlas[1], dens, one, h, grid);
    // Full-line closed form: sqrt(2) e^{-q^2/2h}; the box truncation is
    // below the tolerance at this h.
    for (int i = 0; i < 51; ++i) {
        const double q = grid.node1(i);
        const cdouble exact = std::sqrt(2.0) * std::exp(-q * q / (2.0 * h));
        CHECK(std::abs(psi.samples[i] - exact) < 1e-6 * std::sqrt(2.0));
    }
}

TEST_CASE("quadrature matches its tenfold refinement on random phases") {
    std::mt19937 rng(20240817);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    GridSpec grid{vec1(-0.8), vec1(0.8), {33}};
    const double h = 1.0 / 64.0;
    ChartDensity dens{ScalarField::constant(1, cdouble(1.0, 0.0)),
                      ScalarField::constant(1, cdouble(0.0, 0.0))};
    Amplitude phi{0, bump_field(0.4)};
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const cdouble alpha(unif(rng), 0.55 + 0.45 * unif(rng));
        const cdouble beta(0.5 * unif(rng), 0.0);
        IChart c = quadratic_momentum_chart(alpha, beta, 0.55);
        CanopOptions base;
        WaveFunction u = local_canop(c, dens, phi, h, grid, base);
        CanopOptions fine = base;
        fine.min_nodes = 10 * base.min_nodes;
        fine.nodes_per_wavelength = 10 * base.nodes_per_wavelength;
        WaveFunction v = local_canop(c, dens, phi, h, grid, fine);
        worst = std::max(worst, rel_grid_error(v, u));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("operator is linear in the amplitude") {
    Germ g = gaussian_point_germ();
    ChartDensity dens = chart_density(unit_form(), g.atlas[1], g);
    Amplitude p1{1, bump_field(0.35)};
    Amplitude p2{1, ScalarField::finite_difference(1, [](const Vec& y) {
                     return cdouble(std::cos(3.0 * y[0]), 0.2 * y[0]);
                 })};
    Amplitude combo{1, ScalarField::finite_difference(1, [&](const Vec& y) {
                        return 2.0 * p1.phi(y) - kI * p2.phi(y);
                    })};
    const double h = 0.02;
    GridSpec grid{vec1(-0.3), vec1(0.3), {41}};
    WaveFunction u1 = local_canop(g.atlas[1], dens, p1, h, grid);
    WaveFunction u2 = local_canop(g.atlas[1], dens, p2, h, grid);
    WaveFunction uc = local_canop(g.atlas[1], dens, combo, h, grid);
    WaveFunction lin = wave_add(u1, u2, cdouble(2.0, 0.0), -kI);
    for (size_t i = 0; i < uc.samples.size(); ++i)
        CHECK(std::abs(uc.samples[i] - lin.samples[i]) < 1e-12);
}

TEST_CASE("cutoff choice does not change the result") {
    Germ g = gaussian_point_germ();
    ChartDensity dens = chart_density(unit_form(), g.atlas[1], g);
    Amplitude phi{1, bump_field(0.3)};
    const double h = 1.0 / 64.0;
    GridSpec grid{vec1(-0.3), vec1(0.3), {41}};
    CanopOptions a, b;
    a.cutoff_core = 0.9;
    b.cutoff_core = 0.75;
    WaveFunction u = local_canop(g.atlas[1], dens, phi, h, grid, a);
    WaveFunction v = local_canop(g.atlas[1], dens, phi, h, grid, b);
    CHECK(rel_grid_error(u, v) < 1e-10);
}

TEST_CASE("resolution cap raises with the required node count") {
    IChart c = quadratic_momentum_chart(cdouble(50.0, 0.2), cdouble(0.0, 0.0),
                                        0.5);
    ChartDensity dens{ScalarField::constant(1, cdouble(1.0, 0.0)),
                      ScalarField::constant(1, cdouble(0.0, 0.0))};
    Amplitude phi{0, bump_field(0.3)};
    GridSpec grid{vec1(-0.2), vec1(0.2), {11}};
    CanopOptions opt;
    opt.max_nodes = 2000;
    CHECK_THROWS_AS(local_canop(c, dens, phi, 1e-4, grid, opt),
                    ResolutionError);
}

TEST_CASE("hh_norm of the coherent Gaussian") {
    const double h = 1.0 / 64.0;
    const double half = 8.0 * std::sqrt(h);
    GridSpec grid{vec1(-half), vec1(half), {2401}};
    WaveFunction psi;
    psi.grid = grid;
    psi.h = h;
    for (int i = 0; i < 2401; ++i) {
        const double q = grid.node1(i);
        psi.samples.push_back(std::exp(-q * q / (2.0 * h)));
    }
    CHECK(hh_norm(psi, 0) ==
          doctest::Approx(std::pow(M_PI * h, 0.25)).epsilon(1e-6));
    // (1 - h^2 d^2 + q^2) e^{-q^2/2h} = (1 + h) e^{-q^2/2h}.
    CHECK(hh_norm(psi, 2) ==
          doctest::Approx((1.0 + h) * std::pow(M_PI * h, 0.25)).epsilon(1e-5));
    CHECK_THROWS_AS(hh_norm(psi, 1), InvalidInput);
    WaveFunction flat = psi;
    for (auto& v : flat.samples) v = 1.0;
    CHECK_THROWS_AS(hh_norm(flat, 0), ResolutionError);
}

TEST_CASE("single-chart global operator equals the local one") {
    Germ g = gaussian_point_germ();
    g.atlas.resize(1);  // position chart only
    VolumeForm form = unit_form();
    const double h = 1.0 / 64.0;
    GridSpec grid{vec1(-0.4), vec1(0.4), {81}};
    // Phase-space amplitude supported well inside the chart.
    ScalarField phi = ScalarField::finite_difference(2, [](const Vec& x) {
        const double s = (x[1] / 0.3) * (x[1] / 0.3);
        if (s >= 1.0) return cdouble(0.0, 0.0);
        return cdouble(std::exp(1.0 - 1.0 / (1.0 - s)), 0.0);
    });
    WaveFunction global = global_canop(g, form, phi, h, grid);

    ChartDensity dens = chart_density(form, g.atlas[0], g);
    VectorField foot = g.atlas[0].foot;
    Amplitude amp{0, ScalarField::finite_difference(1, [phi, foot](const Vec& y) {
                      return phi(foot.value(y).real());
                  })};
    WaveFunction local = local_canop(g.atlas[0], dens, amp, h, grid);
    for (size_t i = 0; i < global.samples.size(); ++i)
        CHECK(std::abs(global.samples[i] - local.samples[i]) < 1e-14);
}

TEST_CASE("global operator requires the quantization condition") {
    const double h = 1.0 / 32.0;
    Germ g = circle_germ(h * 3.75, 48);  // off the h(n + 1/2) lattice
    VolumeForm form = circle_invariant_form(h * 3.75);
    GridSpec grid = wave_grid(-1.0, 1.0, h, 101);
    ScalarField one = ScalarField::constant(2, cdouble(1.0, 0.0));
    CHECK_THROWS_AS(global_canop(g, form, one, h, grid), QuantizationError);
}

TEST_CASE("partition independence on the quantized circle") {
    ScalarField one = ScalarField::constant(2, cdouble(1.0, 0.0));
    double prev_ratio = 0.0;
    for (double h : {1.0 / 32.0, 1.0 / 128.0}) {
        const int n = static_cast<int>(std::lround(0.5 / h - 0.5));
        const double E = h * (n + 0.5);
        Germ g = circle_germ(E, 64);
        VolumeForm form = circle_invariant_form(E);
        const double R = std::sqrt(2.0 * E);
        // The chart cutoffs leave fringes past the turning points that decay
        // roughly like exp(-c sqrt(dist/h)); pad until they fall below the
        // boundary tolerance used for the norms.
        const double pad = 120.0 * h + 4.0 * std::sqrt(h);
        const double span = 2.0 * (R + pad);
        const int count = 2 * static_cast<int>(span * 3.0 / (M_PI * h)) + 1;
        GridSpec grid{vec1(-R - pad), vec1(R + pad), {count}};
        PartitionOptions p1, p2;
        p1.sharpness = 1.0;
        p2.chart_weights = {3.0, 1.0, 3.0, 1.0};
        WaveFunction u = global_canop(g, form, one, h, grid, p1, 1e-6);
        WaveFunction v = global_canop(g, form, one, h, grid, p2, 1e-6);
        const double ratio = hh_norm(wave_add(u, v, 1.0, -1.0), 0, 1e-4) /
                             hh_norm(u, 0, 1e-4);
        CHECK(ratio < 1.5 * std::sqrt(h));
        if (prev_ratio > 0.0) CHECK(ratio < prev_ratio);
        prev_ratio = ratio;
    }
}

TEST_CASE("wavefunction files round-trip") {
    WaveFunction psi;
    psi.h = 0.03125;
    psi.grid = GridSpec{vec1(-1.0), vec1(1.0), {33}};
    for (int i = 0; i < 33; ++i)
        psi.samples.push_back(cdouble(std::sin(0.3 * i), std::cos(0.11 * i)));

    export_wave_csv(psi, "/tmp/wave.csv");
    WaveFunction back = import_wave_csv("/tmp/wave.csv");
    CHECK(back.h == psi.h);
    CHECK(back.grid.counts == psi.grid.counts);
    for (int i = 0; i < 33; ++i)
        CHECK(std::abs(back.samples[i] - psi.samples[i]) < 1e-15);

    export_wave_binary(psi, "/tmp/wave.bin");
    WaveFunction bb = import_wave_binary("/tmp/wave.bin");
    CHECK(bb.h == psi.h);
    CHECK((bb.grid.lo - psi.grid.lo).norm() == 0.0);
    for (int i = 0; i < 33; ++i) CHECK(bb.samples[i] == psi.samples[i]);
    // Bit-identical re-export.
    export_wave_binary(bb, "/tmp/wave2.bin");
    std::FILE* f1 = std::fopen("/tmp/wave.bin", "rb");
    std::FILE* f2 = std::fopen("/tmp/wave2.bin", "rb");
    REQUIRE(f1);
    REQUIRE(f2);
    int c1, c2;
    do {
        c1 = std::fgetc(f1);
        c2 = std::fgetc(f2);
        CHECK(c1 == c2);
    } while (c1 != EOF && c2 != EOF);
    std::fclose(f1);
    std::fclose(f2);
}
