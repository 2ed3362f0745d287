#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <vector>

#include "germcanop/canop.hpp"
#include "germcanop/errors.hpp"
#include "germcanop/families.hpp"
#include "germcanop/germ.hpp"
#include "germcanop/pdo.hpp"

using namespace germcanop;

namespace {

const cdouble kI(0.0, 1.0);

WaveFunction gaussian_state(double h, double dq_scale = 0.1) {
    const double w = std::sqrt(h);
    const double dq = dq_scale * w;
    const int m = 2 * static_cast<int>(std::ceil(8.0 * w / dq)) + 1;
    WaveFunction psi;
    psi.grid.lo = vec1(-8.0 * w);
    psi.grid.hi = vec1(8.0 * w);
    psi.grid.counts = {m};
    psi.h = h;
    psi.samples.resize(m);
    for (int i = 0; i < m; ++i) {
        const double q = psi.grid.node1(i);
        psi.samples[i] = cdouble(std::exp(-q * q / (2.0 * h)), 0.0);
    }
    return psi;
}

HamiltonianSymbol monomial_symbol(int beta, ScalarField coeff) {
    HamiltonianSymbol H;
    H.H = ScalarField::constant(2, cdouble(0.0, 0.0));
    H.p_polynomial.push_back({{beta}, coeff});
    return H;
}

cdouble dot(const WaveFunction& u, const WaveFunction& v) {
    cdouble acc(0.0, 0.0);
    for (size_t i = 0; i < u.samples.size(); ++i)
        acc += std::conj(u.samples[i]) * v.samples[i];
    return acc * u.grid.spacing(0);
}

// Line fixture: the zero section p = 0 as a single position chart with
// ideal generator p.
IChart line_chart() {
    IChart c;
    c.I = IndexSet::full(1);
    c.S = ScalarField::constant(1, cdouble(0.0, 0.0));
    c.d = Dissipation{ScalarField::constant(1, cdouble(0.0, 0.0)),
                      Box{vec1(-1.0), vec1(1.0)}};
    c.foot = VectorField({ScalarField::constant(1, cdouble(0.0, 0.0)),
                          ScalarField::finite_difference(
                              1, [](const Vec& y) { return cdouble(y[0], 0.0); })});
    return c;
}

std::vector<ScalarField> line_generators() {
    return {ScalarField::finite_difference(
        2, [](const Vec& x) { return cdouble(x[0], 0.0); })};
}

// Hamiltonian vector field of (p^2+q^2)/2 in x = (p, q): (-q, p).
VectorField circle_flow() {
    return VectorField(
        {ScalarField::finite_difference(
             2, [](const Vec& x) { return cdouble(-x[1], 0.0); }),
         ScalarField::finite_difference(
             2, [](const Vec& x) { return cdouble(x[0], 0.0); })});
}

std::vector<ScalarField> circle_generators(double E) {
    return {ScalarField::finite_difference(2, [E](const Vec& x) {
        return cdouble(0.5 * (x[0] * x[0] + x[1] * x[1]) - E, 0.0);
    })};
}

// Atlas charts of circle_germ classified by flavor and side.
const IChart& find_chart(const Germ& germ, bool position, double sign) {
    for (const IChart& c : germ.atlas) {
        const bool is_pos = c.I.size() == 1;
        if (is_pos != position) continue;
        const Vec x = c.foot.value(vec1(0.0)).real();
        const double probe = position ? x[0] : x[1];  // p for q-charts
        if (probe * sign > 0.0) return c;
    }
    throw std::runtime_error("chart not found");
}

constexpr double kPiValue = 3.14159265358979323846;

GridSpec circle_grid(double E, double h) {
    const double R = std::sqrt(2.0 * E);
    const double pad = 120.0 * h + 4.0 * std::sqrt(h);
    const double span = R + pad;
    const int count =
        2 * static_cast<int>(std::ceil(2.0 * span * 3.0 / (kPiValue * h))) + 1;
    GridSpec g;
    g.lo = vec1(-span);
    g.hi = vec1(span);
    g.counts = {count};
    return g;
}

HamiltonianSymbol separable_harmonic(double E) {
    HamiltonianSymbol H = harmonic_hamiltonian(E);
    H.p_polynomial.clear();  // force the Fourier-multiplier path
    return H;
}

}  // namespace

TEST_CASE("apply_hamiltonian: H == 1 is the identity") {
    WaveFunction psi = gaussian_state(0.1);
    HamiltonianSymbol H =
        monomial_symbol(0, ScalarField::constant(1, cdouble(1.0, 0.0)));
    WaveFunction out = apply_hamiltonian(H, psi);
    for (size_t i = 0; i < psi.samples.size(); ++i)
        CHECK(std::abs(out.samples[i] - psi.samples[i]) == 0.0);
}

TEST_CASE("apply_hamiltonian: plane wave is an exact Fourier eigenvector") {
    const double h = 0.1;
    const int m = 256;
    const double dq = 0.05;
    const double len = m * dq;  // implicit period of the extension
    const double xi0 = h * 2.0 * kPiValue * 9.0 / len;
    WaveFunction psi;
    psi.grid.lo = vec1(0.0);
    psi.grid.hi = vec1((m - 1) * dq);
    psi.grid.counts = {m};
    psi.h = h;
    psi.samples.resize(m);
    for (int i = 0; i < m; ++i)
        psi.samples[i] = std::exp(kI * psi.grid.node1(i) * xi0 / h);

    HamiltonianSymbol H;
    H.H = ScalarField::finite_difference(
        2, [](const Vec& x) { return cdouble(x[0] * x[0], 0.0); });
    H.separable.push_back(
        {ScalarField::constant(1, cdouble(1.0, 0.0)),
         ScalarField::finite_difference(
             1, [](const Vec& p) { return cdouble(p[0] * p[0], 0.0); })});

    WaveFunction out = apply_hamiltonian(H, psi, false, 2.0);
    double worst = 0.0;
    for (int i = 0; i < m; ++i)
        worst = std::max(worst,
                         std::abs(out.samples[i] - xi0 * xi0 * psi.samples[i]));
    CHECK(worst <= 1e-8 * xi0 * xi0);
}

TEST_CASE("apply_hamiltonian: Fourier multiplier p^2 on a Gaussian") {
    const double h = 0.05;
    WaveFunction psi = gaussian_state(h);
    HamiltonianSymbol H;
    H.H = ScalarField::finite_difference(
        2, [](const Vec& x) { return cdouble(x[0] * x[0], 0.0); });
    H.separable.push_back(
        {ScalarField::constant(1, cdouble(1.0, 0.0)),
         ScalarField::finite_difference(
             1, [](const Vec& p) { return cdouble(p[0] * p[0], 0.0); })});
    WaveFunction out = apply_hamiltonian(H, psi);
    // (-ih d/dq)^2 e^{-q^2/2h} = (h - q^2) e^{-q^2/2h}
    double worst = 0.0;
    for (size_t i = 0; i < psi.samples.size(); ++i) {
        const double q = psi.grid.node1(static_cast<int>(i));
        worst = std::max(worst,
                         std::abs(out.samples[i] - (h - q * q) * psi.samples[i]));
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("apply_hamiltonian: exact stencil identity on a quartic") {
    const double h = 0.3;
    const int m = 101;
    WaveFunction psi;
    psi.grid.lo = vec1(-1.0);
    psi.grid.hi = vec1(1.0);
    psi.grid.counts = {m};
    psi.h = h;
    psi.samples.resize(m);
    for (int i = 0; i < m; ++i) {
        const double q = psi.grid.node1(i);
        psi.samples[i] = cdouble(q * q * q * q, 0.0);
    }
    HamiltonianSymbol H =
        monomial_symbol(2, ScalarField::constant(1, cdouble(1.0, 0.0)));
    WaveFunction out = apply_hamiltonian(H, psi, false, 10.0);
    const double dq = psi.grid.spacing(0);
    // Centered second difference of q^4 is exactly 12 q^2 + 2 dq^2.
    for (int i = 1; i + 1 < m; ++i) {
        const double q = psi.grid.node1(i);
        const double expected = -h * h * (12.0 * q * q + 2.0 * dq * dq);
        CHECK(std::abs(out.samples[i] - expected) <= 1e-12);
    }
}

TEST_CASE("apply_hamiltonian: q^2 p^2 / 2 + q against the WKB expansion") {
    // H(2x, -1d) applied to e^{iS/h} u is
    // (q^2/2)[(S')^2 u - ih(S'' u + 2 S' u') - h^2 u''] + q u.
    const double h = 1.0;
    const int m = 1601;
    WaveFunction psi;
    psi.grid.lo = vec1(-5.0);
    psi.grid.hi = vec1(5.0);
    psi.grid.counts = {m};
    psi.h = h;
    psi.samples.resize(m);
    auto S = [](double q) { return 0.5 * q * q; };
    auto u = [](double q) { return std::exp(-0.5 * q * q); };
    for (int i = 0; i < m; ++i) {
        const double q = psi.grid.node1(i);
        psi.samples[i] = std::exp(kI * S(q) / h) * u(q);
    }
    HamiltonianSymbol H;
    H.H = ScalarField::constant(2, cdouble(0.0, 0.0));
    H.p_polynomial.push_back(
        {{2}, ScalarField::finite_difference(1, [](const Vec& q) {
             return cdouble(0.5 * q[0] * q[0], 0.0);
         })});
    H.p_polynomial.push_back(
        {{0}, ScalarField::finite_difference(
                  1, [](const Vec& q) { return cdouble(q[0], 0.0); })});
    WaveFunction out = apply_hamiltonian(H, psi);
    double worst = 0.0;
    for (int i = 1; i + 1 < m; ++i) {
        const double q = psi.grid.node1(i);
        const cdouble phase = std::exp(kI * S(q) / h);
        const double up = -q * u(q);
        const double upp = (q * q - 1.0) * u(q);
        const cdouble expect =
            0.5 * q * q *
                (phase * (q * q * u(q) - kI * h * (u(q) + 2.0 * q * up) -
                          h * h * upp)) +
            q * phase * u(q);
        worst = std::max(worst, std::abs(out.samples[i] - expect));
    }
    CHECK(worst <= 1e-3);
}

TEST_CASE("apply_hamiltonian: symbol without a representation is rejected") {
    WaveFunction psi = gaussian_state(0.1);
    HamiltonianSymbol H;
    H.H = ScalarField::finite_difference(2, [](const Vec& x) {
        return cdouble(std::sqrt(1.0 + x[0] * x[0] + x[1] * x[1]), 0.0);
    });
    CHECK_THROWS_AS(apply_hamiltonian(H, psi), const UnsupportedSymbol&);
}

TEST_CASE("apply_hamiltonian: symmetrized variant is discretely self-adjoint") {
    const double h = 0.1;
    WaveFunction psi = gaussian_state(h);
    WaveFunction chi = psi;
    for (size_t i = 0; i < chi.samples.size(); ++i) {
        const double q = chi.grid.node1(static_cast<int>(i));
        chi.samples[i] *= std::exp(kI * (1.7 * q + 0.3 * q * q) / h) *
                          (1.0 + 0.5 * q);
    }
    HamiltonianSymbol H;
    H.H = ScalarField::constant(2, cdouble(0.0, 0.0));
    H.p_polynomial.push_back(
        {{1}, ScalarField::finite_difference(
                  1, [](const Vec& q) { return cdouble(q[0], 0.0); })});
    H.p_polynomial.push_back(
        {{2}, ScalarField::finite_difference(1, [](const Vec& q) {
             return cdouble(1.0 + 0.25 * q[0] * q[0], 0.0);
         })});
    WaveFunction hp = apply_hamiltonian(H, psi, true);
    WaveFunction hc = apply_hamiltonian(H, chi, true);
    const cdouble lhs = dot(hp, chi);
    const cdouble rhs = dot(psi, hc);
    const double scale = std::max(1.0, std::abs(lhs));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * scale);
    // The paper ordering itself is not symmetric: sanity that the
    // unsymmetrized operator breaks the identity measurably.
    WaveFunction hp0 = apply_hamiltonian(H, psi, false);
    WaveFunction hc0 = apply_hamiltonian(H, chi, false);
    CHECK(std::abs(dot(hp0, chi) - dot(psi, hc0)) > 1e-6 * scale);
}

TEST_CASE("divergence_in_chart: coordinate fields on the zero section") {
    IChart chart = line_chart();
    std::vector<ScalarField> gens = line_generators();
    VectorField ddq(
        {ScalarField::constant(2, cdouble(0.0, 0.0)),
         ScalarField::constant(2, cdouble(1.0, 0.0))});
    ScalarField div0 = divergence_in_chart(ddq, chart, gens);
    CHECK(std::abs(div0(vec1(0.3))) <= 1e-8);

    VectorField qddq(
        {ScalarField::constant(2, cdouble(0.0, 0.0)),
         ScalarField::finite_difference(
             2, [](const Vec& x) { return cdouble(x[1], 0.0); })});
    ScalarField div1 = divergence_in_chart(qddq, chart, gens);
    CHECK(std::abs(div1(vec1(-0.4)) - 1.0) <= 1e-8);
}

TEST_CASE("divergence_in_chart: tangency violation is rejected") {
    IChart chart = line_chart();
    VectorField ddp(
        {ScalarField::constant(2, cdouble(1.0, 0.0)),
         ScalarField::constant(2, cdouble(0.0, 0.0))});
    CHECK_THROWS_AS(divergence_in_chart(ddp, chart, line_generators()),
                    const InvalidInput&);
}

TEST_CASE("divergence_in_chart: circle flow in dual charts") {
    const double E = 0.5;
    Germ germ = circle_germ(E);
    VectorField V = circle_flow();
    std::vector<ScalarField> gens = circle_generators(E);
    const IChart& top = find_chart(germ, true, +1.0);
    const IChart& right = find_chart(germ, false, +1.0);
    ScalarField div_q = divergence_in_chart(V, top, gens);
    ScalarField div_p = divergence_in_chart(V, right, gens);
    // In the position chart div = dp/dq = -q/p on the circle; in the
    // momentum chart div = -dq/dp = p/q; they differ by the flow
    // derivative of ln(dp/dq), which is p/q + q/p.
    for (double t : {0.3, 0.8, 1.1}) {
        const double p = std::sqrt(2.0 * E) * std::sin(t);
        const double q = std::sqrt(2.0 * E) * std::cos(t);
        CHECK(std::abs(div_q(vec1(q)) - (-q / p)) <= 1e-6);
        CHECK(std::abs(div_p(vec1(p)) - (p / q)) <= 1e-6);
        const cdouble transfer = div_q(vec1(q)) + cdouble(p / q + q / p, 0.0);
        CHECK(std::abs(div_p(vec1(p)) - transfer) <= 1e-6);
    }
}

TEST_CASE("lie_derivative_volume: invariant circle measure and trivials") {
    const double E = 0.5;
    Germ germ = circle_germ(E);
    VectorField V = circle_flow();
    std::vector<ScalarField> gens = circle_generators(E);
    const IChart& top = find_chart(germ, true, +1.0);
    // dt-density in the position chart: dt/dq = 1/p on the circle.
    ScalarField rho = ScalarField::finite_difference(1, [E](const Vec& y) {
        return cdouble(1.0 / std::sqrt(2.0 * E - y[0] * y[0]), 0.0);
    });
    ScalarField lie = lie_derivative_volume(V, rho, top, gens);
    for (double q : {-0.4, 0.0, 0.5})
        CHECK(std::abs(lie(vec1(q))) <= 1e-8);

    VectorField zero({ScalarField::constant(2, cdouble(0.0, 0.0)),
                      ScalarField::constant(2, cdouble(0.0, 0.0))});
    ScalarField lie0 = lie_derivative_volume(zero, rho, top, gens);
    CHECK(std::abs(lie0(vec1(0.2))) == 0.0);
}

TEST_CASE("lie_derivative_volume: growth rate of an expanding flow") {
    // q d/dq scales the measure dq by e^t, so the Lie-derivative density
    // equals the measure's own density.
    IChart chart = line_chart();
    VectorField qddq(
        {ScalarField::constant(2, cdouble(0.0, 0.0)),
         ScalarField::finite_difference(
             2, [](const Vec& x) { return cdouble(x[1], 0.0); })});
    ScalarField rho = ScalarField::constant(1, cdouble(1.0, 0.0));
    ScalarField lie = lie_derivative_volume(qddq, rho, chart, line_generators());
    CHECK(std::abs(lie(vec1(0.6)) - 1.0) <= 1e-8);
}

TEST_CASE("transport_operator: invariant measure makes the zeroth term vanish") {
    const double E = 0.5;
    Germ germ = circle_germ(E);
    HamiltonianSymbol H = harmonic_hamiltonian(E);
    TransportCoefficients coeffs =
        transport_operator(H, germ, circle_invariant_form(E));
    REQUIRE(coeffs.charts.size() == germ.atlas.size());
    double worst = 0.0;
    for (size_t k = 0; k < coeffs.charts.size(); ++k) {
        const Box& box = germ.atlas[k].d.domain_box;
        for (double s : {0.2, 0.5, 0.8}) {
            const Vec y = box.lo + s * (box.hi - box.lo);
            worst = std::max(worst, std::abs(coeffs.charts[k].zeroth(y)));
        }
    }
    CHECK(worst <= 1e-8);

    // Scaling the measure by a constant leaves the coefficients unchanged.
    VolumeForm scaled = circle_invariant_form(E);
    scaled.a = scaled.a.scaled(cdouble(7.0, 0.0));
    for (auto& base : scaled.ln_branch_base) base.value += std::log(7.0);
    TransportCoefficients coeffs2 = transport_operator(H, germ, scaled);
    double gauge = 0.0;
    for (size_t k = 0; k < coeffs.charts.size(); ++k) {
        const Vec y = 0.5 * (germ.atlas[k].d.domain_box.lo +
                             germ.atlas[k].d.domain_box.hi);
        gauge = std::max(gauge, std::abs(coeffs.charts[k].zeroth(y) -
                                         coeffs2.charts[k].zeroth(y)));
    }
    CHECK(gauge <= 1e-10);
}

TEST_CASE("transport_operator: non-vanishing symbol is rejected") {
    const double E = 0.5;
    Germ germ = circle_germ(E);
    HamiltonianSymbol H = harmonic_hamiltonian(E + 0.1);
    CHECK_THROWS_AS(transport_operator(H, germ, circle_invariant_form(E)),
                    const InvalidInput&);
}

TEST_CASE("transport_operator: Liouville trace identity in each chart flavor") {
    // div_Q V(H) = tr(H_pp S'') + tr(H_pq); for the circle the right side
    // is S'' evaluated by the chart phase.
    const double E = 0.5;
    Germ germ = circle_germ(E);
    VectorField V = circle_flow();
    std::vector<ScalarField> gens = circle_generators(E);
    for (bool position : {true, false}) {
        const IChart& chart = find_chart(germ, position, +1.0);
        ScalarField div = divergence_in_chart(V, chart, gens);
        for (double s : {0.25, 0.5, 0.75}) {
            const Box& box = chart.d.domain_box;
            const Vec y = box.lo + s * (box.hi - box.lo);
            const cdouble trace = chart.S.hessian(y)(0, 0);
            CHECK(std::abs(div(y) - trace) <= 1e-6);
        }
    }
}

TEST_CASE("solve_transport: constant solution around the quantized circle") {
    const double E = 0.5;
    Germ germ = circle_germ(E);
    HamiltonianSymbol H = harmonic_hamiltonian(E);
    TransportCoefficients coeffs =
        transport_operator(H, germ, circle_invariant_form(E));
    TransportSolution sol = solve_transport(coeffs, germ, cdouble(1.0, 0.0),
                                            1.0 / 16.0);
    CHECK(sol.periodic);
    double worst = 0.0;
    for (const cdouble& v : sol.phi)
        worst = std::max(worst, std::abs(v - cdouble(1.0, 0.0)));
    CHECK(worst <= 1e-8);
    CHECK(sol.times.front() == doctest::Approx(germ.curve->t0));
    CHECK(sol.times.back() == doctest::Approx(germ.curve->t1));
}

TEST_CASE("solve_transport: non-periodic solution raises QuantizationError") {
    const double E = 0.5;
    Germ germ = circle_germ(E);
    TransportCoefficients coeffs;
    for (size_t k = 0; k < germ.atlas.size(); ++k) {
        VectorField flow({ScalarField::constant(1, cdouble(1.0, 0.0))});
        coeffs.charts.push_back(
            {flow, ScalarField::constant(1, cdouble(0.3, 0.0))});
    }
    CHECK_THROWS_AS(
        solve_transport(coeffs, germ, cdouble(1.0, 0.0), 1.0 / 16.0),
        const QuantizationError&);
}

TEST_CASE("commutation_residual: constant symbol commutes") {
    const double h = 1.0 / 16.0;
    const double E = h * 7.5;
    Germ germ = circle_germ(E);
    HamiltonianSymbol H;
    H.H = ScalarField::constant(2, cdouble(0.7, 0.0));
    H.p_polynomial.push_back({{0}, ScalarField::constant(1, cdouble(0.7, 0.0))});
    ScalarField phi = ScalarField::constant(2, cdouble(1.0, 0.0));
    auto [gap, raw] = commutation_residual(H, germ, circle_invariant_form(E),
                                           phi, h, circle_grid(E, h));
    CHECK(raw > 0.0);
    CHECK(gap <= 1e-10 * raw);
}

TEST_CASE("commutation_residual: raw residual decays for the circle symbol") {
    ScalarField phi = ScalarField::constant(2, cdouble(1.0, 0.0));
    std::vector<double> ratios;
    for (int k : {4, 5}) {
        const double h = std::pow(0.5, k);
        const int n = static_cast<int>(std::lround(0.47 / h - 0.5));
        const double E = h * (n + 0.5);
        Germ germ = circle_germ(E);
        auto [gap, raw] = commutation_residual(
            separable_harmonic(E), germ, circle_invariant_form(E), phi, h,
            circle_grid(E, h));
        CHECK(gap <= 2.0 * raw);  // the restricted symbol vanishes
        WaveFunction base = global_canop(germ, circle_invariant_form(E), phi,
                                         h, circle_grid(E, h));
        ratios.push_back(raw / hh_norm(base, 0, 1e-2));
        std::printf("h=2^-%d raw/|K phi| = %.3e\n", k, ratios.back());
    }
    const double slope = std::log2(ratios[0] / ratios[1]);
    std::printf("residual slope %.3f\n", slope);
    CHECK(slope >= 1.0);
}
