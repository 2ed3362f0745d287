#include "germcanop/pdo.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "germcanop/errors.hpp"

namespace germcanop {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_state(const WaveFunction& psi, double boundary_tol) {
    if (psi.grid.dim() != 1)
        throw InvalidInput("apply_hamiltonian: grids are one-dimensional");
    if (psi.grid.counts[0] < 5)
        throw InvalidInput("apply_hamiltonian: grid too small");
    double peak = 0.0;
    for (const cdouble& v : psi.samples) peak = std::max(peak, std::abs(v));
    if (peak > 0.0 &&
        std::max(std::abs(psi.samples.front()), std::abs(psi.samples.back())) >
            boundary_tol * peak)
        throw ResolutionError(
            "apply_hamiltonian: state has not decayed at the grid boundary");
}

// (-ih d/dq) by the centered 3-point stencil; off-grid samples are zero
// (the state has decayed there).
std::vector<cdouble> momentum_once(const std::vector<cdouble>& f, double h,
                                   double dq) {
    const int m = static_cast<int>(f.size());
    std::vector<cdouble> g(m);
    const cdouble c = cdouble(0.0, -h) / (2.0 * dq);
    for (int i = 0; i < m; ++i) {
        const cdouble right = i + 1 < m ? f[i + 1] : cdouble(0.0, 0.0);
        const cdouble left = i > 0 ? f[i - 1] : cdouble(0.0, 0.0);
        g[i] = c * (right - left);
    }
    return g;
}

// (-ih d/dq)^2 = -h^2 d^2/dq^2 by the matching 3-point stencil.
std::vector<cdouble> momentum_twice(const std::vector<cdouble>& f, double h,
                                    double dq) {
    const int m = static_cast<int>(f.size());
    std::vector<cdouble> g(m);
    const double c = -h * h / (dq * dq);
    for (int i = 0; i < m; ++i) {
        const cdouble right = i + 1 < m ? f[i + 1] : cdouble(0.0, 0.0);
        const cdouble left = i > 0 ? f[i - 1] : cdouble(0.0, 0.0);
        g[i] = c * (right - 2.0 * f[i] + left);
    }
    return g;
}

std::vector<cdouble> momentum_power(std::vector<cdouble> f, int beta, double h,
                                    double dq) {
    for (int b = beta; b >= 2; b -= 2) f = momentum_twice(f, h, dq);
    if (beta % 2 == 1) f = momentum_once(f, h, dq);
    return f;
}

std::vector<cdouble> dft(const std::vector<cdouble>& f, int sign) {
    const int m = static_cast<int>(f.size());
    std::vector<cdouble> out(m);
    const double w = sign * 2.0 * kPi / m;
    for (int k = 0; k < m; ++k) {
        cdouble acc(0.0, 0.0);
        for (int j = 0; j < m; ++j)
            acc += f[j] * std::polar(1.0, w * j * k);
        out[k] = acc;
    }
    return out;
}

Vec chart_coordinate(const IChart& chart, const Vec& x) {
    const int n = chart.I.n;
    Vec y(n);
    for (int j = 0; j < n; ++j) y[j] = chart.I.contains(j) ? x[n + j] : x[j];
    return y;
}

// Chart-coordinate components of a phase-space vector field: the
// coordinate function of axis j is x[n+j] (position member) or x[j]
// (momentum), so applying X to it just selects the matching component.
ScalarField chart_flow_component(const VectorField& X, const IChart& chart,
                                 int axis) {
    const int n = chart.I.n;
    const int comp = chart.I.contains(axis) ? n + axis : axis;
    const VectorField foot = chart.foot;
    const ScalarField field = X.component(comp);
    return ScalarField::finite_difference(n, [foot, field](const Vec& y) {
        return field(foot.value(y).real());
    });
}

std::vector<Vec> chart_samples(const IChart& chart, int per_axis) {
    const Box& box = chart.d.domain_box;
    const int n = chart.I.n;
    std::vector<Vec> out;
    if (n == 1) {
        for (int i = 0; i < per_axis; ++i) {
            const double s = 0.05 + 0.9 * i / (per_axis - 1.0);
            out.push_back(vec1(box.lo[0] + s * (box.hi[0] - box.lo[0])));
        }
        return out;
    }
    // Diagonal and axis midlines keep the sample count linear in n.
    for (int i = 0; i < per_axis; ++i) {
        const double s = 0.05 + 0.9 * i / (per_axis - 1.0);
        Vec y = box.lo + s * (box.hi - box.lo);
        out.push_back(y);
    }
    return out;
}

void check_tangency(const VectorField& X, const IChart& chart,
                    const std::vector<ScalarField>& generators, double tol,
                    const char* who) {
    for (const Vec& y : chart_samples(chart, 9)) {
        Vec x;
        try {
            x = chart.foot.value(y).real();
        } catch (const Error&) {
            continue;
        }
        const CVec v = X.value(x);
        for (const ScalarField& F : generators) {
            const CVec g = F.gradient(x);
            cdouble xf(0.0, 0.0);
            for (int j = 0; j < g.size(); ++j) xf += g[j] * v[j];
            const double scale = 1.0 + g.norm() * v.norm();
            if (std::abs(xf) > tol * scale)
                throw InvalidInput(std::string(who) +
                                   ": vector field is not tangent (generator "
                                   "derivative too large)");
        }
    }
}

}  // namespace

HamiltonianSymbol harmonic_hamiltonian(double energy_shift) {
    HamiltonianSymbol H;
    const double E = energy_shift;
    H.H = ScalarField::finite_difference(2, [E](const Vec& x) {
        return cdouble(0.5 * x.squaredNorm() - E, 0.0);
    });
    H.growth_order = 2;
    H.p_polynomial.push_back(
        {{0}, ScalarField::finite_difference(
                  1, [E](const Vec& q) {
                      return cdouble(0.5 * q[0] * q[0] - E, 0.0);
                  })});
    H.p_polynomial.push_back({{2}, ScalarField::constant(1, cdouble(0.5, 0.0))});
    H.separable.push_back(
        {ScalarField::finite_difference(
             1, [E](const Vec& q) { return cdouble(0.5 * q[0] * q[0] - E, 0.0); }),
         ScalarField::constant(1, cdouble(1.0, 0.0))});
    H.separable.push_back(
        {ScalarField::constant(1, cdouble(1.0, 0.0)),
         ScalarField::finite_difference(
             1, [](const Vec& p) { return cdouble(0.5 * p[0] * p[0], 0.0); })});
    return H;
}

WaveFunction apply_hamiltonian(const HamiltonianSymbol& H,
                               const WaveFunction& psi, bool symmetrized,
                               double boundary_tol) {
    check_state(psi, boundary_tol);
    const int m = psi.grid.counts[0];
    const double dq = psi.grid.spacing(0);
    const double h = psi.h;

    WaveFunction out;
    out.grid = psi.grid;
    out.h = h;
    out.samples.assign(m, cdouble(0.0, 0.0));

    if (!H.p_polynomial.empty()) {
        for (const auto& mono : H.p_polynomial) {
            if (mono.beta.size() != 1 || mono.beta[0] < 0)
                throw UnsupportedSymbol(
                    "apply_hamiltonian: monomial index does not match a "
                    "one-dimensional grid");
            std::vector<cdouble> coeff(m);
            for (int i = 0; i < m; ++i)
                coeff[i] = mono.coeff(vec1(psi.grid.node1(i)));
            std::vector<cdouble> der =
                momentum_power(psi.samples, mono.beta[0], h, dq);
            if (!symmetrized) {
                for (int i = 0; i < m; ++i) out.samples[i] += coeff[i] * der[i];
            } else {
                std::vector<cdouble> cpsi(m);
                for (int i = 0; i < m; ++i) cpsi[i] = coeff[i] * psi.samples[i];
                std::vector<cdouble> der2 =
                    momentum_power(cpsi, mono.beta[0], h, dq);
                for (int i = 0; i < m; ++i)
                    out.samples[i] += 0.5 * (coeff[i] * der[i] + der2[i]);
            }
        }
        return out;
    }

    if (!H.separable.empty()) {
        const double len = m * dq;  // implicit period of the extension
        std::vector<cdouble> hat = dft(psi.samples, -1);
        for (const auto& term : H.separable) {
            std::vector<cdouble> ghat(m);
            for (int k = 0; k < m; ++k) {
                const int signed_k = k <= m / 2 ? k : k - m;
                const double pk = h * 2.0 * kPi * signed_k / len;
                ghat[k] = term.g_p(vec1(pk)) * hat[k] / static_cast<double>(m);
            }
            std::vector<cdouble> gpsi = dft(ghat, +1);
            if (symmetrized) {
                std::vector<cdouble> fpsi(m), fhat(m);
                for (int i = 0; i < m; ++i)
                    fpsi[i] = term.f_q(vec1(psi.grid.node1(i))) *
                              psi.samples[i];
                fhat = dft(fpsi, -1);
                for (int k = 0; k < m; ++k) {
                    const int signed_k = k <= m / 2 ? k : k - m;
                    const double pk = h * 2.0 * kPi * signed_k / len;
                    fhat[k] = term.g_p(vec1(pk)) * fhat[k] /
                              static_cast<double>(m);
                }
                std::vector<cdouble> gf = dft(fhat, +1);
                for (int i = 0; i < m; ++i)
                    out.samples[i] +=
                        0.5 * (term.f_q(vec1(psi.grid.node1(i))) * gpsi[i] +
                               gf[i]);
            } else {
                for (int i = 0; i < m; ++i)
                    out.samples[i] +=
                        term.f_q(vec1(psi.grid.node1(i))) * gpsi[i];
            }
        }
        return out;
    }

    throw UnsupportedSymbol(
        "apply_hamiltonian: symbol has neither a polynomial-in-p nor a "
        "separable representation");
}

std::pair<double, double> commutation_residual(
    const HamiltonianSymbol& H, const Germ& germ, const VolumeForm& form,
    const ScalarField& phi, double h, const GridSpec& grid,
    double boundary_tol, const CanopOptions& options) {
    WaveFunction k_phi =
        global_canop(germ, form, phi, h, grid, {}, 1e-6, options);
    WaveFunction hk = apply_hamiltonian(H, k_phi, false, boundary_tol);
    // The restriction i*H evaluated through a chart foot is H at the curve
    // point, so K[(i*H) phi] is the operator applied to the product symbol.
    const ScalarField h_field = H.H;
    const ScalarField phi_copy = phi;
    ScalarField restricted = ScalarField::finite_difference(
        2 * germ.n, [h_field, phi_copy](const Vec& x) {
            return h_field(x) * phi_copy(x);
        });
    WaveFunction k_rest =
        global_canop(germ, form, restricted, h, grid, {}, 1e-6, options);
    const double gap =
        hh_norm(wave_add(hk, k_rest, 1.0, -1.0), 0, boundary_tol);
    const double raw = hh_norm(hk, 0, boundary_tol);
    return {gap, raw};
}

ScalarField divergence_in_chart(const VectorField& X, const IChart& chart,
                                const std::vector<ScalarField>& generators,
                                double tangency_tol) {
    check_tangency(X, chart, generators, tangency_tol, "divergence_in_chart");
    const int n = chart.I.n;
    std::vector<ScalarField> comps;
    for (int j = 0; j < n; ++j)
        comps.push_back(chart_flow_component(X, chart, j));
    return ScalarField::finite_difference(n, [comps, n](const Vec& y) {
        cdouble div(0.0, 0.0);
        for (int j = 0; j < n; ++j) div += comps[j].gradient(y)[j];
        return div;
    });
}

ScalarField lie_derivative_volume(const VectorField& X,
                                  const ScalarField& density,
                                  const IChart& chart,
                                  const std::vector<ScalarField>& generators,
                                  double tangency_tol) {
    ScalarField div = divergence_in_chart(X, chart, generators, tangency_tol);
    const int n = chart.I.n;
    std::vector<ScalarField> comps;
    for (int j = 0; j < n; ++j)
        comps.push_back(chart_flow_component(X, chart, j));
    const ScalarField rho = density;
    return ScalarField::finite_difference(n, [comps, rho, div, n](const Vec& y) {
        cdouble x_rho(0.0, 0.0);
        const CVec grad = rho.gradient(y);
        for (int j = 0; j < n; ++j) x_rho += comps[j](y) * grad[j];
        return x_rho + rho(y) * div(y);
    });
}

TransportCoefficients transport_operator(const HamiltonianSymbol& H,
                                         const Germ& germ,
                                         const VolumeForm& form,
                                         double restriction_tol) {
    const int n = germ.n;
    const ScalarField h_field = H.H;

    // Hamiltonian field V(H) = (-dH/dq, dH/dp) in x = (p, q).
    std::vector<ScalarField> vx;
    for (int j = 0; j < n; ++j) {
        vx.push_back(ScalarField::finite_difference(
            2 * n, [h_field, j, n](const Vec& x) {
                return -h_field.gradient(x)[n + j];
            }));
    }
    for (int j = 0; j < n; ++j) {
        vx.push_back(ScalarField::finite_difference(
            2 * n,
            [h_field, j](const Vec& x) { return h_field.gradient(x)[j]; }));
    }
    const VectorField V(vx);

    TransportCoefficients out;
    for (const IChart& chart : germ.atlas) {
        // Restriction check: the symbol must vanish on the curve.
        double worst = 0.0;
        for (const Vec& y : chart_samples(chart, 9)) {
            Vec x;
            try {
                x = chart.foot.value(y).real();
            } catch (const Error&) {
                continue;
            }
            worst = std::max(worst, std::abs(h_field(x)));
            // Invariance through the dissipation: V applied to the germ's
            // nonnegative ideal representative must vanish on the curve.
            const CVec dgrad = germ.D.field.gradient(x);
            cdouble vd(0.0, 0.0);
            const CVec v = V.value(x);
            for (int j = 0; j < 2 * n; ++j) vd += dgrad[j] * v[j];
            if (std::abs(vd) > 1e-6 * (1.0 + dgrad.norm() * v.norm()))
                throw InvalidInput(
                    "transport_operator: germ is not invariant under the "
                    "Hamiltonian flow (dissipation derivative too large)");
        }
        if (worst > restriction_tol)
            throw InvalidInput(
                "transport_operator: symbol does not vanish on the germ");

        std::vector<ScalarField> flow;
        for (int j = 0; j < n; ++j)
            flow.push_back(chart_flow_component(V, chart, j));
        const VectorField flow_field(flow);

        // (1/2) L_V mu / mu with the chart density a(foot) det(I - i S'').
        // Differentiating the numerically continued density directly would
        // amplify its evaluation noise, so the flow derivative is assembled
        // from smooth ingredients instead: V(ln a) from the declared fields,
        // and d/dt ln det(I - i S'') from the Riccati derivative of S''
        // along the flow expressed in the rotated chart frame (where the
        // flow is still Hamiltonian).  The divergence enters through the
        // Liouville trace identity with the same S'' matrix, so its error
        // cancels against the Riccati term.
        const VectorField foot = chart.foot;
        const ScalarField phase = chart.S;
        const ScalarField a_field = form.a;
        const IndexSet I = chart.I;
        ScalarField zeroth = ScalarField::finite_difference(
            n, [h_field, a_field, foot, phase, I, n](const Vec& y) {
                const Vec x = foot.value(y).real();
                const CMat hxx = h_field.hessian(x);
                const CVec hgrad = h_field.gradient(x);

                cdouble mixed(0.0, 0.0);
                for (int j = 0; j < n; ++j) mixed += hxx(j, n + j);

                // V(ln a) along the curve, with V = (-H_q, H_p).
                const CVec agrad = a_field.gradient(x);
                cdouble v_ln_a(0.0, 0.0);
                for (int j = 0; j < n; ++j) {
                    v_ln_a += agrad[j] * (-hgrad[n + j]);
                    v_ln_a += agrad[n + j] * hgrad[j];
                }
                v_ln_a /= a_field(x);

                // Rotated-frame second derivatives: pt_j is p_j (sign +1)
                // for members of I and -q_j (sign -1) otherwise; qt_j the
                // complementary coordinate with sign +1.
                std::vector<int> ps(n), qs(n);
                std::vector<double> sg(n);
                for (int j = 0; j < n; ++j) {
                    if (I.contains(j)) {
                        ps[j] = j;
                        qs[j] = n + j;
                        sg[j] = 1.0;
                    } else {
                        ps[j] = n + j;
                        qs[j] = j;
                        sg[j] = -1.0;
                    }
                }
                CMat hpp(n, n), hpq(n, n), hqq(n, n);
                for (int j = 0; j < n; ++j)
                    for (int l = 0; l < n; ++l) {
                        hpp(j, l) = sg[j] * sg[l] * hxx(ps[j], ps[l]);
                        hpq(j, l) = sg[j] * hxx(ps[j], qs[l]);
                        hqq(j, l) = hxx(qs[j], qs[l]);
                    }

                const CMat A = phase.hessian(y);
                const CMat sdot = -(hqq + hpq.transpose() * A + A * hpq +
                                    A * hpp * A);
                CMat M = CMat::Identity(n, n) - kImag * A;
                const cdouble det_rate = (M.lu().solve(-kImag * sdot)).trace();
                const cdouble div = (hpp * A + hpq).trace();

                return -0.5 * mixed + 0.5 * (v_ln_a + det_rate + div);
            });
        out.charts.push_back({flow_field, zeroth});
    }
    return out;
}

TransportSolution solve_transport(const TransportCoefficients& coeffs,
                                  const Germ& germ, cdouble phi0, double h,
                                  double periodicity_tol) {
    if (!germ.curve)
        throw InvalidInput("solve_transport: germ has no curve parametrization");
    if (coeffs.charts.size() != germ.atlas.size())
        throw InvalidInput("solve_transport: coefficients do not match atlas");
    const CurveParametrization& curve = *germ.curve;
    const double period = curve.t1 - curve.t0;
    const int steps = std::max(
        100, static_cast<int>(std::ceil(100.0 / std::max(h, 1e-12))));
    const double dt = period / steps;

    // Zeroth-order term along the trajectory, evaluated in the most
    // central covering chart.
    auto zeroth_at = [&](double t) -> cdouble {
        const Vec x = curve.point(t);
        int best = -1;
        double best_score = std::numeric_limits<double>::infinity();
        for (size_t k = 0; k < germ.atlas.size(); ++k) {
            const IChart& chart = germ.atlas[k];
            const Vec y = chart_coordinate(chart, x);
            const Box& box = chart.d.domain_box;
            if (!box.contains(y, 1e-9)) continue;
            double score = 0.0;
            for (int j = 0; j < y.size(); ++j) {
                const double half = 0.5 * (box.hi[j] - box.lo[j]);
                score = std::max(score, std::abs(y[j] - 0.5 * (box.hi[j] +
                                                               box.lo[j])) /
                                            half);
            }
            if (score < best_score) {
                best_score = score;
                best = static_cast<int>(k);
            }
        }
        if (best < 0)
            throw InvalidInput(
                "solve_transport: trajectory point not covered by the atlas");
        return coeffs.charts[best].zeroth(
            chart_coordinate(germ.atlas[best], x));
    };

    TransportSolution sol;
    sol.times.reserve(steps + 1);
    sol.phi.reserve(steps + 1);
    cdouble phi = phi0;
    sol.times.push_back(curve.t0);
    sol.phi.push_back(phi);
    for (int s = 0; s < steps; ++s) {
        const double t = curve.t0 + s * dt;
        // Classical Runge-Kutta for d phi / dt = -zeroth(t) phi.
        const cdouble k1 = -zeroth_at(t) * phi;
        const cdouble k2 = -zeroth_at(t + 0.5 * dt) * (phi + 0.5 * dt * k1);
        const cdouble k3 = -zeroth_at(t + 0.5 * dt) * (phi + 0.5 * dt * k2);
        const cdouble k4 = -zeroth_at(t + dt) * (phi + dt * k3);
        phi += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        sol.times.push_back(t + (s + 1 == steps ? period - s * dt : dt));
        sol.phi.push_back(phi);
    }
    if (curve.periodic) {
        const double scale = std::max(std::abs(phi0), std::abs(phi));
        sol.periodic = std::abs(phi - phi0) <= periodicity_tol * (1.0 + scale);
        if (!sol.periodic)
            throw QuantizationError(
                "solve_transport: solution is not periodic on the closed "
                "trajectory");
    }
    return sol;
}

}  // namespace germcanop
