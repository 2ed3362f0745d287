#include "germcanop/stationary.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "germcanop/errors.hpp"
#include "germcanop/minimize.hpp"

namespace germcanop {

namespace {

Vec assemble(const Vec& p, const Vec& q) {
    Vec x(p.size() + q.size());
    x << p, q;
    return x;
}

double proxy_dissipation(const ScalarField& phase, int np, const Vec& x,
                         double mu) {
    const int nq = phase.dim() - np;
    const CVec g = phase.gradient(x).tail(nq);
    return phase(x).imag() + 0.5 * mu * g.squaredNorm();
}

// Newton minimization of q -> D_mu(p, q).  The Hessian is the Gauss-Newton
// form Im F_qq + mu Re(F_qq^* F_qq), exact at points where F_q vanishes.
Vec solve_foot(const ScalarField& phase, int np, const Vec& p, const Vec& seed,
               const StationaryOptions& opts) {
    const int nq = phase.dim() - np;
    RealObjective obj;
    obj.value = [&phase, np, p, mu = opts.mu](const Vec& q) {
        return proxy_dissipation(phase, np, assemble(p, q), mu);
    };
    obj.gradient = [&phase, np, nq, p, mu = opts.mu](const Vec& q) {
        const Vec x = assemble(p, q);
        const CVec g = phase.gradient(x).tail(nq);
        const CMat h = phase.hessian(x).bottomRightCorner(nq, nq);
        Vec out = g.imag();
        out += mu * (h.adjoint() * g).real();
        return out;
    };
    obj.hessian = [&phase, np, nq, p, mu = opts.mu](const Vec& q) {
        const Vec x = assemble(p, q);
        const CMat h = phase.hessian(x).bottomRightCorner(nq, nq);
        Mat out = h.imag();
        out += mu * (h.adjoint() * h).real();
        return out;
    };

    NewtonOptions nopts;
    nopts.max_iterations = opts.max_iterations;
    nopts.gradient_tol = opts.gradient_tol;
    nopts.require_positive_definite = true;
    return newton_minimize(obj, seed, nopts).x;
}

cdouble corrected_phase(const ScalarField& phase, int np, const Vec& x) {
    const int nq = phase.dim() - np;
    const cdouble f = phase(x);
    const CVec g = phase.gradient(x).tail(nq);
    const CMat h = phase.hessian(x).bottomRightCorner(nq, nq);
    Eigen::FullPivLU<CMat> lu(h);
    if (!lu.isInvertible())
        throw DegenerateChart("complex_stationary_value: singular q-Hessian");
    const CVec corr = lu.solve(g);
    return f - 0.5 * (g.transpose() * corr)(0);
}

}  // namespace

StationaryResult complex_stationary_value(const ScalarField& phase, int np,
                                          const Vec& p0, const Vec& q0,
                                          const StationaryOptions& opts) {
    const int nq = phase.dim() - np;
    if (np < 0 || nq <= 0) throw InvalidInput("complex_stationary_value: bad split");
    if (p0.size() != np || q0.size() != nq)
        throw InvalidInput("complex_stationary_value: base point dimension mismatch");
    if (opts.mu <= 0.0) throw InvalidInput("complex_stationary_value: mu must be positive");

    const Vec x0 = assemble(p0, q0);
    const CVec g0 = phase.gradient(x0).tail(nq);
    if (g0.norm() > 1e-8)
        throw InvalidInput("complex_stationary_value: F_q(p0, q0) != 0");
    Eigen::FullPivLU<CMat> lu0(CMat(phase.hessian(x0).bottomRightCorner(nq, nq)));
    if (!lu0.isInvertible())
        throw DegenerateChart("complex_stationary_value: degenerate q-Hessian at base");

    auto foot_of = [phase, np, q0, opts](const Vec& p) {
        return solve_foot(phase, np, p, q0, opts);
    };

    StationaryResult res;
    res.np = np;
    res.nq = nq;
    res.mu = opts.mu;

    std::vector<ScalarField> comps;
    comps.reserve(nq);
    for (int i = 0; i < nq; ++i) {
        comps.push_back(ScalarField::finite_difference(
            np, [foot_of, i](const Vec& p) { return cdouble(foot_of(p)[i], 0.0); }));
    }
    res.foot = VectorField(comps);

    Box box;
    box.lo = p0.array() - opts.trust_radius;
    box.hi = p0.array() + opts.trust_radius;
    res.reduced_dissipation.domain_box = box;
    res.reduced_dissipation.field = ScalarField::finite_difference(
        np, [phase, np, foot_of, mu = opts.mu](const Vec& p) {
            return cdouble(
                proxy_dissipation(phase, np, assemble(p, foot_of(p)), mu), 0.0);
        });

    res.reduced_phase = ScalarField::finite_difference(
        np, [phase, np, foot_of](const Vec& p) {
            return corrected_phase(phase, np, assemble(p, foot_of(p)));
        });
    return res;
}

DissipativityBounds dissipativity_bounds(const StationaryResult& res,
                                         const std::vector<Vec>& samples,
                                         double floor_value) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    int used = 0;
    for (const Vec& p : samples) {
        const double d = res.reduced_dissipation(p);
        const double imf = res.reduced_phase(p).imag();
        if (imf < -1e-10)
            throw PositivityViolation(
                "dissipativity_bounds: negative Im of reduced phase");
        if (d < floor_value) continue;
        const double ratio = imf / d;
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
        ++used;
    }
    if (used == 0)
        throw InsufficientData("dissipativity_bounds: no samples above floor");
    if (lo <= 0.0)
        throw PositivityViolation("dissipativity_bounds: lower bound not positive");
    return {lo, hi};
}

AppendixMatrices appendix_matrices(const ScalarField& phase, int np,
                                   const Vec& point) {
    if (point.size() != phase.dim())
        throw InvalidInput("appendix_matrices: point dimension mismatch");
    const int nq = phase.dim() - np;
    const CMat h = phase.hessian(point).bottomRightCorner(nq, nq);
    Eigen::FullPivLU<CMat> lu(h);
    if (!lu.isInvertible())
        throw DegenerateChart("appendix_matrices: singular Hessian block");
    const CMat inv = lu.inverse();
    AppendixMatrices m;
    m.e1 = h.real();
    m.e2 = h.imag();
    m.a = inv.real();
    m.b = inv.imag();
    return m;
}

}  // namespace germcanop
