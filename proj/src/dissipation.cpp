#include "germcanop/dissipation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "germcanop/errors.hpp"

namespace germcanop {

bool Box::contains(const Vec& x, double slack) const {
    if (x.size() != lo.size()) return false;
    for (int i = 0; i < x.size(); ++i)
        if (x[i] < lo[i] - slack || x[i] > hi[i] + slack) return false;
    return true;
}

std::vector<Vec> Box::grid(const std::vector<int>& counts) const {
    if (static_cast<int>(counts.size()) != dim())
        throw InvalidInput("Box::grid: counts size mismatch");
    long total = 1;
    for (int c : counts) {
        if (c < 1) throw InvalidInput("Box::grid: counts must be >= 1");
        total *= c;
    }
    std::vector<Vec> pts;
    pts.reserve(total);
    std::vector<int> idx(dim(), 0);
    for (long t = 0; t < total; ++t) {
        Vec x(dim());
        for (int i = 0; i < dim(); ++i) {
            double f = counts[i] == 1 ? 0.5 : double(idx[i]) / (counts[i] - 1);
            x[i] = lo[i] + f * (hi[i] - lo[i]);
        }
        pts.push_back(x);
        for (int i = 0; i < dim(); ++i) {
            if (++idx[i] < counts[i]) break;
            idx[i] = 0;
        }
    }
    return pts;
}

std::vector<Vec> Box::sample(int count, unsigned seed) const {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec> pts;
    pts.reserve(count);
    for (int k = 0; k < count; ++k) {
        Vec x(dim());
        for (int i = 0; i < dim(); ++i) x[i] = lo[i] + u(rng) * (hi[i] - lo[i]);
        pts.push_back(x);
    }
    return pts;
}

Box Box::cube(int dim, double lo_v, double hi_v) {
    Box b;
    b.lo = Vec::Constant(dim, lo_v);
    b.hi = Vec::Constant(dim, hi_v);
    return b;
}

double Dissipation::operator()(const Vec& x) const {
    cdouble v = field(x);
    if (std::abs(v.imag()) > 1e-10 * (1.0 + std::abs(v.real())))
        throw InvalidInput("Dissipation: field is not real-valued");
    return v.real();
}

void Dissipation::check_nonnegative(const std::vector<Vec>& pts) const {
    for (const Vec& x : pts)
        if ((*this)(x) < -1e-12)
            throw PositivityViolation("Dissipation: negative value sampled");
}

Vec GraphPresentation::assemble(const Vec& x2) const {
    CVec xp = foot_map.value(x2);
    Vec x(n);
    for (int i = 0; i < k; ++i) x[i] = xp[i].real();
    for (int i = 0; i < n - k; ++i) x[k + i] = x2[i];
    return x;
}

MembershipResult membership_order(const ScalarField& f, const Dissipation& D,
                                  const std::vector<Vec>& samples, double s,
                                  double cap) {
    if (samples.empty()) throw InsufficientData("membership_order: no samples");
    double c = 0.0;
    int off_locus = 0;
    for (const Vec& x : samples) {
        double d = D(x);
        double fv = std::abs(f(x));
        if (d <= 0.0) {
            // On the zero locus the test is only meaningful if f vanishes too.
            if (fv > 1e-12) return {false, std::numeric_limits<double>::infinity()};
            continue;
        }
        ++off_locus;
        c = std::max(c, fv / std::pow(d, s));
    }
    if (off_locus == 0) {
        // Entirely on the zero locus: nothing to fit.
        bool all_zero = true;
        for (const Vec& x : samples) all_zero = all_zero && std::abs(f(x)) <= 1e-12;
        if (all_zero) return {true, 0.0};
        throw InsufficientData("membership_order: all samples on the zero locus");
    }
    return {c <= cap, c};
}

bool derivative_order_check(const ScalarField& f, const Dissipation& D, double s,
                            const VectorField& direction,
                            const std::vector<Vec>& samples, double cap) {
    if (s < 0.5) throw InvalidInput("derivative_order_check: s must be >= 1/2");
    auto base = membership_order(f, D, samples, s, cap);
    if (!base.holds)
        throw InvalidInput("derivative_order_check: f is not in O(D^s) on samples");
    // Xf assembled pointwise from the jet of f along the direction field.
    ScalarField Xf = ScalarField::finite_difference(
        f.dim(), [f, direction](const Vec& x) {
            CVec g = f.gradient(x);
            CVec v = direction.value(x);
            return (g.transpose() * v)(0);
        });
    // When X preserves the dissipation itself (XD = O(D)) the ideal at
    // order s should also be invariant, so we demand the same order back.
    // Otherwise only the generic half-order loss is guaranteed.
    ScalarField XD = ScalarField::finite_difference(
        f.dim(), [D, direction](const Vec& x) {
            CVec g = D.field.gradient(x);
            CVec v = direction.value(x);
            return (g.transpose() * v)(0);
        });
    const double target =
        membership_order(XD, D, samples, 1.0, cap).holds ? s : s - 0.5;
    return membership_order(Xf, D, samples, target, cap).holds;
}

namespace {

// Newton foot for the x'-block minimization of D at fixed x''.
Vec foot_solve(const Dissipation& D, int k, const Vec& x2, const Vec& seed) {
    const int n = D.dim();
    RealObjective obj;
    obj.value = [&D, k, n, &x2](const Vec& xp) {
        Vec x(n);
        x.head(k) = xp;
        x.tail(n - k) = x2;
        return D(x);
    };
    obj.gradient = [&D, k, n, &x2](const Vec& xp) {
        Vec x(n);
        x.head(k) = xp;
        x.tail(n - k) = x2;
        return Vec(D.field.gradient(x).head(k).real());
    };
    obj.hessian = [&D, k, n, &x2](const Vec& xp) {
        Vec x(n);
        x.head(k) = xp;
        x.tail(n - k) = x2;
        return Mat(D.field.hessian(x).topLeftCorner(k, k).real());
    };
    return newton_minimize(obj, seed).x;
}

}  // namespace

GraphPresentation reduce_to_graph(const Dissipation& D,
                                  const std::vector<ScalarField>& generators,
                                  const Vec& x0) {
    const int n = D.dim();
    const int k = static_cast<int>(generators.size());
    if (k < 1 || k > n) throw InvalidInput("reduce_to_graph: bad generator count");
    if (D(x0) > 1e-10) throw InvalidInput("reduce_to_graph: seed not on the zero locus");

    CMat J(k, k);
    for (int i = 0; i < k; ++i) J.row(i) = generators[i].gradient(x0).head(k).transpose();
    if (std::abs(J.determinant()) < 1e-12)
        throw DegenerateChart("reduce_to_graph: singular generator Jacobian in x'");
    {
        Mat H = D.field.hessian(x0).topLeftCorner(k, k).real();
        Eigen::LDLT<Mat> ldlt(H);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
            throw PositivityViolation("reduce_to_graph: dD^2/dx'dx' not positive definite");
    }

    Dissipation Dc = D;
    Vec seed0 = x0.head(k);
    auto foot = [Dc, k, seed0](const Vec& x2) { return foot_solve(Dc, k, x2, seed0); };

    std::vector<ScalarField> foot_comps;
    for (int i = 0; i < k; ++i) {
        foot_comps.push_back(ScalarField::finite_difference(
            n - k, [foot, i](const Vec& x2) { return cdouble(foot(x2)[i], 0.0); }));
    }
    VectorField foot_field(foot_comps);

    auto gens = generators;
    auto graph_eval = [Dc, gens, foot, k, n](const Vec& x2) -> CVec {
        Vec xp = foot(x2);
        Vec x(n);
        x.head(k) = xp;
        x.tail(n - k) = x2;
        CMat Jf(k, k);
        CVec fv(k);
        for (int i = 0; i < k; ++i) {
            Jf.row(i) = gens[i].gradient(x).head(k).transpose();
            fv[i] = gens[i](x);
        }
        // g = x' + h,  h = -[df/dx']^{-1} f  at the foot.
        CVec h = -Jf.fullPivLu().solve(fv);
        return xp.cast<cdouble>() + h;
    };
    std::vector<ScalarField> graph_comps;
    for (int i = 0; i < k; ++i) {
        graph_comps.push_back(ScalarField::finite_difference(
            n - k, [graph_eval, i](const Vec& x2) { return graph_eval(x2)[i]; }));
    }
    VectorField graph_field(graph_comps);

    Dissipation reduced;
    reduced.field = ScalarField::finite_difference(n - k, [Dc, foot, k, n](const Vec& x2) {
        Vec x(n);
        x.head(k) = foot(x2);
        x.tail(n - k) = x2;
        return cdouble(Dc(x), 0.0);
    });
    reduced.domain_box = Box{D.domain_box.lo.tail(n - k), D.domain_box.hi.tail(n - k)};

    GraphPresentation gp;
    gp.k = k;
    gp.n = n;
    gp.reduced_dissipation = reduced;
    gp.graph_map = graph_field;
    gp.foot_map = foot_field;
    return gp;
}

ParametricProjection project_parametric(const VectorField& X, const Dissipation& d,
                                        const Vec& alpha0) {
    const int m = d.dim();
    const int n = X.codim();
    if (d(alpha0) > 1e-10)
        throw InvalidInput("project_parametric: alpha0 not on the zero locus of d");
    {
        CMat J = X.jacobian(alpha0);
        Eigen::JacobiSVD<CMat> svd(J);
        if (svd.rank() < m || svd.singularValues()(m - 1) < 1e-10)
            throw DegenerateChart("project_parametric: rank-deficient embedding Jacobian");
    }

    // D(x, alpha) = d(alpha) + sum_i |x_i - X_i(alpha)|^2.
    auto D_of = [d, X, n](const Vec& x, const Vec& alpha) {
        double v = d(alpha);
        CVec Xa = X.value(alpha);
        for (int i = 0; i < n; ++i) v += std::norm(cdouble(x[i], 0.0) - Xa[i]);
        return v;
    };

    auto foot = [d, X, m, n, alpha0, D_of](const Vec& x) -> Vec {
        RealObjective obj;
        obj.value = [&](const Vec& a) { return D_of(x, a); };
        ScalarField Df = ScalarField::finite_difference(
            m, [&x, D_of](const Vec& a) { return cdouble(D_of(x, a), 0.0); });
        obj.gradient = [Df](const Vec& a) { return Vec(Df.gradient(a).real()); };
        obj.hessian = [Df](const Vec& a) { return Mat(Df.hessian(a).real()); };
        NewtonOptions opts;
        opts.max_iterations = 50;
        return newton_minimize(obj, alpha0, opts).x;
    };

    ParametricProjection out;
    std::vector<ScalarField> foot_comps;
    for (int i = 0; i < m; ++i) {
        foot_comps.push_back(ScalarField::finite_difference(
            n, [foot, i](const Vec& x) { return cdouble(foot(x)[i], 0.0); }));
    }
    out.foot_map = VectorField(foot_comps);
    out.dissipation.field = ScalarField::finite_difference(
        n, [foot, D_of](const Vec& x) { return cdouble(D_of(x, foot(x)), 0.0); });
    out.dissipation.domain_box = Box::cube(n, -1.0, 1.0);
    return out;
}

ScalarField restrict_function(const ScalarField& Phi, const GraphPresentation& gp) {
    const int k = gp.k;
    const int n = gp.n;
    auto foot = gp.foot_map;
    auto graph = gp.graph_map;
    return ScalarField::finite_difference(n - k, [Phi, foot, graph, k, n](const Vec& x2) {
        Vec x(n);
        CVec xp = foot.value(x2);
        for (int i = 0; i < k; ++i) x[i] = xp[i].real();
        x.tail(n - k) = x2;
        CVec g = graph.value(x2);
        CVec grad = Phi.gradient(x).head(k);
        cdouble v = Phi(x);
        for (int i = 0; i < k; ++i) v += (g[i] - cdouble(x[i], 0.0)) * grad[i];
        return v;
    });
}

EquivalenceBounds equivalence_bounds(const std::function<double(const Vec&)>& D1,
                                     const std::function<double(const Vec&)>& D2,
                                     const std::vector<Vec>& samples,
                                     double floor_value) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    int used = 0;
    for (const Vec& x : samples) {
        double a = D1(x);
        double b = D2(x);
        if (b < floor_value || a < floor_value) continue;
        ++used;
        lo = std::min(lo, a / b);
        hi = std::max(hi, a / b);
    }
    if (used == 0) throw InsufficientData("equivalence_bounds: no usable samples");
    return {lo, hi};
}

}  // namespace germcanop
