#include "germcanop/fields.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace germcanop {

namespace {

void check_finite(cdouble v, const Vec& x) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
        std::ostringstream os;
        os << "non-finite field value at x = [" << x.transpose() << "]";
        throw NumericalFailure(os.str());
    }
}

}  // namespace

double ScalarField::default_step() {
    static const double s = std::cbrt(std::numeric_limits<double>::epsilon());
    return s;
}

ScalarField ScalarField::finite_difference(int dim, Evaluator f, double step) {
    if (dim <= 0) throw InvalidInput("ScalarField: dim must be positive");
    if (step <= 0.0) throw InvalidInput("ScalarField: step must be positive");
    ScalarField s;
    s.dim_ = dim;
    s.eval_ = std::move(f);
    s.step_ = step;
    return s;
}

ScalarField ScalarField::analytic(int dim, Evaluator f, GradFn grad, HessFn hess) {
    if (dim <= 0) throw InvalidInput("ScalarField: dim must be positive");
    ScalarField s;
    s.dim_ = dim;
    s.eval_ = std::move(f);
    s.grad_ = std::move(grad);
    s.hess_ = std::move(hess);
    s.step_ = default_step();
    return s;
}

ScalarField ScalarField::constant(int dim, cdouble c) {
    return analytic(
        dim, [c](const Vec&) { return c; },
        [dim](const Vec&) { return CVec::Zero(dim).eval(); },
        [dim](const Vec&) { return CMat::Zero(dim, dim).eval(); });
}

cdouble ScalarField::operator()(const Vec& x) const {
    cdouble v = eval_(x);
    check_finite(v, x);
    return v;
}

CVec ScalarField::gradient(const Vec& x) const {
    if (grad_) return grad_(x);
    CVec g(dim_);
    Vec xp = x, xm = x;
    for (int i = 0; i < dim_; ++i) {
        double h = step_ * std::max(1.0, std::abs(x[i]));
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        g[i] = (eval_(xp) - eval_(xm)) / (2.0 * h);
        xp[i] = x[i];
        xm[i] = x[i];
    }
    return g;
}

CMat ScalarField::hessian(const Vec& x) const {
    if (hess_) return hess_(x);
    CMat H(dim_, dim_);
    const double base = std::max(step_, std::sqrt(ScalarField::default_step()) * 1e-1);
    Vec y = x;
    for (int i = 0; i < dim_; ++i) {
        double hi = base * std::max(1.0, std::abs(x[i]));
        for (int j = i; j < dim_; ++j) {
            double hj = base * std::max(1.0, std::abs(x[j]));
            if (i == j) {
                y[i] = x[i] + hi;
                cdouble fp = eval_(y);
                y[i] = x[i] - hi;
                cdouble fm = eval_(y);
                y[i] = x[i];
                cdouble f0 = eval_(y);
                H(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
            } else {
                y[i] = x[i] + hi;
                y[j] = x[j] + hj;
                cdouble fpp = eval_(y);
                y[j] = x[j] - hj;
                cdouble fpm = eval_(y);
                y[i] = x[i] - hi;
                cdouble fmm = eval_(y);
                y[j] = x[j] + hj;
                cdouble fmp = eval_(y);
                y[i] = x[i];
                y[j] = x[j];
                H(i, j) = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
                H(j, i) = H(i, j);
            }
        }
    }
    return H;
}

ScalarField ScalarField::scaled(cdouble factor) const {
    const ScalarField self = *this;
    if (analytic_derivatives()) {
        return analytic(
            dim_, [self, factor](const Vec& x) { return factor * self(x); },
            [self, factor](const Vec& x) { return (factor * self.gradient(x)).eval(); },
            [self, factor](const Vec& x) { return (factor * self.hessian(x)).eval(); });
    }
    return finite_difference(
        dim_, [self, factor](const Vec& x) { return factor * self(x); }, step_);
}

Jet eval_jet(const ScalarField& f, const Vec& x) {
    if (x.size() != f.dim()) throw InvalidInput("eval_jet: dimension mismatch");
    if (!x.allFinite()) throw NumericalFailure("eval_jet: non-finite point");
    Jet jet;
    jet.value = f(x);
    jet.gradient = f.gradient(x);
    CMat H = f.hessian(x);
    CMat Hs = 0.5 * (H + H.transpose());
    double asym = (H - H.transpose()).norm();
    if (asym > 1e-6 * (1.0 + H.norm())) {
        throw NumericalFailure("eval_jet: Hessian asymmetry beyond tolerance");
    }
    jet.hessian = Hs;
    for (int i = 0; i < f.dim(); ++i) check_finite(jet.gradient[i], x);
    return jet;
}

VectorField::VectorField(std::vector<ScalarField> components)
    : components_(std::move(components)) {
    if (components_.empty()) throw InvalidInput("VectorField: no components");
    int d = components_[0].dim();
    for (const auto& c : components_) {
        if (c.dim() != d) throw InvalidInput("VectorField: mixed dimensions");
    }
}

int VectorField::dim() const { return components_.empty() ? 0 : components_[0].dim(); }
int VectorField::codim() const { return static_cast<int>(components_.size()); }

CVec VectorField::value(const Vec& x) const {
    CVec v(codim());
    for (int i = 0; i < codim(); ++i) v[i] = components_[i](x);
    return v;
}

CMat VectorField::jacobian(const Vec& x) const {
    CMat J(codim(), dim());
    for (int i = 0; i < codim(); ++i) J.row(i) = components_[i].gradient(x).transpose();
    return J;
}

FdReport fd_consistency(const ScalarField& f, const std::vector<Vec>& samples) {
    if (samples.empty()) throw InvalidInput("fd_consistency: empty sample set");
    if (!f.analytic_derivatives()) {
        throw InvalidInput("fd_consistency: field has no analytic derivatives");
    }
    ScalarField numeric = ScalarField::finite_difference(
        f.dim(), [f](const Vec& x) { return f(x); });
    FdReport rep;
    for (const Vec& x : samples) {
        CVec ga = f.gradient(x);
        CVec gn = numeric.gradient(x);
        double ge = (ga - gn).norm() / (1.0 + ga.norm());
        CMat Ha = f.hessian(x);
        CMat Hn = numeric.hessian(x);
        double he = (Ha - Hn).norm() / (1.0 + Ha.norm());
        rep.gradient_errors.push_back(ge);
        rep.hessian_errors.push_back(he);
        rep.max_gradient_rel_error = std::max(rep.max_gradient_rel_error, ge);
        rep.max_hessian_rel_error = std::max(rep.max_hessian_rel_error, he);
    }
    return rep;
}

}  // namespace germcanop
