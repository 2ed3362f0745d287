#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "germcanop/errors.hpp"

namespace germcanop {

using cdouble = std::complex<double>;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;

inline constexpr cdouble kImag{0.0, 1.0};

/// Value, gradient and Hessian of a scalar field at a point.
struct Jet {
    cdouble value;
    CVec gradient;
    CMat hessian;  // symmetrized
};

/// Smooth complex-valued map on R^dim with derivative queries up to second
/// order.  Derivatives are either caller-supplied (analytic mode) or central
/// differences with a per-field step.  Immutable after construction.
class ScalarField {
public:
    using Evaluator = std::function<cdouble(const Vec&)>;
    using GradFn = std::function<CVec(const Vec&)>;
    using HessFn = std::function<CMat(const Vec&)>;

    ScalarField() = default;

    static double default_step();  // eps^{1/3}

    static ScalarField finite_difference(int dim, Evaluator f,
                                         double step = default_step());
    static ScalarField analytic(int dim, Evaluator f, GradFn grad, HessFn hess);

    // Convenience: real or constant fields.
    static ScalarField constant(int dim, cdouble c);

    int dim() const { return dim_; }
    bool analytic_derivatives() const { return static_cast<bool>(grad_); }
    double step() const { return step_; }

    cdouble operator()(const Vec& x) const;
    CVec gradient(const Vec& x) const;
    CMat hessian(const Vec& x) const;

    /// Scale/shift helpers used by compositions.
    ScalarField scaled(cdouble factor) const;

private:
    int dim_ = 0;
    Evaluator eval_;
    GradFn grad_;
    HessFn hess_;
    double step_ = 0.0;
};

/// eval_jet: full second-order jet; Hessian symmetrized, symmetry checked to
/// 1e-6*(1+|H|).  Throws NumericalFailure on non-finite values.
Jet eval_jet(const ScalarField& f, const Vec& x);

/// Tuple of scalar fields sharing one domain dimension.
class VectorField {
public:
    VectorField() = default;
    VectorField(std::vector<ScalarField> components);

    int dim() const;     // domain dimension
    int codim() const;   // number of components
    const ScalarField& component(int i) const { return components_[i]; }

    CVec value(const Vec& x) const;
    CMat jacobian(const Vec& x) const;  // codim x dim

private:
    std::vector<ScalarField> components_;
};

struct FdReport {
    double max_gradient_rel_error = 0.0;
    double max_hessian_rel_error = 0.0;
    std::vector<double> gradient_errors;  // per sample point
    std::vector<double> hessian_errors;
};

/// Compares caller-supplied analytic derivatives against central differences.
FdReport fd_consistency(const ScalarField& f, const std::vector<Vec>& samples);

// Small helpers shared across modules.
inline Vec vec1(double a) {
    Vec v(1);
    v << a;
    return v;
}
inline Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}
inline Vec vec4(double a, double b, double c, double d) {
    Vec v(4);
    v << a, b, c, d;
    return v;
}

}  // namespace germcanop
