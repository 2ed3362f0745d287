#pragma once

#include <functional>

#include "germcanop/fields.hpp"

namespace germcanop {

/// Real objective with gradient and Hessian, for the small argmin/root
/// problems attached to dissipations and phases.
struct RealObjective {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient;
    std::function<Mat(const Vec&)> hessian;
};

struct NewtonOptions {
    int max_iterations = 50;
    double gradient_tol = 1e-12;
    double armijo_c = 1e-4;
    double min_step = 1e-14;
    // Positive definiteness of the Hessian is required along the way; its
    // failure signals invalid input (the theory guarantees definiteness
    // near the zero locus), not a condition to be repaired.
    bool require_positive_definite = true;
};

struct NewtonResult {
    Vec x;
    double value;
    Vec gradient;
    int iterations;
};

/// Damped Newton minimization with Armijo backtracking.  Throws
/// PositivityViolation on an indefinite Hessian (when required) and
/// NumericalFailure on non-convergence.
NewtonResult newton_minimize(const RealObjective& obj, const Vec& x0,
                             const NewtonOptions& opts = {});

/// Builds a RealObjective from a real-valued ScalarField (imaginary parts
/// must vanish; they are discarded).
RealObjective objective_from_field(const ScalarField& f);

}  // namespace germcanop
