#include "germcanop/minimize.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "germcanop/errors.hpp"

namespace germcanop {

NewtonResult newton_minimize(const RealObjective& obj, const Vec& x0,
                             const NewtonOptions& opts) {
    Vec x = x0;
    double fx = obj.value(x);
    if (!std::isfinite(fx)) throw NumericalFailure("newton_minimize: objective not finite at start");
    int stagnant = 0;
    for (int it = 0; it < opts.max_iterations; ++it) {
        Vec g = obj.gradient(x);
        if (g.norm() <= opts.gradient_tol * (1.0 + std::abs(fx))) {
            return {x, fx, g, it};
        }
        // Evaluation noise in the objective can make the requested
        // tolerance unreachable; a repeatedly non-improving iterate with a
        // small gradient is the minimizer to the attainable precision.
        if (stagnant >= 3 && g.norm() <= 1e-6 * (1.0 + std::abs(fx)))
            return {x, fx, g, it};
        Mat H = obj.hessian(x);
        Eigen::LDLT<Mat> ldlt(H);
        bool spd = ldlt.info() == Eigen::Success && ldlt.isPositive();
        if (!spd) {
            if (opts.require_positive_definite)
                throw PositivityViolation("newton_minimize: Hessian not positive definite");
            // gradient descent fallback (only when explicitly allowed)
            Vec dir = -g;
            double t = 1.0;
            double slope = g.dot(dir);
            while (t > opts.min_step) {
                double ft = obj.value(x + t * dir);
                if (std::isfinite(ft) && ft <= fx + opts.armijo_c * t * slope) break;
                t *= 0.5;
            }
            if (t <= opts.min_step)
                throw NumericalFailure("newton_minimize: line search failed");
            x += t * dir;
            fx = obj.value(x);
            continue;
        }
        Vec dir = ldlt.solve(-g);
        double slope = g.dot(dir);
        if (slope >= 0.0)
            throw NumericalFailure("newton_minimize: Newton direction is not a descent direction");
        double t = 1.0;
        bool moved = false;
        while (t > opts.min_step) {
            double ft = obj.value(x + t * dir);
            if (std::isfinite(ft) && ft <= fx + opts.armijo_c * t * slope) {
                x += t * dir;
                if (fx - ft <= 1e-15 * (1.0 + std::abs(fx)))
                    ++stagnant;
                else
                    stagnant = 0;
                fx = ft;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved) {
            // Step underflow with a tiny gradient means we are at the
            // minimizer to machine precision.
            if (g.norm() <= 1e-8 * (1.0 + std::abs(fx))) return {x, fx, g, it};
            throw NumericalFailure("newton_minimize: line search failed");
        }
    }
    Vec g = obj.gradient(x);
    if (g.norm() <= 1e-6 * (1.0 + std::abs(fx))) return {x, fx, g, opts.max_iterations};
    throw NumericalFailure("newton_minimize: no convergence within iteration budget");
}

RealObjective objective_from_field(const ScalarField& f) {
    RealObjective obj;
    obj.value = [f](const Vec& x) { return f(x).real(); };
    obj.gradient = [f](const Vec& x) { return Vec(f.gradient(x).real()); };
    obj.hessian = [f](const Vec& x) { return Mat(f.hessian(x).real()); };
    return obj;
}

}  // namespace germcanop
