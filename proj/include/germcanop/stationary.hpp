#pragma once

#include <vector>

#include "germcanop/dissipation.hpp"
#include "germcanop/fields.hpp"

namespace germcanop {

/// Reduction of a complex phase F(p, q) with Im F >= 0 over its q-block:
/// for each p the foot q(p) minimizes the proxy dissipation
///     D_mu(p, q) = Im F + (mu/2) |F_q|^2,
/// and the reduced phase carries the second-order correction
///     F~(p) = F - <F_q, F_qq^{-1} F_q> / 2   at (p, q(p)).
/// For quadratic F the reduction is exact; in general F~ is stable in mu
/// modulo O(d^{3/2}).
struct StationaryOptions {
    double mu = 2.0;          // recovers the unweighted reduction
    double trust_radius = 1.0;  // half-width of the reduced domain box
    int max_iterations = 100;
    double gradient_tol = 1e-12;
};

struct StationaryResult {
    int np = 0;
    int nq = 0;
    double mu = 2.0;
    VectorField foot;                // p -> q(p), real-valued components
    Dissipation reduced_dissipation;  // d(p) = D_mu(p, q(p))
    ScalarField reduced_phase;        // F~(p)
};

/// phase: field on R^{np+nq}, coordinates ordered (p, q).  (p0, q0) is a
/// point with F_q = 0 and Im F = 0 (checked); feet are found by Newton
/// seeded from q0.
StationaryResult complex_stationary_value(const ScalarField& phase, int np,
                                          const Vec& p0, const Vec& q0,
                                          const StationaryOptions& opts = {});

/// Fitted constants 0 < c <= C with c * d <= Im F~ <= C * d on the samples
/// (p-points with d above the floor).
struct DissipativityBounds {
    double lower = 0.0;
    double upper = 0.0;
};

DissipativityBounds dissipativity_bounds(const StationaryResult& res,
                                         const std::vector<Vec>& samples,
                                         double floor_value = 1e-10);

/// With E = F_qq (q-block Hessian) split as E = E1 + i E2 and
/// E^{-1} = A + i B, the blocks satisfy A E1 - B E2 = I and
/// B E1 + A E2 = 0; B is negative semidefinite whenever E2 >= 0.
struct AppendixMatrices {
    Mat e1, e2;
    Mat a, b;
};

AppendixMatrices appendix_matrices(const ScalarField& phase, int np,
                                   const Vec& point);

}  // namespace germcanop
