#pragma once

#include <optional>
#include <vector>

#include "germcanop/fields.hpp"
#include "germcanop/minimize.hpp"

namespace germcanop {

/// Axis-aligned box; the common domain descriptor for dissipations and
/// chart data.
struct Box {
    Vec lo;
    Vec hi;

    int dim() const { return static_cast<int>(lo.size()); }
    bool contains(const Vec& x, double slack = 0.0) const;
    Vec center() const { return 0.5 * (lo + hi); }
    /// Uniform grid over the box, counts per axis (total = prod counts).
    std::vector<Vec> grid(const std::vector<int>& counts) const;
    /// Deterministic pseudo-random sample of `count` points (seeded).
    std::vector<Vec> sample(int count, unsigned seed) const;

    static Box cube(int dim, double lo_v, double hi_v);
};

/// Smooth nonnegative function whose zero set carries the geometry.
struct Dissipation {
    ScalarField field;
    Box domain_box;

    double operator()(const Vec& x) const;  // checked real value
    int dim() const { return field.dim(); }
    /// Verifies nonnegativity (>= -1e-12) at the given points.
    void check_nonnegative(const std::vector<Vec>& pts) const;
};

/// Presentation of an asymptotic submanifold as a graph x' = g(x'') over
/// the last n-k coordinates, with a reduced dissipation d(x'').
struct GraphPresentation {
    int k;                            // size of the x' block (leading coords)
    int n;                            // ambient dimension
    Dissipation reduced_dissipation;  // d(x'') on R^{n-k}
    VectorField graph_map;            // g : R^{n-k} -> C^k
    VectorField foot_map;             // x'(x'') : R^{n-k} -> R^k (real-valued)

    Vec assemble(const Vec& x2) const;  // (x'(x''), x'') as a real point
};

struct MembershipResult {
    bool holds;
    double fitted_constant;
};

/// Sampled membership test f in O(D^s): the least c with |f| <= c D^s over
/// the samples, compared against `cap`.
MembershipResult membership_order(const ScalarField& f, const Dissipation& D,
                                  const std::vector<Vec>& samples, double s,
                                  double cap = 1e6);

/// Whether the directional derivative X f stays in O(D^{s-1/2}).
bool derivative_order_check(const ScalarField& f, const Dissipation& D, double s,
                            const VectorField& direction,
                            const std::vector<Vec>& samples, double cap = 1e6);

/// Constructive reduction: foot map from the normal equations dD/dx' = 0,
/// reduced dissipation, and the graph correction from the generators.
GraphPresentation reduce_to_graph(const Dissipation& D,
                                  const std::vector<ScalarField>& generators,
                                  const Vec& x0);

struct ParametricProjection {
    Dissipation dissipation;  // \tilde D(x) on R^n
    VectorField foot_map;     // alpha(x) : R^n -> R^m (real-valued)
};

/// Pushforward of a dissipation along a parametric embedding alpha -> X(alpha):
/// \tilde D(x) = min_alpha [ d(alpha) + sum |x_i - X_i(alpha)|^2 ].
ParametricProjection project_parametric(const VectorField& X, const Dissipation& d,
                                        const Vec& alpha0);

/// Restriction of a function through a graph presentation:
/// phi(x'') = Phi(x'(x''), x'') + <g - x', Phi_{x'}>.
ScalarField restrict_function(const ScalarField& Phi, const GraphPresentation& gp);

struct EquivalenceBounds {
    double lower;  // c with  c * D2 <= D1
    double upper;  // C with  D1 <= C * D2
};

/// Two-sided ratio bounds between dissipations on samples with D2 >= floor.
EquivalenceBounds equivalence_bounds(const std::function<double(const Vec&)>& D1,
                                     const std::function<double(const Vec&)>& D2,
                                     const std::vector<Vec>& samples,
                                     double floor_value = 1e-10);

}  // namespace germcanop
