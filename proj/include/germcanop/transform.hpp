#pragma once

#include <functional>
#include <vector>

#include "germcanop/germ.hpp"
#include "germcanop/stationary.hpp"

namespace germcanop {

/// Mixed generating phase of a canonical relation: K(y, u) on R^{2n} where
/// y is an image chart coordinate (position block if target_position, else
/// momentum block) and u a source chart coordinate.  Sign conventions
/// follow the chart phases: dK/dy = p (target position) or -q (target
/// momentum); dK/du = -xi (source position) or x (source momentum).
struct KernelPhase {
    bool target_position = true;
    bool source_position = true;
    ScalarField K;
    /// A pairing whose quadratic phase degenerates into a point
    /// substitution: the source chart coordinate is u = substitution_scale
    /// * y and the image phase is S(u(y)) exactly; K is unused.
    bool substitution = false;
    double substitution_scale = 1.0;
};

/// Positive canonical transformation (xi, x) -> (p, q) presented by its
/// graph maps and the mixed generating phases of the nonsingular pairings.
struct CanonicalTransform {
    int n = 1;
    std::vector<KernelPhase> kernels;
    std::function<Vec(const Vec&)> forward;   // (xi, x) -> (p, q)
    std::function<Vec(const Vec&)> backward;  // (p, q) -> (xi, x)
};

/// Rotation by the harmonic flow through angle theta: z -> e^{i theta} z.
/// theta = 0 is the identity, theta = pi/2 the quarter turn.  All pairings
/// with a nonvanishing denominator are included.
CanonicalTransform harmonic_rotation(double theta);

struct TransformOptions {
    /// Offsets (fractions of the source chart half-width) at which image
    /// charts are attempted; pairings that degenerate at one base point
    /// usually succeed at a shifted one.
    std::vector<double> base_offsets = {0.0, -0.5, 0.5};
    /// Image chart half-width as a fraction of the source half-width.
    double image_halfwidth_factor = 0.45;
};

/// Pushforward of a germ through the transform.  Each source chart is
/// composed with a matching kernel phase by complex stationary reduction
/// over the shared coordinate; the image germ carries the resulting chart
/// atlas, a chart-assembled dissipation, and the mapped cycles and samples.
Germ apply_canonical_transform(const CanonicalTransform& g, const Germ& L,
                               const TransformOptions& options = {});

}  // namespace germcanop
