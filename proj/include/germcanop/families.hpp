#pragma once

#include "germcanop/germ.hpp"

namespace germcanop {

/// Point germ at the origin carried by the Gaussian phase S = (i/2)q^2:
/// dissipation p^2 + q^2, one sheet with Phi = 0 and Zstar = 0, position
/// and momentum charts, no cycles.
Germ gaussian_point_germ();

/// Level set (p^2 + q^2)/2 = E of the harmonic oscillator, E > 0.  Two
/// logarithm sheets of Phi = -iE(Log(z/R) + 1/2) + E pi/2 with the cut of
/// the second sheet rotated to the upper axis, Zstar = R^2/z, four charts
/// (two position, two momentum), and one cycle with the given number of
/// polyline nodes.
Germ circle_germ(double energy, int cycle_nodes = 64);

/// Density of the flow-invariant measure dt on the circle: a = 1/(iz),
/// winding number -1 around the origin.
VolumeForm circle_invariant_form(double energy);

}  // namespace germcanop
