#pragma once

#include <functional>
#include <vector>

#include "germcanop/germ.hpp"

namespace germcanop {

/// Variation of the action primitive Phi along a closed cycle, accumulated
/// chart by chart through the atlas (the chart action W agrees with Phi up
/// to single-valued terms, so loop increments of W equal Var Phi).  When
/// the zero locus is a submanifold this equals the loop integral of p dq.
cdouble var_phi(const Germ& germ, const Cycle& cycle);

/// Continuous-branch increment of ln a along the cycle; the step is halved
/// until each argument change is below pi/2, so the winding is unambiguous.
cdouble var_ln_a(const VolumeForm& form, const Germ& germ, const Cycle& cycle);

/// Increment of a continuous branch of ln a along the straight segment
/// from x0 to x1 (recursive halving keeps each argument step below pi/2).
cdouble ln_continue(const ScalarField& a, const Vec& x0, const Vec& x1);

struct CycleResidual {
    int cycle_id = 0;
    cdouble variation_phi{0.0, 0.0};
    cdouble variation_ln_a{0.0, 0.0};
    double residual = 0.0;  // distance of Var[(1/h)Phi + (i/2)ln a] to 2 pi Z
};

/// Per-cycle residuals of the Bohr-Sommerfeld condition at Planck
/// parameter h; the condition holds iff every residual is <= tol.
std::vector<CycleResidual> check_quantization(const Germ& germ,
                                              const VolumeForm& form, double h,
                                              double tol = 1e-8);

bool quantization_holds(const std::vector<CycleResidual>& residuals,
                        double tol = 1e-8);

enum class ScanVariable { Energy, Planck };

/// One-parameter family of germs indexed by energy, with its volume form.
struct GermFamily {
    std::function<Germ(double)> germ_at;
    std::function<VolumeForm(double)> form_at;
};

/// All parameter values in [lo, hi] where every cycle residual vanishes to
/// tolerance, located by scanning the unwrapped residual and bisecting each
/// lattice crossing.  For ScanVariable::Energy the fixed value is h; for
/// ScanVariable::Planck it is the energy.
std::vector<double> admissible_parameters(const GermFamily& family,
                                          ScanVariable which, double fixed,
                                          double lo, double hi,
                                          double tol = 1e-9,
                                          int scan_points = 200);

}  // namespace germcanop
