#pragma once

#include <utility>
#include <vector>

#include "germcanop/canop.hpp"
#include "germcanop/fields.hpp"
#include "germcanop/germ.hpp"

namespace germcanop {

/// Hamiltonian symbol H(p, q) on R^{2n} with the operator ordering fixed to
/// "differentiate first, multiply second": the grid operator is
/// sum_beta c_beta(q) (-ih d/dq)^beta for polynomial-in-p symbols, or
/// sum_i f_i(q) g_i(-ih d/dq) for separable ones.  Spectra of the two
/// orderings differ at O(h), so the convention is part of the contract.
struct HamiltonianSymbol {
    ScalarField H;        ///< full symbol on R^{2n}, x = (p, q)
    int growth_order = 2; ///< polynomial growth exponent of the symbol

    /// Monomial-in-p representation: coefficient fields live on R^n_q.
    struct PMonomial {
        std::vector<int> beta;
        ScalarField coeff;
    };
    std::vector<PMonomial> p_polynomial;

    /// Separable representation sum_i f_i(q) g_i(p); applied as a discrete
    /// Fourier multiplier in g_i followed by multiplication by f_i.
    struct SeparableTerm {
        ScalarField f_q;
        ScalarField g_p;
    };
    std::vector<SeparableTerm> separable;
};

/// Convenience constructors for common symbols.
HamiltonianSymbol harmonic_hamiltonian(double energy_shift);

/// Apply H with the fixed ordering to a sampled state.  Polynomial-in-p
/// symbols use centered differences of matching order; separable symbols a
/// discrete Fourier multiplier (the state is treated as periodic, so it
/// must have decayed at the grid boundary).  symmetrized selects the
/// (1/2)(c D^beta + D^beta c) variant, which is discretely self-adjoint
/// for real coefficients.
WaveFunction apply_hamiltonian(const HamiltonianSymbol& H,
                               const WaveFunction& psi,
                               bool symmetrized = false,
                               double boundary_tol = 1e-3);

/// Residuals of the commutation identity: returns
/// (|H K phi - K[(i* H) phi]|_0, |H K phi|_0), where i* H is the
/// restriction of the symbol to the germ (evaluated through the chart
/// feet, which is what restricting per chart computes on the curve).
std::pair<double, double> commutation_residual(
    const HamiltonianSymbol& H, const Germ& germ, const VolumeForm& form,
    const ScalarField& phi, double h, const GridSpec& grid,
    double boundary_tol = 1e-2, const CanopOptions& options = {});

/// Divergence of a tangent vector field in a chart's split frame: the
/// chart-coordinate components of X are differentiated along the chart.
/// Tangency of X is verified by applying it to the supplied ideal
/// generators on chart samples; a violation raises InvalidInput.
ScalarField divergence_in_chart(const VectorField& X, const IChart& chart,
                                const std::vector<ScalarField>& generators,
                                double tangency_tol = 1e-6);

/// Density of the Lie derivative of a volume density along X in a chart:
/// X(rho) + rho div_Q X.
ScalarField lie_derivative_volume(const VectorField& X,
                                  const ScalarField& density,
                                  const IChart& chart,
                                  const std::vector<ScalarField>& generators,
                                  double tangency_tol = 1e-6);

/// First-order transport data per chart: the flow components of the
/// Hamiltonian field in chart coordinates and the zeroth-order term
/// -(1/2) tr(d^2 H / dp dq)|_curve + (1/2) L_V(H) mu / mu.
struct TransportCoefficients {
    struct ChartPart {
        VectorField flow;
        ScalarField zeroth;
    };
    std::vector<ChartPart> charts;
};

/// Assemble the transport operator for a symbol vanishing on the germ
/// (checked) whose flow the germ is invariant under (checked through the
/// dissipation).  The measure is the germ's volume form; scaling it by a
/// constant does not change the coefficients.
TransportCoefficients transport_operator(const HamiltonianSymbol& H,
                                         const Germ& germ,
                                         const VolumeForm& form,
                                         double restriction_tol = 1e-8);

/// Solution of P phi = 0 along the germ's parametrized trajectory by the
/// classical 4th-order Runge-Kutta one-step method with step at most
/// h * period / 100.  For closed trajectories the solution must return to
/// its initial value (that periodicity is the quantization condition);
/// otherwise QuantizationError is raised.
struct TransportSolution {
    std::vector<double> times;
    std::vector<cdouble> phi;
    bool periodic = false;
};
TransportSolution solve_transport(const TransportCoefficients& coeffs,
                                  const Germ& germ, cdouble phi0, double h,
                                  double periodicity_tol = 1e-6);

}  // namespace germcanop
