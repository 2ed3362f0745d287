#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "germcanop/dissipation.hpp"
#include "germcanop/fields.hpp"

namespace germcanop {

/// Sorted subset I of {0..n-1} selecting which positions keep their q
/// coordinate; the complement keeps p.  Phase-space points are laid out as
/// x = (p_1..p_n, q_1..q_n).
struct IndexSet {
    int n = 0;
    std::vector<int> members;  // sorted, 0-based

    std::vector<int> complement() const;
    int size() const { return static_cast<int>(members.size()); }
    bool contains(int j) const;

    static IndexSet full(int n);
    static IndexSet empty_set(int n);
    bool operator==(const IndexSet& o) const {
        return n == o.n && members == o.members;
    }
};

/// Frame rotation attached to I: pt = (p_I, -q_comp), qt = (q_I, p_comp),
/// kept in the original index slots.  Output layout (pt, qt) in R^{2n}.
Vec rotate_frame(const IndexSet& I, const Vec& x);
Vec unrotate_frame(const IndexSet& I, const Vec& xt);

/// Parametric chart quintuple: domain box U with dissipation d, complex
/// maps P, Q : U -> C^n and action W : U -> C with dW = P dQ + O(d).
struct LagrangianChart {
    Box domain;
    Dissipation d;
    VectorField P;
    VectorField Q;
    ScalarField W;
};

/// Caustic-free chart: phase S on y = (q_I, p_comp)-space with its own
/// dissipation, plus the foot map back into phase space.
struct IChart {
    IndexSet I;
    ScalarField S;       // on R^n in the y variables
    Dissipation d;       // on the same space
    int sheet_id = 0;
    VectorField foot;    // y -> x in R^{2n} (real-valued components)
};

/// Branch of the global phase primitive: dPhi = (1/2i) Zstar dz + O(D),
/// with conj(z) - Zstar = O(D^{1/2}).
struct ZSheet {
    int id = 0;
    ScalarField phi;     // on R^{2n}
    VectorField zstar;   // R^{2n} -> C^n
};

struct ZAction {
    std::vector<ZSheet> sheets;
    std::vector<std::pair<int, cdouble>> monodromy;  // (cycle_id, delta Phi)

    const ZSheet& sheet(int id) const;
};

/// Closed polyline on the zero locus with the sheet its lift starts on.
struct Cycle {
    int id = 0;
    std::vector<Vec> polyline;   // first point repeated at the end
    int lift_start_sheet = 0;
};

/// Density of a volume form evaluated on phase space; the logarithm branch
/// is continued along paths by the quantization routines.
struct VolumeForm {
    ScalarField a;  // on R^{2n}, nonvanishing near the zero locus

    /// Chosen value of ln a at one zero-locus point of a sheet; fixes the
    /// branch used by chart densities on that sheet.  Sheets without a
    /// base fall back to the principal logarithm at the evaluation point.
    struct LnBranchBase {
        int sheet_id = 0;
        Vec point;
        cdouble value{0.0, 0.0};
    };
    std::vector<LnBranchBase> ln_branch_base;
};

/// Optional one-dimensional parametrization of the zero locus, used by the
/// curve-based fixtures (transport, partitions of unity).
struct CurveParametrization {
    bool periodic = false;
    double t0 = 0.0;
    double t1 = 0.0;
    std::function<Vec(double)> point;  // t -> (p, q)
};

struct Germ {
    int n = 0;
    Dissipation D;                 // on R^{2n}
    std::vector<Vec> gamma_samples;
    std::vector<IChart> atlas;
    ZAction zaction;
    std::vector<Cycle> cycles;
    std::optional<CurveParametrization> curve;
};

/// Exhaustive determinant maximization over the 2^n index subsets: rows of
/// dQ for members, rows of dP for the complement.  Ties go to the earliest
/// subset in member-list order.
IndexSet select_nonsingular_index(const CMat& dP, const CMat& dQ);

/// Holomorphic scalar function of n complex variables; derivatives by
/// central differences along real displacements (direction-independent for
/// holomorphic integrands).
struct HoloField {
    int dim = 0;
    std::function<cdouble(const CVec&)> eval;

    cdouble operator()(const CVec& z) const { return eval(z); }
    CVec gradient(const CVec& z) const;
    CMat hessian(const CVec& z) const;
};

/// Chart construction from the z-action: rotated coordinates
/// Q = (Zstar~ + z~)/2, P = (Zstar~ - z~)/(2i), action
/// W = Phi + <P,Q>/2 - (<P,P> + <Q,Q>)/(4i), the chart matrix E from
/// dP = E dQ (completed by the fiber coordinates), and
///     S_I(y) = W + <P, y - Q> + <y - Q, E (y - Q)>/2
/// at the fiber-minimizing foot, with d_I(y) the attained minimum of D.
IChart build_chart_from_zaction(const ZAction& za, int sheet_id,
                                const IndexSet& I, const Vec& base,
                                const Dissipation& D);

/// Reconstruction of the z-action from a nonsingular phase: Phi(p,q) =
/// A(kappa(z)) with kappa - i S_q(kappa) = z solved by complex Newton and
/// A(w) = S(w) - <w, S_q>/2 + <w,w>/(4i) + <S_q,S_q>/(4i); then
/// Zstar = kappa + i S_q(kappa) and dPhi = (1/2i) Zstar dz exactly.
ZAction zaction_from_phase(const HoloField& S, int sheet_id);

/// Transition from a full q-chart phase S to the I-chart phase by complex
/// stationary reduction of S(q) - <p_comp, q_comp> over the q_comp block.
/// `base` is a phase-space point (p, q) on the zero locus.
ScalarField transition_phase(const ScalarField& S, const IndexSet& I,
                             const Vec& base);

/// Fitted constants 0 < c <= C with c d_I <= Im S_I <= C d_I over samples;
/// violation carries the witness point in the message.
std::pair<double, double> positivity_check(const IChart& chart,
                                           const std::vector<Vec>& samples,
                                           double floor_value = 1e-10);

/// Chart quintuple generated by an I-phase: Q_I = y_I,
/// Q_comp = -dS/dp_comp, P_I = dS/dq_I, P_comp = p_comp, and
/// W = S - <p_comp, dS/dp_comp> (so that dW = P dQ identically).
LagrangianChart chart_from_iphase(const IChart& chart);

struct ConsistencyReport {
    EquivalenceBounds dissipation_bounds;  // d vs d~ on matched points
    double pq_half_order_constant = 0.0;   // |P-P~| + |Q-Q~| <= c d^{1/2}
    cdouble action_constant{0.0, 0.0};     // fitted additive constant
    double worst_action_residual = 0.0;    // after constant + pairing term
    bool consistent = false;
};

/// Def-3.2 style comparison of two chart quintuples on matched parameter
/// pairs (alpha in r, alpha~ in r~ describing the same locus point).
ConsistencyReport consistency_check(
    const LagrangianChart& r, const LagrangianChart& rt,
    const std::vector<std::pair<Vec, Vec>>& matched,
    double residual_cap = 25.0);

}  // namespace germcanop
