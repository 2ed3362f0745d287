#pragma once

#include <string>
#include <vector>

#include "germcanop/germ.hpp"

namespace germcanop {

/// Uniform grid on a box in R^n.  All quadrature fixtures are
/// one-dimensional; the metadata stays n-dimensional for file round-trips.
struct GridSpec {
    Vec lo;
    Vec hi;
    std::vector<int> counts;  // nodes per axis, >= 2

    int dim() const { return static_cast<int>(counts.size()); }
    int total() const;
    double spacing(int axis) const;
    /// Node of a 1-D grid.
    double node1(int i) const;
};

/// 1-D grid covering [support_lo, support_hi] with `count` nodes after
/// padding by four decay lengths sqrt(h) on each side.
GridSpec wave_grid(double support_lo, double support_hi, double h, int count);

struct WaveFunction {
    GridSpec grid;
    std::vector<cdouble> samples;  // row-major over the grid
    double h = 0.0;
};

/// Amplitude given in the coordinates of one chart, compactly supported
/// inside that chart's domain box.
struct Amplitude {
    int chart_id = 0;
    ScalarField phi;
};

/// Chart representative of the volume density and its tracked logarithm
/// branch; exp(ln_a_I) == a_I by construction.
struct ChartDensity {
    ScalarField a_I;
    ScalarField ln_a_I;
};

/// Density of the volume form in the chart coordinates: the phase-space
/// density at the chart foot times det(I - i S''), with the logarithm
/// branch continued from ln det = 0 along tau in [0,1] and the fixed
/// -i pi/2 phase per momentum direction.
ChartDensity chart_density(const VolumeForm& form, const IChart& chart,
                           const Germ& germ);

struct CanopOptions {
    /// Minimum quadrature node count regardless of the oscillation
    /// estimate.
    int min_nodes = 257;
    /// Nodes per oscillation wavelength, estimated from max|dS/dp|/h.
    int nodes_per_wavelength = 16;
    /// Hard cap on the quadrature size; beyond it a ResolutionError
    /// reports the required count.
    int max_nodes = 1 << 20;
    /// The smooth cutoff equals 1 on this central fraction of the
    /// integration box and falls to 0 at its boundary.
    double cutoff_core = 0.9;
};

/// Local canonical operator on one chart: position charts evaluate
/// e^{iS/h} sqrt(a_I) phi pointwise; momentum directions are integrated
/// with the (i/2 pi h)^{1/2} weight by trapezoid quadrature with a smooth
/// cutoff.  Square roots always go through exp(ln/2) of the tracked
/// branch.
WaveFunction local_canop(const IChart& chart, const ChartDensity& density,
                         const Amplitude& phi, double h, const GridSpec& grid,
                         const CanopOptions& options = {});

struct PartitionOptions {
    /// Scale of the exp(-sharpness/(1-s^2)) bump profile.
    double sharpness = 1.0;
    /// Fraction of each chart box spanned by its bump support.
    double support_fraction = 1.0;
    /// Optional per-chart multipliers applied before normalization; an
    /// order-one reweighting that moves the transition regions without
    /// changing the smoothness class of the partition.
    std::vector<double> chart_weights;
};

/// Global canonical operator: sum of local contributions weighted by a
/// smooth partition of unity subordinate to the atlas.  Requires the
/// quantization condition at this h; phi is given on phase space and
/// restricted to each chart through its foot map.
WaveFunction global_canop(const Germ& germ, const VolumeForm& form,
                          const ScalarField& phi, double h,
                          const GridSpec& grid,
                          const PartitionOptions& partition = {},
                          double quantization_tol = 1e-8,
                          const CanopOptions& options = {});

/// Norm of (1 - h^2 Laplacian + q^2)^{k/2} psi (k even): centered second
/// differences and trapezoid L^2.  The boundary samples must be below
/// boundary_tol relative to the peak; otherwise the grid truncates the
/// state and ResolutionError is raised.  Fields assembled from
/// compactly-supported chart cutoffs carry slowly-decaying O(h^inf)
/// fringes, so callers measuring those pass an explicit looser tolerance.
double hh_norm(const WaveFunction& psi, int k, double boundary_tol = 1e-12);

/// Pointwise linear combination of wavefunctions on identical grids.
WaveFunction wave_add(const WaveFunction& u, const WaveFunction& v,
                      cdouble alpha = 1.0, cdouble beta = 1.0);

/// CSV (RFC 4180: header row, one line per node) and binary columnar
/// export/import of wavefunctions.
void export_wave_csv(const WaveFunction& psi, const std::string& path);
WaveFunction import_wave_csv(const std::string& path);
void export_wave_binary(const WaveFunction& psi, const std::string& path);
WaveFunction import_wave_binary(const std::string& path);

}  // namespace germcanop
