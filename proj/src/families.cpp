#include "germcanop/families.hpp"

#include <cmath>
#include <complex>

#include "germcanop/errors.hpp"

namespace germcanop {

namespace {

cdouble complex_z(const Vec& x) { return cdouble(x[1], -x[0]); }

// Argument with the branch cut rotated onto the upper imaginary axis:
// range (-3pi/2, pi/2].
double rotated_arg(cdouble z) {
    double a = std::arg(z);
    return a >= M_PI_2 ? a - 2.0 * M_PI : a;
}

ZSheet circle_sheet(int id, double E, double R, bool rotated_cut) {
    ZSheet s;
    s.id = id;
    s.phi = ScalarField::finite_difference(2, [E, R, rotated_cut](const Vec& x) {
        cdouble z = complex_z(x);
        double a = rotated_cut ? rotated_arg(z) : std::arg(z);
        cdouble log_zR(std::log(std::abs(z) / R), a);
        return -kImag * E * (log_zR + 0.5) + E * M_PI / 2.0;
    });
    std::vector<ScalarField> comps;
    comps.push_back(ScalarField::finite_difference(
        2, [R](const Vec& x) { return R * R / complex_z(x); }));
    s.zstar = VectorField(comps);
    return s;
}

// Shrink a chart's declared domain to a box of the given half-width around
// the base coordinate so that overlap queries stay local.
void clip_domain(IChart& chart, double center, double half_width) {
    chart.d.domain_box = Box{vec1(center - half_width), vec1(center + half_width)};
}

}  // namespace

Germ gaussian_point_germ() {
    Germ g;
    g.n = 1;
    g.D = Dissipation{ScalarField::finite_difference(
                          2, [](const Vec& x) { return cdouble(x.squaredNorm(), 0.0); }),
                      Box::cube(2, -1.5, 1.5)};
    ZSheet s;
    s.id = 0;
    s.phi = ScalarField::constant(2, cdouble(0.0, 0.0));
    std::vector<ScalarField> comps;
    comps.push_back(ScalarField::constant(2, cdouble(0.0, 0.0)));
    s.zstar = VectorField(comps);
    g.zaction.sheets.push_back(s);
    g.gamma_samples.push_back(vec2(0.0, 0.0));
    g.atlas.push_back(build_chart_from_zaction(g.zaction, 0, IndexSet::full(1),
                                               vec2(0.0, 0.0), g.D));
    g.atlas.push_back(build_chart_from_zaction(g.zaction, 0, IndexSet::empty_set(1),
                                               vec2(0.0, 0.0), g.D));
    return g;
}

Germ circle_germ(double energy, int cycle_nodes) {
    if (!(energy > 0.0)) throw InvalidInput("circle_germ: energy must be positive");
    if (cycle_nodes < 8) throw InvalidInput("circle_germ: too few cycle nodes");
    const double E = energy;
    const double R = std::sqrt(2.0 * E);

    Germ g;
    g.n = 1;
    g.D = Dissipation{
        ScalarField::finite_difference(2,
                                       [E](const Vec& x) {
                                           double H = 0.5 * x.squaredNorm();
                                           return cdouble((H - E) * (H - E), 0.0);
                                       }),
        Box::cube(2, -2.0 * R, 2.0 * R)};
    g.zaction.sheets.push_back(circle_sheet(0, E, R, false));
    g.zaction.sheets.push_back(circle_sheet(1, E, R, true));
    g.zaction.monodromy.push_back({0, cdouble(2.0 * M_PI * E, 0.0)});

    // Wide enough that adjacent charts overlap on a ~38 degree arc, so
    // partition-of-unity transitions are spread over the whole overlap, yet
    // clear of the fold points where the chart phase degenerates.
    const double hw = 0.95 * R;
    // Position charts on the right/left arcs (sheet 0), momentum charts on
    // the top arc (sheet 0) and the bottom arc, which needs the rotated cut.
    IChart right = build_chart_from_zaction(g.zaction, 0, IndexSet::full(1),
                                            vec2(R, 0.0), g.D);
    IChart top = build_chart_from_zaction(g.zaction, 0, IndexSet::empty_set(1),
                                          vec2(0.0, R), g.D);
    IChart left = build_chart_from_zaction(g.zaction, 0, IndexSet::full(1),
                                           vec2(-R, 0.0), g.D);
    IChart bottom = build_chart_from_zaction(g.zaction, 1, IndexSet::empty_set(1),
                                             vec2(0.0, -R), g.D);
    clip_domain(right, 0.0, hw);
    clip_domain(top, 0.0, hw);
    clip_domain(left, 0.0, hw);
    clip_domain(bottom, 0.0, hw);
    g.atlas = {right, top, left, bottom};

    Cycle cycle;
    cycle.id = 0;
    cycle.lift_start_sheet = 0;
    for (int k = 0; k <= cycle_nodes; ++k) {
        double t = 2.0 * M_PI * (k % cycle_nodes) / cycle_nodes;
        cycle.polyline.push_back(vec2(R * std::cos(t), R * std::sin(t)));
    }
    g.cycles.push_back(cycle);
    g.gamma_samples.assign(cycle.polyline.begin(), cycle.polyline.end() - 1);

    CurveParametrization curve;
    curve.periodic = true;
    curve.t0 = 0.0;
    curve.t1 = 2.0 * M_PI;
    curve.point = [R](double t) { return vec2(R * std::cos(t), R * std::sin(t)); };
    g.curve = curve;
    return g;
}

VolumeForm circle_invariant_form(double energy) {
    const double R = std::sqrt(2.0 * energy);
    VolumeForm form;
    form.a = ScalarField::finite_difference(
        2, [](const Vec& x) { return 1.0 / (kImag * complex_z(x)); });
    // Along the circle a = e^{-it}/R.  The sheet-0 branch is anchored at
    // the top (t = pi/2); the sheet-1 branch at the bottom continues the
    // sheet-0 values through the right overlap (t = 3pi/2 - 2pi), matching
    // the rotated-cut convention of the bottom z-action sheet.
    form.ln_branch_base.push_back(
        {0, vec2(0.0, R), cdouble(-std::log(R), -M_PI_2)});
    form.ln_branch_base.push_back(
        {1, vec2(0.0, -R), cdouble(-std::log(R), M_PI_2)});
    return form;
}

}  // namespace germcanop
