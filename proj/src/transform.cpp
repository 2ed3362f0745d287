#include "germcanop/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <Eigen/Dense>

#include "germcanop/errors.hpp"

namespace germcanop {

namespace {

// Quadratic kernel a(|y|^2 + |u|^2)/2 + b <y, u> with analytic derivatives.
ScalarField quadratic_kernel(int n, double a, double b) {
    return ScalarField::analytic(
        2 * n,
        [a, b, n](const Vec& v) {
            Vec y = v.head(n), u = v.tail(n);
            return cdouble(0.5 * a * (y.squaredNorm() + u.squaredNorm()) +
                               b * y.dot(u),
                           0.0);
        },
        [a, b, n](const Vec& v) {
            Vec y = v.head(n), u = v.tail(n);
            CVec g(2 * n);
            g.head(n) = (a * y + b * u).cast<cdouble>();
            g.tail(n) = (a * u + b * y).cast<cdouble>();
            return g;
        },
        [a, b, n](const Vec&) {
            CMat h = CMat::Zero(2 * n, 2 * n);
            h.topLeftCorner(n, n) = a * CMat::Identity(n, n);
            h.bottomRightCorner(n, n) = a * CMat::Identity(n, n);
            h.topRightCorner(n, n) = b * CMat::Identity(n, n);
            h.bottomLeftCorner(n, n) = b * CMat::Identity(n, n);
            return h;
        });
}

Vec image_coordinate(bool target_position, int n, const Vec& x) {
    return target_position ? Vec(x.tail(n)) : Vec(x.head(n));
}

struct ImageChartData {
    std::shared_ptr<std::vector<IChart>> atlas;
};

// Shrinks the chart box along each axis to the window around y0 on which
// the reduced phase actually evaluates; the stationary reduction fails
// past an image caustic, and a chart must not claim such points.
Box clip_to_evaluable(const IChart& chart, const Vec& y0) {
    Box box = chart.d.domain_box;
    const int n = static_cast<int>(y0.size());
    const int samples = 24;
    for (int axis = 0; axis < n; ++axis) {
        const double step = (box.hi[axis] - box.lo[axis]) / samples;
        auto evaluable = [&](double t) {
            Vec y = y0;
            y[axis] = t;
            try {
                (void)chart.S(y);
                return true;
            } catch (const Error&) {
                return false;
            }
        };
        for (double t = y0[axis]; t >= box.lo[axis] - 1e-12; t -= step)
            if (!evaluable(t)) {
                box.lo[axis] = t + step;
                break;
            }
        for (double t = y0[axis]; t <= box.hi[axis] + 1e-12; t += step)
            if (!evaluable(t)) {
                box.hi[axis] = t - step;
                break;
            }
    }
    return box;
}

}  // namespace

CanonicalTransform harmonic_rotation(double theta) {
    CanonicalTransform g;
    g.n = 1;
    const double c = std::cos(theta), s = std::sin(theta);
    const int n = g.n;
    if (std::abs(s) > 1e-8) {
        g.kernels.push_back({true, true, quadratic_kernel(n, c / s, -1.0 / s)});
        g.kernels.push_back({false, false, quadratic_kernel(n, c / s, -1.0 / s)});
    } else {
        // theta near 0 or pi: the same-flavour pairing is the point
        // substitution q -> c q (resp. p -> c p) with phase S(c y).
        const double sc = c > 0.0 ? 1.0 : -1.0;
        g.kernels.push_back({true, true, ScalarField(), true, sc});
        g.kernels.push_back({false, false, ScalarField(), true, sc});
    }
    if (std::abs(c) > 1e-8) {
        g.kernels.push_back({true, false, quadratic_kernel(n, -s / c, 1.0 / c)});
        g.kernels.push_back({false, true, quadratic_kernel(n, -s / c, -1.0 / c)});
    } else {
        // theta near +-pi/2: positions and momenta swap, so a momentum
        // chart relabels into a position chart (and conversely) without
        // any stationary reduction.
        const double sc = s > 0.0 ? 1.0 : -1.0;
        g.kernels.push_back({true, false, ScalarField(), true, sc});
        g.kernels.push_back({false, true, ScalarField(), true, -sc});
    }
    g.forward = [c, s, n](const Vec& src) {
        Vec out(2 * n);
        out.head(n) = c * src.head(n) - s * src.tail(n);  // p = xi cos - x sin
        out.tail(n) = c * src.tail(n) + s * src.head(n);  // q = x cos + xi sin
        return out;
    };
    g.backward = [c, s, n](const Vec& img) {
        Vec out(2 * n);
        out.head(n) = c * img.head(n) + s * img.tail(n);
        out.tail(n) = c * img.tail(n) - s * img.head(n);
        return out;
    };
    return g;
}

Germ apply_canonical_transform(const CanonicalTransform& g, const Germ& L,
                               const TransformOptions& options) {
    const int n = L.n;
    if (g.n != n) throw InvalidInput("apply_canonical_transform: dimension mismatch");

    for (size_t k = 0; k < std::min<size_t>(4, L.gamma_samples.size()); ++k) {
        const Vec& x = L.gamma_samples[k];
        if ((g.backward(g.forward(x)) - x).norm() > 1e-8)
            throw InvalidInput("apply_canonical_transform: graph maps do not invert");
    }

    Germ out;
    out.n = n;
    auto atlas = std::make_shared<std::vector<IChart>>();

    for (const IChart& src : L.atlas) {
        const int isz = src.I.size();
        if (isz != 0 && isz != n)
            throw InvalidInput("apply_canonical_transform: mixed source charts unsupported");
        const bool src_pos = isz == n;
        Vec center = src.d.domain_box.center();
        Vec hw = 0.5 * (src.d.domain_box.hi - src.d.domain_box.lo);

        for (const KernelPhase& kernel : g.kernels) {
            if (!kernel.substitution || kernel.source_position != src_pos)
                continue;
            const double sc = kernel.substitution_scale;
            IChart chart;
            chart.I = kernel.target_position ? IndexSet::full(n)
                                             : IndexSet::empty_set(n);
            ScalarField S_src = src.S;
            chart.S = ScalarField::analytic(
                n,
                [S_src, sc](const Vec& y) { return S_src(Vec(sc * y)); },
                [S_src, sc](const Vec& y) {
                    return CVec(sc * S_src.gradient(Vec(sc * y)));
                },
                [S_src, sc](const Vec& y) {
                    return CMat(sc * sc * S_src.hessian(Vec(sc * y)));
                });
            Dissipation d_src = src.d;
            Box ubox = src.d.domain_box;
            Vec a = sc * ubox.lo, b = sc * ubox.hi;
            chart.d.field = ScalarField::finite_difference(
                n, [d_src, sc](const Vec& y) {
                    return cdouble(d_src(Vec(sc * y)), 0.0);
                });
            chart.d.domain_box = Box{a.cwiseMin(b), a.cwiseMax(b)};
            chart.sheet_id = src.sheet_id;
            VectorField src_foot = src.foot;
            auto fwd = g.forward;
            std::vector<ScalarField> comps;
            for (int j = 0; j < 2 * n; ++j)
                comps.push_back(ScalarField::finite_difference(
                    n, [src_foot, fwd, sc, j](const Vec& y) {
                        Vec x = fwd(src_foot.value(Vec(sc * y)).real());
                        return cdouble(x[j], 0.0);
                    }));
            chart.foot = VectorField(comps);
            atlas->push_back(chart);
        }

        for (double f : options.base_offsets) {
            Vec u0 = center + f * hw;
            bool placed = false;
            for (const KernelPhase& kernel : g.kernels) {
                if (kernel.substitution || kernel.source_position != src_pos ||
                    placed)
                    continue;
                try {
                    Vec x_src = src.foot.value(u0).real();
                    Vec x_img = g.forward(x_src);
                    Vec y0 = image_coordinate(kernel.target_position, n, x_img);

                    ScalarField S_src = src.S;
                    ScalarField K = kernel.K;
                    ScalarField F = ScalarField::finite_difference(
                        2 * n, [K, S_src, n](const Vec& v) {
                            Vec yu(2 * n);
                            yu = v;
                            return K(yu) + S_src(Vec(v.tail(n)));
                        });
                    Vec base(2 * n);
                    base.head(n) = y0;
                    base.tail(n) = u0;
                    if (F.gradient(base).tail(n).norm() > 1e-7) continue;
                    // A numerically tiny stationary Hessian means this
                    // pairing is degenerate at the base (image caustic);
                    // the shifted base attempts handle such charts.
                    CMat Huu = F.hessian(base).bottomRightCorner(n, n);
                    Eigen::JacobiSVD<CMat> svd(Huu);
                    if (svd.singularValues()(n - 1) <
                        1e-3 * std::max(1.0, svd.singularValues()(0)))
                        continue;

                    StationaryOptions sopt;
                    sopt.trust_radius = std::max(0.5, 4.0 * hw.maxCoeff());
                    // Looser than the library default: nested chart fields
                    // carry solver-level noise that a 1e-12 gradient target
                    // cannot get under.
                    sopt.gradient_tol = 1e-9;
                    StationaryResult res = complex_stationary_value(F, n, y0, u0, sopt);

                    IChart chart;
                    chart.I = kernel.target_position ? IndexSet::full(n)
                                                     : IndexSet::empty_set(n);
                    chart.S = res.reduced_phase;
                    chart.d = res.reduced_dissipation;
                    Vec ihw = options.image_halfwidth_factor * hw;
                    chart.d.domain_box = Box{y0 - ihw, y0 + ihw};
                    chart.sheet_id = src.sheet_id;
                    VectorField u_foot = res.foot;
                    VectorField src_foot = src.foot;
                    auto fwd = g.forward;
                    std::vector<ScalarField> comps;
                    for (int j = 0; j < 2 * n; ++j)
                        comps.push_back(ScalarField::finite_difference(
                            n, [u_foot, src_foot, fwd, j](const Vec& y) {
                                Vec u = u_foot.value(y).real();
                                Vec x = fwd(src_foot.value(u).real());
                                return cdouble(x[j], 0.0);
                            }));
                    chart.foot = VectorField(comps);
                    chart.d.domain_box = clip_to_evaluable(chart, y0);
                    atlas->push_back(chart);
                    placed = true;
                } catch (const Error&) {
                    continue;
                }
            }
        }
    }
    if (atlas->empty())
        throw DegenerateChart("apply_canonical_transform: no image chart could be built");
    out.atlas = *atlas;

    Box domain = L.D.domain_box;
    out.D = Dissipation{
        ScalarField::finite_difference(
            2 * n,
            [atlas, n](const Vec& x) {
                double best = std::numeric_limits<double>::infinity();
                double nearest = std::numeric_limits<double>::infinity();
                for (const IChart& chart : *atlas) {
                    Vec y(n);
                    for (int j = 0; j < n; ++j)
                        y[j] = chart.I.contains(j) ? x[n + j] : x[j];
                    Vec lo = chart.d.domain_box.lo, hi = chart.d.domain_box.hi;
                    double outside = 0.0;
                    for (int j = 0; j < n; ++j) {
                        double e = std::max({lo[j] - y[j], y[j] - hi[j], 0.0});
                        outside += e * e;
                    }
                    nearest = std::min(nearest, outside);
                    if (outside > 0.0) continue;
                    try {
                        double val = chart.d(y);
                        Vec on_chart = chart.foot.value(y).real();
                        best = std::min(best, val + (x - on_chart).squaredNorm());
                    } catch (const Error&) {
                        continue;
                    }
                }
                if (std::isfinite(best)) return cdouble(best, 0.0);
                return cdouble(1.0 + nearest, 0.0);
            }),
        domain};

    for (const Vec& x : L.gamma_samples) out.gamma_samples.push_back(g.forward(x));
    for (const Cycle& cycle : L.cycles) {
        Cycle mapped;
        mapped.id = cycle.id;
        mapped.lift_start_sheet = cycle.lift_start_sheet;
        for (const Vec& x : cycle.polyline) mapped.polyline.push_back(g.forward(x));
        out.cycles.push_back(mapped);
    }
    if (L.curve) {
        CurveParametrization curve = *L.curve;
        auto src_point = L.curve->point;
        auto fwd = g.forward;
        curve.point = [src_point, fwd](double t) { return fwd(src_point(t)); };
        out.curve = curve;
    }
    out.zaction.monodromy = L.zaction.monodromy;
    return out;
}

}  // namespace germcanop
