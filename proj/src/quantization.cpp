#include "germcanop/quantization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "germcanop/errors.hpp"

namespace germcanop {

namespace {

Vec chart_coordinate(const IChart& chart, const Vec& x) {
    int n = chart.I.n;
    Vec y(n);
    for (int j = 0; j < n; ++j) y[j] = chart.I.contains(j) ? x[n + j] : x[j];
    return y;
}

bool chart_covers(const IChart& chart, const Vec& x) {
    Vec y = chart_coordinate(chart, x);
    const Box& box = chart.d.domain_box;
    if (!box.contains(y, 1e-9)) return false;
    double radius = 0.5 * (box.hi - box.lo).minCoeff();
    try {
        return (chart.foot.value(y).real() - x).norm() <= 0.5 * radius + 1e-9;
    } catch (const Error&) {
        return false;
    }
}

struct ChartActions {
    std::vector<ScalarField> W;

    explicit ChartActions(const Germ& germ) {
        for (const IChart& c : germ.atlas) {
            if (c.I.size() == c.I.n)
                W.push_back(c.S);
            else
                W.push_back(chart_from_iphase(c).W);
        }
    }
};

cdouble ln_step(const ScalarField& a, const Vec& x0, const Vec& x1, cdouble a0,
                cdouble a1, int depth) {
    if (std::abs(a1) < 1e-12 || std::abs(a0) < 1e-12)
        throw BranchFailure("var_ln_a: density vanishes along the cycle");
    double darg = std::arg(a1 / a0);
    if (std::abs(darg) < 0.45 * M_PI)
        return cdouble(std::log(std::abs(a1)) - std::log(std::abs(a0)), darg);
    if (depth > 40)
        throw BranchFailure("var_ln_a: argument continuation does not settle");
    Vec xm = 0.5 * (x0 + x1);
    cdouble am = a(xm);
    return ln_step(a, x0, xm, a0, am, depth + 1) +
           ln_step(a, xm, x1, am, a1, depth + 1);
}

double lattice_distance(double value) {
    double k = std::round(value / (2.0 * M_PI));
    return std::abs(value - 2.0 * M_PI * k);
}

}  // namespace

cdouble var_phi(const Germ& germ, const Cycle& cycle) {
    const auto& pts = cycle.polyline;
    if (pts.size() < 2) throw InvalidInput("var_phi: cycle polyline too short");
    if ((pts.front() - pts.back()).norm() > 1e-10)
        throw InvalidInput("var_phi: cycle endpoints do not coincide");
    if (germ.atlas.empty()) throw InvalidInput("var_phi: empty atlas");

    ChartActions actions(germ);
    int current = -1;
    for (size_t k = 0; k < germ.atlas.size(); ++k) {
        if (!chart_covers(germ.atlas[k], pts[0])) continue;
        if (current < 0) current = static_cast<int>(k);
        if (germ.atlas[k].sheet_id == cycle.lift_start_sheet) {
            current = static_cast<int>(k);
            break;
        }
    }
    if (current < 0) throw InvalidInput("var_phi: start point not covered");

    // How far off-center a chart has to operate for this point: the largest
    // normalized coordinate offset.  Charts lose accuracy near their box
    // edges, so each segment is evaluated in the most central covering chart.
    auto off_center = [&](const IChart& chart, const Vec& x) {
        Vec y = chart_coordinate(chart, x);
        const Box& box = chart.d.domain_box;
        double worst = 0.0;
        for (int j = 0; j < y.size(); ++j) {
            double half = 0.5 * (box.hi[j] - box.lo[j]);
            worst = std::max(
                worst, std::abs(y[j] - 0.5 * (box.hi[j] + box.lo[j])) / half);
        }
        return worst;
    };

    cdouble total(0.0, 0.0);
    cdouble last_value =
        actions.W[current](chart_coordinate(germ.atlas[current], pts[0]));
    for (size_t k = 1; k < pts.size(); ++k) {
        int seg = -1;
        double best = std::numeric_limits<double>::infinity();
        for (size_t c = 0; c < germ.atlas.size(); ++c) {
            if (!chart_covers(germ.atlas[c], pts[k - 1]) ||
                !chart_covers(germ.atlas[c], pts[k]))
                continue;
            double score =
                std::max(off_center(germ.atlas[c], pts[k - 1]),
                         off_center(germ.atlas[c], pts[k]));
            if (static_cast<int>(c) == current) score -= 0.05;  // hysteresis
            if (score < best) {
                best = score;
                seg = static_cast<int>(c);
            }
        }
        if (seg < 0) throw InvalidInput("var_phi: cycle segment not covered by atlas");
        const IChart& chart = germ.atlas[seg];
        if (seg != current) {
            last_value = actions.W[seg](chart_coordinate(chart, pts[k - 1]));
            current = seg;
        }
        cdouble next_value = actions.W[seg](chart_coordinate(chart, pts[k]));
        total += next_value - last_value;
        last_value = next_value;
    }
    return total;
}

cdouble ln_continue(const ScalarField& a, const Vec& x0, const Vec& x1) {
    return ln_step(a, x0, x1, a(x0), a(x1), 0);
}

cdouble var_ln_a(const VolumeForm& form, const Germ& germ, const Cycle& cycle) {
    (void)germ;
    const auto& pts = cycle.polyline;
    if (pts.size() < 2) throw InvalidInput("var_ln_a: cycle polyline too short");
    cdouble total(0.0, 0.0);
    cdouble prev = form.a(pts[0]);
    for (size_t k = 1; k < pts.size(); ++k) {
        cdouble next = form.a(pts[k]);
        total += ln_step(form.a, pts[k - 1], pts[k], prev, next, 0);
        prev = next;
    }
    return total;
}

std::vector<CycleResidual> check_quantization(const Germ& germ,
                                              const VolumeForm& form, double h,
                                              double tol) {
    if (!(h > 0.0)) throw InvalidInput("check_quantization: h must be positive");
    (void)tol;
    std::vector<CycleResidual> out;
    for (const Cycle& cycle : germ.cycles) {
        CycleResidual r;
        r.cycle_id = cycle.id;
        r.variation_phi = var_phi(germ, cycle);
        r.variation_ln_a = var_ln_a(form, germ, cycle);
        cdouble v = r.variation_phi / h + 0.5 * kImag * r.variation_ln_a;
        r.residual = lattice_distance(v.real()) + std::abs(v.imag());
        out.push_back(r);
    }
    return out;
}

bool quantization_holds(const std::vector<CycleResidual>& residuals, double tol) {
    for (const auto& r : residuals)
        if (r.residual > tol) return false;
    return true;
}

std::vector<double> admissible_parameters(const GermFamily& family,
                                          ScanVariable which, double fixed,
                                          double lo, double hi, double tol,
                                          int scan_points) {
    std::vector<double> found;
    if (!(lo < hi) || scan_points < 2) return found;

    // For a Planck scan the germ does not change with the parameter.
    std::shared_ptr<Germ> fixed_germ;
    std::shared_ptr<VolumeForm> fixed_form;
    if (which == ScanVariable::Planck) {
        fixed_germ = std::make_shared<Germ>(family.germ_at(fixed));
        fixed_form = std::make_shared<VolumeForm>(family.form_at(fixed));
        if (fixed_germ->cycles.empty()) return found;
    }

    auto unwrapped = [&](double t) {
        if (which == ScanVariable::Planck) {
            const Cycle& cycle = fixed_germ->cycles.front();
            cdouble v = var_phi(*fixed_germ, cycle) / t +
                        0.5 * kImag * var_ln_a(*fixed_form, *fixed_germ, cycle);
            return v.real();
        }
        Germ germ = family.germ_at(t);
        if (germ.cycles.empty()) throw InvalidInput("admissible_parameters: no cycles");
        VolumeForm form = family.form_at(t);
        const Cycle& cycle = germ.cycles.front();
        cdouble v = var_phi(germ, cycle) / fixed +
                    0.5 * kImag * var_ln_a(form, germ, cycle);
        return v.real();
    };
    auto full_residual = [&](double t) {
        double h = which == ScanVariable::Planck ? t : fixed;
        if (which == ScanVariable::Planck)
            return check_quantization(*fixed_germ, *fixed_form, h);
        Germ germ = family.germ_at(t);
        VolumeForm form = family.form_at(t);
        return check_quantization(germ, form, h);
    };

    std::vector<double> ts(scan_points + 1), us(scan_points + 1);
    for (int i = 0; i <= scan_points; ++i) {
        ts[i] = lo + (hi - lo) * i / scan_points;
        us[i] = unwrapped(ts[i]);
    }
    std::vector<double> candidates;
    for (int i = 0; i < scan_points; ++i) {
        double a = us[i], b = us[i + 1];
        int mlo = static_cast<int>(std::ceil(std::min(a, b) / (2.0 * M_PI) - 1e-9));
        int mhi = static_cast<int>(std::floor(std::max(a, b) / (2.0 * M_PI) + 1e-9));
        for (int m = mlo; m <= mhi; ++m) {
            double target = 2.0 * M_PI * m;
            double t0 = ts[i], t1 = ts[i + 1], f0 = a - target, f1 = b - target;
            if (f0 == 0.0) {
                candidates.push_back(t0);
                continue;
            }
            if (f0 * f1 > 0.0) continue;
            for (int it = 0; it < 80 && t1 - t0 > 1e-13 * (1.0 + std::abs(t0)); ++it) {
                double tm = 0.5 * (t0 + t1);
                double fm = unwrapped(tm) - target;
                if (fm == 0.0) {
                    t0 = t1 = tm;
                    break;
                }
                (f0 * fm <= 0.0 ? t1 : t0) = tm;
                (f0 * fm <= 0.0 ? f1 : f0) = fm;
            }
            candidates.push_back(0.5 * (t0 + t1));
        }
    }
    std::sort(candidates.begin(), candidates.end());
    for (double t : candidates) {
        if (!found.empty() && std::abs(t - found.back()) < 1e-9 * (1.0 + std::abs(t)))
            continue;
        if (quantization_holds(full_residual(t), tol)) found.push_back(t);
    }
    return found;
}

}  // namespace germcanop
