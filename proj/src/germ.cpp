#include "germcanop/germ.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "germcanop/errors.hpp"
#include "germcanop/minimize.hpp"
#include "germcanop/stationary.hpp"

namespace germcanop {

std::vector<int> IndexSet::complement() const {
    std::vector<int> out;
    out.reserve(n - size());
    for (int j = 0; j < n; ++j)
        if (!contains(j)) out.push_back(j);
    return out;
}

bool IndexSet::contains(int j) const {
    return std::binary_search(members.begin(), members.end(), j);
}

IndexSet IndexSet::full(int n) {
    IndexSet I;
    I.n = n;
    I.members.resize(n);
    for (int j = 0; j < n; ++j) I.members[j] = j;
    return I;
}

IndexSet IndexSet::empty_set(int n) {
    IndexSet I;
    I.n = n;
    return I;
}

Vec rotate_frame(const IndexSet& I, const Vec& x) {
    const int n = I.n;
    if (x.size() != 2 * n) throw InvalidInput("rotate_frame: dimension mismatch");
    Vec xt(2 * n);
    for (int j = 0; j < n; ++j) {
        if (I.contains(j)) {
            xt[j] = x[j];          // pt_j = p_j
            xt[n + j] = x[n + j];  // qt_j = q_j
        } else {
            xt[j] = -x[n + j];     // pt_j = -q_j
            xt[n + j] = x[j];      // qt_j = p_j
        }
    }
    return xt;
}

Vec unrotate_frame(const IndexSet& I, const Vec& xt) {
    const int n = I.n;
    if (xt.size() != 2 * n) throw InvalidInput("unrotate_frame: dimension mismatch");
    Vec x(2 * n);
    for (int j = 0; j < n; ++j) {
        if (I.contains(j)) {
            x[j] = xt[j];
            x[n + j] = xt[n + j];
        } else {
            x[j] = xt[n + j];
            x[n + j] = -xt[j];
        }
    }
    return x;
}

const ZSheet& ZAction::sheet(int id) const {
    for (const auto& s : sheets)
        if (s.id == id) return s;
    throw InvalidInput("ZAction: unknown sheet id");
}

IndexSet select_nonsingular_index(const CMat& dP, const CMat& dQ) {
    const int n = static_cast<int>(dP.rows());
    if (dQ.rows() != n || dP.cols() != dQ.cols())
        throw InvalidInput("select_nonsingular_index: shape mismatch");
    if (dP.cols() != n)
        throw InvalidInput("select_nonsingular_index: expected square chart data");
    if (n > 12) throw InvalidInput("select_nonsingular_index: n too large");
    double best = -1.0;
    unsigned best_mask = 0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        CMat M(n, n);
        for (int j = 0; j < n; ++j)
            M.row(j) = (mask >> j) & 1u ? dQ.row(j) : dP.row(j);
        double det = std::abs(M.determinant());
        if (det > best * (1.0 + 1e-12)) {
            best = det;
            best_mask = mask;
        }
    }
    if (best < 1e-12)
        throw DegenerateChart("select_nonsingular_index: all minors degenerate");
    IndexSet I;
    I.n = n;
    for (int j = 0; j < n; ++j)
        if ((best_mask >> j) & 1u) I.members.push_back(j);
    return I;
}

CVec HoloField::gradient(const CVec& z) const {
    const double step = ScalarField::default_step();
    CVec g(dim);
    CVec zp = z, zm = z;
    for (int i = 0; i < dim; ++i) {
        double h = step * std::max(1.0, std::abs(z[i]));
        zp[i] = z[i] + h;
        zm[i] = z[i] - h;
        g[i] = (eval(zp) - eval(zm)) / (2.0 * h);
        zp[i] = z[i];
        zm[i] = z[i];
    }
    return g;
}

CMat HoloField::hessian(const CVec& z) const {
    const double step = std::sqrt(ScalarField::default_step()) * 1e-1;
    CMat H(dim, dim);
    CVec y = z;
    for (int i = 0; i < dim; ++i) {
        double hi = step * std::max(1.0, std::abs(z[i]));
        for (int j = i; j < dim; ++j) {
            double hj = step * std::max(1.0, std::abs(z[j]));
            if (i == j) {
                y[i] = z[i] + hi;
                cdouble fp = eval(y);
                y[i] = z[i] - hi;
                cdouble fm = eval(y);
                y[i] = z[i];
                H(i, i) = (fp - 2.0 * eval(y) + fm) / (hi * hi);
            } else {
                y[i] = z[i] + hi;
                y[j] = z[j] + hj;
                cdouble fpp = eval(y);
                y[j] = z[j] - hj;
                cdouble fpm = eval(y);
                y[i] = z[i] - hi;
                cdouble fmm = eval(y);
                y[j] = z[j] + hj;
                cdouble fmp = eval(y);
                y[i] = z[i];
                y[j] = z[j];
                H(i, j) = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
                H(j, i) = H(i, j);
            }
        }
    }
    return H;
}

namespace {

// z-coordinates of a phase-space point, with the frame factor i on the
// complement slots.
CVec tilde_z(const IndexSet& I, const Vec& x) {
    const int n = I.n;
    CVec z(n);
    for (int j = 0; j < n; ++j) {
        cdouble zj(x[n + j], -x[j]);
        z[j] = I.contains(j) ? zj : kImag * zj;
    }
    return z;
}

CVec tilde_zstar(const IndexSet& I, const VectorField& zstar, const Vec& x) {
    CVec zs = zstar.value(x);
    for (int j = 0; j < I.n; ++j)
        if (!I.contains(j)) zs[j] *= -kImag;
    return zs;
}

struct RotatedFrameData {
    CVec Q, P;
    cdouble W;
};

RotatedFrameData frame_data(const IndexSet& I, const ZSheet& sheet, const Vec& x) {
    const CVec z = tilde_z(I, x);
    const CVec zs = tilde_zstar(I, sheet.zstar, x);
    RotatedFrameData f;
    f.Q = 0.5 * (zs + z);
    f.P = (zs - z) / (2.0 * kImag);
    const cdouble pq = (f.P.transpose() * f.Q)(0);
    const cdouble pp = (f.P.transpose() * f.P)(0);
    const cdouble qq = (f.Q.transpose() * f.Q)(0);
    f.W = sheet.phi(x) + 0.5 * pq - (pp + qq) / (4.0 * kImag);
    return f;
}

// Chart matrix E from dP = E dQ restricted to the locus, completed by the
// fiber coordinates pt so the linear solve is square.
CMat chart_matrix(const IndexSet& I, const ZSheet& sheet, const Vec& x) {
    const int n = I.n;
    const CMat dZs = sheet.zstar.jacobian(x);  // n x 2n
    CMat dz = CMat::Zero(n, 2 * n);
    for (int j = 0; j < n; ++j) {
        cdouble c = I.contains(j) ? cdouble(1.0, 0.0) : kImag;
        dz(j, j) = -kImag * c;
        dz(j, n + j) = c;
    }
    CMat dZst = dZs;
    for (int j = 0; j < n; ++j)
        if (!I.contains(j)) dZst.row(j) *= -kImag;
    const CMat dQ = 0.5 * (dZst + dz);
    const CMat dP = (dZst - dz) / (2.0 * kImag);
    CMat M(2 * n, 2 * n);
    M.topRows(n) = dQ;
    M.bottomRows(n).setZero();
    for (int j = 0; j < n; ++j) {
        if (I.contains(j))
            M(n + j, j) = 1.0;       // pt_j = p_j
        else
            M(n + j, n + j) = -1.0;  // pt_j = -q_j
    }
    Eigen::FullPivLU<CMat> lu(M);
    if (!lu.isInvertible())
        throw DegenerateChart("build_chart_from_zaction: chart matrix solve singular");
    const CMat full = dP * lu.inverse();
    return full.leftCols(n);
}

// Assembles the phase-space point from fiber coordinates pt and base
// coordinates y = qt.
Vec assemble_xt(const IndexSet& I, const Vec& pt, const Vec& y) {
    Vec xt(2 * I.n);
    xt.head(I.n) = pt;
    xt.tail(I.n) = y;
    return unrotate_frame(I, xt);
}

Vec chart_foot(const IndexSet& I, const Dissipation& D, const Vec& y,
               const Vec& seed) {
    const int n = I.n;
    // Index/sign bookkeeping of the linear map pt -> x at fixed y.
    std::vector<int> slot(n);
    std::vector<double> sign(n);
    for (int j = 0; j < n; ++j) {
        if (I.contains(j)) {
            slot[j] = j;
            sign[j] = 1.0;
        } else {
            slot[j] = n + j;
            sign[j] = -1.0;
        }
    }
    RealObjective obj;
    obj.value = [&](const Vec& pt) { return D(assemble_xt(I, pt, y)); };
    obj.gradient = [&](const Vec& pt) {
        const Vec x = assemble_xt(I, pt, y);
        const CVec g = D.field.gradient(x);
        Vec out(n);
        for (int j = 0; j < n; ++j) out[j] = sign[j] * g[slot[j]].real();
        return out;
    };
    obj.hessian = [&](const Vec& pt) {
        const Vec x = assemble_xt(I, pt, y);
        const CMat H = D.field.hessian(x);
        Mat out(n, n);
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l)
                out(j, l) = sign[j] * sign[l] * H(slot[j], slot[l]).real();
        return out;
    };
    NewtonOptions opts;
    opts.require_positive_definite = false;  // flat fibers allowed off-locus
    return newton_minimize(obj, seed, opts).x;
}

}  // namespace

IChart build_chart_from_zaction(const ZAction& za, int sheet_id,
                                const IndexSet& I, const Vec& base,
                                const Dissipation& D) {
    const int n = I.n;
    if (base.size() != 2 * n)
        throw InvalidInput("build_chart_from_zaction: base dimension mismatch");
    const ZSheet sheet = za.sheet(sheet_id);
    const Vec base_t = rotate_frame(I, base);
    const Vec seed0 = base_t.head(n);

    Dissipation Dc = D;
    IndexSet Ic = I;
    auto foot_pt = [Ic, Dc, seed0](const Vec& y) {
        return chart_foot(Ic, Dc, y, seed0);
    };

    auto phase_at = [Ic, sheet, foot_pt](const Vec& y) {
        const Vec x = assemble_xt(Ic, foot_pt(y), y);
        const RotatedFrameData f = frame_data(Ic, sheet, x);
        const CMat E = chart_matrix(Ic, sheet, x);
        const CVec dy = y.cast<cdouble>() - f.Q;
        return f.W + (f.P.transpose() * dy)(0) +
               0.5 * (dy.transpose() * (E * dy))(0);
    };

    IChart chart;
    chart.I = I;
    chart.sheet_id = sheet_id;
    chart.S = ScalarField::finite_difference(n, phase_at);
    chart.d.field = ScalarField::finite_difference(n, [Ic, Dc, foot_pt](const Vec& y) {
        return cdouble(Dc(assemble_xt(Ic, foot_pt(y), y)), 0.0);
    });
    Box box;
    box.lo = base_t.tail(n).array() - 1.0;
    box.hi = base_t.tail(n).array() + 1.0;
    chart.d.domain_box = box;
    std::vector<ScalarField> comps;
    for (int i = 0; i < 2 * n; ++i) {
        comps.push_back(ScalarField::finite_difference(
            n, [Ic, foot_pt, i](const Vec& y) {
                return cdouble(assemble_xt(Ic, foot_pt(y), y)[i], 0.0);
            }));
    }
    chart.foot = VectorField(comps);
    return chart;
}

ZAction zaction_from_phase(const HoloField& S, int sheet_id) {
    const int n = S.dim;
    auto kappa_of = [S, n](const CVec& z) {
        CVec k = z;
        for (int it = 0; it < 50; ++it) {
            const CVec sq = S.gradient(k);
            const CVec r = k - kImag * sq - z;
            if (r.norm() < 1e-12) return k;
            CMat J = CMat::Identity(n, n) - kImag * S.hessian(k);
            Eigen::FullPivLU<CMat> lu(J);
            if (!lu.isInvertible())
                throw PositivityViolation(
                    "zaction_from_phase: 1 - i S_qq singular (positivity fails)");
            k -= lu.solve(r);
        }
        throw NumericalFailure("zaction_from_phase: Newton stalled");
    };
    auto z_of = [n](const Vec& x) {
        CVec z(n);
        for (int j = 0; j < n; ++j) z[j] = cdouble(x[n + j], -x[j]);
        return z;
    };
    auto action = [S](const CVec& k) {
        const CVec sq = S.gradient(k);
        const cdouble kk = (k.transpose() * k)(0);
        const cdouble ksq = (k.transpose() * sq)(0);
        const cdouble ss = (sq.transpose() * sq)(0);
        return S(k) - 0.5 * ksq + kk / (4.0 * kImag) + ss / (4.0 * kImag);
    };

    ZSheet sheet;
    sheet.id = sheet_id;
    sheet.phi = ScalarField::finite_difference(2 * n, [=](const Vec& x) {
        return action(kappa_of(z_of(x)));
    });
    std::vector<ScalarField> comps;
    for (int j = 0; j < n; ++j) {
        comps.push_back(ScalarField::finite_difference(2 * n, [=](const Vec& x) {
            const CVec k = kappa_of(z_of(x));
            return (k + kImag * S.gradient(k))(j);
        }));
    }
    sheet.zstar = VectorField(comps);
    ZAction za;
    za.sheets.push_back(sheet);
    return za;
}

ScalarField transition_phase(const ScalarField& S, const IndexSet& I,
                             const Vec& base) {
    const int n = I.n;
    if (S.dim() != n) throw InvalidInput("transition_phase: phase dimension mismatch");
    if (base.size() != 2 * n)
        throw InvalidInput("transition_phase: base point dimension mismatch");
    const std::vector<int> comp = I.complement();
    const int m = static_cast<int>(comp.size());
    if (m == 0) return S;

    // Joint variables (y, u): y in slot order (q on members, p on the
    // complement), u the complement q-block.
    auto q_of = [n, comp, m](const Vec& yu) {
        Vec q = yu.head(n);
        for (int t = 0; t < m; ++t) q[comp[t]] = yu[n + t];
        return q;
    };
    ScalarField Sc = S;
    std::vector<int> compc = comp;
    auto value = [Sc, q_of, compc, n, m](const Vec& yu) {
        cdouble v = Sc(q_of(yu));
        for (int t = 0; t < m; ++t) v -= yu[compc[t]] * yu[n + t];
        return v;
    };
    ScalarField G;
    if (S.analytic_derivatives()) {
        // Exact joint derivatives keep the stationary correction at full
        // precision (the finite-difference Hessian alone costs ~1e-9).
        auto grad = [Sc, q_of, compc, n, m](const Vec& yu) {
            const Vec q = q_of(yu);
            const CVec sq = Sc.gradient(q);
            CVec g = CVec::Zero(n + m);
            for (int j = 0; j < n; ++j) g[j] = sq[j];
            for (int t = 0; t < m; ++t) {
                g[compc[t]] = -yu[n + t];                  // slot holds p
                g[n + t] = sq[compc[t]] - yu[compc[t]];    // q-block variable
            }
            return g;
        };
        auto hess = [Sc, q_of, compc, n, m](const Vec& yu) {
            const Vec q = q_of(yu);
            const CMat sqq = Sc.hessian(q);
            CMat H = CMat::Zero(n + m, n + m);
            for (int j = 0; j < n; ++j) {
                if (std::find(compc.begin(), compc.end(), j) != compc.end()) continue;
                for (int k = 0; k < n; ++k) {
                    if (std::find(compc.begin(), compc.end(), k) != compc.end())
                        continue;
                    H(j, k) = sqq(j, k);
                }
                for (int t = 0; t < m; ++t) {
                    H(j, n + t) = sqq(j, compc[t]);
                    H(n + t, j) = sqq(compc[t], j);
                }
            }
            for (int t = 0; t < m; ++t) {
                for (int s = 0; s < m; ++s)
                    H(n + t, n + s) = sqq(compc[t], compc[s]);
                H(compc[t], n + t) -= 1.0;
                H(n + t, compc[t]) -= 1.0;
            }
            return H;
        };
        G = ScalarField::analytic(n + m, value, grad, hess);
    } else {
        G = ScalarField::finite_difference(n + m, value);
    }

    Vec y0(n), u0(m);
    for (int j = 0; j < n; ++j) y0[j] = I.contains(j) ? base[n + j] : base[j];
    for (int t = 0; t < m; ++t) u0[t] = base[n + comp[t]];
    return complex_stationary_value(G, n, y0, u0).reduced_phase;
}

std::pair<double, double> positivity_check(const IChart& chart,
                                           const std::vector<Vec>& samples,
                                           double floor_value) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    int used = 0;
    for (const Vec& y : samples) {
        const double d = chart.d(y);
        const double im = chart.S(y).imag();
        if (im < -1e-10) {
            std::ostringstream os;
            os << "positivity_check: Im S negative at y = [" << y.transpose() << "]";
            throw PositivityViolation(os.str());
        }
        if (d < floor_value) continue;
        const double ratio = im / d;
        if (ratio <= 0.0) {
            std::ostringstream os;
            os << "positivity_check: lower bound fails at y = [" << y.transpose()
               << "] (Im S = " << im << ", d = " << d << ")";
            throw PositivityViolation(os.str());
        }
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
        ++used;
    }
    if (used == 0) throw InsufficientData("positivity_check: no off-locus samples");
    return {lo, hi};
}

LagrangianChart chart_from_iphase(const IChart& chart) {
    const int n = chart.I.n;
    const ScalarField S = chart.S;
    const IndexSet I = chart.I;
    LagrangianChart r;
    r.domain = chart.d.domain_box;
    r.d = chart.d;
    std::vector<ScalarField> qc, pc;
    for (int j = 0; j < n; ++j) {
        if (I.contains(j)) {
            qc.push_back(ScalarField::finite_difference(
                n, [j](const Vec& y) { return cdouble(y[j], 0.0); }));
            pc.push_back(ScalarField::finite_difference(
                n, [S, j](const Vec& y) { return S.gradient(y)[j]; }));
        } else {
            qc.push_back(ScalarField::finite_difference(
                n, [S, j](const Vec& y) { return -S.gradient(y)[j]; }));
            pc.push_back(ScalarField::finite_difference(
                n, [j](const Vec& y) { return cdouble(y[j], 0.0); }));
        }
    }
    r.Q = VectorField(qc);
    r.P = VectorField(pc);
    const std::vector<int> comp = I.complement();
    r.W = ScalarField::finite_difference(n, [S, comp](const Vec& y) {
        cdouble v = S(y);
        const CVec g = S.gradient(y);
        for (int j : comp) v -= y[j] * g[j];
        return v;
    });
    return r;
}

ConsistencyReport consistency_check(
    const LagrangianChart& r, const LagrangianChart& rt,
    const std::vector<std::pair<Vec, Vec>>& matched, double residual_cap) {
    if (matched.empty()) throw InvalidInput("consistency_check: no matched points");
    ConsistencyReport rep;
    double dlo = std::numeric_limits<double>::infinity();
    double dhi = 0.0;
    double cpq = 0.0;
    std::vector<cdouble> resid;
    std::vector<double> dvals;
    double dmin = std::numeric_limits<double>::infinity();
    std::size_t imin = 0;
    for (std::size_t k = 0; k < matched.size(); ++k) {
        const Vec& a = matched[k].first;
        const Vec& at = matched[k].second;
        const double dv = r.d(a);
        const double dtv = rt.d(at);
        if (dv > 1e-10 && dtv > 1e-10) {
            dlo = std::min(dlo, dtv / dv);
            dhi = std::max(dhi, dtv / dv);
        }
        const CVec P = r.P.value(a), Pt = rt.P.value(at);
        const CVec Q = r.Q.value(a), Qt = rt.Q.value(at);
        const double diff = (Pt - P).norm() + (Qt - Q).norm();
        cpq = std::max(cpq, diff / std::sqrt(std::max(dv, 1e-12)));
        const cdouble pairing = 0.5 * ((P + Pt).transpose() * (Qt - Q))(0);
        resid.push_back(rt.W(at) - r.W(a) - pairing);
        dvals.push_back(dv);
        if (dv < dmin) {
            dmin = dv;
            imin = k;
        }
    }
    rep.dissipation_bounds = {std::isfinite(dlo) ? dlo : 1.0, dhi > 0.0 ? dhi : 1.0};
    rep.pq_half_order_constant = cpq;
    rep.action_constant = resid[imin];
    double worst = 0.0;
    for (std::size_t k = 0; k < resid.size(); ++k) {
        const double scale = std::pow(std::max(dvals[k], 1e-12), 1.5);
        worst = std::max(worst,
                         std::abs(resid[k] - rep.action_constant) / (scale + 1e-12));
    }
    rep.worst_action_residual = worst;
    rep.consistent = cpq <= residual_cap && worst <= residual_cap &&
                     rep.dissipation_bounds.upper /
                             std::max(rep.dissipation_bounds.lower, 1e-12) <=
                         residual_cap;
    return rep;
}

}  // namespace germcanop
