#include "germcanop/canop.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "germcanop/errors.hpp"
#include "germcanop/quantization.hpp"

namespace germcanop {

namespace {

constexpr double kPi = 3.14159265358979323846;

// C^infty profile equal to 1 at s = 0 and 0 for s >= 1, built from the
// standard exp(-1/t) mollifier; argument s is a squared ratio, so
// compositions with distances stay smooth.
double bump_profile(double s, double sharpness) {
    if (s <= 0.0) return 1.0;
    if (s >= 1.0) return 0.0;
    return std::exp(sharpness - sharpness / (1.0 - s));
}

// Smooth cutoff on [lo, hi]: 1 on the central `core` fraction, 0 at the
// endpoints.
double interval_cutoff(double p, double lo, double hi, double core) {
    const double c = 0.5 * (lo + hi);
    const double w = 0.5 * (hi - lo);
    const double s = std::abs(p - c) / w;
    if (s <= core) return 1.0;
    if (s >= 1.0) return 0.0;
    const double t = (s - core) / (1.0 - core);
    return bump_profile(t * t, 1.0);
}

// ln det(I - i tau Sh) continued from 0 at tau = 0 to tau = 1, with
// adaptive halving so each argument step stays below pi/2.
cdouble ln_det_homotopy(const CMat& Sh) {
    const int n = static_cast<int>(Sh.rows());
    auto det_at = [&](double tau) {
        CMat m = CMat::Identity(n, n) - cdouble(0.0, tau) * Sh;
        return m.determinant();
    };
    std::function<cdouble(double, double, cdouble, cdouble, int)> walk =
        [&](double t0, double t1, cdouble b0, cdouble b1, int depth) -> cdouble {
        if (std::abs(b0) < 1e-12 || std::abs(b1) < 1e-12)
            throw PositivityViolation(
                "chart_density: determinant vanishes on the homotopy path");
        const double darg = std::arg(b1 / b0);
        if (std::abs(darg) < 0.45 * kPi)
            return cdouble(std::log(std::abs(b1)) - std::log(std::abs(b0)),
                           darg);
        if (depth > 40)
            throw BranchFailure(
                "chart_density: homotopy argument does not settle");
        const double tm = 0.5 * (t0 + t1);
        const cdouble bm = det_at(tm);
        return walk(t0, tm, b0, bm, depth + 1) +
               walk(tm, t1, bm, b1, depth + 1);
    };
    return walk(0.0, 1.0, cdouble(1.0, 0.0), det_at(1.0), 0);
}

cdouble ln_a_on_sheet(const VolumeForm& form, int sheet_id, const Vec& x) {
    for (const VolumeForm::LnBranchBase& base : form.ln_branch_base)
        if (base.sheet_id == sheet_id)
            return base.value + ln_continue(form.a, base.point, x);
    return std::log(form.a(x));
}

}  // namespace

int GridSpec::total() const {
    int t = 1;
    for (int c : counts) t *= c;
    return t;
}

double GridSpec::spacing(int axis) const {
    return (hi[axis] - lo[axis]) / (counts[axis] - 1);
}

double GridSpec::node1(int i) const {
    if (dim() != 1) throw InvalidInput("GridSpec::node1: grid is not 1-D");
    return lo[0] + i * spacing(0);
}

GridSpec wave_grid(double support_lo, double support_hi, double h, int count) {
    if (!(h > 0.0)) throw InvalidInput("wave_grid: h must be positive");
    if (count < 2) throw InvalidInput("wave_grid: need at least two nodes");
    const double pad = 4.0 * std::sqrt(h);
    GridSpec g;
    g.lo = vec1(support_lo - pad);
    g.hi = vec1(support_hi + pad);
    g.counts = {count};
    return g;
}

ChartDensity chart_density(const VolumeForm& form, const IChart& chart,
                           const Germ& germ) {
    (void)germ;
    const int n = chart.I.n;
    const int nbar = n - chart.I.size();
    const ScalarField S = chart.S;
    const VectorField foot = chart.foot;
    const VolumeForm form_copy = form;
    const int sheet = chart.sheet_id;

    ChartDensity out;
    out.a_I = ScalarField::finite_difference(
        n, [S, foot, form_copy, nbar, n](const Vec& y) {
            const Vec x = foot.value(y).real();
            const CMat Sh = S.hessian(y);
            const CMat m =
                CMat::Identity(n, n) - cdouble(0.0, 1.0) * Sh;
            cdouble v = form_copy.a(x) * m.determinant();
            for (int j = 0; j < nbar; ++j) v *= cdouble(0.0, -1.0);
            return v;
        });
    out.ln_a_I = ScalarField::finite_difference(
        n, [S, foot, form_copy, sheet, nbar](const Vec& y) {
            const Vec x = foot.value(y).real();
            const CMat Sh = S.hessian(y);
            return ln_a_on_sheet(form_copy, sheet, x) + ln_det_homotopy(Sh) -
                   cdouble(0.0, 0.5 * kPi * nbar);
        });
    return out;
}

WaveFunction local_canop(const IChart& chart, const ChartDensity& density,
                         const Amplitude& phi, double h, const GridSpec& grid,
                         const CanopOptions& options) {
    if (!(h > 0.0) || h > 1.0)
        throw InvalidInput("local_canop: h must lie in (0, 1]");
    const int n = chart.I.n;
    if (grid.dim() != n)
        throw InvalidInput("local_canop: grid dimension mismatch");

    WaveFunction out;
    out.grid = grid;
    out.h = h;
    out.samples.assign(grid.total(), cdouble(0.0, 0.0));
    const Box& box = chart.d.domain_box;

    if (chart.I.size() == n) {
        // Position chart: no integral, pointwise assembly.
        if (n != 1)
            throw InvalidInput("local_canop: grids are one-dimensional");
        for (int i = 0; i < grid.counts[0]; ++i) {
            const Vec y = vec1(grid.node1(i));
            if (!box.contains(y)) continue;
            const cdouble amp = phi.phi(y);
            if (amp == cdouble(0.0, 0.0)) continue;
            const cdouble s = chart.S(y);
            out.samples[i] = std::exp(cdouble(0.0, 1.0) * s / h) *
                             std::exp(0.5 * density.ln_a_I(y)) * amp;
        }
        return out;
    }
    if (n != 1 || chart.I.size() != 0)
        throw InvalidInput(
            "local_canop: momentum quadrature implemented for 1-D pure "
            "momentum charts");

    const double plo = box.lo[0], phi_p = box.hi[0];
    const double len = phi_p - plo;
    double max_slope = 0.0;
    for (int k = 0; k <= 32; ++k) {
        const Vec p = vec1(plo + len * k / 32.0);
        try {
            max_slope = std::max(max_slope,
                                 std::abs(chart.S.gradient(p)[0]));
        } catch (const Error&) {
            // Unevaluable sample; the amplitude must vanish there anyway.
        }
    }
    const double qmax =
        std::max(std::abs(grid.lo[0]), std::abs(grid.hi[0]));
    const double freq = (max_slope + qmax) / h;
    const long needed = static_cast<long>(
        std::ceil(len * freq * options.nodes_per_wavelength / (2.0 * kPi))) +
        1;
    const long nodes = std::max<long>(needed, options.min_nodes);
    if (nodes > options.max_nodes)
        throw ResolutionError("local_canop: quadrature requires " +
                              std::to_string(nodes) + " nodes (cap " +
                              std::to_string(options.max_nodes) + ")");
    const long N = nodes;
    const double dp = len / static_cast<double>(N - 1);

    std::vector<double> pj(N);
    std::vector<cdouble> sj(N), wj(N);
    for (long j = 0; j < N; ++j) {
        const double p = plo + j * dp;
        pj[j] = p;
        const Vec pv = vec1(p);
        cdouble amp = phi.phi(pv);
        amp *= interval_cutoff(p, plo, phi_p, options.cutoff_core);
        if (amp == cdouble(0.0, 0.0)) {
            wj[j] = cdouble(0.0, 0.0);
            sj[j] = cdouble(0.0, 0.0);
            continue;
        }
        sj[j] = chart.S(pv);
        wj[j] = amp * std::exp(0.5 * density.ln_a_I(pv));
        if (j == 0 || j == N - 1) wj[j] *= 0.5;  // trapezoid ends
    }

    const cdouble pref =
        std::exp(cdouble(0.0, kPi / 4.0)) / std::sqrt(2.0 * kPi * h);
    for (int i = 0; i < grid.counts[0]; ++i) {
        const double q = grid.node1(i);
        cdouble acc(0.0, 0.0);
        for (long j = 0; j < N; ++j) {
            if (wj[j] == cdouble(0.0, 0.0)) continue;
            acc += std::exp(cdouble(0.0, 1.0) * (sj[j] + pj[j] * q) / h) *
                   wj[j];
        }
        out.samples[i] = pref * dp * acc;
    }
    return out;
}

WaveFunction global_canop(const Germ& germ, const VolumeForm& form,
                          const ScalarField& phi, double h,
                          const GridSpec& grid,
                          const PartitionOptions& partition,
                          double quantization_tol,
                          const CanopOptions& options) {
    const auto residuals = check_quantization(germ, form, h, quantization_tol);
    if (!quantization_holds(residuals, quantization_tol))
        throw QuantizationError(
            "global_canop: quantization condition fails at this h");

    const int n = germ.n;
    const size_t nc = germ.atlas.size();

    // Partition weight of chart k at a phase-space point: a bump in the
    // chart coordinate times a locality bump that kills contributions from
    // other branches projecting to the same coordinate window.
    if (!partition.chart_weights.empty() &&
        partition.chart_weights.size() != nc)
        throw InvalidInput(
            "global_canop: chart_weights size does not match the atlas");

    auto weight = [&](size_t k, const Vec& x) -> double {
        const IChart& c = germ.atlas[k];
        Vec y(n);
        for (int j = 0; j < n; ++j)
            y[j] = c.I.contains(j) ? x[n + j] : x[j];
        const Box& box = c.d.domain_box;
        double w = 1.0;
        for (int j = 0; j < n; ++j) {
            const double half =
                0.5 * (box.hi[j] - box.lo[j]) * partition.support_fraction;
            const double s = (y[j] - 0.5 * (box.hi[j] + box.lo[j])) / half;
            w *= bump_profile(s * s, partition.sharpness);
            if (w == 0.0) return 0.0;
        }
        const double rho = 0.25 * (box.hi - box.lo).minCoeff();
        try {
            const double dist2 = (c.foot.value(y).real() - x).squaredNorm();
            w *= bump_profile(dist2 / (rho * rho), partition.sharpness);
        } catch (const Error&) {
            return 0.0;
        }
        if (!partition.chart_weights.empty()) w *= partition.chart_weights[k];
        return w;
    };

    WaveFunction out;
    out.grid = grid;
    out.h = h;
    out.samples.assign(grid.total(), cdouble(0.0, 0.0));
    for (size_t k = 0; k < nc; ++k) {
        const IChart& chart = germ.atlas[k];
        const VectorField foot = chart.foot;
        const ScalarField phi_copy = phi;
        Amplitude amp;
        amp.chart_id = static_cast<int>(k);
        amp.phi = ScalarField::finite_difference(n, [&, k](const Vec& y) {
            Vec x;
            try {
                x = foot.value(y).real();
            } catch (const Error&) {
                return cdouble(0.0, 0.0);
            }
            const double wk = weight(k, x);
            if (wk == 0.0) return cdouble(0.0, 0.0);
            double total = 0.0;
            for (size_t l = 0; l < nc; ++l) total += weight(l, x);
            return phi_copy(x) * (wk / total);
        });
        const ChartDensity dens = chart_density(form, chart, germ);
        const WaveFunction piece =
            local_canop(chart, dens, amp, h, grid, options);
        for (size_t i = 0; i < out.samples.size(); ++i)
            out.samples[i] += piece.samples[i];
    }
    return out;
}

double hh_norm(const WaveFunction& psi, int k, double boundary_tol) {
    if (k < 0 || k % 2 != 0)
        throw InvalidInput("hh_norm: order must be even and nonnegative");
    if (psi.grid.dim() != 1)
        throw InvalidInput("hh_norm: grids are one-dimensional");
    const int m = psi.grid.counts[0];
    if (m < 3) throw InvalidInput("hh_norm: grid too small");
    double peak = 0.0;
    for (const cdouble& v : psi.samples) peak = std::max(peak, std::abs(v));
    if (peak > 0.0 &&
        std::max(std::abs(psi.samples.front()), std::abs(psi.samples.back())) >
            boundary_tol * peak)
        throw ResolutionError("hh_norm: state has not decayed at the grid "
                              "boundary");
    const double dq = psi.grid.spacing(0);
    std::vector<cdouble> f = psi.samples;
    for (int pass = 0; pass < k / 2; ++pass) {
        std::vector<cdouble> g(m);
        for (int i = 0; i < m; ++i) {
            const cdouble left = i > 0 ? f[i - 1] : cdouble(0.0, 0.0);
            const cdouble right = i < m - 1 ? f[i + 1] : cdouble(0.0, 0.0);
            const cdouble lap = (left - 2.0 * f[i] + right) / (dq * dq);
            const double q = psi.grid.node1(i);
            g[i] = f[i] - psi.h * psi.h * lap + q * q * f[i];
        }
        f = std::move(g);
    }
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
        const double w = (i == 0 || i == m - 1) ? 0.5 : 1.0;
        acc += w * std::norm(f[i]);
    }
    return std::sqrt(acc * dq);
}

WaveFunction wave_add(const WaveFunction& u, const WaveFunction& v,
                      cdouble alpha, cdouble beta) {
    if (u.samples.size() != v.samples.size() ||
        u.grid.counts != v.grid.counts ||
        (u.grid.lo - v.grid.lo).norm() > 1e-12 ||
        (u.grid.hi - v.grid.hi).norm() > 1e-12)
        throw InvalidInput("wave_add: grids differ");
    WaveFunction out = u;
    for (size_t i = 0; i < out.samples.size(); ++i)
        out.samples[i] = alpha * u.samples[i] + beta * v.samples[i];
    return out;
}

void export_wave_csv(const WaveFunction& psi, const std::string& path) {
    if (psi.grid.dim() != 1)
        throw InvalidInput("export_wave_csv: grids are one-dimensional");
    std::ofstream f(path);
    if (!f) throw InvalidInput("export_wave_csv: cannot open " + path);
    f.precision(17);
    f << "h,q,re_psi,im_psi\r\n";
    for (int i = 0; i < psi.grid.counts[0]; ++i)
        f << psi.h << ',' << psi.grid.node1(i) << ','
          << psi.samples[i].real() << ',' << psi.samples[i].imag() << "\r\n";
}

WaveFunction import_wave_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidInput("import_wave_csv: cannot open " + path);
    std::string line;
    if (!std::getline(f, line))
        throw InvalidInput("import_wave_csv: empty file");
    std::vector<double> qs;
    std::vector<cdouble> vals;
    double h = 0.0;
    while (std::getline(f, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
            line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        double cols[4];
        for (int c = 0; c < 4; ++c) {
            if (!std::getline(ss, cell, ','))
                throw InvalidInput("import_wave_csv: malformed row");
            cols[c] = std::stod(cell);
        }
        h = cols[0];
        qs.push_back(cols[1]);
        vals.push_back(cdouble(cols[2], cols[3]));
    }
    if (qs.size() < 2) throw InvalidInput("import_wave_csv: too few rows");
    WaveFunction psi;
    psi.h = h;
    psi.grid.lo = vec1(qs.front());
    psi.grid.hi = vec1(qs.back());
    psi.grid.counts = {static_cast<int>(qs.size())};
    psi.samples = std::move(vals);
    return psi;
}

void export_wave_binary(const WaveFunction& psi, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidInput("export_wave_binary: cannot open " + path);
    const char magic[8] = {'G', 'C', 'W', 'F', '0', '0', '0', '1'};
    f.write(magic, 8);
    const std::int32_t n = psi.grid.dim();
    f.write(reinterpret_cast<const char*>(&n), 4);
    for (int j = 0; j < n; ++j) {
        const std::int32_t c = psi.grid.counts[j];
        f.write(reinterpret_cast<const char*>(&c), 4);
    }
    for (int j = 0; j < n; ++j)
        f.write(reinterpret_cast<const char*>(&psi.grid.lo[j]), 8);
    for (int j = 0; j < n; ++j)
        f.write(reinterpret_cast<const char*>(&psi.grid.hi[j]), 8);
    f.write(reinterpret_cast<const char*>(&psi.h), 8);
    for (const cdouble& v : psi.samples) {
        const double re = v.real(), im = v.imag();
        f.write(reinterpret_cast<const char*>(&re), 8);
        f.write(reinterpret_cast<const char*>(&im), 8);
    }
}

WaveFunction import_wave_binary(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InvalidInput("import_wave_binary: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, "GCWF0001", 8) != 0)
        throw InvalidInput("import_wave_binary: bad magic");
    std::int32_t n = 0;
    f.read(reinterpret_cast<char*>(&n), 4);
    if (!f || n < 1 || n > 3)
        throw InvalidInput("import_wave_binary: bad dimension");
    WaveFunction psi;
    psi.grid.counts.resize(n);
    for (int j = 0; j < n; ++j) {
        std::int32_t c = 0;
        f.read(reinterpret_cast<char*>(&c), 4);
        psi.grid.counts[j] = c;
    }
    psi.grid.lo = Vec(n);
    psi.grid.hi = Vec(n);
    for (int j = 0; j < n; ++j) f.read(reinterpret_cast<char*>(&psi.grid.lo[j]), 8);
    for (int j = 0; j < n; ++j) f.read(reinterpret_cast<char*>(&psi.grid.hi[j]), 8);
    f.read(reinterpret_cast<char*>(&psi.h), 8);
    const int total = psi.grid.total();
    psi.samples.resize(total);
    for (int i = 0; i < total; ++i) {
        double re = 0.0, im = 0.0;
        f.read(reinterpret_cast<char*>(&re), 8);
        f.read(reinterpret_cast<char*>(&im), 8);
        psi.samples[i] = cdouble(re, im);
    }
    if (!f) throw InvalidInput("import_wave_binary: truncated file");
    return psi;
}

}  // namespace germcanop
