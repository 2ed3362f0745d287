// Scenario runner: reproducible experiments over the library modules,
// configured by a JSON file, emitting CSV tables and a JSON summary with
// one pass/fail entry per check.  Exit codes: 0 all checks pass, 1 a check
// failed, 2 configuration error, 3 numerical error.
#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "germcanop/canop.hpp"
#include "germcanop/errors.hpp"
#include "germcanop/families.hpp"
#include "germcanop/germ.hpp"
#include "germcanop/pdo.hpp"
#include "germcanop/quantization.hpp"
#include "germcanop/transform.hpp"

using json = nlohmann::json;
using namespace germcanop;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Check {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double tolerance = 0.0;
};

struct Runner {
    json config;
    std::filesystem::path out_dir;
    unsigned long seed = 0;
    int threads = 1;
    bool verbose = false;

    std::vector<Check> checks;
    std::vector<std::string> traceability;
    json tables;  // table name -> emitted file name

    void note(const std::string& msg) const {
        if (verbose) std::fprintf(stderr, "[germcanop] %s\n", msg.c_str());
    }

    void add_check(const std::string& name, double value, double tol,
                   bool pass) {
        checks.push_back({name, pass, value, tol});
        note(name + (pass ? ": pass" : ": FAIL") + " (value " +
             std::to_string(value) + ", tolerance " + std::to_string(tol) +
             ")");
    }
};

void require_keys(const json& obj, const std::vector<std::string>& allowed,
                  const std::string& where) {
    if (!obj.is_object())
        throw ConfigError(where + " must be a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) ==
            allowed.end())
            throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
    }
}

double get_number(const json& obj, const std::string& key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number())
        throw ConfigError("key \"" + key + "\" must be a number");
    return obj[key].get<double>();
}

int get_int(const json& obj, const std::string& key, int fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_integer())
        throw ConfigError("key \"" + key + "\" must be an integer");
    return obj[key].get<int>();
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open output file " + path.string());
    for (size_t j = 0; j < header.size(); ++j)
        f << (j ? "," : "") << header[j];
    f << "\r\n";
    for (const auto& row : rows) {
        for (size_t j = 0; j < row.size(); ++j)
            f << (j ? "," : "") << fmt(row[j]);
        f << "\r\n";
    }
}

GridSpec grid_from_config(const json& g, double default_lo, double default_hi,
                          int default_count) {
    GridSpec spec;
    double lo = default_lo, hi = default_hi;
    int count = default_count;
    if (!g.is_null()) {
        require_keys(g, {"lo", "hi", "count"}, "grid");
        lo = get_number(g, "lo", default_lo);
        hi = get_number(g, "hi", default_hi);
        count = get_int(g, "count", default_count);
    }
    if (!(lo < hi) || count < 2)
        throw ConfigError("grid must satisfy lo < hi and count >= 2");
    spec.lo = vec1(lo);
    spec.hi = vec1(hi);
    spec.counts = {count};
    return spec;
}

GridSpec circle_grid(double E, double h) {
    const double R = std::sqrt(2.0 * E);
    const double span = R + 120.0 * h + 4.0 * std::sqrt(h);
    const int count =
        2 * static_cast<int>(std::ceil(2.0 * span * 3.0 / (kPi * h))) + 1;
    GridSpec g;
    g.lo = vec1(-span);
    g.hi = vec1(span);
    g.counts = {count};
    return g;
}

// --------------------------------------------------------------------------
// quantize: admissible energies of the harmonic-oscillator germ at fixed h.
void run_quantize(Runner& r) {
    require_keys(r.config, {"scenario", "h", "window", "tolerance",
                            "cycle_nodes", "table"},
                 "config");
    const double h = get_number(r.config, "h", 0.01);
    double lo = 0.0, hi = 10.0 * h;
    if (r.config.contains("window")) {
        require_keys(r.config["window"], {"lo", "hi"}, "window");
        lo = get_number(r.config["window"], "lo", lo);
        hi = get_number(r.config["window"], "hi", hi);
    }
    const double tol = get_number(r.config, "tolerance", 1e-8);
    const int nodes = get_int(r.config, "cycle_nodes", 64);
    if (hi <= 0.0) throw ConfigError("window hi must be positive");
    // The germ family needs a strictly positive energy; the lowest
    // admissible level sits at h/2, so clamping keeps the scan complete.
    lo = std::max(lo, 0.1 * h);

    GermFamily family;
    family.germ_at = [nodes](double E) { return circle_germ(E, nodes); };
    family.form_at = [](double E) { return circle_invariant_form(E); };
    r.note("scanning admissible energies in (" + fmt(lo) + ", " + fmt(hi) +
           ") at h = " + fmt(h));
    std::vector<double> found =
        admissible_parameters(family, ScanVariable::Energy, h, lo, hi);

    std::vector<std::vector<double>> rows;
    double worst = 0.0;
    for (double E : found) {
        const double n = std::round(E / h - 0.5);
        const double expected = h * (n + 0.5);
        const double err = std::abs(E - expected);
        worst = std::max(worst, err);
        rows.push_back({n, E, expected, err});
    }
    int lattice_count = 0;
    for (int n = 0; h * (n + 0.5) < hi; ++n)
        if (h * (n + 0.5) > lo) ++lattice_count;

    const std::string table =
        r.config.value("table", std::string("quantize.csv"));
    write_csv(r.out_dir / table, {"n", "energy", "expected", "abs_error"},
              rows);
    r.tables["energies"] = table;

    r.add_check("admissible-energy-lattice-offset", worst, tol, worst <= tol);
    r.add_check("admissible-energy-count",
                static_cast<double>(found.size()),
                static_cast<double>(lattice_count),
                static_cast<int>(found.size()) == lattice_count);
    r.traceability = {"cycle-variance-quantization-condition",
                      "half-integer-harmonic-spectrum"};
}

// --------------------------------------------------------------------------
// gaussian-packet: canonical-operator state of the Gaussian point germ
// against the closed form sqrt(2) exp(-q^2/2h).
void run_gaussian_packet(Runner& r) {
    require_keys(r.config, {"scenario", "h", "grid", "tolerance", "wave"},
                 "config");
    const double h = get_number(r.config, "h", 0.05);
    const double tol = get_number(r.config, "tolerance", 1e-6);
    Germ germ = gaussian_point_germ();
    const IChart* chart = nullptr;
    for (const IChart& c : germ.atlas)
        if (c.I.size() == 1) chart = &c;
    if (!chart) throw NumericalFailure("point germ has no position chart");
    const Box& box = chart->d.domain_box;
    const double span =
        std::min(8.0 * std::sqrt(h), 0.95 * std::min(-box.lo[0], box.hi[0]));
    GridSpec grid =
        grid_from_config(r.config.value("grid", json()), -span, span, 801);

    VolumeForm form;
    form.a = ScalarField::constant(2, cdouble(1.0, 0.0));
    Amplitude amp;
    amp.phi = ScalarField::constant(1, cdouble(1.0, 0.0));
    r.note("evaluating the canonical operator in the position chart");
    WaveFunction psi = local_canop(*chart, chart_density(form, *chart, germ),
                                   amp, h, grid);

    double worst = 0.0;
    const double peak = std::sqrt(2.0);
    for (int i = 0; i < grid.counts[0]; ++i) {
        const double q = grid.node1(i);
        const cdouble oracle =
            std::sqrt(2.0) * std::exp(-q * q / (2.0 * h));
        worst = std::max(worst, std::abs(psi.samples[i] - oracle) / peak);
    }

    if (r.config.contains("wave")) {
        const std::string wave = r.config["wave"].get<std::string>();
        export_wave_csv(psi, (r.out_dir / wave).string());
        r.tables["wave"] = wave;
    }
    r.add_check("gaussian-packet-relative-error", worst, tol, worst <= tol);
    r.traceability = {"chart-glued-oscillatory-integral",
                      "gaussian-coherent-state-closed-form"};
}

// --------------------------------------------------------------------------
// transition-check: position-to-momentum transition of the Gaussian phase.
void run_transition_check(Runner& r) {
    require_keys(r.config, {"scenario", "span", "count", "tolerance", "table"},
                 "config");
    const double span = get_number(r.config, "span", 1.0);
    const int count = get_int(r.config, "count", 201);
    const double tol = get_number(r.config, "tolerance", 1e-10);

    ScalarField S = ScalarField::analytic(
        1, [](const Vec& q) { return cdouble(0.0, 0.5) * q[0] * q[0]; },
        [](const Vec& q) {
            CVec g(1);
            g[0] = cdouble(0.0, 1.0) * q[0];
            return g;
        },
        [](const Vec&) {
            CMat m(1, 1);
            m(0, 0) = cdouble(0.0, 1.0);
            return m;
        });
    ScalarField S0 = transition_phase(S, IndexSet::empty_set(1),
                                      vec2(0.0, 0.0));
    std::vector<std::vector<double>> rows;
    double worst = 0.0;
    for (int i = 0; i < count; ++i) {
        const double p = -span + 2.0 * span * i / (count - 1);
        const cdouble got = S0(vec1(p));
        const cdouble want = cdouble(0.0, 0.5) * p * p;
        const double err = std::abs(got - want);
        worst = std::max(worst, err);
        rows.push_back({p, got.real(), got.imag(), err});
    }
    const std::string table =
        r.config.value("table", std::string("transition.csv"));
    write_csv(r.out_dir / table,
              {"p", "re_phase", "im_phase", "abs_error"}, rows);
    r.tables["transition"] = table;
    r.add_check("gaussian-transition-max-error", worst, tol, worst <= tol);
    r.traceability = {"mixed-chart-stationary-reduction",
                      "gaussian-phase-momentum-dual"};
}

// --------------------------------------------------------------------------
// residual-scan: commutation residual of the circle symbol across h values.
void run_residual_scan(Runner& r) {
    require_keys(r.config, {"scenario", "h_list", "energy_target",
                            "slope_tolerance", "table"},
                 "config");
    if (!r.config.contains("h_list") || !r.config["h_list"].is_array() ||
        r.config["h_list"].size() < 2)
        throw ConfigError("residual-scan requires an h_list with >= 2 values");
    std::vector<double> hs;
    for (const auto& v : r.config["h_list"]) {
        if (!v.is_number()) throw ConfigError("h_list entries must be numbers");
        hs.push_back(v.get<double>());
    }
    const double target = get_number(r.config, "energy_target", 0.47);
    const double slope_tol = get_number(r.config, "slope_tolerance", 1.4);

    ScalarField phi = ScalarField::constant(2, cdouble(1.0, 0.0));
    std::vector<std::vector<double>> rows;
    std::vector<double> lx, ly;
    for (double h : hs) {
        const long n = std::lround(target / h - 0.5);
        const double E = h * (n + 0.5);
        r.note("h = " + fmt(h) + ", quantized energy " + fmt(E));
        Germ germ = circle_germ(E);
        VolumeForm form = circle_invariant_form(E);
        HamiltonianSymbol H = harmonic_hamiltonian(E);
        H.p_polynomial.clear();  // spectral application of p^2/2
        GridSpec grid = circle_grid(E, h);
        auto [gap, raw] =
            commutation_residual(H, germ, form, phi, h, grid);
        WaveFunction base = global_canop(germ, form, phi, h, grid);
        const double ratio = raw / hh_norm(base, 0, 1e-2);
        lx.push_back(std::log2(h));
        ly.push_back(std::log2(ratio));
        double slope = 0.0;
        if (lx.size() >= 2) {
            double mx = 0.0, my = 0.0;
            for (size_t i = 0; i < lx.size(); ++i) {
                mx += lx[i];
                my += ly[i];
            }
            mx /= lx.size();
            my /= ly.size();
            double num = 0.0, den = 0.0;
            for (size_t i = 0; i < lx.size(); ++i) {
                num += (lx[i] - mx) * (ly[i] - my);
                den += (lx[i] - mx) * (lx[i] - mx);
            }
            slope = num / den;
        }
        rows.push_back({h, raw, ratio, slope});
    }
    const std::string table =
        r.config.value("table", std::string("residuals.csv"));
    write_csv(r.out_dir / table,
              {"h", "raw_residual", "relative_residual", "slope_estimate"},
              rows);
    r.tables["residuals"] = table;
    const double slope = rows.back()[3];
    r.add_check("commutation-residual-slope", slope, slope_tol,
                slope >= slope_tol);
    r.traceability = {"hamiltonian-commutation-residual",
                      "planck-sweep-slope-regression"};
}

// --------------------------------------------------------------------------
// transform-check: quarter-turn image of the quantized circle germ keeps
// the cycle residuals on the lattice.
void run_transform_check(Runner& r) {
    require_keys(r.config, {"scenario", "h", "level", "cycle_nodes",
                            "tolerance"},
                 "config");
    const double h = get_number(r.config, "h", 0.1);
    const int level = get_int(r.config, "level", 3);
    const int nodes = get_int(r.config, "cycle_nodes", 48);
    const double tol = get_number(r.config, "tolerance", 1e-6);
    const double E = h * (level + 0.5);

    Germ circle = circle_germ(E, nodes);
    VolumeForm form = circle_invariant_form(E);
    auto source = check_quantization(circle, form, h);
    double src_worst = 0.0;
    for (const auto& c : source) src_worst = std::max(src_worst, c.residual);
    r.add_check("source-cycle-residual", src_worst, 1e-8, src_worst <= 1e-8);

    r.note("applying the quarter-turn transform");
    Germ image =
        apply_canonical_transform(harmonic_rotation(kPi / 2.0), circle);
    auto residuals = check_quantization(image, form, h);
    double worst = 0.0, action_err = 0.0;
    for (const auto& c : residuals) {
        worst = std::max(worst, c.residual);
        action_err = std::max(
            action_err, std::abs(c.variation_phi - cdouble(2.0 * kPi * E, 0.0)));
    }
    r.add_check("image-cycle-residual", worst, tol, worst <= tol);
    r.add_check("image-action-variation-error", action_err, tol,
                action_err <= tol);
    r.traceability = {"quarter-turn-canonical-transform",
                      "cycle-residual-invariance"};
}

int run(Runner& r) {
    if (!r.config.contains("scenario") || !r.config["scenario"].is_string())
        throw ConfigError("config requires a string \"scenario\" key");
    const std::string scenario = r.config["scenario"].get<std::string>();
    if (scenario == "quantize")
        run_quantize(r);
    else if (scenario == "gaussian-packet")
        run_gaussian_packet(r);
    else if (scenario == "transition-check")
        run_transition_check(r);
    else if (scenario == "residual-scan")
        run_residual_scan(r);
    else if (scenario == "transform-check")
        run_transform_check(r);
    else
        throw ConfigError("unknown scenario \"" + scenario + "\"");

    bool all_pass = true;
    json summary;
    summary["scenario"] = scenario;
    summary["config"] = r.config;
    summary["seed"] = r.seed;
    summary["threads"] = r.threads;
    summary["tables"] = r.tables;
    summary["traceability"] = r.traceability;
    summary["checks"] = json::array();
    for (const Check& c : r.checks) {
        summary["checks"].push_back({{"name", c.name},
                                     {"pass", c.pass},
                                     {"value", c.value},
                                     {"tolerance", c.tolerance}});
        all_pass = all_pass && c.pass;
    }
    summary["pass"] = all_pass;
    std::ofstream f(r.out_dir / "summary.json", std::ios::binary);
    f << summary.dump(2) << "\n";
    std::printf("%s: %s\n", scenario.c_str(), all_pass ? "PASS" : "FAIL");
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scenario runner for the complex-germ canonical operator"};
    std::string config_path, out_dir = ".";
    unsigned long seed = 0;
    int threads = 0;
    bool verbose = false;
    app.add_option("--config", config_path, "Path to the JSON scenario config")
        ->required();
    app.add_option("--out", out_dir, "Output directory for artifacts");
    app.add_option("--seed", seed, "Seed for seeded scenarios");
    app.add_option("--threads", threads,
                   "Worker threads (falls back to GERMCANOP_THREADS)");
    app.add_flag("--verbose", verbose, "Progress notes on stderr");
    CLI11_PARSE(app, argc, argv);

    Runner r;
    r.seed = seed;
    r.verbose = verbose;
    if (threads <= 0) {
        const char* env = std::getenv("GERMCANOP_THREADS");
        threads = env ? std::atoi(env) : 1;
        if (threads <= 0) threads = 1;
    }
    r.threads = threads;

    try {
        std::ifstream in(config_path, std::ios::binary);
        if (!in) throw ConfigError("cannot read config file " + config_path);
        r.config = json::parse(in, nullptr, true, false);
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        r.out_dir = out_dir;
        return run(r);
    } catch (const json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    }
}
