// futvol: command-line front end.
//
//   futvol price      first-order price breakdown for one option
//   futvol surface    approximate smiles on a maturity x LMMR grid
//   futvol synth      synthetic quote panel from group parameters
//   futvol calibrate  three-stage fit of a quote panel
//   futvol validate   Monte-Carlo accuracy ladder of the expansion
//
// Exit codes: 0 success, 1 input or domain error, 2 usage error, 3 diagnostic failure.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "futvol/black76.hpp"
#include "futvol/calibration.hpp"
#include "futvol/errors.hpp"
#include "futvol/ivol_expansion.hpp"
#include "futvol/lab_config.hpp"
#include "futvol/marketdata.hpp"
#include "futvol/pricing.hpp"
#include "futvol/sim_lab.hpp"
#include "futvol/svg.hpp"
#include "futvol/version.hpp"

namespace fs = std::filesystem;
using namespace futvol;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDiagnostic = 3;

struct DiagnosticFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(double x) {
    if (!std::isfinite(x)) return "";
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, p);
}

std::vector<double> parse_list(const std::string& s, const char* what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double v = 0.0;
        auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc{} || p != item.data() + item.size() || item.empty()) {
            throw DomainError(std::string(what) + ": cannot parse '" + item + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) throw DomainError(std::string(what) + ": empty list");
    return out;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DomainError("cannot write " + p.string());
    out << content;
}

fs::path prepare_dir(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec || !fs::is_directory(p)) throw DomainError("cannot create output directory " + dir);
    return p;
}

// Records the command, every option that was given (in declaration order),
// and the version. No clocks or host details, so reruns are byte-identical.
std::string manifest(const CLI::App& sub, const std::string& out_dir,
                     const std::vector<std::pair<std::string, std::string>>& extra = {}) {
    std::ostringstream o;
    o << "tool = futvol " << kVersion << '\n';
    o << "command = " << sub.get_name() << '\n';
    o << "output_dir = " << out_dir << '\n';
    for (const CLI::Option* opt : sub.get_options()) {
        if (opt->get_name() == "--help" || opt->count() == 0) continue;
        std::string val;
        for (const auto& r : opt->results()) val += (val.empty() ? "" : ",") + r;
        o << "arg." << opt->get_name().substr(2) << " = " << val << '\n';
    }
    for (const auto& [k, v] : extra) o << k << " = " << v << '\n';
    return o.str();
}

struct GroupFlags {
    double kappa = 0.0;
    double eta_bar = 0.0;
    double v3 = 0.0;
    double v0 = 0.0;

    void add(CLI::App* app) {
        app->add_option("--kappa", kappa, "mean-reversion rate of log-spot")->required();
        app->add_option("--eta-bar", eta_bar, "effective volatility level")->required();
        app->add_option("--v3", v3, "fast-scale group parameter V3^eps")->required();
        app->add_option("--v0", v0, "slow-scale group parameter V0^delta")->required();
    }
    [[nodiscard]] GroupMarketParams get() const {
        GroupMarketParams g{kappa, eta_bar, v3, v0};
        g.validate();
        return g;
    }
};

void warn_credibility(const GroupMarketParams& g) {
    if (auto w = g.credibility_warning()) std::cerr << "warning: " << *w << '\n';
}

// ---------------------------------------------------------------------------

struct PriceArgs {
    double future_price = 0.0, strike = 0.0, t0 = 0.0, t = 0.0, rate = 0.0;
    std::string style = "call";
    GroupFlags g;
};

int run_price(const PriceArgs& a) {
    const GroupMarketParams gmp = a.g.get();
    warn_credibility(gmp);
    VanillaSpec v;
    v.style = a.style == "put" ? OptionStyle::Put : OptionStyle::Call;
    v.strike = a.strike;
    v.T0 = a.t0;
    v.T = a.t;
    v.rate = a.rate;
    v.validate();
    detail::require(a.future_price > 0.0, "price: future price must be > 0");
    const PriceBreakdown b = price_total(a.future_price, v, gmp);
    std::cout << "p0,p10_eps,p01_delta,total\n"
              << fmt(b.p0) << ',' << fmt(b.p10_eps) << ',' << fmt(b.p01_delta) << ','
              << fmt(b.total) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct SurfaceArgs {
    double future_price = 100.0, rate = 0.0;
    std::string t0s = "0.25,0.5,1";
    std::string ts;
    double tau = 30.0 / 365.0;
    double lmmr_min = -0.5, lmmr_max = 0.5;
    int points = 21;
    std::string out;
    GroupFlags g;
};

int run_surface(const SurfaceArgs& a, const CLI::App& sub) {
    const GroupMarketParams gmp = a.g.get();
    warn_credibility(gmp);
    const auto t0s = parse_list(a.t0s, "--t0");
    std::vector<double> ts;
    if (a.ts.empty()) {
        for (double t0 : t0s) ts.push_back(t0 + a.tau);
    } else {
        ts = parse_list(a.ts, "--t");
        detail::require(ts.size() == t0s.size(), "surface: --t needs one value per --t0");
    }
    detail::require(a.points >= 1, "surface: --points >= 1");
    detail::require(a.future_price > 0.0, "surface: future price must be > 0");
    detail::require(a.lmmr_min <= a.lmmr_max, "surface: require lmmr-min <= lmmr-max");

    std::ostringstream csv;
    csv << "T0,T,K,lmmr,iv_approx,iv_from_price_total\n";
    svg::Chart chart;
    chart.title = "Approximate implied-volatility smiles";
    chart.x_label = "LMMR = log(K/F) / T0";
    chart.y_label = "implied volatility";
    for (std::size_t j = 0; j < t0s.size(); ++j) {
        VanillaSpec v;
        v.T0 = t0s[j];
        v.T = ts[j];
        v.rate = a.rate;
        detail::require(v.T0 > 0.0 && v.T0 <= v.T, "surface: require 0 < t0 <= t");
        svg::Series s;
        s.label = "T0 = " + fmt(v.T0);
        s.color = svg::palette(j);
        for (int i = 0; i < a.points; ++i) {
            const double x = a.points == 1 ? a.lmmr_min
                                           : a.lmmr_min + (a.lmmr_max - a.lmmr_min) * i / (a.points - 1);
            const double K = a.future_price * std::exp(x * v.T0);
            v.strike = K;
            const double iv = iv_approx(x, v.T0, v.T, gmp);
            double iv_price = NAN;
            try {
                const double p = price_total(a.future_price, v, gmp).total;
                iv_price = implied_vol(OptionStyle::Call, p,
                                       BlackInputs{a.future_price, K, 0.0, v.T0, a.rate});
            } catch (const DomainError&) {
            } catch (const NumericError&) {
            }
            csv << fmt(v.T0) << ',' << fmt(v.T) << ',' << fmt(K) << ',' << fmt(x) << ',' << fmt(iv)
                << ',' << fmt(iv_price) << '\n';
            s.x.push_back(x);
            s.y.push_back(iv);
        }
        chart.series.push_back(std::move(s));
    }
    if (a.out.empty()) {
        std::cout << csv.str();
        return kExitOk;
    }
    const fs::path dir = prepare_dir(a.out);
    write_file(dir / "surface.csv", csv.str());
    svg::write(chart, dir / "smiles.svg");
    write_file(dir / "manifest.txt", manifest(sub, a.out));
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    GroupFlags g;
    double noise = 0.0;
    std::uint64_t seed = 0;
    int strikes = 41;
    double width = 0.25;
    std::string out;
};

int run_synth(const SynthArgs& a) {
    const GroupMarketParams gmp = a.g.get();
    SynthGrid grid;
    grid.tenors = default_synth_tenors();
    grid.n_strikes = a.strikes;
    grid.log_moneyness_width = a.width;
    grid.noise_sd = a.noise;
    grid.seed = a.seed;
    const QuotePanel panel = synth_panel(gmp, grid);
    if (a.out.empty() || a.out == "-") {
        save_panel(panel, std::cout);
    } else {
        save_panel(panel, fs::path(a.out));
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
    std::string panel;
    std::optional<double> min_t0_days;
    double init_kappa = 0.5;
    std::optional<double> init_b0;
    double days_per_year = 365.0;
    bool allow_two = false;
    unsigned workers = 0;
    std::string out = "calibration_out";
};

int run_calibrate(const CalibrateArgs& a, const CLI::App& sub) {
    LoadOptions lo;
    lo.days_per_year = a.days_per_year;
    lo.allow_two_strikes = a.allow_two;
    const LoadResult loaded = load_panel(a.panel, lo);
    for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << '\n';

    CalibrationOptions opts;
    if (a.min_t0_days) opts.min_t0 = *a.min_t0_days / a.days_per_year;
    opts.init_kappa = a.init_kappa;
    opts.init_b0 = a.init_b0;
    opts.allow_two_strikes = a.allow_two;
    opts.workers = a.workers;

    const fs::path dir = prepare_dir(a.out);
    write_file(dir / "manifest.txt", manifest(sub, a.out));

    CalibrationResult r;
    try {
        r = calibrate(loaded.panel, opts);
    } catch (const CollinearityError& e) {
        write_file(dir / "diagnostics.txt", std::string(e.what()) + '\n');
        throw DiagnosticFailure(e.what());
    }

    std::ostringstream res;
    res << "kappa_hat,eta_bar_hat,V3eps_hat,V0delta_hat,a0_hat,a1_hat,b0_hat,stage2_objective,"
           "stage3_objective,converged,smiles_used\n"
        << fmt(r.kappa_hat) << ',' << fmt(r.eta_bar_hat) << ',' << fmt(r.V3eps_hat) << ','
        << fmt(r.V0delta_hat) << ',' << fmt(r.a0_hat) << ',' << fmt(r.a1_hat) << ','
        << fmt(r.b0_hat) << ',' << fmt(r.stage2_objective) << ',' << fmt(r.stage3_objective) << ','
        << (r.converged ? 1 : 0) << ',' << r.stage1.fits.size() << '\n';
    write_file(dir / "calibration.csv", res.str());

    const GroupMarketParams gmp = r.group();
    std::ostringstream sm;
    sm << "smile,option_days,future_days,n_points,a_hat,b_hat,residual_rms,model_slope,model_level\n";
    svg::Chart chart;
    chart.title = "Calibration residuals (market iv - model iv)";
    chart.x_label = "LMMR";
    chart.y_label = "iv residual";
    QuotePanel used = loaded.panel;
    if (opts.min_t0) used = filter_min_t0(loaded.panel, *opts.min_t0).first;
    for (std::size_t k = 0; k < r.stage1.fits.size(); ++k) {
        const SmileFit& f = r.stage1.fits[k];
        AffineSmile model{NAN, NAN};
        if (gmp.kappa > 0.0 && gmp.eta_bar > 0.0) model = affine_smile(f.T0, f.T, gmp);
        sm << f.smile_index << ',' << std::lround(f.T0 * a.days_per_year) << ','
           << std::lround(f.T * a.days_per_year) << ',' << f.n_points << ',' << fmt(f.a_hat) << ','
           << fmt(f.b_hat) << ',' << fmt(f.residual_rms) << ',' << fmt(model.slope) << ','
           << fmt(model.level) << '\n';
        const Smile& s = used.smiles[f.smile_index];
        svg::Series pts;
        pts.line = false;
        pts.color = svg::palette(k);
        pts.label = "T0 = " + std::to_string(std::lround(f.T0 * a.days_per_year)) + "d";
        for (std::size_t l = 0; l < s.strikes.size(); ++l) {
            const double x = lmmr(s.strikes[l], s.F, s.T0);
            pts.x.push_back(x);
            pts.y.push_back(s.ivs[l] - (model.level + model.slope * x));
        }
        chart.series.push_back(std::move(pts));
    }
    write_file(dir / "smiles.csv", sm.str());
    svg::write(chart, dir / "residuals.svg");

    std::ostringstream diag;
    for (const auto& w : loaded.warnings) diag << w << '\n';
    for (const auto& d : r.diagnostics) diag << d << '\n';
    write_file(dir / "diagnostics.txt", diag.str());

    std::cout << res.str();
    if (!r.converged) {
        for (const auto& d : r.diagnostics) std::cerr << "diagnostic: " << d << '\n';
        return kExitDiagnostic;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct ValidateArgs {
    std::string model;
    std::string ladder;
    std::optional<long> paths;
    std::optional<long> inner;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::vector<std::string> sets;
    std::string out = "validate_out";
};

std::string describe_config(const LabConfig& c, const VanillaSpec& v) {
    const ModelSpec& m = c.model;
    std::ostringstream o;
    auto kv = [&](const char* k, const std::string& val) { o << "config." << k << " = " << val << '\n'; };
    kv("kappa", fmt(m.kappa));
    kv("m", fmt(m.m));
    kv("u0", fmt(m.u0));
    kv("season_amp", fmt(c.season_amp));
    kv("season_phase", fmt(c.season_phase));
    kv("rate", fmt(m.rate));
    kv("nu", fmt(m.nu));
    kv("m_y", fmt(m.m_y));
    kv("y0", fmt(m.y0));
    kv("y0_stationary", m.y0_stationary ? "true" : "false");
    kv("kappa_z", fmt(m.kappa_z));
    kv("m_z", fmt(m.m_z));
    kv("nu_z", fmt(m.nu_z));
    kv("z0", fmt(m.z0));
    kv("vol_map", c.vol_map);
    kv("eta_cap", fmt(m.eta_cap_multiple));
    kv("rho1", fmt(m.rho1));
    kv("rho2", fmt(m.rho2));
    kv("rho12", fmt(m.rho12));
    kv("style", v.style == OptionStyle::Call ? "call" : "put");
    kv("t0", fmt(v.T0));
    kv("t", fmt(v.T));
    kv("strike", fmt(v.strike));
    kv("outer_paths", std::to_string(c.budget.outer_paths));
    kv("inner_paths", std::to_string(c.budget.inner_paths));
    kv("steps_per_eps", fmt(c.budget.steps_per_eps));
    kv("seed", std::to_string(c.seed));
    std::string l;
    for (double e : c.ladder) l += (l.empty() ? "" : ",") + fmt(e);
    kv("ladder", l);
    return o.str();
}

int run_validate(const ValidateArgs& a, const CLI::App& sub) {
    LabConfig cfg;
    if (!a.model.empty()) cfg = load_lab_config(a.model);
    for (const auto& s : a.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw DomainError("--set expects key=value, got '" + s + "'");
        apply_config_value(cfg, std::string(detail::cfg_trim(std::string_view(s).substr(0, eq))),
                           detail::cfg_trim(std::string_view(s).substr(eq + 1)));
    }
    if (!a.ladder.empty()) cfg.ladder = parse_list(a.ladder, "--ladder");
    if (a.paths) cfg.budget.outer_paths = *a.paths;
    if (a.inner) cfg.budget.inner_paths = *a.inner;
    if (a.seed) cfg.seed = *a.seed;
    if (a.workers) cfg.budget.workers = *a.workers;
    finalize_config(cfg);
    const VanillaSpec v = cfg.resolved_option();

    const fs::path dir = prepare_dir(a.out);
    const std::string cfg_text = describe_config(cfg, v);
    write_file(dir / "manifest.txt", manifest(sub, a.out) + cfg_text);

    const SweepResult r = accuracy_sweep(cfg.model, v, cfg.rungs(), cfg.budget, cfg.seed);

    std::ostringstream csv;
    csv << "eps,delta,mc_price,mc_se,approx_price,abs_error,future_price,inner_bias,inconclusive\n";
    svg::Series err, se;
    err.label = "|MC - approximation|";
    se.label = "MC standard error";
    se.line = false;
    se.color = svg::palette(1);
    for (const auto& row : r.rows) {
        csv << fmt(row.eps) << ',' << fmt(row.delta) << ',' << fmt(row.mc_price) << ','
            << fmt(row.mc_se) << ',' << fmt(row.approx_price) << ',' << fmt(row.abs_error) << ','
            << fmt(row.future_price) << ',' << fmt(row.inner_bias) << ','
            << (row.inconclusive ? 1 : 0) << '\n';
        err.x.push_back(row.eps + row.delta);
        err.y.push_back(row.abs_error);
        se.x.push_back(row.eps + row.delta);
        se.y.push_back(row.mc_se);
    }
    write_file(dir / "validate.csv", csv.str());
    write_file(dir / "slope.csv", "slope,flag\n" + (r.slope ? fmt(*r.slope) : std::string()) + ',' +
                                      r.slope_flag + '\n');
    svg::Chart chart;
    chart.title = "Expansion error vs eps + delta";
    chart.x_label = "eps + delta";
    chart.y_label = "absolute price error";
    chart.log_x = chart.log_y = true;
    chart.series = {err, se};
    svg::write(chart, dir / "error.svg");

    std::cout << csv.str() << "slope," << (r.slope ? fmt(*r.slope) : std::string()) << ','
              << r.slope_flag << '\n';
    if (r.slope_flag == "single-rung") return kExitOk;
    if (r.slope_flag != "ok") {
        std::cerr << "diagnostic: slope flag " << r.slope_flag << '\n';
        return kExitDiagnostic;
    }
    if (!(*r.slope >= 0.7 && *r.slope <= 1.3)) {
        std::cerr << "diagnostic: slope " << fmt(*r.slope) << " outside [0.7, 1.3]\n";
        return kExitDiagnostic;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"futvol: futures-option volatility expansion toolkit"};
    app.set_version_flag("--version", std::string("futvol ") + kVersion);
    app.require_subcommand(1);

    PriceArgs pa;
    auto* price = app.add_subcommand("price", "first-order price breakdown for one option");
    price->add_option("--future-price", pa.future_price, "future price F")->required();
    price->add_option("--strike", pa.strike, "strike K")->required();
    price->add_option("--t0", pa.t0, "option maturity, years")->required();
    price->add_option("--t", pa.t, "future maturity, years")->required();
    price->add_option("--rate", pa.rate, "discount rate");
    price->add_option("--style", pa.style, "call or put")->check(CLI::IsMember({"call", "put"}));
    pa.g.add(price);

    SurfaceArgs sa;
    auto* surface = app.add_subcommand("surface", "approximate smiles on a grid");
    sa.g.add(surface);
    surface->add_option("--future-price", sa.future_price, "future price F");
    surface->add_option("--rate", sa.rate, "discount rate");
    surface->add_option("--t0", sa.t0s, "option maturities, comma separated (years)");
    surface->add_option("--t", sa.ts, "future maturities, one per --t0 (years)");
    surface->add_option("--tau", sa.tau, "T - T0 when --t is not given (years)");
    surface->add_option("--lmmr-min", sa.lmmr_min, "lowest LMMR");
    surface->add_option("--lmmr-max", sa.lmmr_max, "highest LMMR");
    surface->add_option("--points", sa.points, "LMMR grid points per maturity");
    surface->add_option("--out", sa.out, "output directory (CSV to stdout when omitted)");

    SynthArgs ya;
    auto* synth = app.add_subcommand("synth", "synthetic quote panel (6 maturities)");
    ya.g.add(synth);
    synth->add_option("--noise", ya.noise, "Gaussian iv noise sd");
    synth->add_option("--seed", ya.seed, "noise seed");
    synth->add_option("--strikes", ya.strikes, "strikes per smile");
    synth->add_option("--width", ya.width, "log-moneyness half width per sqrt(year)");
    synth->add_option("--out", ya.out, "output CSV path (stdout when omitted)");

    CalibrateArgs ca;
    auto* cal = app.add_subcommand("calibrate", "three-stage calibration of a quote panel");
    cal->add_option("--panel", ca.panel, "quote panel CSV")->required();
    cal->add_option("--min-t0-days", ca.min_t0_days, "drop smiles with shorter option maturity");
    cal->add_option("--init-kappa", ca.init_kappa, "initial kappa");
    cal->add_option("--init-b0", ca.init_b0, "initial b0");
    cal->add_option("--days-per-year", ca.days_per_year, "day count");
    cal->add_flag("--allow-two-strikes", ca.allow_two, "accept smiles with two strikes");
    cal->add_option("--workers", ca.workers, "threads for stage 1 (0 = all cores)");
    cal->add_option("--out", ca.out, "output directory");

    ValidateArgs va;
    auto* val = app.add_subcommand("validate", "Monte-Carlo accuracy ladder");
    val->add_option("--model", va.model, "lab config file (key = value)");
    val->add_option("--set", va.sets, "config override key=value (repeatable)");
    val->add_option("--ladder", va.ladder, "eps = delta rungs, comma separated, decreasing");
    val->add_option("--paths", va.paths, "outer paths per rung");
    val->add_option("--inner", va.inner, "inner paths per outer path (even)");
    val->add_option("--seed", va.seed, "seed");
    val->add_option("--workers", va.workers, "threads (0 = all cores)");
    val->add_option("--out", va.out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*price) return run_price(pa);
        if (*surface) return run_surface(sa, *surface);
        if (*synth) return run_synth(ya);
        if (*cal) return run_calibrate(ca, *cal);
        if (*val) return run_validate(va, *val);
    } catch (const DiagnosticFailure& e) {
        std::cerr << "diagnostic: " << e.what() << '\n';
        return kExitDiagnostic;
    } catch (const NumericError& e) {
        std::cerr << "diagnostic: " << e.what() << '\n';
        return kExitDiagnostic;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitUsage;
}
