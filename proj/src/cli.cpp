#include "hjm3/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "hjm3/calib.hpp"
#include "hjm3/diagnostics.hpp"
#include "hjm3/sim.hpp"
#include "hjm3/wedge.hpp"

namespace hjm3 {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("'" + path + "': " + e.what());
  }
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

// Relative config paths missing from the working directory are looked up under HJM3_CONFIG_DIR.
std::string resolve_config(const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute() || fs::exists(p)) return p;
  if (const char* dir = std::getenv("HJM3_CONFIG_DIR")) {
    const fs::path q = fs::path(dir) / p;
    if (fs::exists(q)) return q.string();
  }
  return p;
}

std::string relative_to(const std::string& base_file, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base_file).parent_path() / p).string();
}

void require_file(const std::string& p, const char* what) {
  if (!fs::exists(p)) throw ValidationError(std::string(what) + " '" + p + "' does not exist");
}

void ensure_dir(const std::string& d) {
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw ValidationError("cannot create directory '" + d + "'");
}

struct Globals {
  int threads = 1;
  std::string kernel = "auto";
};

std::optional<simd::Isa> kernel_choice(const Globals& g) {
  if (g.kernel == "auto") return std::nullopt;
  try {
    const auto isa = simd::parse_isa(g.kernel);
    if (!simd::isa_available(isa)) throw ValidationError("kernel '" + g.kernel + "' is not available on this CPU");
    return isa;
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

// ---- synth

struct SynthOpts {
  std::string spec, init, out_dir, start = "2021-01-08";
  int weeks = 500;
  std::uint64_t seed = 1;
};

int run_synth(const SynthOpts& o) {
  require_file(o.spec, "spec");
  require_file(o.init, "initial curves");
  const auto spec = load_spec(o.spec);
  const auto init = load_initial_curves(o.init);
  const auto p = generate_synthetic_panel(spec, init, o.weeks, o.seed, parse_date(o.start));
  ensure_dir(o.out_dir);
  write_curve_panel(p.nominal, (fs::path(o.out_dir) / "nominal.csv").string());
  write_curve_panel(p.real, (fs::path(o.out_dir) / "real.csv").string());
  write_curve_panel(p.cdi_spread, (fs::path(o.out_dir) / "cdi.csv").string());
  write_curve_panel(p.ipca_spread, (fs::path(o.out_dir) / "ipca.csv").string());
  return kExitOk;
}

// ---- calibrate

struct CalibOpts {
  std::string config, out_dir = ".";
  std::string nominal, real, cdi, ipca, ipca_index;
};

int run_calibrate(const CalibOpts& o) {
  const std::string cfg_path = resolve_config(o.config);
  require_file(cfg_path, "config");
  const json j = read_json(cfg_path);
  const auto cfg = config_from_json(j);
  auto input = [&](const std::string& flag, const char* key) {
    if (!flag.empty()) return flag;
    if (j.contains("inputs") && j.at("inputs").contains(key))
      return relative_to(cfg_path, j.at("inputs").at(key).get<std::string>());
    return std::string();
  };
  const auto pn = input(o.nominal, "nominal"), pr = input(o.real, "real"), pc = input(o.cdi, "cdi"),
             pi = input(o.ipca, "ipca"), px = input(o.ipca_index, "ipca_index");
  if (pn.empty() || pr.empty()) throw ValidationError("calibrate: nominal and real panels are required");
  for (const auto& p : {pn, pr, pc, pi, px})
    if (!p.empty()) require_file(p, "input");
  CalibrationInputs in;
  in.nominal = load_curve_panel(pn, SeriesKind::NominalFwd);
  in.real = load_curve_panel(pr, SeriesKind::RealFwd);
  if (!pc.empty()) in.cdi = load_curve_panel(pc, SeriesKind::CdiSpread);
  if (!pi.empty()) in.ipca = load_curve_panel(pi, SeriesKind::IpcaSpread);
  if (!px.empty()) in.ipca_index = load_monthly_index(px, cfg.ipca_lag_days);
  const auto res = calibrate(in, cfg);
  ensure_dir(o.out_dir);
  save_spec(res.spec, (fs::path(o.out_dir) / "spec.json").string());
  write_json(res.report, (fs::path(o.out_dir) / "report.json").string());
  write_initial_curves(res.init, (fs::path(o.out_dir) / "init_curves.csv").string());
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
  return kExitOk;
}

// ---- simulate

struct SimOpts {
  std::string spec, init, config, out;
  std::optional<int> paths, record_every;
  std::optional<double> horizon, dt;
  std::optional<std::uint64_t> seed;
  bool antithetic = false;
};

SimConfig sim_config_from_json(const json& j) {
  SimConfig c;
  try {
    c.dt = j.value("dt", c.dt);
    c.horizon = j.value("horizon", c.horizon);
    c.n_paths = j.value("n_paths", c.n_paths);
    c.seed = j.value("seed", c.seed);
    if (j.contains("record_pillars")) c.record_pillars = j.at("record_pillars").get<std::vector<double>>();
    c.record_every = j.value("record_every", c.record_every);
    c.antithetic = j.value("antithetic", c.antithetic);
    c.threads = j.value("threads", c.threads);
    c.grid_tail = j.value("grid_tail", c.grid_tail);
    if (j.contains("kernel") && j.at("kernel").get<std::string>() != "auto")
      c.kernel = simd::parse_isa(j.at("kernel").get<std::string>());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("simulation config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("simulation config: ") + e.what());
  }
  return c;
}

int run_simulate(const SimOpts& o, const Globals& g) {
  require_file(o.spec, "spec");
  require_file(o.init, "initial curves");
  SimConfig cfg;
  if (!o.config.empty()) {
    const auto p = resolve_config(o.config);
    require_file(p, "config");
    cfg = sim_config_from_json(read_json(p));
  }
  if (o.paths) cfg.n_paths = *o.paths;
  if (o.record_every) cfg.record_every = *o.record_every;
  if (o.horizon) cfg.horizon = *o.horizon;
  if (o.dt) cfg.dt = *o.dt;
  if (o.seed) cfg.seed = *o.seed;
  if (o.antithetic) cfg.antithetic = true;
  cfg.threads = g.threads;
  if (auto k = kernel_choice(g)) cfg.kernel = k;
  cfg.validate();
  const auto spec = load_spec(o.spec);
  const auto init = load_initial_curves(o.init);
  auto nodes = init.grid.tenors();
  nodes.insert(nodes.end(), cfg.record_pillars.begin(), cfg.record_pillars.end());
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }),
              nodes.end());
  auto grid = std::make_shared<const std::vector<double>>(build_sim_grid(nodes, cfg.dt, cfg.horizon, cfg.grid_tail));
  const auto out = run_paths(make_initial_state(init, grid), spec, cfg);
  write_sim_csv(out, o.out);
  if (!out.aborted.empty()) std::cerr << "warning: " << out.aborted.size() << " paths aborted\n";
  return kExitOk;
}

// ---- diagnose

struct DiagOpts {
  std::string sim, spec, out, csv;
  std::string oos_nominal, oos_real, oos_cdi;
  std::vector<double> horizons;
  double alpha = 0.05, eps = 1e-10;
  bool gate = false;
};

int run_diagnose(const DiagOpts& o) {
  require_file(o.sim, "simulation file");
  const SimOutput sim = read_sim_csv(o.sim);
  json rep;
  const auto tri = triangle_check(sim, o.eps);
  rep["triangle"] = to_json(tri);
  std::vector<double> horizons = o.horizons;
  if (horizons.empty())
    for (double t : {0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0})
      for (double s : sim.times)
        if (std::abs(s - t) <= 1e-9 * std::max(1.0, t)) horizons.push_back(t);
  const auto mart = martingale_test(sim, horizons, o.alpha);
  rep["martingale"] = to_json(mart);
  std::vector<SmoothnessWindow> windows;
  auto add_window = [&](const char* name, double lo, double hi) {
    int c = 0;
    for (double p : sim.pillars) c += (p >= lo - 1e-12 && p <= hi + 1e-12);
    if (c >= 3) windows.push_back({name, lo, hi});
  };
  add_window("short", 0.0, 2.0);
  add_window("long", 2.0, 1e9);
  if (!windows.empty()) rep["smoothness"] = to_json(smoothness_metric(sim, windows));

  if (!o.spec.empty()) {
    require_file(o.spec, "spec");
    const auto spec = load_spec(o.spec);
    std::vector<std::pair<Block, CurvePanel>> oos;
    std::vector<CoverageInput> cov;
    auto add = [&](const std::string& path, SeriesKind kind, Block block, const char* name) {
      if (path.empty()) return;
      require_file(path, "OOS panel");
      CurvePanel p = to_weekly(load_curve_panel(path, kind));
      std::vector<double> mv;
      for (double t : p.grid.tenors()) mv.push_back(model_vol(spec, block, t));
      cov.push_back({name, p, mv});
      oos.emplace_back(block, std::move(p));
    };
    add(o.oos_nominal, SeriesKind::NominalFwd, Block::N, "dfN");
    add(o.oos_real, SeriesKind::RealFwd, Block::R, "dfR");
    add(o.oos_cdi, SeriesKind::CdiSpread, Block::S, "dsCDI");
    if (!oos.empty()) {
      rep["oos_vol"] = to_json(vol_reproduction(spec, oos));
      rep["coverage"] = to_json(coverage_test(cov));
    }
  }
  const bool gate_fail = !tri.pass() || !mart.pass();
  rep["gate"] = {{"enabled", o.gate}, {"pass", !gate_fail}};
  write_json(rep, o.out);
  if (!o.csv.empty()) {
    std::ofstream c(o.csv);
    if (!c) throw ValidationError("cannot write '" + o.csv + "'");
    c << "t,mean_inflation_ratio,mean_credit_ratio\n";
    std::vector<char> skip(std::size_t(sim.n_paths), 0);
    for (int p : sim.aborted) skip[std::size_t(p)] = 1;
    for (std::size_t r = 0; r < sim.records(); ++r) {
      double a = 0, b = 0;
      int n = 0;
      for (int p = 0; p < sim.n_paths; ++p) {
        if (skip[std::size_t(p)]) continue;
        a += sim.inflation_ratio(p, r) / sim.inflation_ratio(p, 0);
        b += sim.credit_ratio(p, r) / sim.credit_ratio(p, 0);
        ++n;
      }
      c << fmt_double(sim.times[r]) << ',' << fmt_double(a / n) << ',' << fmt_double(b / n) << '\n';
    }
  }
  if (o.gate && gate_fail) {
    std::cerr << "diagnostic gate failed: triangle " << (tri.pass() ? "ok" : "violated") << ", martingale max |z| "
              << mart.max_abs_z() << '\n';
    return kExitGate;
  }
  return kExitOk;
}

// ---- wedge

struct WedgeOpts {
  std::string constituents, breakevens, nominal, issuer_stats, out, series_csv, split;
  std::string scheme = "nearest", mode = "linear";
  double tau_pf = 0.15;
  int min_days = 800;
  bool duration_diff = false;
};

int run_wedge(const WedgeOpts& o) {
  const auto mode = parse_tax_mode(o.mode);
  const auto scheme = parse_scheme(o.scheme);
  if (!(o.tau_pf >= 0 && o.tau_pf < 1)) throw ValidationError("--tau-pf must be in [0, 1)");
  std::vector<IssuerStats> stats;
  std::vector<IssuerSeries> series;
  if (!o.issuer_stats.empty()) {
    require_file(o.issuer_stats, "issuer stats");
    stats = load_issuer_stats(o.issuer_stats);
  } else {
    if (o.constituents.empty() || o.breakevens.empty())
      throw ValidationError("wedge: --constituents and --breakevens (or --issuer-stats) are required");
    require_file(o.constituents, "constituents");
    require_file(o.breakevens, "breakevens");
    const auto panel = load_constituents(o.constituents);
    CurvePanel be = load_curve_panel(o.breakevens, SeriesKind::NominalFwd);
    std::optional<CurvePanel> nom;
    if (!o.nominal.empty()) {
      require_file(o.nominal, "nominal panel");
      nom = load_curve_panel(o.nominal, SeriesKind::NominalFwd);
    }
    series = issuer_panel(panel, o.min_days);
    for (auto& s : series) {
      match_breakeven(s, be, scheme, nom ? &*nom : nullptr);
      stats.push_back(compute_delta(s));
    }
    if (stats.empty()) throw ValidationError("wedge: no issuer has enough joint days");
  }
  json rep;
  rep["scheme"] = to_string(scheme);
  const bool have_tax = std::all_of(stats.begin(), stats.end(), [](const IssuerStats& s) { return std::isfinite(s.f_nom); });
  if (have_tax) {
    const auto w = decompose(stats, mode, o.tau_pf);
    rep["decomposition"] = to_json(w);
    if (int(stats.size()) >= 3) rep["regression_m1"] = to_json(cross_section_regression(w, false));
    if (o.duration_diff && int(stats.size()) >= 4) rep["regression_m2"] = to_json(cross_section_regression(w, true));
  } else {
    const auto d = summarize(stats);
    rep["summary"] = {{"mean_of_means_bp", d.mean_of_means / kBp},
                      {"std_of_means_bp", std::isfinite(d.std_of_means) ? json(d.std_of_means / kBp) : json(nullptr)},
                      {"mean_of_stds_bp", d.mean_of_stds / kBp}};
    json rows = json::array();
    for (const auto& s : stats)
      rows.push_back({{"issuer", s.issuer}, {"mean_bp", s.mean / kBp}, {"median_bp", s.median / kBp},
                      {"std_bp", s.std / kBp}, {"n_obs", s.n}, {"duration", s.duration}});
    rep["issuers"] = rows;
  }
  if (!o.split.empty()) {
    if (series.empty()) throw ValidationError("wedge: --split needs constituent-level data");
    if (!have_tax) throw ValidationError("wedge: --split needs --nominal for the tax benchmark");
    rep["regimes"] = to_json(regime_split(series, parse_date(o.split), mode, o.tau_pf));
  }
  write_json(rep, o.out);
  if (!o.series_csv.empty()) {
    std::ofstream c(o.series_csv);
    if (!c) throw ValidationError("cannot write '" + o.series_csv + "'");
    c << "issuer,date,s_cdi,s_ipca,breakeven,delta\n";
    for (const auto& s : series)
      for (std::size_t k = 0; k < s.size(); ++k)
        c << s.issuer << ',' << format_date(s.dates[k]) << ',' << fmt_double(s.s_cdi[k]) << ','
          << fmt_double(s.s_ipca[k]) << ',' << fmt_double(s.be[k]) << ',' << fmt_double(s.delta[k]) << '\n';
  }
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Three-currency HJM toolkit: synthetic panels, calibration, simulation, diagnostics and the issuer wedge"};
  app.name(args.empty() ? "hjm3" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);
  Globals g;
  app.add_option("--threads", g.threads, "Worker thread cap")->check(CLI::Range(1, 1024));
  app.add_option("--kernel", g.kernel, "Kernel variant: auto, scalar, avx2, neon");

  SynthOpts so;
  auto* synth = app.add_subcommand("synth", "Generate weekly panels from a spec");
  synth->add_option("--spec", so.spec, "BlockVolSpec JSON")->required();
  synth->add_option("--init", so.init, "Initial curves CSV")->required();
  synth->add_option("--weeks", so.weeks, "Number of weekly observations");
  synth->add_option("--seed", so.seed, "RNG seed");
  synth->add_option("--start", so.start, "First date (YYYY-MM-DD)");
  synth->add_option("--out-dir", so.out_dir, "Output directory")->required();

  CalibOpts co;
  auto* cal = app.add_subcommand("calibrate", "Calibrate a spec from curve histories");
  cal->add_option("--config", co.config, "Calibration config JSON")->required();
  cal->add_option("--out-dir", co.out_dir, "Output directory");
  cal->add_option("--nominal", co.nominal, "Nominal forward panel CSV");
  cal->add_option("--real", co.real, "Real forward panel CSV");
  cal->add_option("--cdi", co.cdi, "CDI spread panel CSV");
  cal->add_option("--ipca", co.ipca, "IPCA spread panel CSV");
  cal->add_option("--ipca-index", co.ipca_index, "Monthly IPCA index CSV");

  SimOpts mo;
  auto* sim = app.add_subcommand("simulate", "Simulate paths from a spec");
  sim->add_option("--spec", mo.spec, "BlockVolSpec JSON")->required();
  sim->add_option("--init", mo.init, "Initial curves CSV")->required();
  sim->add_option("--config", mo.config, "Simulation config JSON");
  sim->add_option("--out", mo.out, "Output CSV")->required();
  sim->add_option("--paths", mo.paths, "Number of paths");
  sim->add_option("--horizon", mo.horizon, "Horizon in years");
  sim->add_option("--dt", mo.dt, "Step in years");
  sim->add_option("--seed", mo.seed, "RNG seed");
  sim->add_option("--record-every", mo.record_every, "Recording stride in steps");
  sim->add_flag("--antithetic", mo.antithetic, "Antithetic pairs");

  DiagOpts dop;
  auto* diag = app.add_subcommand("diagnose", "Diagnostics on a simulation file");
  diag->add_option("--sim", dop.sim, "Simulation CSV")->required();
  diag->add_option("--spec", dop.spec, "BlockVolSpec JSON (for OOS comparisons)");
  diag->add_option("--oos-nominal", dop.oos_nominal, "OOS nominal panel");
  diag->add_option("--oos-real", dop.oos_real, "OOS real panel");
  diag->add_option("--oos-cdi", dop.oos_cdi, "OOS CDI spread panel");
  diag->add_option("--horizons", dop.horizons, "Martingale horizons in years, comma separated")->delimiter(',');
  diag->add_option("--alpha", dop.alpha, "Test level");
  diag->add_option("--eps", dop.eps, "Triangle tolerance");
  diag->add_option("--out", dop.out, "Report JSON")->required();
  diag->add_option("--csv", dop.csv, "Plot-ready CSV of mean deflated ratios");
  diag->add_flag("--gate", dop.gate, "Exit with code 2 when a diagnostic fails");

  WedgeOpts wo;
  auto* wdg = app.add_subcommand("wedge", "Within-issuer triangle residual test");
  wdg->add_option("--constituents", wo.constituents, "Constituent panel CSV");
  wdg->add_option("--breakevens", wo.breakevens, "Breakeven panel CSV");
  wdg->add_option("--nominal", wo.nominal, "Nominal forward panel CSV (tax benchmark)");
  wdg->add_option("--issuer-stats", wo.issuer_stats, "Issuer-level summary CSV instead of constituents");
  wdg->add_option("--scheme", wo.scheme, "nearest, interp_mid or split_side");
  wdg->add_option("--mode", wo.mode, "linear or exact");
  wdg->add_option("--tau-pf", wo.tau_pf, "Retail tax rate");
  wdg->add_option("--min-days", wo.min_days, "Minimum joint days per issuer");
  wdg->add_option("--split", wo.split, "Regime break date");
  wdg->add_flag("--duration-diff", wo.duration_diff, "Also fit the regression with the duration differential");
  wdg->add_option("--out", wo.out, "Report JSON")->required();
  wdg->add_option("--series-csv", wo.series_csv, "Per-issuer per-date residual CSV");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("hjm3");
  try {
    app.parse(int(argv.size()), const_cast<char**>(argv.data()));
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }
  try {
    if (*synth) return run_synth(so);
    if (*cal) return run_calibrate(co);
    if (*sim) return run_simulate(mo, g);
    if (*diag) return run_diagnose(dop);
    if (*wdg) return run_wedge(wo);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace hjm3
