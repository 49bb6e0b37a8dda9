#include <algorithm>
#include <set>

#include "hjm3/calib.hpp"

namespace hjm3 {

using nlohmann::json;

namespace {

std::vector<double> vec_of(const json& j, const char* key, std::vector<double> def) {
  if (!j.contains(key)) return def;
  return j.at(key).get<std::vector<double>>();
}

RetentionRule rule_of(const json& j, RetentionRule def) {
  if (j.contains("count")) def.count = j.at("count").get<int>();
  if (j.contains("conditional_from")) def.conditional_from = j.at("conditional_from").get<int>();
  if (j.contains("min_share")) def.min_share = j.at("min_share").get<double>();
  return def;
}

// Linear between finite points, flat outside; NaN when no finite point exists.
double interp_finite(const std::vector<double>& x, const std::vector<double>& y, double t) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::isfinite(y[i])) {
      xs.push_back(x[i]);
      ys.push_back(y[i]);
    }
  if (xs.empty()) return kNaN;
  if (t <= xs.front()) return ys.front();
  if (t >= xs.back()) return ys.back();
  const auto j = std::size_t(std::upper_bound(xs.begin(), xs.end(), t) - xs.begin());
  const double w = (t - xs[j - 1]) / (xs[j] - xs[j - 1]);
  return ys[j - 1] + w * (ys[j] - ys[j - 1]);
}

// Row at the last date <= t0, with each missing cell filled from the latest earlier observation.
std::vector<double> last_values(const CurvePanel& p, Date t0) {
  std::vector<double> v(p.grid.size(), kNaN);
  for (std::size_t r = 0; r < p.rows() && p.dates[r] <= t0; ++r)
    for (std::size_t i = 0; i < p.grid.size(); ++i) {
      const double x = p.values(Eigen::Index(r), Eigen::Index(i));
      if (std::isfinite(x)) v[i] = x;
    }
  return v;
}

json pca_json(const PcaResult& p, const LoadingFit* fit, double r2) {
  json j;
  j["pillars"] = p.grid.tenors();
  std::vector<double> ev, sh;
  for (Eigen::Index k = 0; k < p.eigenvalues.size(); ++k) {
    ev.push_back(p.eigenvalues[k] / (kBp * kBp));
    sh.push_back(p.shares[k]);
  }
  j["eigenvalues_bp2_per_yr"] = ev;
  j["shares"] = sh;
  j["retained"] = p.retained;
  j["n_obs"] = p.n_obs;
  j["fit_r2"] = r2;
  if (fit) j["converged"] = fit->converged;
  return j;
}

json fx_json(const FxCalibration& f) {
  return {{"total_bp", f.total / kBp},      {"spanned_bp", f.spanned / kBp}, {"idiosyncratic_bp", f.idiosyncratic / kBp},
          {"r2", f.r2},                     {"n_obs", f.n_obs},              {"n_regression", f.n_regression}};
}

json matrix_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    std::vector<double> r(std::size_t(M.cols()));
    for (Eigen::Index k = 0; k < M.cols(); ++k) r[std::size_t(k)] = M(i, k);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

CalibrationConfig config_from_json(const json& j) {
  CalibrationConfig c;
  try {
    if (j.contains("model")) c.model = parse_model(j.at("model").get<std::string>());
    if (j.contains("in_sample")) {
      const auto w = j.at("in_sample").get<std::vector<std::string>>();
      if (w.size() != 2) throw ValidationError("config: in_sample must be [from, to]");
      c.from = parse_date(w[0]);
      c.to = parse_date(w[1]);
      if (*c.to < *c.from) throw ValidationError("config: in_sample window is reversed");
    }
    if (j.contains("anchor_weekday")) c.anchor_weekday = j.at("anchor_weekday").get<int>();
    if (j.contains("pillars")) {
      const auto& p = j.at("pillars");
      c.nominal_pillars = vec_of(p, "nominal", c.nominal_pillars);
      c.real_pillars = vec_of(p, "real", c.real_pillars);
      c.spread_pillars = vec_of(p, "spread", c.spread_pillars);
    }
    if (c.model == ModelKind::B && !(j.contains("pillars") && j.at("pillars").contains("spread")))
      c.spread_pillars = {2, 3, 5};
    if (c.model == ModelKind::B && !j.contains("sigma_J_ref_pillar")) c.sigma_J_ref_pillar = 3.0;
    if (j.contains("retention")) {
      const auto& r = j.at("retention");
      if (r.contains("nominal")) c.nominal_rule = rule_of(r.at("nominal"), c.nominal_rule);
      if (r.contains("real")) c.real_rule = rule_of(r.at("real"), c.real_rule);
      if (r.contains("spread")) c.spread_rule = rule_of(r.at("spread"), c.spread_rule);
    }
    if (j.contains("shape_init")) {
      const auto& s = j.at("shape_init");
      c.shape_init.b2 = s.value("b2", c.shape_init.b2);
      c.shape_init.b3 = s.value("b3", c.shape_init.b3);
      c.shape_init.c2 = s.value("c2", c.shape_init.c2);
    }
    c.c2_cap = j.value("c2_cap", c.c2_cap);
    c.sigma_J_ref_pillar = j.value("sigma_J_ref_pillar", c.sigma_J_ref_pillar);
    c.eig_floor = j.value("eig_floor", c.eig_floor);
    if (j.contains("chi")) {
      const auto& x = j.at("chi");
      const auto basis = x.value("basis", std::string("poly"));
      if (basis == "poly")
        c.chi_basis = ChiBasis::Poly;
      else if (basis == "spline")
        c.chi_basis = ChiBasis::Spline;
      else
        throw ValidationError("config: chi.basis must be poly or spline");
      c.chi_degree = x.value("degree", c.chi_degree);
      c.chi_knots = vec_of(x, "knots", c.chi_knots);
      c.chi_alarm = x.value("alarm_bp", c.chi_alarm / kBp) * kBp;
      c.absorb_chi = x.value("absorb", c.absorb_chi);
    }
    c.ipca_lag_days = j.value("ipca_lag_days", c.ipca_lag_days);
    c.unrestricted_fx = j.value("unrestricted_fx", c.unrestricted_fx);
    c.dt = j.value("dt", c.dt);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (c.anchor_weekday < 0 || c.anchor_weekday > 6) throw ValidationError("config: anchor_weekday must be 0..6");
  if (!(c.dt > 0 && c.dt <= 1)) throw ValidationError("config: dt must be in (0, 1]");
  if (!(c.eig_floor >= 0 && c.eig_floor < 1)) throw ValidationError("config: eig_floor must be in [0, 1)");
  if (!(c.c2_cap > 0.05)) throw ValidationError("config: c2_cap must exceed 0.05");
  return c;
}

CalibrationResult calibrate(const CalibrationInputs& in, const CalibrationConfig& cfg) {
  CalibrationResult out;
  auto prep = [&](const CurvePanel& p, const std::vector<double>& pillars) {
    CurvePanel w = p;
    if (cfg.from) w = w.window(*cfg.from, *cfg.to);
    w = to_weekly(w, cfg.anchor_weekday);
    return w.select_tenors(pillars);
  };
  const bool model_b = cfg.model == ModelKind::B;
  const CurvePanel& spread_src = model_b ? in.ipca : in.cdi;
  if (spread_src.rows() == 0) throw ValidationError("calibrate: spread panel for the chosen model is empty");
  const CurvePanel nom = prep(in.nominal, cfg.nominal_pillars);
  const CurvePanel real = prep(in.real, cfg.real_pillars);
  const CurvePanel spr = prep(spread_src, cfg.spread_pillars);

  const auto dN = weekly_changes(nom), dR = weekly_changes(real), dS = weekly_changes(spr);
  const auto pN = pca_block(dN, cfg.dt, cfg.nominal_rule, Block::N);
  const auto pR = pca_block(dR, cfg.dt, cfg.real_rule, Block::R);
  const auto pS = pca_block(dS, cfg.dt, cfg.spread_rule, Block::S);
  const auto fN = fit_loadings(pN, cfg.shape_init);
  if (!fN.converged) out.warnings.push_back("nominal loading fit did not report convergence");
  const auto fR = fit_loadings(pR, cfg.shape_init, fN.shape);
  const auto fS = fit_spread_block(pS, cfg.model, cfg.shape_init, cfg.c2_cap);
  for (const auto& w : fS.warnings) out.warnings.push_back(w);

  const auto scores = factor_scores({dN, dR, dS}, {pN, pR, pS});
  const auto corr = correlation_matrix(scores);
  for (const auto& w : corr.warnings) out.warnings.push_back(w);
  // Within-block entries are zero in the model; only cross-block correlation is estimated.
  Eigen::MatrixXd rho0 = corr.rho;
  const auto mask = within_block_zero_mask(scores.block_sizes);
  for (Eigen::Index i = 0; i < rho0.rows(); ++i)
    for (Eigen::Index k = 0; k < rho0.cols(); ++k)
      if (mask(i, k)) rho0(i, k) = 0.0;
  const auto nc = nearest_correlation(rho0, cfg.eig_floor, mask);

  BlockVolSpec& spec = out.spec;
  spec.shape = fN.shape;
  spec.shape.c2 = fS.parametric ? fS.c2 : cfg.shape_init.c2;
  spec.A_N = fN.A;
  spec.A_R = fR.A;
  if (fS.parametric)
    spec.A_S = fS.A_S;
  else {
    spec.spread_empirical = fS.empirical;
    spec.A_S = Eigen::MatrixXd::Zero(fS.empirical->values.rows(), 2);
  }
  spec.rho = nc.matrix;
  spec.unrestricted_fx = cfg.unrestricted_fx;
  const int m = spec.m();

  FxCalibration fxI;
  if (in.ipca_index.empty()) {
    fxI.alpha = Eigen::VectorXd::Zero(m);
    out.warnings.push_back("no IPCA index supplied; sigma_I set to zero");
  } else {
    std::vector<MonthlyObservation> idx;
    for (const auto& o : in.ipca_index) {
      if (cfg.from) {
        const std::chrono::year_month_day f{*cfg.from}, t{*cfg.to};
        const int k = o.year * 12 + int(o.month), kf = int(f.year()) * 12 + int(unsigned(f.month())),
                  kt = int(t.year()) * 12 + int(unsigned(t.month()));
        // the level at the end of the month before the window is the base of the first return
        if (k < kf - 1 || k > kt) continue;
      }
      idx.push_back(o);
    }
    fxI = calibrate_sigma_I(idx, scores, spec.rho, cfg.unrestricted_fx);
  }
  const auto fxJ = calibrate_sigma_J(spr, scores, cfg.sigma_J_ref_pillar, spec.rho, cfg.unrestricted_fx);
  for (const auto& w : fxI.warnings) out.warnings.push_back("sigma_I: " + w);
  for (const auto& w : fxJ.warnings) out.warnings.push_back("sigma_J: " + w);
  spec.sigma_I = fxI.alpha;
  spec.sigma_J = fxJ.alpha;
  spec.validate();

  // initial curves at the last in-sample week
  const Date t0 = std::min(nom.dates.back(), real.dates.back());
  std::set<double> tau_set(cfg.nominal_pillars.begin(), cfg.nominal_pillars.end());
  tau_set.insert(cfg.real_pillars.begin(), cfg.real_pillars.end());
  tau_set.insert(cfg.spread_pillars.begin(), cfg.spread_pillars.end());
  const std::vector<double> taus(tau_set.begin(), tau_set.end());
  const auto vN = last_values(nom, t0), vR = last_values(real, t0), vS = last_values(spr, t0);
  InitialCurves& init = out.init;
  init.grid = PillarGrid(taus);
  for (double t : taus) {
    const double n = interp_finite(nom.grid.tenors(), vN, t), r = interp_finite(real.grid.tenors(), vR, t);
    double s = interp_finite(spr.grid.tenors(), vS, t);
    // Model B carries the IPCA spread; the state variable is the spread over the nominal curve.
    if (model_b) s = s + r - n;
    init.f_nominal.push_back(n);
    init.f_real.push_back(r);
    init.s_cdi.push_back(s);
  }
  for (double v : init.s_cdi)
    if (!std::isfinite(v)) throw ValidationError("calibrate: spread panel has no observation before " + format_date(t0));

  json report;
  report["units"] = {{"eigenvalues", "bp^2/yr"}, {"vols", "bp/sqrt(yr)"}, {"chi", "bp"}};
  report["model"] = model_b ? "B" : "A";
  report["t0"] = format_date(t0);
  report["weeks"] = {{"nominal", nom.rows()}, {"real", real.rows()}, {"spread", spr.rows()}};
  report["pca"] = {{"nominal", pca_json(pN, &fN, fN.r2)}, {"real", pca_json(pR, &fR, fR.r2)},
                   {"spread", pca_json(pS, nullptr, fS.r2)}};
  report["decays"] = {{"b2", spec.shape.b2}, {"b3", spec.shape.b3}, {"c2", fS.c2}, {"spread_parametric", fS.parametric}};
  report["factor_labels"] = scores.labels;
  report["joint_weeks"] = scores.dates.size();
  report["rho_sample"] = matrix_json(corr.rho);
  report["rho_max_within_block"] = corr.max_within_block;
  report["rho_correction"] = nc.method;
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(spec.rho, Eigen::EigenvaluesOnly);
    report["rho_min_eigenvalue"] = es.eigenvalues()[0];
  }
  report["sigma_I"] = fx_json(fxI);
  report["sigma_J"] = fx_json(fxJ);
  report["sigma_J"]["ref_pillar"] = cfg.sigma_J_ref_pillar;

  // reconciliation gap between the two spread families at t0 (Model A with an IPCA panel only)
  if (!model_b && in.ipca.rows() > 0) {
    CurvePanel ip = in.ipca;
    if (cfg.from) ip = ip.window(*cfg.from, *cfg.to);
    std::vector<double> pil, gap;
    if (ip.rows() > 0) {
      ip = to_weekly(ip, cfg.anchor_weekday);
      const auto vI = last_values(ip, t0);
      for (std::size_t i = 0; i < ip.grid.size(); ++i) {
        const double t = ip.grid[i];
        if (!spr.grid.tenors().empty() && spr.grid.find(t) < 0) continue;
        const double s = interp_finite(spr.grid.tenors(), vS, t);
        const double g = vI[i] - (s + interp_finite(nom.grid.tenors(), vN, t) - interp_finite(real.grid.tenors(), vR, t));
        if (std::isfinite(g)) {
          pil.push_back(t);
          gap.push_back(g);
        }
      }
    }
    const int dim = cfg.chi_basis == ChiBasis::Poly ? cfg.chi_degree + 1 : 4 + int(cfg.chi_knots.size());
    if (int(pil.size()) >= dim) {
      const auto chi = chi_adjust(pil, gap, {}, cfg.chi_basis, cfg.chi_degree, cfg.chi_knots, cfg.chi_alarm);
      for (const auto& w : chi.warnings) out.warnings.push_back(w);
      std::vector<double> coef(chi.coefficients.data(), chi.coefficients.data() + chi.coefficients.size()), res_bp;
      for (double r : chi.residual) res_bp.push_back(r / kBp);
      report["chi"] = {{"pillars", pil}, {"coefficients", coef}, {"sup_norm_bp", chi.sup_norm / kBp},
                       {"residual_bp", res_bp}, {"absorbed", cfg.absorb_chi}};
      if (cfg.absorb_chi)
        for (std::size_t i = 0; i < taus.size(); ++i) init.s_cdi[i] += chi.eval(taus[i]);
    } else {
      out.warnings.push_back("too few common spread pillars for the chi adjustment");
    }
  }
  report["warnings"] = out.warnings;
  out.report = report;
  return out;
}

}  // namespace hjm3
