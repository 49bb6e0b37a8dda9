#include "hjm3/wedge.hpp"

#include <algorithm>
#include <array>
#include <boost/math/distributions/students_t.hpp>
#include <fstream>
#include <map>

namespace hjm3 {

using nlohmann::json;

std::vector<IssuerSeries> issuer_panel(const ConstituentPanel& panel, int min_joint_days) {
  struct Acc {
    double ws = 0, wd = 0, w = 0;
    int n = 0;
    double s_plain = 0, d_plain = 0;
  };
  // issuer -> date -> family
  std::map<std::string, std::map<Date, std::array<Acc, 2>>> by;
  for (const auto& r : panel.rows) {
    auto& a = by[r.issuer][r.date][r.family == Family::CDI ? 0 : 1];
    a.ws += r.weight * r.spread;
    a.wd += r.weight * r.duration;
    a.w += r.weight;
    a.s_plain += r.spread;
    a.d_plain += r.duration;
    a.n += 1;
  }
  auto avg = [](const Acc& a, bool spread) {
    // zero total weight falls back to the plain average
    if (a.w > 0) return (spread ? a.ws : a.wd) / a.w;
    return (spread ? a.s_plain : a.d_plain) / a.n;
  };
  std::vector<IssuerSeries> out;
  for (const auto& [issuer, dates] : by) {
    IssuerSeries s;
    s.issuer = issuer;
    for (const auto& [d, fam] : dates) {
      if (fam[0].n == 0 || fam[1].n == 0) continue;
      s.dates.push_back(d);
      s.s_cdi.push_back(avg(fam[0], true));
      s.s_ipca.push_back(avg(fam[1], true));
      s.dur_cdi.push_back(avg(fam[0], false));
      s.dur_ipca.push_back(avg(fam[1], false));
    }
    if (int(s.size()) >= min_joint_days && !s.dates.empty()) out.push_back(std::move(s));
  }
  std::stable_sort(out.begin(), out.end(), [](const IssuerSeries& a, const IssuerSeries& b) {
    return a.size() != b.size() ? a.size() > b.size() : a.issuer < b.issuer;
  });
  return out;
}

MatchScheme parse_scheme(std::string_view s) {
  if (s == "nearest") return MatchScheme::Nearest;
  if (s == "interp_mid") return MatchScheme::InterpMid;
  if (s == "split_side") return MatchScheme::SplitSide;
  throw ValidationError("unknown matching scheme '" + std::string(s) + "'");
}

std::string to_string(MatchScheme s) {
  switch (s) {
    case MatchScheme::Nearest: return "nearest";
    case MatchScheme::InterpMid: return "interp_mid";
    case MatchScheme::SplitSide: return "split_side";
  }
  return "?";
}

namespace {

double interp_row(const std::vector<double>& x, const std::vector<double>& y, double t) {
  if (t <= x.front()) return y.front();
  if (t >= x.back()) return y.back();
  const auto j = std::size_t(std::upper_bound(x.begin(), x.end(), t) - x.begin());
  const double w = (t - x[j - 1]) / (x[j] - x[j - 1]);
  return y[j - 1] + w * (y[j] - y[j - 1]);
}

double nearest_row(const std::vector<double>& x, const std::vector<double>& y, double t) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (std::abs(x[i] - t) < std::abs(x[best] - t)) best = i;
  return y[best];
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? kNaN : s / double(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return kNaN;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size() - 1));
}

double median_of(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double match_breakeven_at(const std::vector<double>& pillars, const std::vector<double>& be_row, double dur_cdi,
                          double dur_ipca, MatchScheme scheme) {
  if (pillars.empty() || pillars.size() != be_row.size()) throw ValidationError("match_breakeven: empty breakeven row");
  for (double d : {dur_cdi, dur_ipca})
    if (!(d >= pillars.front() - 1.0 && d <= pillars.back() + 1.0))
      throw ValidationError("match_breakeven: duration " + fmt_double(d) + " is far outside the pillar span");
  const double mid = 0.5 * (dur_cdi + dur_ipca);
  switch (scheme) {
    case MatchScheme::Nearest: return nearest_row(pillars, be_row, mid);
    case MatchScheme::InterpMid: return interp_row(pillars, be_row, mid);
    case MatchScheme::SplitSide:
      return 0.5 * (interp_row(pillars, be_row, dur_cdi) + interp_row(pillars, be_row, dur_ipca));
  }
  return kNaN;
}

void match_breakeven(IssuerSeries& s, const CurvePanel& be, MatchScheme scheme, const CurvePanel* nominal) {
  std::map<Date, std::size_t> be_row, nom_row;
  for (std::size_t r = 0; r < be.rows(); ++r) be_row[be.dates[r]] = r;
  if (nominal)
    for (std::size_t r = 0; r < nominal->rows(); ++r) nom_row[nominal->dates[r]] = r;
  IssuerSeries o;
  o.issuer = s.issuer;
  const auto& bp = be.grid.tenors();
  for (std::size_t k = 0; k < s.size(); ++k) {
    auto it = be_row.find(s.dates[k]);
    if (it == be_row.end()) continue;
    std::vector<double> row(bp.size());
    for (std::size_t i = 0; i < bp.size(); ++i) row[i] = be.values(Eigen::Index(it->second), Eigen::Index(i));
    const double b = match_breakeven_at(bp, row, s.dur_cdi[k], s.dur_ipca[k], scheme);
    if (!std::isfinite(b)) continue;
    double fn = kNaN;
    if (nominal) {
      auto jt = nom_row.find(s.dates[k]);
      if (jt == nom_row.end()) continue;
      std::vector<double> nrow(nominal->grid.size());
      for (std::size_t i = 0; i < nrow.size(); ++i) nrow[i] = nominal->values(Eigen::Index(jt->second), Eigen::Index(i));
      const double mid = 0.5 * (s.dur_cdi[k] + s.dur_ipca[k]);
      fn = scheme == MatchScheme::Nearest ? nearest_row(nominal->grid.tenors(), nrow, mid)
                                          : interp_row(nominal->grid.tenors(), nrow, mid);
    }
    o.dates.push_back(s.dates[k]);
    o.s_cdi.push_back(s.s_cdi[k]);
    o.s_ipca.push_back(s.s_ipca[k]);
    o.dur_cdi.push_back(s.dur_cdi[k]);
    o.dur_ipca.push_back(s.dur_ipca[k]);
    o.be.push_back(b);
    o.f_nom.push_back(fn);
    o.delta.push_back(s.s_ipca[k] - s.s_cdi[k] - b);
  }
  s = std::move(o);
}

IssuerStats compute_delta(const IssuerSeries& s) {
  if (s.delta.size() != s.size()) throw ValidationError("compute_delta: breakeven not matched for " + s.issuer);
  IssuerStats st;
  st.issuer = s.issuer;
  st.n = int(s.size());
  st.mean = mean_of(s.delta);
  st.median = median_of(s.delta);
  st.std = s.size() > 1 ? sd_of(s.delta) : 0.0;
  st.dur_cdi = mean_of(s.dur_cdi);
  st.dur_ipca = mean_of(s.dur_ipca);
  st.duration = 0.5 * (st.dur_cdi + st.dur_ipca);
  st.f_nom = mean_of(s.f_nom);
  st.be = mean_of(s.be);
  st.s_cdi = mean_of(s.s_cdi);
  return st;
}

DeltaSummary summarize(const std::vector<IssuerStats>& v) {
  DeltaSummary d;
  std::vector<double> means, stds;
  for (const auto& x : v) {
    means.push_back(x.mean);
    stds.push_back(x.std);
  }
  d.mean_of_means = mean_of(means);
  d.std_of_means = sd_of(means);
  d.mean_of_stds = mean_of(stds);
  return d;
}

TaxLinear tax_benchmark_linear(double f_nom, double f_real, double s_cdi, double tau_pf) {
  if (!(tau_pf >= 0 && tau_pf < 1)) throw ValidationError("tax rate must be in [0, 1)");
  TaxLinear t;
  t.raw = -tau_pf * (f_nom + s_cdi);
  t.delta = t.raw - (f_nom - f_real);
  return t;
}

TaxExact tax_benchmark_exact(double y, double D, double tau_pf) {
  if (!(tau_pf >= 0 && tau_pf < 1)) throw ValidationError("tax rate must be in [0, 1)");
  if (!(D > 0)) throw ValidationError("holding period must be positive");
  TaxExact t;
  t.after_tax = std::log1p((1.0 - tau_pf) * std::expm1(y * D)) / D;
  t.linear_after = (1.0 - tau_pf) * y;
  t.correction = t.after_tax - t.linear_after;
  return t;
}

TaxMode parse_tax_mode(std::string_view s) {
  if (s == "linear") return TaxMode::Linear;
  if (s == "exact") return TaxMode::Exact;
  throw ValidationError("unknown tax mode '" + std::string(s) + "'");
}

WedgeReport decompose(const std::vector<IssuerStats>& issuers, TaxMode mode, double tau_pf) {
  WedgeReport rep;
  rep.mode = mode;
  rep.tau_pf = tau_pf;
  if (issuers.empty()) throw ValidationError("decompose: no issuers");
  std::vector<double> taus, etas, means;
  for (const auto& st : issuers) {
    if (!std::isfinite(st.f_nom) || !std::isfinite(st.be) || !std::isfinite(st.s_cdi))
      throw ValidationError("decompose: " + st.issuer + " lacks nominal, breakeven or CDI averages");
    WedgeRow row;
    row.stats = st;
    const double y = st.f_nom + st.s_cdi;
    // f_real only enters through BE = fN - fR
    row.tau_linear = tax_benchmark_linear(st.f_nom, st.f_nom - st.be, st.s_cdi, tau_pf).delta;
    row.tau_exact = row.tau_linear + tax_benchmark_exact(y, st.duration, tau_pf).correction;
    row.tau_fiscal = mode == TaxMode::Linear ? row.tau_linear : row.tau_exact;
    row.eta = st.mean - row.tau_fiscal;
    taus.push_back(row.tau_fiscal);
    etas.push_back(row.eta);
    means.push_back(st.mean);
    rep.rows.push_back(row);
  }
  rep.delta = summarize(issuers);
  rep.mean_tau = mean_of(taus);
  rep.mean_eta = mean_of(etas);
  if (issuers.size() >= 2) {
    const double rn = std::sqrt(double(issuers.size()));
    rep.se_eta = sd_of(etas) / rn;
    rep.se_mean = sd_of(means) / rn;
  }
  return rep;
}

RegressionResult cross_section_regression(const WedgeReport& rep, bool dur) {
  const auto n = Eigen::Index(rep.rows.size());
  const Eigen::Index k = dur ? 3 : 2;
  if (n < k + 1) throw ValidationError("cross_section_regression: need at least " + std::to_string(k + 1) + " issuers");
  Eigen::MatrixXd X(n, k);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rep.rows[std::size_t(i)];
    X(i, 0) = 1.0;
    X(i, 1) = r.tau_fiscal;
    if (dur) X(i, 2) = r.stats.dur_ipca - r.stats.dur_cdi;
    y[i] = r.stats.mean;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) throw ValidationError("cross_section_regression: collinear regressors");
  const Eigen::VectorXd b = qr.solve(y);
  const Eigen::VectorXd e = y - X * b;
  const double df = double(n - k);
  const double s2 = e.squaredNorm() / df;
  const Eigen::MatrixXd cov = s2 * (X.transpose() * X).inverse();
  RegressionResult out;
  out.names = {"alpha", "beta"};
  if (dur) out.names.push_back("gamma");
  for (Eigen::Index j = 0; j < k; ++j) {
    out.coef.push_back(b[j]);
    out.se.push_back(std::sqrt(cov(j, j)));
  }
  const double sst = (y.array() - y.mean()).square().sum();
  out.r2 = sst > 0 ? 1.0 - e.squaredNorm() / sst : 1.0;
  out.adj_r2 = 1.0 - (1.0 - out.r2) * double(n - 1) / df;
  out.n = int(n);
  if (out.se[1] > 0) {
    out.t_beta_one = (b[1] - 1.0) / out.se[1];
    boost::math::students_t dist(df);
    out.p_beta_one = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t_beta_one)));
  } else {
    out.t_beta_one = 0.0;
    out.p_beta_one = b[1] == 1.0 ? 1.0 : 0.0;
  }
  return out;
}

RegimeSplit regime_split(const std::vector<IssuerSeries>& issuers, Date brk, TaxMode mode, double tau_pf,
                         int min_days) {
  if (issuers.empty()) throw ValidationError("regime_split: no issuers");
  Date lo = issuers[0].dates.front(), hi = issuers[0].dates.back();
  for (const auto& s : issuers)
    if (!s.dates.empty()) {
      lo = std::min(lo, s.dates.front());
      hi = std::max(hi, s.dates.back());
    }
  if (!(brk > lo && brk <= hi)) throw ValidationError("regime_split: break date leaves one regime empty");
  auto window = [&](const std::string& name, bool first) {
    RegimeReport rr;
    rr.name = name;
    rr.from = first ? lo : brk;
    rr.to = first ? brk - std::chrono::days(1) : hi;
    std::vector<IssuerStats> st;
    for (const auto& s : issuers) {
      IssuerSeries w;
      w.issuer = s.issuer;
      for (std::size_t k = 0; k < s.size(); ++k) {
        if ((s.dates[k] < brk) != first) continue;
        w.dates.push_back(s.dates[k]);
        w.s_cdi.push_back(s.s_cdi[k]);
        w.s_ipca.push_back(s.s_ipca[k]);
        w.dur_cdi.push_back(s.dur_cdi[k]);
        w.dur_ipca.push_back(s.dur_ipca[k]);
        w.be.push_back(s.be[k]);
        w.f_nom.push_back(s.f_nom[k]);
        w.delta.push_back(s.delta[k]);
      }
      if (int(w.size()) < min_days) {
        rr.flagged.push_back(s.issuer);
        continue;
      }
      st.push_back(compute_delta(w));
    }
    if (st.empty()) throw ValidationError("regime_split: no issuer has enough days in the " + name + " window");
    rr.report = decompose(st, mode, tau_pf);
    return rr;
  };
  RegimeSplit out;
  out.before = window("before", true);
  out.after = window("after", false);
  out.diff = out.after.report.delta.mean_of_means - out.before.report.delta.mean_of_means;
  const double a = out.before.report.se_mean, b = out.after.report.se_mean;
  if (std::isfinite(a) && std::isfinite(b)) {
    out.se_diff = std::sqrt(a * a + b * b);
    out.z = out.se_diff > 0 ? out.diff / out.se_diff : kNaN;
  }
  return out;
}

std::vector<IssuerStats> load_issuer_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::string line;
  const std::vector<std::string> expected{"issuer", "mean_bp",  "median_bp", "std_bp",    "n_obs", "duration",
                                          "dur_cdi", "dur_ipca", "f_nominal", "breakeven", "s_cdi"};
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = split_csv_line(line);
    break;
  }
  if (header != expected) throw ValidationError("'" + path + "': malformed header");
  std::vector<IssuerStats> out;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto c = split_csv_line(line);
    if (c.size() != expected.size()) throw ValidationError("'" + path + "': wrong column count");
    IssuerStats s;
    s.issuer = c[0];
    s.mean = parse_double(c[1], "mean_bp") * kBp;
    s.median = parse_double(c[2], "median_bp") * kBp;
    s.std = parse_double(c[3], "std_bp") * kBp;
    s.n = int(parse_double(c[4], "n_obs"));
    s.duration = parse_double(c[5], "duration");
    s.dur_cdi = parse_double(c[6], "dur_cdi");
    s.dur_ipca = parse_double(c[7], "dur_ipca");
    s.f_nom = parse_double(c[8], "f_nominal");
    s.be = parse_double(c[9], "breakeven");
    s.s_cdi = parse_double(c[10], "s_cdi");
    out.push_back(s);
  }
  if (out.empty()) throw ValidationError("'" + path + "': no data rows");
  return out;
}

namespace {
json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
json bp(double x) { return num(x / kBp); }
}  // namespace

json to_json(const WedgeReport& r) {
  json rows = json::array();
  for (const auto& w : r.rows)
    rows.push_back({{"issuer", w.stats.issuer},
                    {"mean_bp", bp(w.stats.mean)},
                    {"median_bp", bp(w.stats.median)},
                    {"std_bp", bp(w.stats.std)},
                    {"n_obs", w.stats.n},
                    {"duration", num(w.stats.duration)},
                    {"tau_fiscal_linear_bp", bp(w.tau_linear)},
                    {"tau_fiscal_exact_bp", bp(w.tau_exact)},
                    {"eta_bp", bp(w.eta)}});
  return {{"mode", r.mode == TaxMode::Linear ? "linear" : "exact"},
          {"tau_pf", r.tau_pf},
          {"issuers", rows},
          {"summary",
           {{"mean_of_means_bp", bp(r.delta.mean_of_means)},
            {"std_of_means_bp", bp(r.delta.std_of_means)},
            {"mean_of_stds_bp", bp(r.delta.mean_of_stds)},
            {"mean_tau_fiscal_bp", bp(r.mean_tau)},
            {"mean_eta_bp", bp(r.mean_eta)},
            {"se_eta_bp", bp(r.se_eta)},
            {"se_mean_bp", bp(r.se_mean)}}}};
}

json to_json(const RegressionResult& r) {
  json c = json::object();
  for (std::size_t k = 0; k < r.names.size(); ++k) c[r.names[k]] = {{"coef", num(r.coef[k])}, {"se", num(r.se[k])}};
  return {{"coefficients", c}, {"r2", num(r.r2)},         {"adj_r2", num(r.adj_r2)},
          {"n", r.n},          {"t_beta_one", num(r.t_beta_one)}, {"p_beta_one", num(r.p_beta_one)}};
}

json to_json(const RegimeSplit& r) {
  auto one = [](const RegimeReport& x) {
    return json{{"name", x.name},
                {"from", format_date(x.from)},
                {"to", format_date(x.to)},
                {"flagged", x.flagged},
                {"report", to_json(x.report)}};
  };
  return {{"before", one(r.before)}, {"after", one(r.after)}, {"diff_bp", bp(r.diff)}, {"se_diff_bp", bp(r.se_diff)},
          {"z", num(r.z)}};
}

}  // namespace hjm3
