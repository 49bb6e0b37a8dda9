#include "hjm3/diagnostics.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>

namespace hjm3 {

using nlohmann::json;

std::string to_string(DeflatedRatio r) { return r == DeflatedRatio::Inflation ? "inflation" : "credit"; }

namespace {

std::size_t find_record(const SimOutput& sim, double t) {
  for (std::size_t r = 0; r < sim.records(); ++r)
    if (std::abs(sim.times[r] - t) <= 1e-9 * std::max(1.0, t)) return r;
  throw ValidationError("horizon " + fmt_double(t) + " is not a recorded date");
}

std::vector<char> aborted_mask(const SimOutput& sim) {
  std::vector<char> m(std::size_t(sim.n_paths), 0);
  for (int p : sim.aborted)
    if (p >= 0 && p < sim.n_paths) m[std::size_t(p)] = 1;
  return m;
}

double z_quantile(double alpha) {
  boost::math::normal_distribution<double> nd;
  return boost::math::quantile(nd, 1.0 - alpha / 2.0);
}

}  // namespace

double MartingaleReport::max_abs_z() const {
  double z = 0;
  for (const auto& r : rows) z = std::max(z, std::abs(r.z));
  return z;
}

bool MartingaleReport::pass() const {
  return std::none_of(rows.begin(), rows.end(), [](const MartingaleRow& r) { return r.flagged; });
}

MartingaleReport martingale_test(const SimOutput& sim, const std::vector<double>& horizons, double alpha) {
  if (!(alpha > 0 && alpha < 1)) throw ValidationError("martingale_test: alpha must be in (0, 1)");
  if (sim.records() == 0 || sim.n_paths == 0) throw ValidationError("martingale_test: empty simulation");
  MartingaleReport rep;
  rep.alpha = alpha;
  rep.z_crit = z_quantile(alpha);
  const auto skip = aborted_mask(sim);
  for (DeflatedRatio which : {DeflatedRatio::Inflation, DeflatedRatio::Credit}) {
    auto ratio = [&](int p, std::size_t r) {
      return which == DeflatedRatio::Inflation ? sim.inflation_ratio(p, r) : sim.credit_ratio(p, r);
    };
    for (double T : horizons) {
      const auto rec = find_record(sim, T);
      MartingaleRow row;
      row.ratio = which;
      row.horizon = T;
      double s = 0, s2 = 0;
      int n = 0;
      for (int p = 0; p < sim.n_paths; ++p) {
        if (skip[std::size_t(p)]) continue;
        const double x0 = ratio(p, 0);
        const double x = ratio(p, rec) / x0;
        if (n == 0) row.target = x0;
        s += x;
        s2 += x * x;
        ++n;
      }
      if (n == 0) throw ValidationError("martingale_test: every path aborted");
      row.n = n;
      row.mean = s / n;
      const double var = n > 1 ? std::max(0.0, (s2 - n * row.mean * row.mean) / (n - 1)) : 0.0;
      row.bias_bp = (row.mean - 1.0) * 1e4;
      row.se_bp = std::sqrt(var / n) * 1e4;
      // exact ratios give a zero standard error; the test is then reported as z = 0
      row.z = row.se_bp > 1e-12 ? row.bias_bp / row.se_bp : 0.0;
      row.flagged = std::abs(row.z) > rep.z_crit;
      rep.rows.push_back(row);
    }
  }
  return rep;
}

TriangleReport triangle_check(const SimOutput& sim, double eps) {
  TriangleReport rep;
  rep.eps = eps;
  const auto np = sim.pillars.size();
  for (int p = 0; p < sim.n_paths; ++p)
    for (std::size_t r = 0; r < sim.records(); ++r) {
      const double* fN = sim.curve_row(p, r, CurveField::fN);
      const double* fR = sim.curve_row(p, r, CurveField::fR);
      const double* sC = sim.curve_row(p, r, CurveField::sCDI);
      const double* sI = sim.curve_row(p, r, CurveField::sIPCA);
      for (std::size_t i = 0; i < np; ++i) {
        double v = std::abs(sI[i] - sC[i] - (fN[i] - fR[i]));
        if (std::isnan(v)) v = std::numeric_limits<double>::infinity();
        if (rep.path < 0 || v > rep.max_violation) {
          rep.max_violation = v;
          rep.path = p;
          rep.record = int(r);
          rep.pillar = int(i);
        }
      }
    }
  return rep;
}

double normalized_second_difference(const std::vector<double>& tau, const std::vector<double>& f, double lo,
                                    double hi) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < tau.size(); ++i)
    if (tau[i] >= lo - 1e-12 && tau[i] <= hi + 1e-12) idx.push_back(i);
  if (idx.size() < 3) throw ValidationError("smoothness: fewer than 3 grid points in the window");
  double fmax = 0;
  for (auto i : idx) fmax = std::max(fmax, std::abs(f[i]));
  if (fmax == 0) return 0.0;
  double worst = 0;
  for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
    const auto a = idx[k - 1], b = idx[k], c = idx[k + 1];
    const double hm = tau[b] - tau[a], hp = tau[c] - tau[b];
    if (!(hm > 0 && hp > 0)) throw ValidationError("smoothness: degenerate grid");
    const double d2 = 2.0 * (hm * f[c] - (hm + hp) * f[b] + hp * f[a]) / (hm + hp);
    worst = std::max(worst, std::abs(d2) / (hm * hp * fmax));
  }
  return worst;
}

std::vector<SmoothnessRow> smoothness_metric(const SimOutput& sim, const std::vector<SmoothnessWindow>& windows) {
  if (sim.records() == 0 || sim.n_paths == 0) throw ValidationError("smoothness: empty simulation");
  const auto skip = aborted_mask(sim);
  const auto np = sim.pillars.size();
  static const char* names[] = {"fN", "fR", "sCDI", "sIPCA", "fC"};
  std::vector<SmoothnessRow> out;
  std::vector<double> f(np);
  auto curve = [&](int p, std::size_t r, int c) {
    if (c < 4) {
      const double* row = sim.curve_row(p, r, CurveField(c));
      std::copy(row, row + np, f.begin());
    } else {
      const double* n = sim.curve_row(p, r, CurveField::fN);
      const double* s = sim.curve_row(p, r, CurveField::sCDI);
      for (std::size_t i = 0; i < np; ++i) f[i] = n[i] + s[i];
    }
    return f;
  };
  for (int c = 0; c < 5; ++c)
    for (const auto& w : windows) {
      SmoothnessRow row;
      row.curve = names[c];
      row.window = w.name;
      row.baseline = normalized_second_difference(sim.pillars, curve(0, 0, c), w.lo, w.hi);
      std::vector<double> vals;
      for (int p = 0; p < sim.n_paths; ++p) {
        if (skip[std::size_t(p)]) continue;
        for (std::size_t r = 1; r < sim.records(); ++r)
          vals.push_back(normalized_second_difference(sim.pillars, curve(p, r, c), w.lo, w.hi));
      }
      if (vals.empty()) vals.push_back(row.baseline);
      std::sort(vals.begin(), vals.end());
      const auto k = std::size_t(std::ceil(0.95 * double(vals.size()))) - 1;
      row.p95 = vals[std::min(k, vals.size() - 1)];
      row.max = vals.back();
      row.ratio = row.baseline > 0 ? row.p95 / row.baseline : kNaN;
      out.push_back(row);
    }
  return out;
}

double coverage_fraction(int inside, int n) { return n > 0 ? double(inside) / double(n) : kNaN; }

CoverageReport coverage_test(const std::vector<CoverageInput>& inputs, double level, double dt, int min_rows) {
  if (!(level > 0 && level < 1)) throw ValidationError("coverage_test: level must be in (0, 1)");
  CoverageReport rep;
  rep.level = level;
  const double z = z_quantile(1.0 - level);
  for (const auto& in : inputs) {
    if (in.model_vol.size() != in.oos.grid.size())
      throw ValidationError("coverage_test: one model vol per pillar for " + in.variable);
    for (std::size_t i = 0; i < in.oos.grid.size(); ++i) {
      CoverageRow row;
      row.variable = in.variable;
      row.tenor = in.oos.grid[i];
      row.model_vol = in.model_vol[i];
      const double half = z * in.model_vol[i] * std::sqrt(dt);
      for (std::size_t r = 1; r < in.oos.rows(); ++r) {
        const double d = in.oos.values(Eigen::Index(r), Eigen::Index(i)) - in.oos.values(Eigen::Index(r - 1), Eigen::Index(i));
        if (std::isnan(d)) continue;
        ++row.n;
        if (std::abs(d) <= half) ++row.inside;
      }
      if (row.n < min_rows)
        throw ValidationError("coverage_test: " + in.variable + " at " + fmt_double(row.tenor) + "y has " +
                              std::to_string(row.n) + " OOS changes, need " + std::to_string(min_rows));
      row.coverage = coverage_fraction(row.inside, row.n);
      rep.rows.push_back(row);
    }
  }
  return rep;
}

double vol_ratio(double realized, double model) { return model > 0 ? realized / model : kNaN; }

double model_vol(const BlockVolSpec& spec, Block block, double tau) { return block_vol(spec, block, tau).norm(); }

double realized_vol(const CurvePanel& panel, std::size_t pillar, double periods_per_year) {
  std::vector<double> d;
  for (std::size_t r = 1; r < panel.rows(); ++r) {
    const double x = panel.values(Eigen::Index(r), Eigen::Index(pillar)) - panel.values(Eigen::Index(r - 1), Eigen::Index(pillar));
    if (!std::isnan(x)) d.push_back(x);
  }
  if (d.size() < 2) return kNaN;
  double m = 0;
  for (double x : d) m += x;
  m /= double(d.size());
  double s = 0;
  for (double x : d) s += (x - m) * (x - m);
  return std::sqrt(periods_per_year * s / double(d.size() - 1));
}

std::vector<VolRow> vol_reproduction(const BlockVolSpec& spec, const std::vector<std::pair<Block, CurvePanel>>& oos) {
  std::vector<VolRow> out;
  for (const auto& [block, panel] : oos)
    for (std::size_t i = 0; i < panel.grid.size(); ++i) {
      VolRow row;
      row.variable = to_string(panel.kind);
      row.tenor = panel.grid[i];
      row.model = model_vol(spec, block, row.tenor);
      row.realized = realized_vol(panel, i);
      row.ratio = vol_ratio(row.realized, row.model);
      out.push_back(row);
    }
  return out;
}

double column_correlation(const Eigen::MatrixXd& Z, int i, int j) {
  if (i < 0 || j < 0 || i >= Z.cols() || j >= Z.cols()) throw ValidationError("correlation pair index out of range");
  const Eigen::VectorXd a = Z.col(i).array() - Z.col(i).mean();
  const Eigen::VectorXd b = Z.col(j).array() - Z.col(j).mean();
  const double den = std::sqrt(a.squaredNorm() * b.squaredNorm());
  return den > 0 ? a.dot(b) / den : kNaN;
}

CorrRow corr_row(std::string pair, int i, int j, double in_sample, double oos) {
  CorrRow r;
  r.pair = std::move(pair);
  r.i = i;
  r.j = j;
  r.in_sample = in_sample;
  r.oos = oos;
  r.diff = oos - in_sample;
  return r;
}

std::vector<CorrRow> corr_reproduction(const FactorScores& in, const FactorScores& oos,
                                       const std::vector<std::pair<int, int>>& pairs) {
  std::vector<CorrRow> out;
  for (const auto& [i, j] : pairs) {
    CorrRow row;
    row.i = i;
    row.j = j;
    if (std::size_t(std::max(i, j)) < in.labels.size()) row.pair = in.labels[std::size_t(i)] + "," + in.labels[std::size_t(j)];
    const auto c = corr_row(row.pair, i, j, column_correlation(in.Z, i, j), column_correlation(oos.Z, i, j));
    out.push_back(c);
  }
  return out;
}

Moments moments(const std::vector<double>& x) {
  Moments m;
  m.n = int(x.size());
  if (x.size() < 2) return m;
  for (double v : x) m.mean += v;
  m.mean /= double(x.size());
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : x) {
    const double d = v - m.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  const double n = double(x.size());
  m2 /= n;
  m3 /= n;
  m4 /= n;
  m.sd = std::sqrt(m2 * n / (n - 1));
  if (m2 > 0) {
    m.skew = m3 / std::pow(m2, 1.5);
    m.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  }
  return m;
}

namespace {
json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
}  // namespace

json to_json(const MartingaleReport& r) {
  json rows = json::array();
  for (const auto& x : r.rows)
    rows.push_back({{"ratio", to_string(x.ratio)}, {"horizon", x.horizon}, {"target", num(x.target)},
                    {"mean", num(x.mean)}, {"bias_bp", num(x.bias_bp)}, {"se_bp", num(x.se_bp)}, {"z", num(x.z)},
                    {"n", x.n}, {"flagged", x.flagged}});
  return {{"alpha", r.alpha}, {"z_crit", r.z_crit}, {"max_abs_z", num(r.max_abs_z())}, {"pass", r.pass()}, {"rows", rows}};
}

json to_json(const TriangleReport& r) {
  return {{"max_violation", num(r.max_violation)}, {"eps", r.eps},   {"pass", r.pass()},
          {"path", r.path},                        {"record", r.record}, {"pillar", r.pillar}};
}

json to_json(const std::vector<SmoothnessRow>& rows) {
  json a = json::array();
  for (const auto& x : rows)
    a.push_back({{"curve", x.curve}, {"window", x.window}, {"baseline", num(x.baseline)}, {"p95", num(x.p95)},
                 {"max", num(x.max)}, {"ratio", num(x.ratio)}});
  return a;
}

json to_json(const CoverageReport& r) {
  json a = json::array();
  for (const auto& x : r.rows)
    a.push_back({{"variable", x.variable}, {"tenor", x.tenor}, {"inside", x.inside}, {"n", x.n},
                 {"coverage", num(x.coverage)}, {"model_vol_bp", num(x.model_vol / kBp)}});
  return {{"level", r.level}, {"rows", a}};
}

json to_json(const std::vector<VolRow>& rows) {
  json a = json::array();
  for (const auto& x : rows)
    a.push_back({{"variable", x.variable}, {"tenor", x.tenor}, {"model_bp", num(x.model / kBp)},
                 {"realized_bp", num(x.realized / kBp)}, {"ratio", num(x.ratio)}});
  return a;
}

}  // namespace hjm3
