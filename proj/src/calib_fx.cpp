#include <algorithm>
#include <map>

#include "hjm3/calib.hpp"

namespace hjm3 {

namespace {

Eigen::VectorXd chi_basis_row(ChiBasis basis, int degree, const std::vector<double>& knots, double t) {
  const int dim = basis == ChiBasis::Poly ? degree + 1 : 4 + int(knots.size());
  Eigen::VectorXd b(dim);
  const int pd = basis == ChiBasis::Poly ? degree : 3;
  double p = 1.0;
  for (int k = 0; k <= pd; ++k) {
    b[k] = p;
    p *= t;
  }
  if (basis == ChiBasis::Spline)
    for (std::size_t j = 0; j < knots.size(); ++j) {
      const double x = std::max(t - knots[j], 0.0);
      b[4 + Eigen::Index(j)] = x * x * x;
    }
  return b;
}

double sample_var(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  double m = 0;
  for (double v : x) m += v;
  m /= double(x.size());
  double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return s / double(x.size() - 1);
}

struct Ols {
  Eigen::VectorXd beta;  // intercept first
  std::vector<double> resid;
  double r2 = 0;
};

Ols ols_intercept(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const auto n = X.rows();
  Eigen::MatrixXd D(n, X.cols() + 1);
  D.col(0).setOnes();
  D.rightCols(X.cols()) = X;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
  if (qr.rank() < D.cols()) throw ValidationError("direction regression: collinear regressors");
  Ols o;
  o.beta = qr.solve(y);
  const Eigen::VectorXd e = y - D * o.beta;
  o.resid.assign(e.data(), e.data() + e.size());
  const double sst = (y.array() - y.mean()).square().sum();
  o.r2 = sst > 0 ? 1.0 - e.squaredNorm() / sst : 0.0;
  return o;
}

// Unit-variance versions of the score columns.
Eigen::MatrixXd unit_scores(const FactorScores& s) {
  Eigen::MatrixXd U = s.Z;
  for (Eigen::Index k = 0; k < U.cols(); ++k) {
    const Eigen::VectorXd c = U.col(k);
    const double sd = std::sqrt((c.array() - c.mean()).square().sum() / double(std::max<Eigen::Index>(c.size() - 1, 1)));
    if (!(sd > 0)) throw ValidationError("fx calibration: zero-variance factor score column");
    U.col(k) /= sd;
  }
  return U;
}

void finish_direction(FxCalibration& out, const Ols& o, const std::vector<int>& cols, int m,
                      const Eigen::MatrixXd& rho) {
  out.alpha = Eigen::VectorXd::Zero(m);
  for (std::size_t k = 0; k < cols.size(); ++k) out.alpha[cols[k]] = o.beta[Eigen::Index(k) + 1] * std::sqrt(52.0);
  out.spanned = std::sqrt(std::max(0.0, out.alpha.dot(rho * out.alpha)));
  out.r2 = o.r2;
  if (out.spanned > 0)
    out.alpha *= out.total / out.spanned;
  else {
    out.alpha.setZero();
    if (out.total > 0) out.warnings.push_back("direction regression is flat; FX loading set to zero");
  }
}

}  // namespace

double ChiAdjustment::eval(double tau) const { return chi_basis_row(basis, degree, knots, tau).dot(coefficients); }

ChiAdjustment chi_adjust(const std::vector<double>& pillars, const std::vector<double>& gap,
                         const std::vector<double>& weights, ChiBasis basis, int degree,
                         const std::vector<double>& knots, double alarm) {
  if (pillars.size() != gap.size()) throw ValidationError("chi_adjust: one gap value per pillar");
  if (!weights.empty() && weights.size() != pillars.size()) throw ValidationError("chi_adjust: one weight per pillar");
  if (basis == ChiBasis::Poly && (degree < 0 || degree > 3)) throw ValidationError("chi_adjust: degree must be 0..3");
  if (basis == ChiBasis::Spline && knots.size() > 4) throw ValidationError("chi_adjust: at most 4 spline knots");
  const int dim = basis == ChiBasis::Poly ? degree + 1 : 4 + int(knots.size());
  std::vector<std::size_t> used;
  for (std::size_t i = 0; i < pillars.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w < 0 || !std::isfinite(w)) throw ValidationError("chi_adjust: weights must be finite and >= 0");
    if (w > 0 && std::isfinite(gap[i])) used.push_back(i);
  }
  if (int(used.size()) < dim) throw ValidationError("chi_adjust: underdetermined basis");
  Eigen::MatrixXd B(Eigen::Index(used.size()), dim);
  Eigen::VectorXd y(Eigen::Index(used.size()));
  for (std::size_t r = 0; r < used.size(); ++r) {
    const auto i = used[r];
    const double sw = std::sqrt(weights.empty() ? 1.0 : weights[i]);
    B.row(Eigen::Index(r)) = sw * chi_basis_row(basis, degree, knots, pillars[i]).transpose();
    y[Eigen::Index(r)] = sw * gap[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B);
  if (qr.rank() < dim) throw ValidationError("chi_adjust: underdetermined basis");
  ChiAdjustment out;
  out.basis = basis;
  out.degree = basis == ChiBasis::Poly ? degree : 3;
  out.knots = knots;
  out.coefficients = qr.solve(y);
  out.pillars = pillars;
  for (std::size_t i = 0; i < pillars.size(); ++i) out.residual.push_back(gap[i] - out.eval(pillars[i]));
  const auto [lo, hi] = std::minmax_element(pillars.begin(), pillars.end());
  for (int k = 0; k <= 1000; ++k) out.sup_norm = std::max(out.sup_norm, std::abs(out.eval(*lo + (*hi - *lo) * k / 1000.0)));
  for (double t : pillars) out.sup_norm = std::max(out.sup_norm, std::abs(out.eval(t)));
  if (out.sup_norm > alarm)
    out.warnings.push_back("chi sup-norm " + fmt_double(out.sup_norm / kBp) + " bp exceeds the alarm of " +
                           fmt_double(alarm / kBp) + " bp");
  return out;
}

std::vector<int> fx_regressors(const FactorScores& scores, Block block, bool unrestricted) {
  const int m = int(scores.Z.cols());
  std::vector<int> cols;
  if (unrestricted) {
    for (int k = 0; k < m; ++k) cols.push_back(k);
    return cols;
  }
  if (scores.block_sizes.size() != 3) throw ValidationError("fx calibration: scores must carry N, R and S blocks");
  cols.push_back(0);
  const int nN = scores.block_sizes[0], nR = scores.block_sizes[1], nS = scores.block_sizes[2];
  const int off = block == Block::R ? nN : nN + nR;
  const int cnt = block == Block::R ? nR : nS;
  for (int k = 0; k < cnt; ++k) cols.push_back(off + k);
  return cols;
}

FxCalibration calibrate_sigma_I(const std::vector<MonthlyObservation>& ipca, const FactorScores& scores,
                                const Eigen::MatrixXd& rho, bool unrestricted, int min_months) {
  // monthly log returns between consecutive months
  std::vector<int> month_key;
  std::vector<double> r;
  for (std::size_t i = 1; i < ipca.size(); ++i) {
    const int k0 = ipca[i - 1].year * 12 + int(ipca[i - 1].month) - 1;
    const int k1 = ipca[i].year * 12 + int(ipca[i].month) - 1;
    if (k1 != k0 + 1) continue;
    month_key.push_back(k1);
    r.push_back(std::log(ipca[i].level / ipca[i - 1].level));
  }
  if (int(r.size()) < min_months)
    throw ValidationError("calibrate_sigma_I: too few months (" + std::to_string(r.size()) + " returns, need " +
                          std::to_string(min_months) + ")");
  double sum[12] = {}, cnt[12] = {};
  for (std::size_t i = 0; i < r.size(); ++i) {
    sum[month_key[i] % 12] += r[i];
    cnt[month_key[i] % 12] += 1;
  }
  std::vector<double> e(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) e[i] = r[i] - sum[month_key[i] % 12] / cnt[month_key[i] % 12];

  FxCalibration out;
  out.n_obs = int(r.size());
  out.total = std::sqrt(12.0 * sample_var(e));
  const int m = int(scores.Z.cols());
  if (rho.rows() != m || rho.cols() != m) throw ValidationError("calibrate_sigma_I: rho dimension mismatch");

  const auto cols = fx_regressors(scores, Block::R, unrestricted);
  const Eigen::MatrixXd U = unit_scores(scores);
  std::map<int, Eigen::VectorXd> monthly;
  for (std::size_t t = 0; t < scores.dates.size(); ++t) {
    const std::chrono::year_month_day ymd{scores.dates[t]};
    const int key = int(ymd.year()) * 12 + int(unsigned(ymd.month())) - 1;
    auto [it, fresh] = monthly.try_emplace(key, Eigen::VectorXd::Zero(Eigen::Index(cols.size())));
    for (std::size_t k = 0; k < cols.size(); ++k) it->second[Eigen::Index(k)] += U(Eigen::Index(t), cols[k]);
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < e.size(); ++i)
    if (monthly.count(month_key[i])) rows.push_back(i);
  out.n_regression = int(rows.size());
  if (rows.size() < cols.size() + 2)
    throw ValidationError("calibrate_sigma_I: too few months overlapping the factor scores (" +
                          std::to_string(rows.size()) + ")");
  Eigen::MatrixXd X(Eigen::Index(rows.size()), Eigen::Index(cols.size()));
  Eigen::VectorXd y(Eigen::Index(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    X.row(Eigen::Index(k)) = monthly[month_key[rows[k]]].transpose();
    y[Eigen::Index(k)] = e[rows[k]];
  }
  const Ols o = ols_intercept(X, y);
  out.idiosyncratic = std::sqrt(12.0 * sample_var(o.resid));
  finish_direction(out, o, cols, m, rho);
  return out;
}

FxCalibration calibrate_sigma_J(const CurvePanel& panel, const FactorScores& scores, double ref_pillar,
                                const Eigen::MatrixXd& rho, bool unrestricted, int min_obs) {
  const int col = panel.grid.find(ref_pillar);
  if (col < 0) throw ValidationError("calibrate_sigma_J: reference pillar " + fmt_double(ref_pillar) + " not on the grid");
  std::map<Date, double> ds;
  std::vector<double> all;
  for (std::size_t r = 1; r < panel.rows(); ++r) {
    const double d = panel.values(Eigen::Index(r), col) - panel.values(Eigen::Index(r - 1), col);
    if (std::isnan(d)) continue;
    ds[panel.dates[r]] = d;
    all.push_back(d);
  }
  if (int(all.size()) < min_obs)
    throw ValidationError("calibrate_sigma_J: sparse pillar (" + std::to_string(all.size()) + " weekly changes, need " +
                          std::to_string(min_obs) + ")");
  const int m = int(scores.Z.cols());
  if (rho.rows() != m || rho.cols() != m) throw ValidationError("calibrate_sigma_J: rho dimension mismatch");
  FxCalibration out;
  out.n_obs = int(all.size());
  out.total = std::sqrt(52.0 * sample_var(all));

  const auto cols = fx_regressors(scores, Block::S, unrestricted);
  const Eigen::MatrixXd U = unit_scores(scores);
  std::vector<std::size_t> rows;
  for (std::size_t t = 0; t < scores.dates.size(); ++t)
    if (ds.count(scores.dates[t])) rows.push_back(t);
  out.n_regression = int(rows.size());
  if (rows.size() < cols.size() + 2)
    throw ValidationError("calibrate_sigma_J: too few weeks overlapping the factor scores");
  Eigen::MatrixXd X(Eigen::Index(rows.size()), Eigen::Index(cols.size()));
  Eigen::VectorXd y(Eigen::Index(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t c = 0; c < cols.size(); ++c) X(Eigen::Index(k), Eigen::Index(c)) = U(Eigen::Index(rows[k]), cols[c]);
    y[Eigen::Index(k)] = ds[scores.dates[rows[k]]];
  }
  const Ols o = ols_intercept(X, y);
  out.idiosyncratic = std::sqrt(52.0 * sample_var(o.resid));
  finish_direction(out, o, cols, m, rho);
  return out;
}

}  // namespace hjm3
