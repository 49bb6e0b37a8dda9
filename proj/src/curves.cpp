#include "hjm3/curves.hpp"

#include <algorithm>
#include <map>

#include "nls.hpp"

namespace hjm3 {

ZeroCurve bootstrap_discount(const std::vector<double>& yields, const std::vector<int>& business_days) {
  if (yields.size() != business_days.size() || yields.empty())
    throw ValidationError("bootstrap_discount: yields and business days must have equal non-zero length");
  std::vector<double> tenors;
  ZeroCurve c;
  for (std::size_t i = 0; i < yields.size(); ++i) {
    if (business_days[i] <= 0) throw ValidationError("bootstrap_discount: business days must be positive");
    if (i > 0 && business_days[i] <= business_days[i - 1])
      throw ValidationError("bootstrap_discount: business days must be increasing");
    if (!(yields[i] > -1.0)) throw ValidationError("bootstrap_discount: yield must exceed -100%");
    const double t = business_days[i] / 252.0;
    const double log_p = -t * std::log1p(yields[i]);
    tenors.push_back(t);
    c.zeros.push_back(-log_p / t);
  }
  c.grid = PillarGrid(tenors);
  return c;
}

namespace {

// log discount factor under flat forwards through the zero nodes
double log_discount(const ZeroCurve& c, double tau) {
  const auto& t = c.grid.tenors();
  const auto n = t.size();
  if (tau <= t[0]) return -c.zeros[0] * tau;
  if (tau >= t[n - 1]) {
    const double f_last =
        n == 1 ? c.zeros[0] : (c.zeros[n - 1] * t[n - 1] - c.zeros[n - 2] * t[n - 2]) / (t[n - 1] - t[n - 2]);
    return -c.zeros[n - 1] * t[n - 1] - f_last * (tau - t[n - 1]);
  }
  auto it = std::lower_bound(t.begin(), t.end(), tau);
  const auto j = std::size_t(it - t.begin());
  if (t[j] == tau) return -c.zeros[j] * tau;
  const double a = -c.zeros[j - 1] * t[j - 1], b = -c.zeros[j] * t[j];
  return a + (b - a) * (tau - t[j - 1]) / (t[j] - t[j - 1]);
}

}  // namespace

double discount(const ZeroCurve& c, double tau) {
  if (tau < 0) throw ValidationError("discount: tau < 0");
  return std::exp(log_discount(c, tau));
}

ForwardCurve forward_from_zero(const ZeroCurve& curve, double h) {
  if (!(h > 0)) throw ValidationError("forward_from_zero: h must be positive");
  const auto& t = curve.grid.tenors();
  double min_gap = t[0];
  for (std::size_t i = 1; i < t.size(); ++i) min_gap = std::min(min_gap, t[i] - t[i - 1]);
  if (!(h < min_gap)) throw ValidationError("forward_from_zero: h must be below the minimum tenor spacing");
  ForwardCurve f;
  f.grid = curve.grid;
  // One-sided difference inside the interval owned by each node.
  for (double ti : t) f.fwds.push_back(-(log_discount(curve, ti) - log_discount(curve, ti - h)) / h);
  return f;
}

ZeroCurve zero_from_forward(const ForwardCurve& curve) {
  ZeroCurve z;
  z.grid = curve.grid;
  double acc = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    acc += curve.fwds[i] * (curve.grid[i] - prev);
    prev = curve.grid[i];
    z.zeros.push_back(acc / curve.grid[i]);
  }
  return z;
}

double interp_flat_forward(const ZeroCurve& curve, double tau) {
  if (tau < 0) throw ValidationError("interp_flat_forward: tau < 0");
  if (tau == 0) return curve.zeros[0];
  const int node = curve.grid.find(tau);
  if (node >= 0 && curve.grid[std::size_t(node)] == tau) return curve.zeros[std::size_t(node)];
  return -log_discount(curve, tau) / tau;
}

double interp_flat_forward(const ForwardCurve& curve, double tau) {
  if (tau < 0) throw ValidationError("interp_flat_forward: tau < 0");
  const auto& t = curve.grid.tenors();
  auto it = std::lower_bound(t.begin(), t.end(), tau);
  if (it == t.end()) return curve.fwds.back();
  return curve.fwds[std::size_t(it - t.begin())];
}

namespace {

struct SvenssonBasis {
  double l1, c1, l2;  // loading of beta1, beta2, beta3
  double dl1_dlam1, dc1_dlam1, dl2_dlam2;
};

// d/dλ of (1-e^{-λτ})/(λτ) and of that minus e^{-λτ}
SvenssonBasis svensson_basis(double tau, double lam1, double lam2) {
  auto pieces = [tau](double lam, double& slope, double& hump, double& dslope, double& dhump) {
    const double x = lam * tau;
    const double e = std::exp(-x);
    slope = x < 1e-10 ? 1.0 - 0.5 * x : -std::expm1(-x) / x;
    hump = slope - e;
    // d slope / d lam = tau * d/dx[(1-e^-x)/x]
    const double ds_dx = x < 1e-6 ? -0.5 + x / 3.0 : (x * e - (1.0 - e)) / (x * x);
    dslope = tau * ds_dx;
    dhump = dslope + tau * e;
  };
  SvenssonBasis b{};
  double s2, ds2, dh1;
  pieces(lam1, b.l1, b.c1, b.dl1_dlam1, dh1);
  b.dc1_dlam1 = dh1;
  double h2;
  pieces(lam2, s2, h2, ds2, b.dl2_dlam2);
  b.l2 = h2;
  return b;
}

}  // namespace

double svensson_yield(const SvenssonParams& p, double tau) {
  if (tau <= 0) return p.beta0 + p.beta1;
  const auto b = svensson_basis(tau, p.lambda1, p.lambda2);
  return p.beta0 + p.beta1 * b.l1 + p.beta2 * b.c1 + p.beta3 * b.l2;
}

double svensson_forward(const SvenssonParams& p, double tau) {
  const double e1 = std::exp(-p.lambda1 * tau), e2 = std::exp(-p.lambda2 * tau);
  return p.beta0 + p.beta1 * e1 + p.beta2 * p.lambda1 * tau * e1 + p.beta3 * p.lambda2 * tau * e2;
}

SvenssonFit fit_svensson(const std::vector<double>& yields, const PillarGrid& grid, double residual_cap,
                         int max_iter) {
  const auto n = grid.size();
  if (n < 6 || yields.size() != n) throw ValidationError("fit_svensson: underdetermined (need at least 6 tenors)");
  // x = (b0, b1, b2, b3, ln l1, ln l2)
  auto params = [](const Eigen::VectorXd& x) {
    return SvenssonParams{x[0], x[1], x[2], x[3], std::exp(x[4]), std::exp(x[5])};
  };
  detail::ResidualFn res = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    const auto p = params(x);
    for (std::size_t i = 0; i < n; ++i) r[Eigen::Index(i)] = svensson_yield(p, grid[i]) - yields[i];
  };
  detail::JacobianFn jac = [&](const Eigen::VectorXd& x, Eigen::MatrixXd& J) {
    const auto p = params(x);
    for (std::size_t i = 0; i < n; ++i) {
      const auto b = svensson_basis(grid[i], p.lambda1, p.lambda2);
      const auto r = Eigen::Index(i);
      J(r, 0) = 1.0;
      J(r, 1) = b.l1;
      J(r, 2) = b.c1;
      J(r, 3) = b.l2;
      J(r, 4) = (p.beta1 * b.dl1_dlam1 + p.beta2 * b.dc1_dlam1) * p.lambda1;
      J(r, 5) = p.beta3 * b.dl2_dlam2 * p.lambda2;
    }
  };
  auto attempt = [&](double l1, double l2) {
    Eigen::VectorXd x0(6);
    x0 << yields.back(), yields.front() - yields.back(), 0.0, 0.0, std::log(l1), std::log(l2);
    return detail::least_squares(res, int(n), x0, jac, 1e-15, max_iter * 8);
  };
  auto max_abs = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    res(x, r);
    return r.cwiseAbs().maxCoeff();
  };

  auto best = attempt(1.0, 0.3);
  double best_max = max_abs(best.x);
  if (!best.converged || best_max > 1e-10) {
    for (double l1 : {0.1, 0.3, 0.6, 1.0, 2.0, 4.0}) {
      for (double l2 : {0.05, 0.15, 0.3, 0.8, 1.5, 3.0}) {
        if (std::abs(l1 - l2) < 1e-12) continue;
        auto r = attempt(l1, l2);
        const double mr = max_abs(r.x);
        if (std::isfinite(r.ssr) && (r.ssr < best.ssr || !std::isfinite(best.ssr))) {
          best = r;
          best_max = mr;
        }
      }
    }
  }
  if (!std::isfinite(best.ssr)) throw ValidationError("fit_svensson: non-convergence");
  SvenssonFit fit;
  fit.params = params(best.x);
  fit.max_residual = best_max;
  fit.iterations = best.evaluations;
  if (fit.max_residual > residual_cap)
    throw ValidationError("fit_svensson: max residual " + fmt_double(fit.max_residual * 1e4) +
                          " bp exceeds the cap");
  return fit;
}

ForwardCurve real_forward_curve(const SvenssonParams& p, const PillarGrid& grid, double short_end_floor) {
  if (short_end_floor < 0) throw ValidationError("real_forward_curve: floor must be >= 0");
  if (!(p.lambda1 > 0) || !(p.lambda2 > 0)) throw ValidationError("real_forward_curve: lambdas must be positive");
  std::vector<double> kept, f;
  for (double t : grid.tenors())
    if (t >= short_end_floor - 1e-12) {
      kept.push_back(t);
      f.push_back(svensson_forward(p, t));
    }
  if (kept.empty()) throw ValidationError("real_forward_curve: all tenors below the floor");
  ForwardCurve c;
  c.grid = PillarGrid(kept);
  c.fwds = f;
  return c;
}

CurvePanel bucket_spreads(const ConstituentPanel& panel, Family family, const PillarGrid& vertices,
                          const std::vector<double>& half_widths, int min_count) {
  if (family != Family::CDI && family != Family::IPCA) throw ValidationError("bucket_spreads: unknown family");
  if (half_widths.size() != vertices.size()) throw ValidationError("bucket_spreads: one half-width per vertex");
  for (double h : half_widths)
    if (!(h > 0)) throw ValidationError("bucket_spreads: half-widths must be positive");
  if (min_count < 1) throw ValidationError("bucket_spreads: min_count must be >= 1");
  struct Acc {
    double ws = 0, w = 0;
    int count = 0;
  };
  std::map<Date, std::vector<Acc>> by_date;
  for (const auto& r : panel.rows) {
    if (r.family != family) continue;
    auto& acc = by_date[r.date];
    acc.resize(vertices.size());
    for (std::size_t k = 0; k < vertices.size(); ++k) {
      if (std::abs(r.duration - vertices[k]) <= half_widths[k]) {
        acc[k].ws += r.weight * r.spread;
        acc[k].w += r.weight;
        acc[k].count += 1;
      }
    }
  }
  CurvePanel out;
  out.grid = vertices;
  out.kind = family == Family::CDI ? SeriesKind::CdiSpread : SeriesKind::IpcaSpread;
  out.values.resize(Eigen::Index(by_date.size()), Eigen::Index(vertices.size()));
  Eigen::Index i = 0;
  for (const auto& [d, acc] : by_date) {
    out.dates.push_back(d);
    for (std::size_t k = 0; k < vertices.size(); ++k) {
      const auto& a = acc[k];
      out.values(i, Eigen::Index(k)) = (a.count >= min_count && a.w > 0) ? a.ws / a.w : kNaN;
    }
    ++i;
  }
  return out;
}

}  // namespace hjm3
