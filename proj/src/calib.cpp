#include "hjm3/calib.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "nls.hpp"

namespace hjm3 {

ChangeMatrix weekly_changes(const CurvePanel& panel, int min_rows) {
  panel.validate();
  const bool spread = is_spread_kind(panel.kind);
  const auto n = Eigen::Index(panel.grid.size());
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 1; r < Eigen::Index(panel.rows()); ++r) {
    const Eigen::VectorXd d = panel.values.row(r) - panel.values.row(r - 1);
    bool any = false, all = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::isnan(d[i]))
        all = false;
      else
        any = true;
    }
    if (spread ? any : all) keep.push_back(r);
  }
  if (int(keep.size()) < min_rows)
    throw ValidationError("weekly_changes: " + std::to_string(keep.size()) + " usable rows, need at least " +
                          std::to_string(min_rows));
  ChangeMatrix out;
  out.grid = panel.grid;
  out.spread = spread;
  out.values.resize(Eigen::Index(keep.size()), n);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto r = keep[k];
    out.dates.push_back(panel.dates[std::size_t(r)]);
    out.values.row(Eigen::Index(k)) = panel.values.row(r) - panel.values.row(r - 1);
  }
  return out;
}

Eigen::MatrixXd PcaResult::scaled_loadings() const {
  Eigen::MatrixXd L(retained, eigenvectors.rows());
  for (int k = 0; k < retained; ++k) L.row(k) = std::sqrt(std::max(eigenvalues[k], 0.0)) * eigenvectors.col(k).transpose();
  return L;
}

namespace {

// Sample covariance, pairwise over rows where both columns are present.
Eigen::MatrixXd pairwise_cov(const Eigen::MatrixXd& X) {
  const auto p = X.cols();
  Eigen::MatrixXd S(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      double si = 0, sj = 0;
      int cnt = 0;
      for (Eigen::Index r = 0; r < X.rows(); ++r)
        if (!std::isnan(X(r, i)) && !std::isnan(X(r, j))) {
          si += X(r, i);
          sj += X(r, j);
          ++cnt;
        }
      if (cnt < 2) throw ValidationError("pca_block: fewer than 2 joint observations for a pillar pair");
      const double mi = si / cnt, mj = sj / cnt;
      double acc = 0;
      for (Eigen::Index r = 0; r < X.rows(); ++r)
        if (!std::isnan(X(r, i)) && !std::isnan(X(r, j))) acc += (X(r, i) - mi) * (X(r, j) - mj);
      S(i, j) = S(j, i) = acc / (cnt - 1);
    }
  }
  return S;
}

}  // namespace

PcaResult pca_block(const ChangeMatrix& changes, double dt, const RetentionRule& rule, Block block) {
  if (!(dt > 0)) throw ValidationError("pca_block: dt must be positive");
  const auto p = changes.values.cols();
  if (changes.values.rows() < p) throw ValidationError("pca_block: need rows >= columns");
  if (rule.count < 1) throw ValidationError("pca_block: retention count must be >= 1");
  Eigen::MatrixXd S;
  if (changes.spread) {
    S = pairwise_cov(changes.values);
  } else {
    if (changes.values.hasNaN()) throw ValidationError("pca_block: missing values in a rate block");
    const Eigen::MatrixXd Xc = changes.values.rowwise() - changes.values.colwise().mean();
    S = Xc.transpose() * Xc / double(Xc.rows() - 1);
  }
  S /= dt;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) throw ValidationError("pca_block: eigendecomposition failed");
  PcaResult out;
  out.block = block;
  out.grid = changes.grid;
  out.n_obs = int(changes.rows());
  out.eigenvalues.resize(p);
  out.eigenvectors.resize(p, p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const auto src = p - 1 - k;  // ascending -> descending
    out.eigenvalues[k] = std::max(es.eigenvalues()[src], 0.0);
    Eigen::VectorXd v = es.eigenvectors().col(src);
    if (v[p - 1] < 0 || (v[p - 1] == 0 && v.sum() < 0)) v = -v;
    out.eigenvectors.col(k) = v;
  }
  const double total = out.eigenvalues.sum();
  if (!(total > 0)) throw ValidationError("pca_block: rank-deficient with zero variance");
  out.shares = out.eigenvalues / total;
  int kept = std::min<int>(rule.count, int(p));
  if (rule.conditional_from > 0) {
    for (int k = rule.conditional_from; k <= kept; ++k)
      if (out.shares[k - 1] < rule.min_share) {
        kept = k - 1;
        break;
      }
  }
  out.retained = std::max(kept, 1);
  return out;
}

namespace {

Eigen::MatrixXd shape_design(const ShapeFamily& f, Block block, const PillarGrid& grid) {
  const int q = block == Block::S ? 2 : 3;
  Eigen::MatrixXd G(Eigen::Index(grid.size()), q);
  for (std::size_t i = 0; i < grid.size(); ++i) G.row(Eigen::Index(i)) = shape_eval(f, block, grid[i]).transpose();
  return G;
}

// Amplitudes by linear least squares for fixed decays: G A^T ~ L^T.
Eigen::MatrixXd solve_amplitudes(const Eigen::MatrixXd& G, const Eigen::MatrixXd& L) {
  return G.colPivHouseholderQr().solve(L.transpose()).transpose();
}

constexpr double kDecayLo = 0.05, kDecayHi = 10.0;

}  // namespace

LoadingFit fit_loadings(const PcaResult& pca, const ShapeFamily& init, const std::optional<ShapeFamily>& shared,
                        double c2_cap) {
  if (pca.retained < 1) throw ValidationError("fit_loadings: no retained factors");
  const Block block = pca.block;
  const bool spread = block == Block::S;
  const Eigen::Index q = spread ? 2 : 3;
  if (Eigen::Index(pca.grid.size()) < q) throw ValidationError("fit_loadings: fewer pillars than shapes");
  const Eigen::MatrixXd L = pca.scaled_loadings();
  const double tss = L.squaredNorm();

  auto finish = [&](const ShapeFamily& f, bool conv) {
    LoadingFit fit;
    fit.shape = f;
    const auto G = shape_design(f, block, pca.grid);
    fit.A = solve_amplitudes(G, L);
    const double ssr = (L - fit.A * G.transpose()).squaredNorm();
    fit.r2 = tss > 0 ? 1.0 - ssr / tss : 1.0;
    fit.converged = conv;
    return fit;
  };
  if (shared) {
    ShapeFamily f = init;
    if (spread)
      f.c2 = shared->c2;
    else {
      f.b2 = shared->b2;
      f.b3 = shared->b3;
    }
    return finish(f, true);
  }

  const double hi = spread ? c2_cap : kDecayHi;
  auto decode = [&](const Eigen::VectorXd& u) {
    ShapeFamily f = init;
    if (spread)
      f.c2 = detail::to_bounded(u[0], kDecayLo, hi);
    else {
      f.b2 = detail::to_bounded(u[0], kDecayLo, hi);
      f.b3 = detail::to_bounded(u[1], kDecayLo, hi);
    }
    return f;
  };
  const int n_resid = int(L.size());
  detail::ResidualFn res = [&](const Eigen::VectorXd& u, Eigen::VectorXd& r) {
    const auto G = shape_design(decode(u), block, pca.grid);
    const Eigen::MatrixXd E = L - solve_amplitudes(G, L) * G.transpose();
    r = Eigen::Map<const Eigen::VectorXd>(E.data(), E.size());
  };
  auto clamp = [&](double x) { return std::clamp(x, kDecayLo * 1.02, hi * 0.98); };

  std::vector<std::vector<double>> starts;
  if (spread) {
    starts.push_back({clamp(init.c2)});
    for (double c : {0.1, 0.3, 0.7, 1.5, 3.0, 4.5}) starts.push_back({clamp(c)});
  } else {
    starts.push_back({clamp(init.b2), clamp(init.b3)});
    // half-life of the slope loading and peak of the curvature loading
    const auto& t = pca.grid.tenors();
    if (L.rows() >= 2) {
      const Eigen::VectorXd s = L.row(1).transpose();
      const double a = s[0] - s[s.size() - 1];
      double th = t.back();
      for (Eigen::Index i = 1; i < s.size(); ++i)
        if (std::abs(s[i] - s[s.size() - 1]) <= 0.5 * std::abs(a)) {
          th = t[std::size_t(i)];
          break;
        }
      double b3h = init.b3;
      if (L.rows() >= 3) {
        Eigen::Index im;
        L.row(2).cwiseAbs().maxCoeff(&im);
        b3h = 1.0 / std::max(t[std::size_t(im)], 0.1);
      }
      starts.push_back({clamp(std::log(2.0) / th), clamp(b3h)});
    }
    for (double b2 : {0.1, 0.3, 0.7, 1.5, 3.0, 6.0})
      for (double b3 : {0.2, 0.5, 1.0, 2.0, 3.5, 6.0}) starts.push_back({b2, b3});
  }

  detail::NlsResult best;
  best.ssr = std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    Eigen::VectorXd u0(Eigen::Index(s.size()));
    for (std::size_t k = 0; k < s.size(); ++k) u0[Eigen::Index(k)] = detail::from_bounded(s[k], kDecayLo, hi);
    auto r = detail::least_squares(res, n_resid, u0, {}, 1e-14, 2000);
    if (std::isfinite(r.ssr) && r.ssr < best.ssr) best = r;
  }
  if (!std::isfinite(best.ssr)) throw ValidationError("fit_loadings: optimizer non-convergence");
  auto polished = detail::least_squares(res, n_resid, best.x, {}, 1e-15, 2000);
  if (std::isfinite(polished.ssr) && polished.ssr <= best.ssr) best = polished;
  return finish(decode(best.x), best.converged || best.ssr <= 1e-20 * std::max(tss, 1e-300));
}

ModelKind parse_model(std::string_view s) {
  if (s == "A" || s == "a") return ModelKind::A;
  if (s == "B" || s == "b") return ModelKind::B;
  throw ValidationError("unknown model '" + std::string(s) + "' (expected A or B)");
}

SpreadFit fit_spread_block(const PcaResult& pca, ModelKind model, const ShapeFamily& init, double c2_cap) {
  if (pca.block != Block::S) throw ValidationError("fit_spread_block: PCA is not a spread block");
  SpreadFit out;
  auto empirical = [&] {
    EmpiricalLoadings e;
    e.pillars = pca.grid.tenors();
    e.values = pca.scaled_loadings();
    out.parametric = false;
    out.empirical = e;
    out.r2 = 1.0;
  };
  if (model == ModelKind::B) {
    empirical();
    return out;
  }
  const auto fit = fit_loadings(pca, init, std::nullopt, c2_cap);
  if (fit.shape.c2 >= c2_cap * (1.0 - 1e-3)) {
    out.warnings.push_back("spread fit drove c2 to the cap " + fmt_double(c2_cap) +
                           "; falling back to empirical loadings");
    empirical();
    out.c2 = fit.shape.c2;
    return out;
  }
  out.A_S = fit.A;
  out.c2 = fit.shape.c2;
  out.r2 = fit.r2;
  return out;
}

FactorScores factor_scores(const std::vector<ChangeMatrix>& changes, const std::vector<PcaResult>& pcas) {
  if (changes.size() != pcas.size() || changes.empty())
    throw ValidationError("factor_scores: one PCA per change matrix required");
  std::map<Date, int> count;
  std::vector<std::map<Date, Eigen::Index>> rows(changes.size());
  for (std::size_t b = 0; b < changes.size(); ++b) {
    if (changes[b].grid.size() != std::size_t(pcas[b].eigenvectors.rows()))
      throw ValidationError("factor_scores: PCA and change grid sizes differ");
    for (Eigen::Index r = 0; r < Eigen::Index(changes[b].rows()); ++r) {
      if (changes[b].values.row(r).hasNaN()) continue;
      rows[b][changes[b].dates[std::size_t(r)]] = r;
      ++count[changes[b].dates[std::size_t(r)]];
    }
  }
  FactorScores out;
  for (const auto& [d, c] : count)
    if (c == int(changes.size())) out.dates.push_back(d);
  if (out.dates.empty()) throw ValidationError("factor_scores: empty date intersection");
  int m = 0;
  static const char* names[] = {"N", "R", "S"};
  for (std::size_t b = 0; b < pcas.size(); ++b) {
    out.block_sizes.push_back(pcas[b].retained);
    for (int k = 0; k < pcas[b].retained; ++k)
      out.labels.push_back(std::string(names[std::min<std::size_t>(b, 2)]) + std::to_string(k + 1));
    m += pcas[b].retained;
  }
  out.Z.resize(Eigen::Index(out.dates.size()), m);
  int col = 0;
  for (std::size_t b = 0; b < pcas.size(); ++b) {
    const Eigen::MatrixXd V = pcas[b].eigenvectors.leftCols(pcas[b].retained);
    for (std::size_t r = 0; r < out.dates.size(); ++r)
      out.Z.block(Eigen::Index(r), col, 1, pcas[b].retained) = changes[b].values.row(rows[b][out.dates[r]]) * V;
    col += pcas[b].retained;
  }
  return out;
}

CorrelationResult correlation_matrix(const FactorScores& scores, int min_rows, double alarm) {
  const auto& Z = scores.Z;
  if (Z.rows() < min_rows)
    throw ValidationError("correlation_matrix: " + std::to_string(Z.rows()) + " rows, need at least " +
                          std::to_string(min_rows));
  const Eigen::MatrixXd Zc = Z.rowwise() - Z.colwise().mean();
  const Eigen::MatrixXd C = Zc.transpose() * Zc / double(Z.rows() - 1);
  Eigen::VectorXd sd = C.diagonal().cwiseSqrt();
  for (Eigen::Index i = 0; i < sd.size(); ++i)
    if (!(sd[i] > 0)) throw ValidationError("correlation_matrix: zero-variance column " + std::to_string(i));
  CorrelationResult out;
  out.rho = sd.cwiseInverse().asDiagonal() * C * sd.cwiseInverse().asDiagonal();
  out.rho = 0.5 * (out.rho + out.rho.transpose()).eval();
  out.rho.diagonal().setOnes();
  int off = 0;
  for (int bs : scores.block_sizes) {
    for (int i = 0; i < bs; ++i)
      for (int j = 0; j < i; ++j) out.max_within_block = std::max(out.max_within_block, std::abs(out.rho(off + i, off + j)));
    off += bs;
  }
  if (out.max_within_block > alarm)
    out.warnings.push_back("within-block factor correlation " + fmt_double(out.max_within_block) + " exceeds " +
                           fmt_double(alarm));
  return out;
}

Eigen::MatrixXi within_block_zero_mask(const std::vector<int>& block_sizes) {
  const int m = std::accumulate(block_sizes.begin(), block_sizes.end(), 0);
  Eigen::MatrixXi M = Eigen::MatrixXi::Zero(m, m);
  int off = 0;
  for (int bs : block_sizes) {
    for (int i = 0; i < bs; ++i)
      for (int j = 0; j < bs; ++j)
        if (i != j) M(off + i, off + j) = 1;
    off += bs;
  }
  return M;
}

namespace {

double min_eig(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

Eigen::MatrixXd psd_project(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  const Eigen::VectorXd l = es.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd X = es.eigenvectors() * l.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (X + X.transpose());
}

// Eigenvalue floor plus rescaling to unit diagonal; the floor is raised until the rescaled matrix clears it.
Eigen::MatrixXd floor_renormalize(const Eigen::MatrixXd& A, double floor) {
  double f = floor;
  for (int it = 0; it < 64; ++it) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    const Eigen::VectorXd l = es.eigenvalues().cwiseMax(f);
    Eigen::MatrixXd X = es.eigenvectors() * l.asDiagonal() * es.eigenvectors().transpose();
    const Eigen::VectorXd d = X.diagonal().cwiseSqrt().cwiseInverse();
    X = d.asDiagonal() * X * d.asDiagonal();
    X = 0.5 * (X + X.transpose()).eval();
    X.diagonal().setOnes();
    if (min_eig(X) >= floor) return X;
    f *= 2.0;
  }
  throw ValidationError("nearest_correlation: eigenvalue floor could not be met");
}

// Convex combination with the identity; keeps the unit diagonal and any zero entries.
Eigen::MatrixXd shrink_to_floor(const Eigen::MatrixXd& A, double floor) {
  const double lmin = min_eig(A);
  if (lmin >= floor) return A;
  double a = (floor - lmin) / (1.0 - lmin);
  Eigen::MatrixXd X;
  for (int it = 0; it < 64; ++it) {
    X = (1.0 - a) * A + a * Eigen::MatrixXd::Identity(A.rows(), A.cols());
    X.diagonal().setOnes();
    if (min_eig(X) >= floor) return X;
    a = std::min(1.0, a * (1.0 + 1e-6) + 1e-15);
  }
  return X;
}

}  // namespace

NearestCorrResult nearest_correlation(const Eigen::MatrixXd& A, double eig_floor,
                                      const std::optional<Eigen::MatrixXi>& fixed_zero, int max_iter, double tol) {
  const auto n = A.rows();
  if (n == 0 || A.cols() != n) throw ValidationError("nearest_correlation: input must be square");
  if (!A.allFinite()) throw ValidationError("nearest_correlation: non-finite entries");
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-10) throw ValidationError("nearest_correlation: input not symmetric");
  if ((A.diagonal().array() - 1.0).abs().maxCoeff() > 1e-10)
    throw ValidationError("nearest_correlation: input diagonal must be 1");
  if (!(eig_floor >= 0) || eig_floor >= 1) throw ValidationError("nearest_correlation: eig_floor must be in [0, 1)");
  if (fixed_zero && (fixed_zero->rows() != n || fixed_zero->cols() != n))
    throw ValidationError("nearest_correlation: mask dimension mismatch");

  auto apply_unit = [&](Eigen::MatrixXd& Y) {
    Y.diagonal().setOnes();
    if (fixed_zero)
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
          if (i != j && (*fixed_zero)(i, j)) Y(i, j) = 0.0;
  };
  Eigen::MatrixXd start = 0.5 * (A + A.transpose());
  start.diagonal().setOnes();
  NearestCorrResult out;
  {
    Eigen::MatrixXd masked = start;
    apply_unit(masked);
    if (masked == start && min_eig(start) >= eig_floor) {
      out.matrix = start;
      out.method = "unchanged";
      return out;
    }
  }

  Eigen::MatrixXd Y = start, dS = Eigen::MatrixXd::Zero(n, n), X = start;
  apply_unit(Y);
  bool conv = false;
  int it = 0;
  for (; it < max_iter; ++it) {
    const Eigen::MatrixXd R = Y - dS;
    const Eigen::MatrixXd Xn = psd_project(R);
    dS = Xn - R;
    Eigen::MatrixXd Yn = Xn;
    apply_unit(Yn);
    const double ny = std::max(Yn.norm(), 1.0);
    const double dx = (Xn - X).norm() / ny, dy = (Yn - Y).norm() / ny, gap = (Yn - Xn).norm() / ny;
    X = Xn;
    Y = Yn;
    if (std::max({dx, dy, gap}) < tol) {
      conv = true;
      ++it;
      break;
    }
  }
  if (!conv) throw ValidationError("nearest_correlation: no convergence after " + std::to_string(max_iter) + " iterations");
  out.iterations = it;
  out.changed = true;
  Y = 0.5 * (Y + Y.transpose()).eval();
  if (fixed_zero) {
    out.matrix = shrink_to_floor(Y, eig_floor);
    out.method = "alternating_projections";
    return out;
  }
  const Eigen::MatrixXd ap = floor_renormalize(Y, eig_floor);
  const Eigen::MatrixXd clip = floor_renormalize(start, eig_floor);
  if ((clip - start).norm() < (ap - start).norm()) {
    out.matrix = clip;
    out.method = "eigen_clip";
  } else {
    out.matrix = ap;
    out.method = "alternating_projections";
  }
  return out;
}

}  // namespace hjm3
