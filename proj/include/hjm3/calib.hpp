#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "hjm3/marketdata.hpp"
#include "hjm3/volarch.hpp"

namespace hjm3 {

// Weekly changes at constant time-to-maturity. Spread panels keep NaN cells (pairwise deletion downstream).
struct ChangeMatrix {
  std::vector<Date> dates;  // date of the later observation
  PillarGrid grid;
  Eigen::MatrixXd values;
  bool spread = false;

  std::size_t rows() const { return dates.size(); }
};

ChangeMatrix weekly_changes(const CurvePanel& panel, int min_rows = 30);

// `count` factors are kept; factors with 1-based index >= conditional_from must each explain
// at least min_share of total variance. conditional_from = 0 disables the share test.
struct RetentionRule {
  int count = 3;
  int conditional_from = 0;
  double min_share = 0.03;
};

struct PcaResult {
  Block block = Block::N;
  PillarGrid grid;
  Eigen::VectorXd eigenvalues;   // decimal^2 per year, descending
  Eigen::MatrixXd eigenvectors;  // pillars x pillars, column k = factor k
  Eigen::VectorXd shares;
  int retained = 0;
  int n_obs = 0;

  // Target loadings sqrt(lambda_k) v_k for the retained factors (retained x pillars).
  Eigen::MatrixXd scaled_loadings() const;
};

PcaResult pca_block(const ChangeMatrix& changes, double dt, const RetentionRule& rule, Block block);

struct LoadingFit {
  Eigen::MatrixXd A;  // retained x shapes
  ShapeFamily shape;
  double r2 = 0;
  bool converged = false;
};

// Rate blocks use g-shapes (b2, b3), the spread block h-shapes (c2).
LoadingFit fit_loadings(const PcaResult& pca, const ShapeFamily& init,
                        const std::optional<ShapeFamily>& shared_decays = std::nullopt, double c2_cap = 5.0);

enum class ModelKind { A, B };
ModelKind parse_model(std::string_view s);

struct SpreadFit {
  bool parametric = true;
  Eigen::MatrixXd A_S;
  double c2 = 0;
  double r2 = 0;
  std::optional<EmpiricalLoadings> empirical;
  std::vector<std::string> warnings;
};

SpreadFit fit_spread_block(const PcaResult& pca, ModelKind model, const ShapeFamily& init, double c2_cap = 5.0);

struct FactorScores {
  std::vector<Date> dates;
  Eigen::MatrixXd Z;  // rows x m
  std::vector<std::string> labels;
  std::vector<int> block_sizes;  // N, R, S
};

// Full-row intersection across blocks; blocks are given in N, R, S order.
FactorScores factor_scores(const std::vector<ChangeMatrix>& changes, const std::vector<PcaResult>& pcas);

struct CorrelationResult {
  Eigen::MatrixXd rho;
  double max_within_block = 0;
  std::vector<std::string> warnings;
};

CorrelationResult correlation_matrix(const FactorScores& scores, int min_rows = 30, double within_block_alarm = 0.15);

struct NearestCorrResult {
  Eigen::MatrixXd matrix;
  int iterations = 0;
  bool changed = false;
  std::string method;  // "unchanged", "alternating_projections", "eigen_clip"
};

// Optional `fixed_zero` marks off-diagonal entries held at zero through the projections.
NearestCorrResult nearest_correlation(const Eigen::MatrixXd& rho_hat, double eig_floor = 1e-8,
                                      const std::optional<Eigen::MatrixXi>& fixed_zero = std::nullopt,
                                      int max_iter = 10000, double tol = 1e-12);

// Within-block zero pattern for the given block sizes.
Eigen::MatrixXi within_block_zero_mask(const std::vector<int>& block_sizes);

enum class ChiBasis { Poly, Spline };

struct ChiAdjustment {
  ChiBasis basis = ChiBasis::Poly;
  int degree = 0;
  std::vector<double> knots;  // interior knots for the cubic spline
  Eigen::VectorXd coefficients;
  std::vector<double> pillars;
  std::vector<double> residual;  // gap minus chi at each pillar
  double sup_norm = 0;
  std::vector<std::string> warnings;

  double eval(double tau) const;
};

ChiAdjustment chi_adjust(const std::vector<double>& pillars, const std::vector<double>& gap,
                         const std::vector<double>& weights, ChiBasis basis, int degree = 0,
                         const std::vector<double>& knots = {}, double alarm = 10 * kBp);

struct FxCalibration {
  Eigen::VectorXd alpha;  // m-vector, decimal/sqrt(yr)
  double total = 0;
  double spanned = 0;
  double idiosyncratic = 0;
  double r2 = 0;
  int n_obs = 0;
  int n_regression = 0;
  std::vector<std::string> warnings;
};

// Factors allowed in the direction regression: N1 plus the given block.
std::vector<int> fx_regressors(const FactorScores& scores, Block block, bool unrestricted);

FxCalibration calibrate_sigma_I(const std::vector<MonthlyObservation>& ipca, const FactorScores& scores,
                                const Eigen::MatrixXd& rho, bool unrestricted = false, int min_months = 24);

FxCalibration calibrate_sigma_J(const CurvePanel& spread_panel, const FactorScores& scores, double ref_pillar,
                                const Eigen::MatrixXd& rho, bool unrestricted = false, int min_obs = 30);

// Full pipeline configuration; see README for the JSON layout.
struct CalibrationConfig {
  ModelKind model = ModelKind::A;
  std::optional<Date> from, to;
  int anchor_weekday = 4;
  std::vector<double> nominal_pillars{0.25, 0.5, 1, 2, 3, 5, 7, 10};
  std::vector<double> real_pillars{1, 2, 3, 5, 7, 10};
  std::vector<double> spread_pillars{1, 2, 3, 5};
  RetentionRule nominal_rule{3, 3, 0.03};
  RetentionRule real_rule{2, 0, 0.03};
  RetentionRule spread_rule{2, 2, 0.03};
  ShapeFamily shape_init;
  double c2_cap = 5.0;
  double sigma_J_ref_pillar = 1.0;
  double eig_floor = 1e-8;
  ChiBasis chi_basis = ChiBasis::Poly;
  int chi_degree = 0;
  std::vector<double> chi_knots;
  double chi_alarm = 10 * kBp;
  bool absorb_chi = false;
  int ipca_lag_days = 0;
  bool unrestricted_fx = false;
  double dt = 1.0 / 52.0;
};

CalibrationConfig config_from_json(const nlohmann::json& j);

struct CalibrationInputs {
  CurvePanel nominal, real, cdi, ipca;  // any sampling frequency; resampled to weekly
  std::vector<MonthlyObservation> ipca_index;
};

struct CalibrationResult {
  BlockVolSpec spec;
  InitialCurves init;
  nlohmann::json report;
  std::vector<std::string> warnings;
};

CalibrationResult calibrate(const CalibrationInputs& in, const CalibrationConfig& cfg);

}  // namespace hjm3
