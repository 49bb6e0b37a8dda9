#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "hjm3/calib.hpp"
#include "hjm3/marketdata.hpp"
#include "hjm3/sim.hpp"
#include "hjm3/volarch.hpp"

namespace hjm3 {

enum class DeflatedRatio { Inflation, Credit };  // I B^R / B^N and J B^C / B^N
std::string to_string(DeflatedRatio r);

struct MartingaleRow {
  DeflatedRatio ratio;
  double horizon = 0;
  double target = 0;
  double mean = 0;     // of the ratio divided by its initial value
  double bias_bp = 0;  // (mean - 1) * 1e4
  double se_bp = 0;
  double z = 0;
  int n = 0;
  bool flagged = false;
};

struct MartingaleReport {
  double alpha = 0.05;
  double z_crit = 0;
  std::vector<MartingaleRow> rows;
  double max_abs_z() const;
  bool pass() const;
};

MartingaleReport martingale_test(const SimOutput& sim, const std::vector<double>& horizons, double alpha = 0.05);

struct TriangleReport {
  double max_violation = 0;
  int path = -1;
  int record = -1;
  int pillar = -1;
  double eps = 1e-10;
  bool pass() const { return max_violation <= eps; }
};

// max |sIPCA - sCDI - (fN - fR)| over paths, records and pillars; NaN counts as a violation.
TriangleReport triangle_check(const SimOutput& sim, double eps = 1e-10);

struct SmoothnessWindow {
  std::string name;
  double lo, hi;
};

struct SmoothnessRow {
  std::string curve;
  std::string window;
  double baseline = 0;
  double p95 = 0;
  double max = 0;
  double ratio = 0;  // p95 / baseline
};

// |second divided difference| / max|f| over the window; for uniform spacing the numerator is
// f[i+1] - 2 f[i] + f[i-1] and the denominator (tau[i+1]-tau[i])(tau[i]-tau[i-1]).
double normalized_second_difference(const std::vector<double>& tau, const std::vector<double>& f, double lo, double hi);

std::vector<SmoothnessRow> smoothness_metric(const SimOutput& sim, const std::vector<SmoothnessWindow>& windows);

struct CoverageInput {
  std::string variable;
  CurvePanel oos;                  // weekly levels
  std::vector<double> model_vol;  // annualized, one per pillar of oos
};

struct CoverageRow {
  std::string variable;
  double tenor = 0;
  int inside = 0;
  int n = 0;
  double coverage = 0;
  double model_vol = 0;
};

struct CoverageReport {
  double level = 0.9;
  std::vector<CoverageRow> rows;
};

double coverage_fraction(int inside, int n);

CoverageReport coverage_test(const std::vector<CoverageInput>& inputs, double level = 0.90, double dt = 1.0 / 52.0,
                             int min_rows = 30);

struct VolRow {
  std::string variable;
  double tenor = 0;
  double model = 0;
  double realized = 0;
  double ratio = 0;  // realized / model
};

double vol_ratio(double realized, double model);

// Model vol at tenor: Euclidean norm of the block's loading vector.
double model_vol(const BlockVolSpec& spec, Block block, double tau);
double realized_vol(const CurvePanel& panel, std::size_t pillar, double periods_per_year = 52.0);

std::vector<VolRow> vol_reproduction(const BlockVolSpec& spec, const std::vector<std::pair<Block, CurvePanel>>& oos);

struct CorrRow {
  std::string pair;
  int i = 0, j = 0;
  double in_sample = 0;
  double oos = 0;
  double diff = 0;
};

double column_correlation(const Eigen::MatrixXd& Z, int i, int j);

CorrRow corr_row(std::string pair, int i, int j, double in_sample, double oos);

std::vector<CorrRow> corr_reproduction(const FactorScores& in_sample, const FactorScores& oos,
                                       const std::vector<std::pair<int, int>>& pairs);

struct Moments {
  double mean = 0, sd = 0, skew = 0, excess_kurtosis = 0;
  int n = 0;
};

Moments moments(const std::vector<double>& x);

nlohmann::json to_json(const MartingaleReport& r);
nlohmann::json to_json(const TriangleReport& r);
nlohmann::json to_json(const std::vector<SmoothnessRow>& rows);
nlohmann::json to_json(const CoverageReport& r);
nlohmann::json to_json(const std::vector<VolRow>& rows);

}  // namespace hjm3
