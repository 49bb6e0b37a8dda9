#pragma once

#include <Eigen/Dense>
#include "json.hpp"
#include <optional>
#include <vector>

#include "hjm3/common.hpp"

namespace hjm3 {

struct ShapeFamily {
  double b2 = 0.730;
  double b3 = 3.436;
  double c2 = 3.75;
  void validate() const;
};

// Spread loadings given directly at vertices, linearly interpolated and flat outside.
struct EmpiricalLoadings {
  std::vector<double> pillars;
  Eigen::MatrixXd values;  // m_S x pillars, decimal/sqrt(yr)

  Eigen::VectorXd eval(double tau) const;
  // Exact integral over [0, tau] of the interpolated loadings.
  Eigen::VectorXd integral(double tau) const;
};

enum class FxTarget { I, J };

// All amplitudes and loadings are decimal/sqrt(yr).
struct BlockVolSpec {
  ShapeFamily shape;
  Eigen::MatrixXd A_N;  // m_N x 3
  Eigen::MatrixXd A_R;  // m_R x 3
  Eigen::MatrixXd A_S;  // m_S x 2, unused when spread_empirical is set
  std::optional<EmpiricalLoadings> spread_empirical;
  Eigen::VectorXd sigma_I;  // length m
  Eigen::VectorXd sigma_J;  // length m
  Eigen::MatrixXd rho;      // m x m
  bool unrestricted_fx = false;

  int m_N() const { return int(A_N.rows()); }
  int m_R() const { return int(A_R.rows()); }
  int m_S() const { return spread_empirical ? int(spread_empirical->values.rows()) : int(A_S.rows()); }
  int m() const { return m_N() + m_R() + m_S(); }
  int offset(Block b) const;
  int block_size(Block b) const;

  // Throws ValidationError on any broken invariant.
  void validate() const;
};

Eigen::VectorXd shape_eval(const ShapeFamily& f, Block block, double tau);
Eigen::VectorXd cum_integral(const ShapeFamily& f, Block block, double tau);

// Full m-vector supported on the block's indices.
Eigen::VectorXd block_vol(const BlockVolSpec& spec, Block block, double tau);
// Integral of block_vol over [0, tau].
Eigen::VectorXd cum_block_vol(const BlockVolSpec& spec, Block block, double tau);

double weighted_inner(const BlockVolSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

double hjm_drift_own(const BlockVolSpec& spec, Block block, double tau);

enum class FxBlock { R, C };
double fx_drift_correction(const BlockVolSpec& spec, FxBlock block, double tau);

double spread_drift(const BlockVolSpec& spec, double tau);
// Same quantity with the cross-block terms dropped.
double spread_drift_within_block(const BlockVolSpec& spec, double tau);

nlohmann::json to_json(const BlockVolSpec& spec);
BlockVolSpec spec_from_json(const nlohmann::json& j);
BlockVolSpec load_spec(const std::string& path);
void save_spec(const BlockVolSpec& spec, const std::string& path);

}  // namespace hjm3
