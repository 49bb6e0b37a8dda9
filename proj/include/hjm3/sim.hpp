#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "hjm3/marketdata.hpp"
#include "hjm3/simd.hpp"
#include "hjm3/volarch.hpp"

namespace hjm3 {

struct SimConfig {
  double dt = 1.0 / 52.0;
  double horizon = 5.0;
  int n_paths = 2000;
  std::uint64_t seed = 1;
  std::vector<double> record_pillars{0.25, 0.5, 1, 2, 3, 5, 7, 10};
  int record_every = 1;  // in steps; the final step is always recorded
  bool antithetic = false;
  int threads = 1;
  std::optional<simd::Isa> kernel;  // default: best available
  double grid_tail = 10.0;          // dense grid extends to grid_tail + horizon

  void validate() const;
};

// Uniform spacing min(dt, 0.25) from 0 to max(tail + horizon, last pillar), with the pillars inserted exactly.
std::vector<double> build_sim_grid(const std::vector<double>& pillars, double dt, double horizon,
                                   double tail = 10.0);

struct SimState {
  std::shared_ptr<const std::vector<double>> grid;
  std::vector<double> fN, fR, sCDI;
  double I = 1, J = 1, K = 1;
  double BN = 1, BR = 1, BC = 1;
  double t = 0;
};

// Dense state from pillar curves: linear between pillars, flat outside, node values copied exactly.
SimState make_initial_state(const InitialCurves& init, std::shared_ptr<const std::vector<double>> grid);

Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& rho);

// Value at tau + dt by linear interpolation on the grid, flat beyond the last node.
std::vector<double> transport(const std::vector<double>& grid, const std::vector<double>& f, double dt);

double discount_from_forwards(const std::vector<double>& grid, const std::vector<double>& f, double T);

// Time-invariant quantities for one spec, grid and step size.
class SimModel {
 public:
  SimModel(const BlockVolSpec& spec, std::shared_ptr<const std::vector<double>> grid, double dt,
           simd::Kernels kernels = simd::default_kernels());

  // One step of the scheme; xi holds m standard normals. `scratch` is resized as needed.
  void step(SimState& s, const double* xi, std::vector<double>& scratch) const;

  std::size_t grid_size() const { return grid_->size(); }
  const std::vector<double>& grid() const { return *grid_; }
  int factors() const { return m_; }
  double dt() const { return dt_; }
  const simd::Kernels& kernels() const { return kernels_; }

 private:
  struct CurveCoeffs {
    int offset = 0, n_factors = 0;
    std::vector<double> drift_dt;
    std::vector<double> vol;  // n_factors x n, row-major
  };
  void step_curve(const CurveCoeffs& c, const std::vector<double>& dw, std::vector<double>& f,
                  std::vector<double>& scratch) const;

  std::shared_ptr<const std::vector<double>> grid_;
  double dt_, sqrt_dt_;
  int m_;
  simd::Kernels kernels_;
  std::vector<std::int32_t> idx_;
  std::vector<double> w_;
  CurveCoeffs N_, R_, S_;
  Eigen::MatrixXd L_;
  Eigen::VectorXd sigma_I_, sigma_J_;
  double var_I_, var_J_;
};

// Convenience form of a single step that builds the model on the fly.
SimState step(const SimState& s, const BlockVolSpec& spec, const Eigen::VectorXd& xi, double dt);

enum class ScalarField { I, J, K, BN, BR, BC, rN, rR, rC };
inline constexpr int kScalarFields = 9;
enum class CurveField { fN, fR, sCDI, sIPCA };
inline constexpr int kCurveFields = 4;

struct SimOutput {
  std::vector<double> pillars;
  std::vector<double> times;
  std::vector<int> steps;
  int n_paths = 0;
  std::vector<double> scalars;  // path x record x field
  std::vector<double> curves;   // path x record x curve x pillar
  std::vector<int> aborted;     // path indices
  std::string kernel;

  void resize(int paths, std::size_t records, std::size_t n_pillars);
  std::size_t records() const { return times.size(); }
  double& scalar(int path, std::size_t rec, ScalarField f) {
    return scalars[(std::size_t(path) * records() + rec) * kScalarFields + std::size_t(f)];
  }
  double scalar(int path, std::size_t rec, ScalarField f) const {
    return scalars[(std::size_t(path) * records() + rec) * kScalarFields + std::size_t(f)];
  }
  double* curve_row(int path, std::size_t rec, CurveField c) {
    return &curves[((std::size_t(path) * records() + rec) * kCurveFields + std::size_t(c)) * pillars.size()];
  }
  const double* curve_row(int path, std::size_t rec, CurveField c) const {
    return &curves[((std::size_t(path) * records() + rec) * kCurveFields + std::size_t(c)) * pillars.size()];
  }
  double inflation_ratio(int path, std::size_t rec) const;
  double credit_ratio(int path, std::size_t rec) const;
};

SimOutput run_paths(const SimState& init, const BlockVolSpec& spec, const SimConfig& cfg);

void write_sim_csv(const SimOutput& out, const std::string& path);
SimOutput read_sim_csv(const std::string& path);

}  // namespace hjm3
