#pragma once

#include <Eigen/Dense>
#include <functional>

namespace hjm3::detail {

using ResidualFn = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;
using JacobianFn = std::function<void(const Eigen::VectorXd&, Eigen::MatrixXd&)>;

struct NlsResult {
  Eigen::VectorXd x;
  double ssr = 0;
  int status = 0;
  bool converged = false;
  int evaluations = 0;
};

// MINPACK Levenberg-Marquardt; central differences when no Jacobian is given.
NlsResult least_squares(const ResidualFn& r, int n_resid, Eigen::VectorXd x0, const JacobianFn& jac = {},
                        double tol = 1e-13, int max_evals = 4000);

inline double to_bounded(double u, double lo, double hi) { return lo + (hi - lo) / (1.0 + std::exp(-u)); }
inline double from_bounded(double x, double lo, double hi) {
  const double p = (x - lo) / (hi - lo);
  return std::log(p / (1.0 - p));
}

}  // namespace hjm3::detail
