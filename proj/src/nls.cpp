#include "nls.hpp"

#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

namespace hjm3::detail {

namespace {

struct Functor {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  const ResidualFn* r;
  const JacobianFn* j;
  int n_in, n_out;
  int* evals;

  int inputs() const { return n_in; }
  int values() const { return n_out; }
  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& f) const {
    ++*evals;
    (*r)(x, f);
    return 0;
  }
  int df(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const {
    (*j)(x, jac);
    return 0;
  }
};

bool converged_status(int s) {
  using S = Eigen::LevenbergMarquardtSpace::Status;
  return s == S::RelativeReductionTooSmall || s == S::RelativeErrorTooSmall ||
         s == S::RelativeErrorAndReductionTooSmall || s == S::CosinusTooSmall || s == S::FtolTooSmall ||
         s == S::XtolTooSmall || s == S::GtolTooSmall;
}

template <class F>
NlsResult run(F& f, Eigen::VectorXd x, double tol, int max_evals, const Functor& base) {
  Eigen::LevenbergMarquardt<F> lm(f);
  lm.parameters.ftol = tol;
  lm.parameters.xtol = tol;
  lm.parameters.maxfev = max_evals;
  const int status = int(lm.minimize(x));
  NlsResult out;
  out.status = status;
  out.converged = converged_status(status);
  out.x = x;
  Eigen::VectorXd res(base.n_out);
  (*base.r)(x, res);
  out.ssr = res.squaredNorm();
  out.evaluations = *base.evals;
  return out;
}

}  // namespace

NlsResult least_squares(const ResidualFn& r, int n_resid, Eigen::VectorXd x0, const JacobianFn& jac, double tol,
                        int max_evals) {
  int evals = 0;
  Functor f{&r, &jac, int(x0.size()), n_resid, &evals};
  if (jac) return run(f, std::move(x0), tol, max_evals, f);
  Eigen::NumericalDiff<Functor, Eigen::Central> nd(f);
  return run(nd, std::move(x0), tol, max_evals, f);
}

}  // namespace hjm3::detail
