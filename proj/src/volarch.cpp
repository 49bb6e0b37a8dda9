#include "hjm3/volarch.hpp"

#include <algorithm>
#include <fstream>

namespace hjm3 {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void ShapeFamily::validate() const {
  if (!(b2 > 0) || !(b3 > 0) || !(c2 > 0) || !std::isfinite(b2) || !std::isfinite(b3) || !std::isfinite(c2))
    throw ValidationError("shape decays must be positive and finite");
}

VectorXd EmpiricalLoadings::eval(double tau) const {
  const auto n = pillars.size();
  if (tau <= pillars.front()) return values.col(0);
  if (tau >= pillars.back()) return values.col(Eigen::Index(n - 1));
  auto it = std::upper_bound(pillars.begin(), pillars.end(), tau);
  const auto j = std::size_t(it - pillars.begin());
  const double w = (tau - pillars[j - 1]) / (pillars[j] - pillars[j - 1]);
  return (1.0 - w) * values.col(Eigen::Index(j - 1)) + w * values.col(Eigen::Index(j));
}

VectorXd EmpiricalLoadings::integral(double tau) const {
  VectorXd acc = VectorXd::Zero(values.rows());
  const double t0 = pillars.front();
  acc += std::min(tau, t0) * values.col(0);
  if (tau <= t0) return acc;
  for (std::size_t j = 1; j < pillars.size(); ++j) {
    const double a = pillars[j - 1];
    const double b = std::min(pillars[j], tau);
    if (b <= a) break;
    acc += 0.5 * (b - a) * (values.col(Eigen::Index(j - 1)) + eval(b));
    if (tau <= pillars[j]) return acc;
  }
  acc += (tau - pillars.back()) * values.col(values.cols() - 1);
  return acc;
}

int BlockVolSpec::offset(Block b) const {
  switch (b) {
    case Block::N: return 0;
    case Block::R: return m_N();
    case Block::S: return m_N() + m_R();
  }
  return 0;
}

int BlockVolSpec::block_size(Block b) const {
  switch (b) {
    case Block::N: return m_N();
    case Block::R: return m_R();
    case Block::S: return m_S();
  }
  return 0;
}

void BlockVolSpec::validate() const {
  shape.validate();
  if (A_N.rows() < 1 || A_N.cols() != 3) throw ValidationError("A_N must be m_N x 3 with m_N >= 1");
  if (A_R.rows() < 1 || A_R.cols() != 3) throw ValidationError("A_R must be m_R x 3 with m_R >= 1");
  if (spread_empirical) {
    const auto& e = *spread_empirical;
    if (e.pillars.empty() || e.values.cols() != Eigen::Index(e.pillars.size()) || e.values.rows() < 1)
      throw ValidationError("empirical spread loadings: dimension mismatch");
    for (std::size_t i = 1; i < e.pillars.size(); ++i)
      if (!(e.pillars[i] > e.pillars[i - 1])) throw ValidationError("empirical spread pillars not increasing");
    if (!e.values.allFinite()) throw ValidationError("empirical spread loadings not finite");
  } else if (A_S.rows() < 1 || A_S.cols() != 2) {
    throw ValidationError("A_S must be m_S x 2 with m_S >= 1");
  }
  if (!A_N.allFinite() || !A_R.allFinite() || (!spread_empirical && !A_S.allFinite()))
    throw ValidationError("amplitude matrices must be finite");
  const int mm = m();
  if (rho.rows() != mm || rho.cols() != mm) throw ValidationError("rho must be m x m");
  if (sigma_I.size() != mm || sigma_J.size() != mm) throw ValidationError("FX loadings must have length m");
  if (!rho.allFinite() || !sigma_I.allFinite() || !sigma_J.allFinite())
    throw ValidationError("rho and FX loadings must be finite");
  constexpr double tol = 1e-12;
  for (int i = 0; i < mm; ++i) {
    if (std::abs(rho(i, i) - 1.0) > tol) throw ValidationError("rho must have unit diagonal");
    for (int j = 0; j < i; ++j)
      if (std::abs(rho(i, j) - rho(j, i)) > tol) throw ValidationError("rho must be symmetric");
  }
  for (Block b : {Block::N, Block::R, Block::S}) {
    const int o = offset(b), k = block_size(b);
    for (int i = o; i < o + k; ++i)
      for (int j = o; j < o + k; ++j)
        if (i != j && std::abs(rho(i, j)) > tol)
          throw ValidationError("rho must be the identity within each block");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(rho, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0)) throw ValidationError("rho must be positive definite");
  if (!unrestricted_fx) {
    const int r0 = offset(Block::R), s0 = offset(Block::S);
    for (int k = 1; k < mm; ++k) {
      const bool in_r = k >= r0 && k < r0 + m_R();
      const bool in_s = k >= s0;
      if (!in_r && sigma_I[k] != 0.0) throw ValidationError("sigma_I may load only on N1 and the real block");
      if (!in_s && sigma_J[k] != 0.0) throw ValidationError("sigma_J may load only on N1 and the spread block");
    }
  }
}

VectorXd shape_eval(const ShapeFamily& f, Block block, double tau) {
  if (tau < 0) throw ValidationError("shape_eval: tau < 0");
  if (block == Block::S) return (VectorXd(2) << 1.0, std::exp(-f.c2 * tau)).finished();
  return (VectorXd(3) << 1.0, std::exp(-f.b2 * tau), tau * std::exp(-f.b3 * tau)).finished();
}

VectorXd cum_integral(const ShapeFamily& f, Block block, double tau) {
  if (tau < 0) throw ValidationError("cum_integral: tau < 0");
  if (block == Block::S) return (VectorXd(2) << tau, -std::expm1(-f.c2 * tau) / f.c2).finished();
  const double x = f.b3 * tau;
  const double g3 = (-std::expm1(-x) - x * std::exp(-x)) / (f.b3 * f.b3);
  return (VectorXd(3) << tau, -std::expm1(-f.b2 * tau) / f.b2, g3).finished();
}

namespace {

const MatrixXd& amplitudes(const BlockVolSpec& s, Block b) {
  return b == Block::N ? s.A_N : b == Block::R ? s.A_R : s.A_S;
}

}  // namespace

VectorXd block_vol(const BlockVolSpec& spec, Block block, double tau) {
  if (tau < 0) throw ValidationError("block_vol: tau < 0");
  VectorXd v = VectorXd::Zero(spec.m());
  const int o = spec.offset(block), k = spec.block_size(block);
  if (block == Block::S && spec.spread_empirical)
    v.segment(o, k) = spec.spread_empirical->eval(tau);
  else
    v.segment(o, k) = amplitudes(spec, block) * shape_eval(spec.shape, block, tau);
  return v;
}

VectorXd cum_block_vol(const BlockVolSpec& spec, Block block, double tau) {
  if (tau < 0) throw ValidationError("cum_block_vol: tau < 0");
  VectorXd v = VectorXd::Zero(spec.m());
  const int o = spec.offset(block), k = spec.block_size(block);
  if (block == Block::S && spec.spread_empirical)
    v.segment(o, k) = spec.spread_empirical->integral(tau);
  else
    v.segment(o, k) = amplitudes(spec, block) * cum_integral(spec.shape, block, tau);
  return v;
}

double weighted_inner(const BlockVolSpec& spec, const VectorXd& x, const VectorXd& y) {
  if (x.size() != spec.rho.rows() || y.size() != spec.rho.rows())
    throw ValidationError("weighted_inner: dimension mismatch");
  return x.dot(spec.rho * y);
}

double hjm_drift_own(const BlockVolSpec& spec, Block block, double tau) {
  if (block == Block::S && spec.spread_empirical)
    return spec.spread_empirical->eval(tau).dot(spec.spread_empirical->integral(tau));
  const MatrixXd& A = amplitudes(spec, block);
  const MatrixXd gram = A.transpose() * A;
  return shape_eval(spec.shape, block, tau).dot(gram * cum_integral(spec.shape, block, tau));
}

double fx_drift_correction(const BlockVolSpec& spec, FxBlock block, double tau) {
  if (block == FxBlock::R) return weighted_inner(spec, block_vol(spec, Block::R, tau), spec.sigma_I);
  const VectorXd sc = block_vol(spec, Block::N, tau) + block_vol(spec, Block::S, tau);
  return weighted_inner(spec, sc, spec.sigma_J);
}

double spread_drift(const BlockVolSpec& spec, double tau) {
  const VectorXd sn = block_vol(spec, Block::N, tau), ss = block_vol(spec, Block::S, tau);
  const VectorXd an = cum_block_vol(spec, Block::N, tau), as = cum_block_vol(spec, Block::S, tau);
  // rho is the identity inside S, so the S-S term is the own-block drift
  return weighted_inner(spec, sn, as) + weighted_inner(spec, ss, an) + hjm_drift_own(spec, Block::S, tau) -
         weighted_inner(spec, sn + ss, spec.sigma_J);
}

double spread_drift_within_block(const BlockVolSpec& spec, double tau) {
  const VectorXd sn = block_vol(spec, Block::N, tau), ss = block_vol(spec, Block::S, tau);
  return hjm_drift_own(spec, Block::S, tau) - weighted_inner(spec, sn + ss, spec.sigma_J);
}

namespace {

constexpr double kBpPerUnit = 1e4;

nlohmann::json matrix_bp(const MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto r = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j) * kBpPerUnit);
    rows.push_back(r);
  }
  return rows;
}

MatrixXd matrix_from(const nlohmann::json& j, double scale, const char* name) {
  if (!j.is_array() || j.empty()) throw ValidationError(std::string("spec: '") + name + "' must be a non-empty matrix");
  const auto r = j.size(), c = j[0].size();
  MatrixXd m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (j[i].size() != c) throw ValidationError(std::string("spec: ragged matrix '") + name + "'");
    for (std::size_t k = 0; k < c; ++k) m(Eigen::Index(i), Eigen::Index(k)) = j[i][k].get<double>() / scale;
  }
  return m;
}

VectorXd vector_from(const nlohmann::json& j, double scale) {
  VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[Eigen::Index(i)] = j[i].get<double>() / scale;
  return v;
}

nlohmann::json vector_bp(const VectorXd& v) {
  auto a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i] * kBpPerUnit);
  return a;
}

}  // namespace

nlohmann::json to_json(const BlockVolSpec& spec) {
  nlohmann::json j;
  j["units"] = {{"amplitudes", "bp/sqrt(yr)"}, {"fx_loadings", "bp/sqrt(yr)"}, {"decays", "1/yr"}};
  j["dims"] = {{"m_N", spec.m_N()}, {"m_R", spec.m_R()}, {"m_S", spec.m_S()}};
  j["shape"] = {{"b2", spec.shape.b2}, {"b3", spec.shape.b3}, {"c2", spec.shape.c2}};
  j["A_N"] = matrix_bp(spec.A_N);
  j["A_R"] = matrix_bp(spec.A_R);
  if (spec.spread_empirical) {
    j["spread"] = {{"kind", "empirical"},
                   {"pillars", spec.spread_empirical->pillars},
                   {"loadings", matrix_bp(spec.spread_empirical->values)}};
  } else {
    j["spread"] = {{"kind", "parametric"}, {"A_S", matrix_bp(spec.A_S)}};
  }
  j["sigma_I"] = {{"target", "I"}, {"alpha", vector_bp(spec.sigma_I)}};
  j["sigma_J"] = {{"target", "J"}, {"alpha", vector_bp(spec.sigma_J)}};
  j["unrestricted_fx"] = spec.unrestricted_fx;
  auto rho = nlohmann::json::array();
  for (Eigen::Index i = 0; i < spec.rho.rows(); ++i) {
    auto r = nlohmann::json::array();
    for (Eigen::Index k = 0; k < spec.rho.cols(); ++k) r.push_back(spec.rho(i, k));
    rho.push_back(r);
  }
  j["rho"] = rho;
  return j;
}

BlockVolSpec spec_from_json(const nlohmann::json& j) {
  try {
    const auto& units = j.at("units");
    if (units.at("amplitudes").get<std::string>() != "bp/sqrt(yr)")
      throw ValidationError("spec: unsupported amplitude units");
    BlockVolSpec s;
    s.shape.b2 = j.at("shape").at("b2").get<double>();
    s.shape.b3 = j.at("shape").at("b3").get<double>();
    s.shape.c2 = j.at("shape").at("c2").get<double>();
    s.A_N = matrix_from(j.at("A_N"), kBpPerUnit, "A_N");
    s.A_R = matrix_from(j.at("A_R"), kBpPerUnit, "A_R");
    const auto& sp = j.at("spread");
    const auto kind = sp.at("kind").get<std::string>();
    if (kind == "parametric") {
      s.A_S = matrix_from(sp.at("A_S"), kBpPerUnit, "A_S");
    } else if (kind == "empirical") {
      EmpiricalLoadings e;
      e.pillars = sp.at("pillars").get<std::vector<double>>();
      e.values = matrix_from(sp.at("loadings"), kBpPerUnit, "loadings");
      s.spread_empirical = std::move(e);
    } else {
      throw ValidationError("spec: unknown spread kind '" + kind + "'");
    }
    s.sigma_I = vector_from(j.at("sigma_I").at("alpha"), kBpPerUnit);
    s.sigma_J = vector_from(j.at("sigma_J").at("alpha"), kBpPerUnit);
    s.unrestricted_fx = j.value("unrestricted_fx", false);
    s.rho = matrix_from(j.at("rho"), 1.0, "rho");
    if (j.contains("dims")) {
      const auto& d = j["dims"];
      if (d.at("m_N").get<int>() != s.m_N() || d.at("m_R").get<int>() != s.m_R() || d.at("m_S").get<int>() != s.m_S())
        throw ValidationError("spec: dims header does not match matrices");
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("spec: ") + e.what());
  }
}

BlockVolSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open spec '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("spec '" + path + "': " + e.what());
  }
  return spec_from_json(j);
}

void save_spec(const BlockVolSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << to_json(spec).dump(2) << '\n';
}

}  // namespace hjm3
