#include "hjm3/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

namespace hjm3 {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void SimConfig::validate() const {
  if (!(dt > 0) || !std::isfinite(dt)) throw ValidationError("dt must be positive");
  if (!(horizon >= dt)) throw ValidationError("horizon must be >= dt");
  const double steps = horizon / dt;
  if (std::abs(steps - std::round(steps)) > 1e-6) throw ValidationError("horizon must be a multiple of dt");
  if (n_paths < 1) throw ValidationError("n_paths must be >= 1");
  if (record_every < 1) throw ValidationError("record_every must be >= 1");
  if (threads < 1) throw ValidationError("threads must be >= 1");
  if (antithetic && n_paths % 2 != 0) throw ValidationError("antithetic sampling needs an even path count");
  if (record_pillars.empty()) throw ValidationError("no pillars to record");
  PillarGrid check(record_pillars);
  (void)check;
}

std::vector<double> build_sim_grid(const std::vector<double>& pillars, double dt, double horizon, double tail) {
  const double h = std::min(dt, 0.25);
  double top = tail + horizon;
  for (double p : pillars) top = std::max(top, p);
  const auto n = std::size_t(std::ceil(top / h - 1e-9));
  std::vector<double> g(n + 1);
  for (std::size_t i = 0; i <= n; ++i) g[i] = double(i) * h;
  const double snap = 1e-9 * h;
  for (double p : pillars) {
    auto it = std::lower_bound(g.begin(), g.end(), p - snap);
    if (it != g.end() && std::abs(*it - p) <= snap)
      *it = p;
    else
      g.insert(it, p);
  }
  return g;
}

SimState make_initial_state(const InitialCurves& init, std::shared_ptr<const std::vector<double>> grid) {
  const auto& g = *grid;
  const auto& p = init.grid.tenors();
  auto dense = [&](const std::vector<double>& v) {
    std::vector<double> out(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double t = g[i];
      if (t <= p.front()) {
        out[i] = v.front();
        continue;
      }
      if (t >= p.back()) {
        out[i] = v.back();
        continue;
      }
      auto it = std::lower_bound(p.begin(), p.end(), t);
      const auto j = std::size_t(it - p.begin());
      if (*it == t) {
        out[i] = v[j];
        continue;
      }
      const double w = (t - p[j - 1]) / (p[j] - p[j - 1]);
      out[i] = (1.0 - w) * v[j - 1] + w * v[j];
    }
    return out;
  };
  SimState s;
  s.grid = grid;
  s.fN = dense(init.f_nominal);
  s.fR = dense(init.f_real);
  s.sCDI = dense(init.s_cdi);
  return s;
}

MatrixXd cholesky_factor(const MatrixXd& rho) {
  if (rho.rows() != rho.cols() || rho.rows() == 0) throw ValidationError("cholesky_factor: matrix must be square");
  Eigen::LLT<MatrixXd> llt(rho);
  if (llt.info() != Eigen::Success) throw ValidationError("cholesky_factor: matrix is not positive definite");
  return llt.matrixL();
}

namespace {

void transport_coeffs(const std::vector<double>& g, double dt, std::vector<std::int32_t>& idx,
                      std::vector<double>& w) {
  const std::size_t n = g.size();
  if (n < 2) throw ValidationError("transport: grid needs at least two nodes");
  idx.assign(n, 0);
  w.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = g[i] + dt;
    if (x >= g[n - 1]) {
      idx[i] = std::int32_t(n - 2);
      w[i] = 1.0;
      continue;
    }
    auto it = std::upper_bound(g.begin(), g.end(), x);
    auto j = std::size_t(it - g.begin()) - 1;
    double wi = (x - g[j]) / (g[j + 1] - g[j]);
    if (wi > 1.0 - 1e-9) {
      ++j;
      wi = 0.0;
    } else if (wi < 1e-9) {
      wi = 0.0;
    }
    if (j >= n - 1) {
      idx[i] = std::int32_t(n - 2);
      w[i] = 1.0;
    } else {
      idx[i] = std::int32_t(j);
      w[i] = wi;
    }
  }
}

}  // namespace

std::vector<double> transport(const std::vector<double>& grid, const std::vector<double>& f, double dt) {
  if (f.size() != grid.size()) throw ValidationError("transport: size mismatch");
  if (!(dt < grid.back())) throw ValidationError("transport: dt must be below the last tenor");
  std::vector<std::int32_t> idx;
  std::vector<double> w;
  transport_coeffs(grid, dt, idx, w);
  std::vector<double> zero(grid.size(), 0.0), out(grid.size());
  simd::CurveStep a{f.data(), idx.data(), w.data(), zero.data(), nullptr, nullptr, 0, grid.size(), out.data()};
  simd::curve_step_scalar(a);
  return out;
}

double discount_from_forwards(const std::vector<double>& grid, const std::vector<double>& f, double T) {
  if (T < 0 || T > grid.back() + 1e-12) throw ValidationError("discount_from_forwards: T outside the grid");
  double acc = 0.0;
  for (std::size_t i = 1; i < grid.size() && grid[i - 1] < T; ++i) {
    const double a = grid[i - 1], b = std::min(grid[i], T);
    const double fb = f[i - 1] + (f[i] - f[i - 1]) * (b - a) / (grid[i] - a);
    acc += 0.5 * (b - a) * (f[i - 1] + fb);
  }
  return std::exp(-acc);
}

SimModel::SimModel(const BlockVolSpec& spec, std::shared_ptr<const std::vector<double>> grid, double dt,
                   simd::Kernels kernels)
    : grid_(std::move(grid)), dt_(dt), sqrt_dt_(std::sqrt(dt)), m_(spec.m()), kernels_(kernels) {
  spec.validate();
  const auto& g = *grid_;
  if (!(dt > 0)) throw ValidationError("dt must be positive");
  if (g.empty() || g.front() != 0.0) throw ValidationError("simulation grid must start at 0");
  transport_coeffs(g, dt, idx_, w_);
  const std::size_t n = g.size();
  auto fill = [&](CurveCoeffs& c, Block b) {
    c.offset = spec.offset(b);
    c.n_factors = spec.block_size(b);
    c.drift_dt.resize(n);
    c.vol.resize(std::size_t(c.n_factors) * n);
    for (std::size_t i = 0; i < n; ++i) {
      const VectorXd v = block_vol(spec, b, g[i]);
      for (int k = 0; k < c.n_factors; ++k) c.vol[std::size_t(k) * n + i] = v[c.offset + k];
    }
  };
  fill(N_, Block::N);
  fill(R_, Block::R);
  fill(S_, Block::S);
  for (std::size_t i = 0; i < n; ++i) {
    N_.drift_dt[i] = hjm_drift_own(spec, Block::N, g[i]) * dt;
    R_.drift_dt[i] = (hjm_drift_own(spec, Block::R, g[i]) - fx_drift_correction(spec, FxBlock::R, g[i])) * dt;
    S_.drift_dt[i] = spread_drift(spec, g[i]) * dt;
  }
  L_ = cholesky_factor(spec.rho);
  sigma_I_ = spec.sigma_I;
  sigma_J_ = spec.sigma_J;
  var_I_ = weighted_inner(spec, sigma_I_, sigma_I_);
  var_J_ = weighted_inner(spec, sigma_J_, sigma_J_);
}

void SimModel::step_curve(const CurveCoeffs& c, const std::vector<double>& dw, std::vector<double>& f,
                          std::vector<double>& scratch) const {
  const std::size_t n = grid_->size();
  scratch.resize(n);
  simd::CurveStep a{f.data(), idx_.data(), w_.data(), c.drift_dt.data(), c.vol.data(),
                    dw.data() + c.offset, std::size_t(c.n_factors), n, scratch.data()};
  kernels_.curve_step(a);
  f.swap(scratch);
}

void SimModel::step(SimState& s, const double* xi, std::vector<double>& scratch) const {
  const double rN = s.fN[0];
  const double rR = s.fR[0];
  const double rC = s.fN[0] + s.sCDI[0];

  std::vector<double> dw(std::size_t(m_), 0.0);
  for (int i = 0; i < m_; ++i) {
    double acc = 0.0;
    for (int j = 0; j <= i; ++j) acc += L_(i, j) * xi[j];
    dw[std::size_t(i)] = acc * sqrt_dt_;
  }

  step_curve(N_, dw, s.fN, scratch);
  step_curve(R_, dw, s.fR, scratch);
  step_curve(S_, dw, s.sCDI, scratch);

  double shock_I = 0.0, shock_J = 0.0;
  for (int k = 0; k < m_; ++k) {
    shock_I += sigma_I_[k] * dw[std::size_t(k)];
    shock_J += sigma_J_[k] * dw[std::size_t(k)];
  }
  s.I *= std::exp((rN - rR - 0.5 * var_I_) * dt_ + shock_I);
  s.J *= std::exp((rN - rC - 0.5 * var_J_) * dt_ + shock_J);
  s.K = s.J / s.I;
  s.BN *= std::exp(rN * dt_);
  s.BR *= std::exp(rR * dt_);
  s.BC *= std::exp(rC * dt_);
  s.t += dt_;
}

SimState step(const SimState& s, const BlockVolSpec& spec, const VectorXd& xi, double dt) {
  if (xi.size() != spec.m()) throw ValidationError("step: xi must have length m");
  SimModel model(spec, s.grid, dt, simd::kernels_for(simd::Isa::Scalar));
  SimState out = s;
  std::vector<double> scratch;
  model.step(out, xi.data(), scratch);
  return out;
}

void SimOutput::resize(int paths, std::size_t records, std::size_t n_pillars) {
  n_paths = paths;
  times.resize(records);
  steps.resize(records);
  scalars.assign(std::size_t(paths) * records * kScalarFields, kNaN);
  curves.assign(std::size_t(paths) * records * kCurveFields * n_pillars, kNaN);
}

double SimOutput::inflation_ratio(int path, std::size_t rec) const {
  return scalar(path, rec, ScalarField::I) * scalar(path, rec, ScalarField::BR) / scalar(path, rec, ScalarField::BN);
}

double SimOutput::credit_ratio(int path, std::size_t rec) const {
  return scalar(path, rec, ScalarField::J) * scalar(path, rec, ScalarField::BC) / scalar(path, rec, ScalarField::BN);
}

namespace {

std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream),
                    std::uint32_t(stream >> 32), std::uint32_t(0x48a3u)};
  return std::mt19937_64(seq);
}

void record(SimOutput& out, int path, std::size_t rec, const SimState& s, const std::vector<std::size_t>& pidx,
            const simd::Kernels& k) {
  out.scalar(path, rec, ScalarField::I) = s.I;
  out.scalar(path, rec, ScalarField::J) = s.J;
  out.scalar(path, rec, ScalarField::K) = s.K;
  out.scalar(path, rec, ScalarField::BN) = s.BN;
  out.scalar(path, rec, ScalarField::BR) = s.BR;
  out.scalar(path, rec, ScalarField::BC) = s.BC;
  out.scalar(path, rec, ScalarField::rN) = s.fN[0];
  out.scalar(path, rec, ScalarField::rR) = s.fR[0];
  out.scalar(path, rec, ScalarField::rC) = s.fN[0] + s.sCDI[0];
  double* fn = out.curve_row(path, rec, CurveField::fN);
  double* fr = out.curve_row(path, rec, CurveField::fR);
  double* sc = out.curve_row(path, rec, CurveField::sCDI);
  for (std::size_t p = 0; p < pidx.size(); ++p) {
    fn[p] = s.fN[pidx[p]];
    fr[p] = s.fR[pidx[p]];
    sc[p] = s.sCDI[pidx[p]];
  }
  k.triangle(sc, fn, fr, pidx.size(), out.curve_row(path, rec, CurveField::sIPCA));
}

bool finite_state(const SimState& s) {
  return std::isfinite(s.I) && std::isfinite(s.J) && std::isfinite(s.BN) && std::isfinite(s.BR) &&
         std::isfinite(s.BC) && std::isfinite(s.fN[0]) && std::isfinite(s.fR[0]) && std::isfinite(s.sCDI[0]) &&
         s.I > 0 && s.J > 0;
}

}  // namespace

SimOutput run_paths(const SimState& init, const BlockVolSpec& spec, const SimConfig& cfg) {
  cfg.validate();
  if (!init.grid) throw ValidationError("initial state has no grid");
  const auto& g = *init.grid;
  if (init.fN.size() != g.size() || init.fR.size() != g.size() || init.sCDI.size() != g.size())
    throw ValidationError("initial curves do not match the grid");
  const simd::Kernels kern = simd::kernels_for(cfg.kernel.value_or(simd::best_isa()));
  SimModel model(spec, init.grid, cfg.dt, kern);

  std::vector<std::size_t> pidx;
  for (double p : cfg.record_pillars) {
    auto it = std::lower_bound(g.begin(), g.end(), p - 1e-9);
    if (it == g.end() || std::abs(*it - p) > 1e-9)
      throw ValidationError("record pillar " + fmt_double(p) + " is not a grid node");
    pidx.push_back(std::size_t(it - g.begin()));
  }

  const int n_steps = int(std::llround(cfg.horizon / cfg.dt));
  std::vector<int> rec_steps;
  for (int s = 0; s <= n_steps; s += cfg.record_every) rec_steps.push_back(s);
  if (rec_steps.back() != n_steps) rec_steps.push_back(n_steps);

  SimOutput out;
  out.pillars = cfg.record_pillars;
  out.resize(cfg.n_paths, rec_steps.size(), pidx.size());
  out.steps = rec_steps;
  for (std::size_t r = 0; r < rec_steps.size(); ++r) out.times[r] = rec_steps[r] * cfg.dt;
  out.kernel = simd::to_string(kern.isa);

  const int m = spec.m();
  std::vector<char> aborted(std::size_t(cfg.n_paths), 0);

  auto run_range = [&](int p0, int p1) {
    std::vector<double> scratch;
    std::vector<double> xi(static_cast<std::size_t>(m));
    for (int p = p0; p < p1; ++p) {
      const int stream = cfg.antithetic ? p / 2 : p;
      const double sign = cfg.antithetic && (p % 2 == 1) ? -1.0 : 1.0;
      std::mt19937_64 eng = path_engine(cfg.seed, std::uint64_t(stream));
      std::normal_distribution<double> normal(0.0, 1.0);
      SimState s = init;
      std::size_t rec = 0;
      record(out, p, rec++, s, pidx, kern);
      for (int st = 1; st <= n_steps; ++st) {
        for (int k = 0; k < m; ++k) xi[std::size_t(k)] = sign * normal(eng);
        model.step(s, xi.data(), scratch);
        if (!finite_state(s)) {
          aborted[std::size_t(p)] = 1;
          break;
        }
        if (rec < rec_steps.size() && rec_steps[rec] == st) record(out, p, rec++, s, pidx, kern);
      }
    }
  };

  const int nt = std::min(cfg.threads, cfg.n_paths);
  if (nt <= 1) {
    run_range(0, cfg.n_paths);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (cfg.n_paths + nt - 1) / nt;
    for (int t = 0; t < nt; ++t) {
      const int a = t * chunk, b = std::min(cfg.n_paths, a + chunk);
      if (a < b) pool.emplace_back(run_range, a, b);
    }
    for (auto& th : pool) th.join();
  }

  for (int p = 0; p < cfg.n_paths; ++p)
    if (aborted[std::size_t(p)]) out.aborted.push_back(p);
  if (double(out.aborted.size()) > 0.001 * cfg.n_paths)
    throw std::runtime_error("simulation failed: " + std::to_string(out.aborted.size()) + " of " +
                             std::to_string(cfg.n_paths) + " paths produced non-finite states");
  return out;
}

namespace {

const char* scalar_name(int f) {
  static const char* names[kScalarFields] = {"I", "J", "K", "BN", "BR", "BC", "rN", "rR", "rC"};
  return names[f];
}

const char* curve_name(int c) {
  static const char* names[kCurveFields] = {"fN", "fR", "sCDI", "sIPCA"};
  return names[c];
}

}  // namespace

void write_sim_csv(const SimOutput& out, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write '" + path + "'");
  os << "path,step,t";
  for (int f = 0; f < kScalarFields; ++f) os << ',' << scalar_name(f);
  os << ",IBR_BN,JBC_BN";
  for (int c = 0; c < kCurveFields; ++c)
    for (double p : out.pillars) os << ',' << curve_name(c) << '_' << fmt_double(p);
  os << '\n';
  std::string line;
  for (int p = 0; p < out.n_paths; ++p) {
    for (std::size_t r = 0; r < out.records(); ++r) {
      line.clear();
      line += std::to_string(p);
      line += ',';
      line += std::to_string(out.steps[r]);
      line += ',';
      line += fmt_double(out.times[r]);
      for (int f = 0; f < kScalarFields; ++f) {
        line += ',';
        line += fmt_double(out.scalar(p, r, ScalarField(f)));
      }
      line += ',';
      line += fmt_double(out.inflation_ratio(p, r));
      line += ',';
      line += fmt_double(out.credit_ratio(p, r));
      for (int c = 0; c < kCurveFields; ++c) {
        const double* row = out.curve_row(p, r, CurveField(c));
        for (std::size_t i = 0; i < out.pillars.size(); ++i) {
          line += ',';
          line += fmt_double(row[i]);
        }
      }
      line += '\n';
      os << line;
    }
  }
  if (!os) throw ValidationError("write failed for '" + path + "'");
}

SimOutput read_sim_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("'" + path + "': no data rows");
  const auto header = split_csv_line(line);
  const std::size_t fixed = 3 + kScalarFields + 2;
  if (header.size() <= fixed || (header.size() - fixed) % kCurveFields != 0 || header[0] != "path")
    throw ValidationError("'" + path + "': unexpected simulation header");
  const std::size_t np = (header.size() - fixed) / kCurveFields;
  SimOutput out;
  for (std::size_t i = 0; i < np; ++i) {
    const std::string& h = header[fixed + i];
    const auto us = h.find('_');
    if (us == std::string::npos) throw ValidationError("'" + path + "': bad pillar column '" + h + "'");
    out.pillars.push_back(parse_double(h.substr(us + 1), "pillar"));
  }
  struct Row {
    int path, step;
    double t;
    std::vector<double> vals;
  };
  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ValidationError("'" + path + "' row " + std::to_string(lineno) + ": wrong column count");
    Row r;
    r.path = int(parse_double(cells[0], "path"));
    r.step = int(parse_double(cells[1], "step"));
    r.t = parse_double(cells[2], "t");
    r.vals.reserve(cells.size() - 3);
    for (std::size_t i = 3; i < cells.size(); ++i) r.vals.push_back(parse_double(cells[i], header[i]));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ValidationError("'" + path + "': no data rows");
  int n_paths = 0;
  for (const auto& r : rows) n_paths = std::max(n_paths, r.path + 1);
  for (const auto& r : rows) {
    if (r.path != 0) break;
    out.steps.push_back(r.step);
    out.times.push_back(r.t);
  }
  const std::size_t nrec = out.times.size();
  if (rows.size() != std::size_t(n_paths) * nrec) throw ValidationError("'" + path + "': ragged path records");
  std::vector<double> times = out.times;
  std::vector<int> steps = out.steps;
  out.resize(n_paths, nrec, np);
  out.times = times;
  out.steps = steps;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Row& r = rows[k];
    const std::size_t rec = k % nrec;
    if (r.path != int(k / nrec) || r.step != out.steps[rec])
      throw ValidationError("'" + path + "': rows out of order at path " + std::to_string(r.path));
    for (int f = 0; f < kScalarFields; ++f) out.scalar(r.path, rec, ScalarField(f)) = r.vals[std::size_t(f)];
    for (int c = 0; c < kCurveFields; ++c) {
      double* row = out.curve_row(r.path, rec, CurveField(c));
      for (std::size_t i = 0; i < np; ++i) row[i] = r.vals[kScalarFields + 2 + std::size_t(c) * np + i];
    }
  }
  return out;
}

}  // namespace hjm3
