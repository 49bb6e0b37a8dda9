#include "hjm3/marketdata.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include "hjm3/sim.hpp"
#include "hjm3/volarch.hpp"

namespace hjm3 {

PillarGrid::PillarGrid(std::vector<double> tenors) : tenors_(std::move(tenors)) {
  if (tenors_.empty()) throw ValidationError("pillar grid is empty");
  for (std::size_t i = 0; i < tenors_.size(); ++i) {
    if (!(tenors_[i] > 0) || !std::isfinite(tenors_[i])) throw ValidationError("pillar tenors must be positive");
    if (i > 0 && !(tenors_[i] > tenors_[i - 1])) throw ValidationError("tenor columns not increasing");
  }
}

int PillarGrid::find(double t) const {
  for (std::size_t i = 0; i < tenors_.size(); ++i)
    if (std::abs(tenors_[i] - t) <= 1e-9) return int(i);
  return -1;
}

bool is_spread_kind(SeriesKind k) { return k == SeriesKind::CdiSpread || k == SeriesKind::IpcaSpread; }

std::string to_string(SeriesKind k) {
  switch (k) {
    case SeriesKind::NominalFwd: return "nominal_fwd";
    case SeriesKind::RealFwd: return "real_fwd";
    case SeriesKind::CdiSpread: return "cdi_spread";
    case SeriesKind::IpcaSpread: return "ipca_spread";
  }
  return "?";
}

void CurvePanel::validate() const {
  if (values.rows() != Eigen::Index(dates.size()) || values.cols() != Eigen::Index(grid.size()))
    throw ValidationError("panel dimensions do not match dates x tenors");
  for (std::size_t i = 1; i < dates.size(); ++i)
    if (!(dates[i] > dates[i - 1])) throw ValidationError("panel dates not strictly increasing at " + format_date(dates[i]));
  if (!is_spread_kind(kind))
    for (Eigen::Index i = 0; i < values.rows(); ++i)
      for (Eigen::Index j = 0; j < values.cols(); ++j)
        if (!std::isfinite(values(i, j)))
          throw ValidationError("missing value in rate panel at " + format_date(dates[std::size_t(i)]));
}

CurvePanel CurvePanel::window(Date from, Date to) const {
  CurvePanel out;
  out.grid = grid;
  out.kind = kind;
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < dates.size(); ++i)
    if (dates[i] >= from && dates[i] <= to) {
      keep.push_back(Eigen::Index(i));
      out.dates.push_back(dates[i]);
    }
  out.values.resize(Eigen::Index(keep.size()), values.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) out.values.row(Eigen::Index(r)) = values.row(keep[r]);
  return out;
}

CurvePanel CurvePanel::select_tenors(const std::vector<double>& tenors) const {
  CurvePanel out;
  out.dates = dates;
  out.kind = kind;
  out.grid = PillarGrid(tenors);
  out.values.resize(values.rows(), Eigen::Index(tenors.size()));
  for (std::size_t j = 0; j < tenors.size(); ++j) {
    const int c = grid.find(tenors[j]);
    if (c < 0) throw ValidationError("tenor " + fmt_double(tenors[j]) + " not in panel");
    out.values.col(Eigen::Index(j)) = values.col(c);
  }
  return out;
}

Family parse_family(std::string_view s) {
  if (s == "CDI") return Family::CDI;
  if (s == "IPCA") return Family::IPCA;
  throw ValidationError("unknown family '" + std::string(s) + "'");
}

void ConstituentPanel::validate() const {
  std::set<std::tuple<Date, int, std::string>> seen;
  for (const auto& r : rows) {
    if (!(r.weight >= 0)) throw ValidationError("negative weight for " + r.ticker + " on " + format_date(r.date));
    if (!(r.duration > 0)) throw ValidationError("non-positive duration for " + r.ticker + " on " + format_date(r.date));
    if (!seen.insert({r.date, int(r.family), r.ticker}).second)
      throw ValidationError("duplicate constituent " + r.ticker + " on " + format_date(r.date));
  }
}

CurvePanel load_curve_panel(const std::string& path, SeriesKind kind) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.find_first_not_of(" \t\r") == std::string::npos)
    throw ValidationError("'" + path + "': no data rows");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "date") throw ValidationError("'" + path + "': malformed header");
  std::vector<double> tenors;
  for (std::size_t i = 1; i < header.size(); ++i) tenors.push_back(parse_double(header[i], "tenor header"));
  CurvePanel p;
  p.kind = kind;
  p.grid = PillarGrid(tenors);
  std::vector<std::vector<double>> rows;
  std::size_t rowno = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++rowno;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ValidationError("'" + path + "' row " + std::to_string(rowno) + ": wrong column count");
    Date d;
    try {
      d = parse_date(cells[0]);
    } catch (const ValidationError&) {
      throw ValidationError("'" + path + "' row " + std::to_string(rowno) + ": unparseable date '" + cells[0] + "'");
    }
    if (!p.dates.empty()) {
      if (d == p.dates.back()) throw ValidationError("'" + path + "': duplicate date " + format_date(d));
      if (d < p.dates.back())
        throw ValidationError("'" + path + "': non-monotone dates at row " + std::to_string(rowno));
    }
    std::vector<double> v(tenors.size());
    for (std::size_t j = 0; j < tenors.size(); ++j) {
      if (cells[j + 1].empty()) {
        if (!is_spread_kind(kind))
          throw ValidationError("'" + path + "' row " + std::to_string(rowno) + ": missing value in rate panel");
        v[j] = kNaN;
      } else {
        v[j] = parse_double(cells[j + 1], "value");
      }
    }
    p.dates.push_back(d);
    rows.push_back(std::move(v));
  }
  if (rows.empty()) throw ValidationError("'" + path + "': no data rows");
  p.values.resize(Eigen::Index(rows.size()), Eigen::Index(tenors.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < tenors.size(); ++j) p.values(Eigen::Index(i), Eigen::Index(j)) = rows[i][j];
  return p;
}

void write_curve_panel(const CurvePanel& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << "date";
  for (double t : panel.grid.tenors()) out << ',' << fmt_double(t);
  out << '\n';
  for (std::size_t i = 0; i < panel.dates.size(); ++i) {
    out << format_date(panel.dates[i]);
    for (Eigen::Index j = 0; j < panel.values.cols(); ++j) {
      out << ',';
      const double v = panel.values(Eigen::Index(i), j);
      if (!is_missing(v)) out << fmt_double(v);
    }
    out << '\n';
  }
}

ConstituentPanel load_constituents(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path + "': no data rows");
  const auto header = split_csv_line(line);
  const std::vector<std::string> expected{"date", "family", "issuer", "ticker", "spread", "duration", "weight"};
  if (header != expected) throw ValidationError("'" + path + "': malformed header");
  ConstituentPanel p;
  std::size_t rowno = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++rowno;
    const auto c = split_csv_line(line);
    if (c.size() != expected.size())
      throw ValidationError("'" + path + "' row " + std::to_string(rowno) + ": wrong column count");
    ConstituentRow r;
    try {
      r.date = parse_date(c[0]);
    } catch (const ValidationError&) {
      throw ValidationError("'" + path + "' row " + std::to_string(rowno) + ": unparseable date '" + c[0] + "'");
    }
    r.family = parse_family(c[1]);
    r.issuer = c[2];
    r.ticker = c[3];
    r.spread = parse_double(c[4], "spread");
    r.duration = parse_double(c[5], "duration");
    r.weight = parse_double(c[6], "weight");
    p.rows.push_back(std::move(r));
  }
  if (p.rows.empty()) throw ValidationError("'" + path + "': no data rows");
  p.validate();
  return p;
}

std::vector<CurvePanel> align_panels(const std::vector<CurvePanel>& panels) {
  if (panels.size() < 2) throw ValidationError("need ≥2 panels");
  std::vector<Date> common = panels[0].dates;
  for (std::size_t k = 1; k < panels.size(); ++k) {
    std::vector<Date> next;
    std::set_intersection(common.begin(), common.end(), panels[k].dates.begin(), panels[k].dates.end(),
                          std::back_inserter(next));
    common.swap(next);
  }
  if (common.empty()) throw ValidationError("panels share no common dates");
  std::vector<CurvePanel> out;
  for (const auto& p : panels) {
    CurvePanel q;
    q.grid = p.grid;
    q.kind = p.kind;
    q.dates = common;
    q.values.resize(Eigen::Index(common.size()), p.values.cols());
    std::size_t j = 0;
    for (std::size_t i = 0; i < common.size(); ++i) {
      while (p.dates[j] != common[i]) ++j;
      q.values.row(Eigen::Index(i)) = p.values.row(Eigen::Index(j));
    }
    out.push_back(std::move(q));
  }
  return out;
}

CurvePanel to_weekly(const CurvePanel& panel, int anchor_weekday) {
  if (anchor_weekday < 0 || anchor_weekday > 6) throw ValidationError("anchor weekday must be in 0..6");
  CurvePanel out;
  out.grid = panel.grid;
  out.kind = panel.kind;
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < panel.dates.size(); ++i) {
    const Date d = panel.dates[i];
    const Date anchor = d + std::chrono::days((anchor_weekday - iso_weekday(d) + 7) % 7);
    const bool last_in_week = i + 1 == panel.dates.size() || panel.dates[i + 1] > anchor;
    if (last_in_week) {
      keep.push_back(Eigen::Index(i));
      out.dates.push_back(d);
    }
  }
  out.values.resize(Eigen::Index(keep.size()), panel.values.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) out.values.row(Eigen::Index(r)) = panel.values.row(keep[r]);
  return out;
}

std::vector<MonthlyObservation> load_monthly_index(const std::string& path, int lag_days) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path + "': no data rows");
  const auto header = split_csv_line(line);
  if (header.size() != 2 || header[0] != "date") throw ValidationError("'" + path + "': expected header date,index");
  std::vector<MonthlyObservation> out;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto c = split_csv_line(line);
    if (c.size() != 2) throw ValidationError("'" + path + "': wrong column count");
    const Date d = parse_date(c[0].size() == 7 ? c[0] + "-01" : c[0]) - std::chrono::days(lag_days);
    const std::chrono::year_month_day ymd{d};
    MonthlyObservation o{int(ymd.year()), unsigned(ymd.month()), parse_double(c[1], "index")};
    if (!(o.level > 0)) throw ValidationError("'" + path + "': index levels must be positive");
    if (!out.empty()) {
      const int prev = out.back().year * 12 + int(out.back().month);
      const int cur = o.year * 12 + int(o.month);
      if (cur <= prev) throw ValidationError("'" + path + "': months must be strictly increasing");
    }
    out.push_back(o);
  }
  if (out.empty()) throw ValidationError("'" + path + "': no data rows");
  return out;
}

InitialCurves load_initial_curves(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path + "': no data rows");
  const auto header = split_csv_line(line);
  const std::vector<std::string> expected{"tau", "f_nominal", "f_real", "s_cdi"};
  if (header != expected) throw ValidationError("'" + path + "': expected header tau,f_nominal,f_real,s_cdi");
  InitialCurves c;
  std::vector<double> tenors;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) throw ValidationError("'" + path + "': wrong column count");
    tenors.push_back(parse_double(cells[0], "tau"));
    c.f_nominal.push_back(parse_double(cells[1], "f_nominal"));
    c.f_real.push_back(parse_double(cells[2], "f_real"));
    c.s_cdi.push_back(parse_double(cells[3], "s_cdi"));
  }
  if (tenors.empty()) throw ValidationError("'" + path + "': no data rows");
  c.grid = PillarGrid(tenors);
  return c;
}

void write_initial_curves(const InitialCurves& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << "tau,f_nominal,f_real,s_cdi\n";
  for (std::size_t i = 0; i < c.grid.size(); ++i)
    out << fmt_double(c.grid[i]) << ',' << fmt_double(c.f_nominal[i]) << ',' << fmt_double(c.f_real[i]) << ','
        << fmt_double(c.s_cdi[i]) << '\n';
}

SyntheticPanels generate_synthetic_panel(const BlockVolSpec& spec, const InitialCurves& init, int n_weeks,
                                         std::uint64_t seed, Date start) {
  if (n_weeks < 30) throw ValidationError("n_weeks=" + std::to_string(n_weeks) + " too short for calibration round-trip");
  spec.validate();
  SimConfig cfg;
  cfg.dt = 1.0 / 52.0;
  cfg.horizon = (n_weeks - 1) * cfg.dt;
  cfg.n_paths = 1;
  cfg.seed = seed;
  cfg.record_pillars = init.grid.tenors();
  cfg.kernel = simd::Isa::Scalar;
  auto grid = std::make_shared<const std::vector<double>>(
      build_sim_grid(cfg.record_pillars, cfg.dt, cfg.horizon, cfg.grid_tail));
  const SimOutput out = run_paths(make_initial_state(init, grid), spec, cfg);

  auto panel = [&](CurveField c, SeriesKind kind) {
    CurvePanel p;
    p.kind = kind;
    p.grid = init.grid;
    p.values.resize(n_weeks, Eigen::Index(init.grid.size()));
    for (int r = 0; r < n_weeks; ++r) {
      p.dates.push_back(start + std::chrono::days(7 * r));
      const double* row = out.curve_row(0, std::size_t(r), c);
      for (std::size_t j = 0; j < init.grid.size(); ++j) p.values(r, Eigen::Index(j)) = row[j];
    }
    return p;
  };
  return {panel(CurveField::fN, SeriesKind::NominalFwd), panel(CurveField::fR, SeriesKind::RealFwd),
          panel(CurveField::sCDI, SeriesKind::CdiSpread), panel(CurveField::sIPCA, SeriesKind::IpcaSpread)};
}

}  // namespace hjm3
