#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hjm3/common.hpp"

namespace hjm3 {

class BlockVolSpec;

class PillarGrid {
 public:
  PillarGrid() = default;
  explicit PillarGrid(std::vector<double> tenors);

  const std::vector<double>& tenors() const { return tenors_; }
  std::size_t size() const { return tenors_.size(); }
  double operator[](std::size_t i) const { return tenors_[i]; }
  double back() const { return tenors_.back(); }
  // Index of a tenor equal to `t` within 1e-9, or -1.
  int find(double t) const;

 private:
  std::vector<double> tenors_;
};

enum class SeriesKind { NominalFwd, RealFwd, CdiSpread, IpcaSpread };

bool is_spread_kind(SeriesKind k);
std::string to_string(SeriesKind k);

// Missing cells are NaN and only allowed for spread kinds.
struct CurvePanel {
  std::vector<Date> dates;
  PillarGrid grid;
  Eigen::MatrixXd values;  // dates x tenors
  SeriesKind kind = SeriesKind::NominalFwd;

  std::size_t rows() const { return dates.size(); }
  void validate() const;
  // Rows with dates in [from, to].
  CurvePanel window(Date from, Date to) const;
  // Keeps the listed tenors (must all be on the grid).
  CurvePanel select_tenors(const std::vector<double>& tenors) const;
};

enum class Family { CDI, IPCA };
Family parse_family(std::string_view s);

struct ConstituentRow {
  Date date;
  Family family;
  std::string issuer;
  std::string ticker;
  double spread;
  double duration;
  double weight;
};

struct ConstituentPanel {
  std::vector<ConstituentRow> rows;
  void validate() const;
};

CurvePanel load_curve_panel(const std::string& path, SeriesKind kind);
void write_curve_panel(const CurvePanel& panel, const std::string& path);
ConstituentPanel load_constituents(const std::string& path);

std::vector<CurvePanel> align_panels(const std::vector<CurvePanel>& panels);

// anchor_weekday uses 0 = Monday ... 4 = Friday. A trailing partial week keeps its last observation.
CurvePanel to_weekly(const CurvePanel& panel, int anchor_weekday = 4);

struct MonthlyObservation {
  int year;
  unsigned month;
  double level;
};

// CSV `date,index` with ISO dates (YYYY-MM-DD or YYYY-MM). Each date is shifted back by
// lag_days before it is assigned to a calendar month.
std::vector<MonthlyObservation> load_monthly_index(const std::string& path, int lag_days = 0);

struct InitialCurves {
  PillarGrid grid;
  std::vector<double> f_nominal;
  std::vector<double> f_real;
  std::vector<double> s_cdi;
};

InitialCurves load_initial_curves(const std::string& path);
void write_initial_curves(const InitialCurves& c, const std::string& path);

struct SyntheticPanels {
  CurvePanel nominal;
  CurvePanel real;
  CurvePanel cdi_spread;
  CurvePanel ipca_spread;
};

SyntheticPanels generate_synthetic_panel(const BlockVolSpec& spec, const InitialCurves& init, int n_weeks,
                                         std::uint64_t seed, Date start = parse_date("2021-01-08"));

}  // namespace hjm3
