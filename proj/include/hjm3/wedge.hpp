#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "hjm3/marketdata.hpp"

namespace hjm3 {

// Per-issuer daily series on the dates where both families are quoted. Rates and spreads are decimal p.a.
struct IssuerSeries {
  std::string issuer;
  std::vector<Date> dates;
  std::vector<double> s_cdi, s_ipca;
  std::vector<double> dur_cdi, dur_ipca;
  std::vector<double> be;     // matched breakeven
  std::vector<double> f_nom;  // nominal forward at the mid-duration, NaN when not supplied
  std::vector<double> delta;  // s_ipca - s_cdi - be

  std::size_t size() const { return dates.size(); }
};

std::vector<IssuerSeries> issuer_panel(const ConstituentPanel& panel, int min_joint_days);

enum class MatchScheme { Nearest, InterpMid, SplitSide };
MatchScheme parse_scheme(std::string_view s);
std::string to_string(MatchScheme s);

// Breakeven at one date for the given family durations.
double match_breakeven_at(const std::vector<double>& pillars, const std::vector<double>& be_row, double dur_cdi,
                          double dur_ipca, MatchScheme scheme);

// Fills be, f_nom and delta. Dates missing from the breakeven panel are dropped.
void match_breakeven(IssuerSeries& issuer, const CurvePanel& be, MatchScheme scheme,
                     const CurvePanel* nominal = nullptr);

struct IssuerStats {
  std::string issuer;
  double mean = 0, median = 0, std = 0;  // of delta, decimal
  int n = 0;
  double duration = 0;  // mid-duration
  double dur_cdi = 0, dur_ipca = 0;
  double f_nom = kNaN, be = kNaN, s_cdi = kNaN;  // time averages, decimal
};

IssuerStats compute_delta(const IssuerSeries& issuer);

struct DeltaSummary {
  double mean_of_means = 0, std_of_means = 0, mean_of_stds = 0;
};
DeltaSummary summarize(const std::vector<IssuerStats>& issuers);

struct TaxLinear {
  double raw = 0;    // -tau (fN + sCDI)
  double delta = 0;  // raw - (fN - fR)
};
TaxLinear tax_benchmark_linear(double f_nom, double f_real, double s_cdi, double tau_pf);

struct TaxExact {
  double after_tax = 0;   // continuously compounded after-tax yield
  double linear_after = 0;
  double correction = 0;  // after_tax - linear_after
};
TaxExact tax_benchmark_exact(double y, double holding_years, double tau_pf);

enum class TaxMode { Linear, Exact };
TaxMode parse_tax_mode(std::string_view s);

struct WedgeRow {
  IssuerStats stats;
  double tau_linear = 0, tau_exact = 0;
  double tau_fiscal = 0;  // the one selected by the report mode
  double eta = 0;
};

struct WedgeReport {
  TaxMode mode = TaxMode::Linear;
  double tau_pf = 0.15;
  std::vector<WedgeRow> rows;
  DeltaSummary delta;
  double mean_tau = 0, mean_eta = 0;
  double se_eta = kNaN, se_mean = kNaN;  // NaN with fewer than two issuers
};

// Breakeven enters with its sign: tau_fiscal = -BE + (after-tax yield - gross yield).
WedgeReport decompose(const std::vector<IssuerStats>& issuers, TaxMode mode, double tau_pf = 0.15);

struct RegressionResult {
  std::vector<std::string> names;
  std::vector<double> coef, se;
  double r2 = 0, adj_r2 = 0;
  double p_beta_one = kNaN;  // two-sided, H0: slope on tau_fiscal = 1
  double t_beta_one = kNaN;
  int n = 0;
};

RegressionResult cross_section_regression(const WedgeReport& report, bool include_duration_diff);

struct RegimeReport {
  std::string name;
  Date from, to;
  WedgeReport report;
  std::vector<std::string> flagged;  // issuers with fewer than min_days joint days in the window
};

struct RegimeSplit {
  RegimeReport before, after;
  double diff = 0, se_diff = kNaN, z = kNaN;  // after mean minus before mean
};

RegimeSplit regime_split(const std::vector<IssuerSeries>& issuers, Date break_date, TaxMode mode,
                         double tau_pf = 0.15, int min_days = 30);

// Issuer-level summary rows: issuer,mean_bp,median_bp,std_bp,n_obs,duration,dur_cdi,dur_ipca,f_nominal,breakeven,s_cdi
std::vector<IssuerStats> load_issuer_stats(const std::string& path);

nlohmann::json to_json(const WedgeReport& r);
nlohmann::json to_json(const RegressionResult& r);
nlohmann::json to_json(const RegimeSplit& r);

}  // namespace hjm3
