#pragma once

#include <vector>

#include "hjm3/marketdata.hpp"

namespace hjm3 {

struct ZeroCurve {
  PillarGrid grid;
  std::vector<double> zeros;  // continuously compounded
};

// Node i holds the flat forward on (tenor[i-1], tenor[i]], with tenor[-1] = 0.
struct ForwardCurve {
  PillarGrid grid;
  std::vector<double> fwds;
};

struct SvenssonParams {
  double beta0 = 0, beta1 = 0, beta2 = 0, beta3 = 0;
  double lambda1 = 1.0, lambda2 = 0.3;
};

struct SvenssonFit {
  SvenssonParams params;
  double max_residual = 0;
  int iterations = 0;
};

ZeroCurve bootstrap_discount(const std::vector<double>& yields, const std::vector<int>& business_days);

double discount(const ZeroCurve& c, double tau);
ForwardCurve forward_from_zero(const ZeroCurve& curve, double h = 1.0 / 252.0);
ZeroCurve zero_from_forward(const ForwardCurve& curve);

// Zero rate at tau under flat forwards; flat forward beyond the last node.
double interp_flat_forward(const ZeroCurve& curve, double tau);
double interp_flat_forward(const ForwardCurve& curve, double tau);

double svensson_yield(const SvenssonParams& p, double tau);
double svensson_forward(const SvenssonParams& p, double tau);

SvenssonFit fit_svensson(const std::vector<double>& yields, const PillarGrid& grid, double residual_cap = 0.0020,
                         int max_iter = 500);

ForwardCurve real_forward_curve(const SvenssonParams& p, const PillarGrid& grid, double short_end_floor);

CurvePanel bucket_spreads(const ConstituentPanel& panel, Family family, const PillarGrid& vertices,
                          const std::vector<double>& half_widths, int min_count = 5);

}  // namespace hjm3
