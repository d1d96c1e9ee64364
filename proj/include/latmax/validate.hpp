#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace latmax {

struct PPCurve {
  std::vector<double> reference;  // ascending
  std::vector<double> method;     // paired with reference
  std::vector<double> rank;       // i/n for the sorted method p-values
  std::vector<double> sorted_method;
};

/// pp-plot data for several methods against one reference.
struct PPData {
  std::map<std::string, PPCurve> curves;
};

PPData pp_data(std::span<const double> reference_p,
               const std::map<std::string, std::vector<double>>& method_p);

struct PWindow {
  double lo = 0.001;  // open
  double hi = 0.05;   // closed
  bool contains(double p) const { return p > lo && p <= hi; }
};

double mean_ratio(std::span<const double> reference_p, std::span<const double> method_p, PWindow window = {});
double rmse_identity(std::span<const double> reference_p, std::span<const double> method_p,
                     PWindow window = {});

// sup_i |method_i - reference_i| over paired p-values.
double pp_sup_distance(std::span<const double> reference_p, std::span<const double> method_p);

// sup |F_a - F_b| between two empirical distributions.
double ks_two_sample(std::vector<double> a, std::vector<double> b);
// sup |F_n - U(0,1)|.
double ks_uniform(std::vector<double> p);

struct BHResult {
  std::vector<bool> rejected;
  std::vector<double> adjusted;
  std::size_t num_rejected = 0;
};

BHResult bh_adjust(std::span<const double> pvalues, double alpha = 0.05);

// Deterministic SVG 1.1 pp-plot with identity line and one polyline per method.
std::string pp_svg(const PPData& data);
void emit_pp_svg(const PPData& data, const std::string& path);

}  // namespace latmax
