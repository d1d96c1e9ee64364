#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace latmax {

/// Peak-height CDF of the fully connected Kronecker model tabulated over
/// rho = 0.01..0.99 and a shared grid of heights u. Row r, column j holds
/// F(u_j; rho_r), stored row-major.
struct LookupTable {
  std::size_t dim = 0;
  std::vector<double> rhos;
  std::vector<double> u;
  std::vector<double> cdf;
  std::uint64_t seed = 0;
  std::size_t samples_per_rho = 0;
  bool smoothed = false;
  double lambda_rho = 0.0;
  double lambda_u = 0.0;

  std::size_t rows() const { return rhos.size(); }
  std::size_t cols() const { return u.size(); }
  double at(std::size_t r, std::size_t j) const { return cdf[r * u.size() + j]; }
  double& at(std::size_t r, std::size_t j) { return cdf[r * u.size() + j]; }
  void validate() const;
};

struct LookupBuildOptions {
  std::size_t samples_per_rho = 100'000;
  std::size_t u_points = 100'000;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

std::vector<double> lookup_rho_grid();  // 0.01, 0.02, ..., 0.99

// Seed used for the sampler of grid row `row`.
std::uint64_t lookup_row_seed(std::uint64_t seed, std::size_t row);

LookupTable build_table(std::size_t dim, const LookupBuildOptions& options);

// Smoothing splines along rho (every column), then along u (every row, with
// the grid rank as abscissa), lambdas by 5-fold CV; then each row is clamped
// to [0,1] and projected onto non-decreasing sequences.
LookupTable smooth_table(const LookupTable& table);

struct LookupResult {
  double pvalue = 1.0;
  bool censored = false;  // u outside the tabulated height range
};

LookupResult query(const LookupTable& table, double rho, double u);

}  // namespace latmax
