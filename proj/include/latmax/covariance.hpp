#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "latmax/lattice.hpp"

namespace latmax {

enum class KernelKind {
  isotropic_gaussian,   // discrete lattice sum, one bandwidth
  elliptical_gaussian,  // discrete lattice sum, one bandwidth per axis
  continuous_gaussian,  // closed form exp(-(s-t)' Lambda (s-t) / 2)
};

/// Gaussian smoothing kernel. Bandwidths are kernel standard deviations in the
/// same physical units as the lattice steps.
struct KernelSpec {
  KernelKind kind = KernelKind::isotropic_gaussian;
  std::vector<double> etas;

  static KernelSpec isotropic(double eta);
  static KernelSpec elliptical(std::vector<double> etas);
  static KernelSpec continuous(std::vector<double> etas);

  // Bandwidth along `axis` (isotropic kernels broadcast their single value).
  double eta(std::size_t axis) const;
  void validate(std::size_t dim) const;
};

// Half-width, in lattice steps, of the truncated kernel window: ceil(8 eta / step).
int kernel_window(double eta, double step);

// 1D discrete Gaussian kernel exp(-(k step)^2 / (2 eta^2)) on offsets
// -window..window, unit peak; callers rescale.
std::vector<double> kernel_weights(double eta, double step);

// Correlation between voxels `lag` steps apart along one axis for white noise
// smoothed by the truncated discrete Gaussian kernel.
double discrete_axis_correlation(double eta, double step, int lag);

// Correlation between two lattice voxels separated by `lag` under `kernel`.
double kernel_correlation(const KernelSpec& kernel, std::span<const double> steps,
                          std::span<const int> lag);

enum class CovProvenance { kronecker, discrete_kernel, continuous_kernel, empirical, mixture };

std::string to_string(CovProvenance p);

/// Covariance of (center, n_1, ..., n_k); row/column 0 is the center and the
/// rest follow the neighborhood's canonical order.
class NeighborhoodCov {
 public:
  NeighborhoodCov(Neighborhood nbhd, Eigen::MatrixXd matrix, CovProvenance provenance);

  const Neighborhood& nbhd() const { return nbhd_; }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  CovProvenance provenance() const { return provenance_; }
  bool psd_repaired() const { return psd_repaired_; }
  // Largest |eigenvalue shortfall| removed by psd_repair (0 if none).
  double max_clipped() const { return max_clipped_; }
  std::size_t size() const { return static_cast<std::size_t>(matrix_.rows()); }

  void mark_repaired(double max_clipped) {
    psd_repaired_ = true;
    max_clipped_ = max_clipped;
  }

 private:
  Neighborhood nbhd_;
  Eigen::MatrixXd matrix_;
  CovProvenance provenance_;
  bool psd_repaired_ = false;
  double max_clipped_ = 0.0;
};

Eigen::MatrixXd standardize(const Eigen::MatrixXd& m);

// A^{(x)D} with A = [[1, r, r^4], [r, 1, r], [r^4, r, 1]], reordered so the
// center comes first; the neighborhood is fully connected.
NeighborhoodCov kronecker_cov(double rho, std::size_t dim);

// The 3^D x 3^D matrix in base-3 slot order (center at its own slot). Only
// defined for fully connected neighborhoods.
Eigen::MatrixXd full_canonical_matrix(const NeighborhoodCov& cov);

NeighborhoodCov kernel_cov(const KernelSpec& kernel, const LatticeSpec& lattice,
                           const Neighborhood& nbhd);

struct EmpiricalCovOptions {
  bool isotropic = false;
  // Standardize each voxel across fields (subtract mean, divide by sample SD)
  // before forming lag products.
  bool standardize = true;
  const Mask* mask = nullptr;
};

NeighborhoodCov empirical_cov(std::span<const Field> fields, const Neighborhood& nbhd,
                              const EmpiricalCovOptions& options = {});

// Lags whose products are pooled when estimating the covariance at `lag`.
std::vector<Offset> pooled_lags(std::span<const int> lag, std::span<const double> steps,
                                bool isotropic);

// Number of ordered voxel pairs (s', t') with s' - t' in the pooled lag set.
std::size_t lag_pair_count(const LatticeSpec& lattice, std::span<const int> lag, bool isotropic,
                           const Mask* mask = nullptr);

NeighborhoodCov mixture_cov(const NeighborhoodCov& a, const NeighborhoodCov& b);

NeighborhoodCov psd_repair(const NeighborhoodCov& cov, double floor = 1e-10);

// Correlation between the center and its +e_d neighbor for each axis d, read
// from the matrix; NaN where that neighbor is not in the neighborhood.
std::vector<double> axis_lag1_correlations(const NeighborhoodCov& cov);

}  // namespace latmax
