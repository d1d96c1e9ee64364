#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "latmax/covariance.hpp"
#include "latmax/lattice.hpp"

namespace latmax {

/// Joint law of the (center, neighbors) vector: Gaussian N(0, Sigma) or
/// multivariate t with shape Sigma and `nu` degrees of freedom.
struct PeakModel {
  enum class Kind { gaussian, student_t };
  Kind kind = Kind::gaussian;
  double nu = 0.0;

  static PeakModel gaussian() { return {}; }
  static PeakModel student_t(double nu);

  std::string to_string() const;
  static PeakModel parse(const std::string& text);  // "gaussian" or "t:<nu>"

  friend bool operator==(const PeakModel&, const PeakModel&) = default;
};

struct SampleOptions {
  std::size_t target_n = 1'000'000;
  std::size_t max_m = 100'000'000;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = hardware concurrency
  std::size_t chunk = 1u << 16;
};

// 10^6 for ordinary covariances, 2x10^5 once adjacent correlations reach the
// 0.99 class.
std::size_t default_target_n(const NeighborhoodCov& cov);

std::uint64_t covariance_fingerprint(const Eigen::MatrixXd& m);

/// Accepted center heights from the Monte Carlo sampler, sorted ascending.
class PeakSampleSet {
 public:
  PeakSampleSet(std::vector<double> heights, std::size_t attempted, std::uint64_t seed,
                PeakModel model, std::uint64_t fingerprint);

  const std::vector<double>& heights() const { return heights_; }
  std::size_t accepted() const { return heights_.size(); }
  std::size_t attempted() const { return attempted_; }
  std::uint64_t seed() const { return seed_; }
  const PeakModel& model() const { return model_; }
  std::uint64_t fingerprint() const { return fingerprint_; }

 private:
  std::vector<double> heights_;
  std::size_t attempted_;
  std::uint64_t seed_;
  PeakModel model_;
  std::uint64_t fingerprint_;
};

// Lower-triangular L with L L' = cov. Cholesky first, then with diagonal
// jitter 1e-12, 1e-10, 1e-8; as a last resort the eigen square root with
// clipped eigenvalues, re-triangularized by QR.
Eigen::MatrixXd sampling_factor(const Eigen::MatrixXd& cov);

PeakSampleSet sample_local_maxima(const NeighborhoodCov& cov, const PeakModel& model,
                                  const SampleOptions& options);

struct PValue {
  double value = 1.0;
  // True when the height is at or beyond the largest sampled height; the
  // value is then 1/(N+1), an upper bound rather than an estimate.
  bool censored = false;
};

double empirical_cdf(const PeakSampleSet& set, double u);
PValue peak_pvalue(const PeakSampleSet& set, double u);

// Z = -Phi^{-1}[F_{t,nu}(-T)], voxelwise.
double gaussianize_t(double t, double nu);
Field gaussianize_t(const Field& field, double nu);

}  // namespace latmax
