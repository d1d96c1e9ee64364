#pragma once

#include <cstddef>
#include <vector>

namespace latmax {

/// Parameters of the analytic peak-height law for partially connected
/// neighborhoods under a separable Gaussian correlation.
struct AdlmParams {
  std::vector<double> rhos;  // adjacent-voxel correlation per axis
  // Present axis neighbors per axis (0, 1 or 2). Empty means 2 on every axis.
  std::vector<int> profile;

  static AdlmParams isotropic(double rho, std::size_t dim);

  std::size_t dim() const { return rhos.size(); }
  int neighbors(std::size_t axis) const { return profile.empty() ? 2 : profile[axis]; }
  void validate() const;
};

double adlm_h(double rho);      // sqrt((1 - rho) / (1 + rho))
double adlm_alpha(double rho);  // asin(sqrt((1 - rho^2) / 2))

// Probability that both axis neighbors lie below a center of height z.
// rho = 0 is accepted and gives Phi(z)^2.
double q_factor(double rho, double z);

// Per-axis factor for a given neighbor count: Q for two, Phi(h z) for one,
// 1 for none.
double axis_factor(double rho, int neighbors, double z);

/// Normalized density and survival function of the peak height. The
/// unnormalized density prod_d Q_d(z) phi(z) is integrated once over [-8, 12]
/// on a fine panel grid so that later survival queries are cheap.
class AdlmDistribution {
 public:
  explicit AdlmDistribution(AdlmParams params);

  const AdlmParams& params() const { return params_; }
  double normalizer() const { return normalizer_; }
  // Set when some axis has rho so close to 1 that Q was replaced by its
  // small-h limit somewhere.
  bool degenerate() const { return degenerate_; }

  double unnormalized(double z) const;
  double density(double z) const;
  double survival(double u) const;
  double cdf(double u) const { return 1.0 - survival(u); }

  static constexpr double kLower = -8.0;
  static constexpr double kUpper = 12.0;

 private:
  AdlmParams params_;
  double step_;
  std::vector<double> tail_;  // tail_[i] = integral from node i to kUpper
  std::vector<double> node_density_;
  double normalizer_ = 0.0;
  mutable bool degenerate_ = false;
};

double adlm_density(const AdlmParams& params, double z);
double adlm_survival(const AdlmParams& params, double u);
double adlm_pvalue(const AdlmParams& params, double u);

}  // namespace latmax
