#include "latmax/adlm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "latmax/errors.hpp"
#include "latmax/quadrature.hpp"
#include "latmax/special.hpp"

namespace latmax {

namespace {

constexpr double kNearOne = 1.0 - 1e-6;

void check_rho(double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in [0,1)");
}

}  // namespace

AdlmParams AdlmParams::isotropic(double rho, std::size_t dim) {
  AdlmParams p;
  p.rhos.assign(dim, rho);
  p.validate();
  return p;
}

void AdlmParams::validate() const {
  if (rhos.empty()) throw std::invalid_argument("ADLM needs at least one axis");
  for (double r : rhos) check_rho(r);
  if (!profile.empty()) {
    if (profile.size() != rhos.size()) throw std::invalid_argument("boundary profile length mismatch");
    for (int n : profile)
      if (n < 0 || n > 2) throw std::invalid_argument("boundary profile entries must be 0, 1 or 2");
  }
}

double adlm_h(double rho) {
  check_rho(rho);
  return std::sqrt((1.0 - rho) / (1.0 + rho));
}

double adlm_alpha(double rho) {
  check_rho(rho);
  return std::asin(std::sqrt(0.5 * (1.0 - rho * rho)));
}

double q_factor(double rho, double z) {
  check_rho(rho);
  if (std::isnan(z)) throw std::invalid_argument("q_factor: z is NaN");
  if (z == std::numeric_limits<double>::infinity()) return 1.0;
  if (z == -std::numeric_limits<double>::infinity()) return 0.0;
  const double h = adlm_h(rho);
  const double alpha = adlm_alpha(rho);
  const double hz = h * z;
  const double a = 0.5 * hz * hz;
  double integral = alpha;
  if (a > 0.0) {
    // The integrand is below exp(-a / sin^2 alpha); skip quadrature once that
    // is negligible against the tolerance.
    const double s = std::sin(alpha);
    if (a / (s * s) > 745.0)
      integral = 0.0;
    else
      integral = integrate([a](double t) {
                   const double st = std::sin(t);
                   return st == 0.0 ? 0.0 : std::exp(-a / (st * st));
                 }, 0.0, alpha, 1e-10).value;
  }
  const double q = 1.0 - 2.0 * normal_sf(std::max(hz, 0.0)) + integral / std::numbers::pi;
  return std::clamp(q, 0.0, 1.0);
}

double axis_factor(double rho, int neighbors, double z) {
  switch (neighbors) {
    case 2: return q_factor(rho, z);
    case 1: return normal_cdf(adlm_h(rho) * z);
    case 0: return 1.0;
  }
  throw std::invalid_argument("axis neighbor count must be 0, 1 or 2");
}

AdlmDistribution::AdlmDistribution(AdlmParams params) : params_(std::move(params)), step_(0.01) {
  params_.validate();
  const int panels = static_cast<int>(std::lround((kUpper - kLower) / step_));
  std::vector<double> piece(panels);
  auto f = [this](double z) { return unnormalized(z); };
  for (int i = 0; i < panels; ++i) piece[i] = kronrod15(f, kLower + i * step_, kLower + (i + 1) * step_);
  node_density_.resize(panels + 1);
  for (int i = 0; i <= panels; ++i) node_density_[i] = unnormalized(kLower + i * step_);
  tail_.assign(panels + 1, 0.0);
  for (int i = panels; i-- > 0;) tail_[i] = tail_[i + 1] + piece[i];
  normalizer_ = tail_[0];
  if (!(normalizer_ > 0.0) || !std::isfinite(normalizer_))
    throw NumericError("ADLM normalizing constant is not positive");
  // Cross-check the panel sum against an adaptive rule at the outer tolerance.
  const double check = integrate(f, kLower, kUpper, 1e-9 * std::max(normalizer_, 1e-3), 20000).value;
  if (std::abs(check - normalizer_) > 1e-8 * std::max(normalizer_, 1e-3))
    throw NumericError("ADLM normalization quadrature disagrees with the panel sum");
}

double AdlmDistribution::unnormalized(double z) const {
  double prod = normal_pdf(z);
  for (std::size_t d = 0; d < params_.dim() && prod > 0.0; ++d) {
    const double rho = params_.rhos[d];
    const int n = params_.neighbors(d);
    if (n == 2 && rho > kNearOne && adlm_h(rho) * std::abs(z) < 1e-3) {
      degenerate_ = true;
      prod *= adlm_alpha(rho) / std::numbers::pi;
    } else {
      prod *= axis_factor(rho, n, z);
    }
  }
  return prod;
}

double AdlmDistribution::density(double z) const {
  if (z < kLower || z > kUpper) return 0.0;
  return unnormalized(z) / normalizer_;
}

double AdlmDistribution::survival(double u) const {
  if (std::isnan(u)) throw std::invalid_argument("survival: u is NaN");
  if (u <= kLower) return 1.0;
  if (u >= kUpper) return 0.0;
  // Cubic Hermite interpolation of the tail integral between panel nodes,
  // whose derivative there is minus the density.
  const double pos = (u - kLower) / step_;
  const auto i = std::min(static_cast<std::size_t>(pos), tail_.size() - 2);
  const double t = pos - static_cast<double>(i);
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  const double rest = h00 * tail_[i] - h10 * step_ * node_density_[i] + h01 * tail_[i + 1] -
                      h11 * step_ * node_density_[i + 1];
  return std::clamp(rest / normalizer_, 0.0, 1.0);
}

double adlm_density(const AdlmParams& params, double z) { return AdlmDistribution(params).density(z); }

double adlm_survival(const AdlmParams& params, double u) { return AdlmDistribution(params).survival(u); }

double adlm_pvalue(const AdlmParams& params, double u) { return adlm_survival(params, u); }

}  // namespace latmax
