#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "latmax/adlm.hpp"
#include "latmax/covariance.hpp"
#include "latmax/mcdlm.hpp"
#include "latmax/special.hpp"

using namespace latmax;

namespace {

// P(X < x, Y < x) for standard normals with correlation r, by composite
// Simpson integration of phi(y) Phi((x - r y) / sqrt(1 - r^2)) over y < x.
double bvn_lower(double x, double r) {
  const double lo = -12.0;
  if (x <= lo) return 0.0;
  const int n = 20000;
  const double h = (x - lo) / n, s = std::sqrt(1 - r * r);
  double acc = 0;
  for (int i = 0; i <= n; ++i) {
    const double y = lo + i * h;
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    acc += w * normal_pdf(y) * normal_cdf((x - r * y) / s);
  }
  return acc * h / 3;
}

// P(both neighbors below the center | center = z) on one axis.
double q_oracle(double rho, double z) {
  const double h = std::sqrt((1 - rho) / (1 + rho));
  return bvn_lower(h * z, -rho * rho);
}

}  // namespace

TEST_CASE("Q equals the conditional bivariate probability") {
  for (double rho : {0.0, 0.05, 0.3, 0.5, 0.8, 0.95})
    for (double z : {-3.0, -1.0, 0.0, 0.7, 2.5, 5.0})
      CHECK(q_factor(rho, z) == doctest::Approx(q_oracle(rho, z)).epsilon(1e-8));
}

TEST_CASE("Q at rho = 0 is Phi squared, and is monotone in z") {
  for (double z : {-2.0, 0.0, 1.5}) CHECK(q_factor(0.0, z) == doctest::Approx(std::pow(normal_cdf(z), 2)));
  double prev = 0.0;
  for (double z = -6; z <= 8; z += 0.25) {
    const double q = q_factor(0.6, z);
    CHECK(q >= prev);
    CHECK(q <= 1.0);
    prev = q;
  }
  CHECK(q_factor(0.6, INFINITY) == 1.0);
  CHECK_THROWS_AS(q_factor(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("independent 1D peaks: P(height > 0) = 7/8") {
  // Center above two iid neighbors: density 3 phi Phi^2, survival at 0 is 1 - (1/2)^3.
  const AdlmDistribution d(AdlmParams::isotropic(0.0, 1));
  CHECK(d.survival(0.0) == doctest::Approx(0.875).epsilon(1e-9));
  CHECK(d.normalizer() == doctest::Approx(1.0 / 3).epsilon(1e-9));
  for (double u : {-1.0, 0.5, 2.0}) CHECK(d.survival(u) == doctest::Approx(1 - std::pow(normal_cdf(u), 3)).epsilon(1e-9));
}

TEST_CASE("density integrates to one and survival is monotone") {
  const AdlmDistribution d(AdlmParams::isotropic(0.5, 3));
  double s = 0;
  const double h = 1e-3;
  for (double z = AdlmDistribution::kLower; z < AdlmDistribution::kUpper; z += h) s += d.density(z + h / 2) * h;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  double prev = 1.0;
  for (double u = -5; u < 10; u += 0.0137) {
    const double v = d.survival(u);
    CHECK(v <= prev + 1e-15);
    prev = v;
  }
  CHECK(d.survival(100) == 0.0);
  CHECK(d.survival(-100) == 1.0);
}

TEST_CASE("survival interpolation agrees with direct quadrature") {
  const AdlmParams p{{0.4, 0.7}, {}};
  const AdlmDistribution d(p);
  for (double u : {-0.3, 1.234, 3.21}) {
    double tail = 0;
    const int n = 40000;
    const double h = (AdlmDistribution::kUpper - u) / n;
    for (int i = 0; i <= n; ++i) {
      const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
      tail += w * d.unnormalized(u + i * h);
    }
    CHECK(d.survival(u) == doctest::Approx(tail * h / 3 / d.normalizer()).epsilon(1e-8));
  }
}

TEST_CASE("1D survival equals the orthant probability of the three-voxel vector") {
  // P(Z0 > u, Z1 < Z0, Z2 < Z0) / P(Z1 < Z0, Z2 < Z0), integrating over Z0
  // with the bivariate oracle for the neighbors.
  for (double rho : {0.3, 0.9}) {
    const AdlmDistribution d(AdlmParams::isotropic(rho, 1));
    auto mass = [rho](double lo) {
      const int n = 800;
      const double h = (8.0 - lo) / n;
      double acc = 0;
      for (int i = 0; i <= n; ++i) {
        const double z = lo + i * h;
        const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
        acc += w * normal_pdf(z) * q_oracle(rho, z);
      }
      return acc * h / 3;
    };
    const double total = mass(-8.0);
    for (double u : {0.0, 1.5}) CHECK(std::abs(d.survival(u) - mass(u) / total) < 1e-4);
  }
}

TEST_CASE("boundary axes") {
  // One neighbor with correlation rho: P(Z1 < Z0) = 1/2 normalizes Phi(h z) phi(z).
  const AdlmDistribution one(AdlmParams{{0.5}, {1}});
  CHECK(one.normalizer() == doctest::Approx(0.5).epsilon(1e-9));
  const AdlmDistribution none(AdlmParams{{0.5}, {0}});
  CHECK(none.survival(1.0) == doctest::Approx(normal_sf(1.0)).epsilon(1e-9));
  CHECK_THROWS_AS(AdlmDistribution(AdlmParams{{0.5}, {3}}), std::invalid_argument);
  CHECK_THROWS_AS(AdlmDistribution(AdlmParams{{0.5, 0.5}, {1}}), std::invalid_argument);
}

TEST_CASE("ADLM matches Monte Carlo for a Kronecker partial neighborhood") {
  const double rho = 0.5;
  // Center and its four axis neighbors.
  const auto nb = build_neighborhood(NeighborhoodKind::partial, 2);
  std::vector<Offset> rows{{0, 0}};
  for (const auto& a : nb.offsets()) rows.push_back(a);
  Eigen::MatrixXd m(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      int d2 = 0;
      for (int d = 0; d < 2; ++d) d2 += (rows[i][d] - rows[j][d]) * (rows[i][d] - rows[j][d]);
      m(i, j) = std::pow(rho, d2);
    }
  SampleOptions o;
  o.target_n = 200000;
  o.seed = 21;
  o.threads = 1;
  const auto set = sample_local_maxima(NeighborhoodCov(nb, m, CovProvenance::kronecker), PeakModel::gaussian(), o);
  const AdlmDistribution d(AdlmParams::isotropic(rho, 2));
  double worst = 0;
  for (std::size_t i = 0; i < set.accepted(); i += 101)
    worst = std::max(worst, std::abs(d.cdf(set.heights()[i]) - empirical_cdf(set, set.heights()[i])));
  CHECK(worst < 0.006);
}

TEST_CASE("near-one correlation is flagged degenerate") {
  const AdlmDistribution d(AdlmParams::isotropic(1 - 1e-9, 1));
  CHECK(d.degenerate());
  CHECK_FALSE(AdlmDistribution(AdlmParams::isotropic(0.9, 1)).degenerate());
}
