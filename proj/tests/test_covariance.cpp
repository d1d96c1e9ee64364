#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "latmax/covariance.hpp"
#include "latmax/fieldsim.hpp"

using namespace latmax;

namespace {

double oracle_axis_corr(double eta, int lag) {
  const int w = static_cast<int>(std::ceil(8 * eta));
  double num = 0, den = 0;
  for (int k = -w; k <= w; ++k) {
    const double a = std::exp(-k * k / (2 * eta * eta));
    den += a * a;
    const int j = k + lag;
    if (j >= -w && j <= w) num += a * std::exp(-j * j / (2 * eta * eta));
  }
  return num / den;
}

}  // namespace

TEST_CASE("kronecker covariance in 1D") {
  const double r = 0.3;
  const auto c = kronecker_cov(r, 1);
  Eigen::Matrix3d expected;
  expected << 1, r, r, r, 1, std::pow(r, 4), r, std::pow(r, 4), 1;
  CHECK((c.matrix() - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(c.provenance() == CovProvenance::kronecker);
}

TEST_CASE("kronecker canonical matrix is rho to the squared lag distance") {
  const double r = 0.7;
  for (std::size_t dim : {2u, 3u}) {
    const auto m = full_canonical_matrix(kronecker_cov(r, dim));
    REQUIRE(m.rows() == static_cast<Eigen::Index>(std::pow(3, dim)));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const auto a = offset_from_canonical(i, dim), b = offset_from_canonical(j, dim);
        int d2 = 0;
        for (std::size_t d = 0; d < dim; ++d) d2 += (a[d] - b[d]) * (a[d] - b[d]);
        CHECK(m(i, j) == doctest::Approx(std::pow(r, d2)));
      }
  }
}

TEST_CASE("discrete kernel correlation against direct convolution") {
  for (double eta : {0.3, 0.85, 2.4})
    for (int lag : {0, 1, 2, 3}) CHECK(discrete_axis_correlation(eta, 1.0, lag) == doctest::Approx(oracle_axis_corr(eta, lag)));
  const auto w = kernel_weights(1.5, 1.0);
  CHECK(w.size() == 2 * 12 + 1);
  CHECK(w[12] == 1.0);
  CHECK(w[13] == doctest::Approx(std::exp(-0.5 / 2.25)));
}

TEST_CASE("discrete kernel covariance factorizes over axes") {
  const auto nb = build_neighborhood(NeighborhoodKind::full, 2);
  const auto k = KernelSpec::elliptical({0.8, 1.7});
  const auto c = kernel_cov(k, LatticeSpec({3, 3}), nb);
  std::vector<Offset> all{{0, 0}};
  for (const auto& a : nb.offsets()) all.push_back(a);
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = 0; j < all.size(); ++j) {
      const double e = oracle_axis_corr(0.8, all[j][0] - all[i][0]) * oracle_axis_corr(1.7, all[j][1] - all[i][1]);
      CHECK(c.matrix()(i, j) == doctest::Approx(e));
    }
}

TEST_CASE("continuous kernel matches the lag-1 correlation it was built from") {
  const std::vector<double> steps{1.0};
  const std::vector<int> lag{1};
  for (double r : {0.1, 0.5, 0.9})
    CHECK(kernel_correlation(KernelSpec::continuous({rho_to_eta(r)}), steps, lag) == doctest::Approx(r));
}

TEST_CASE("psd repair") {
  const auto nb = build_neighborhood(NeighborhoodKind::partial, 1);
  Eigen::Matrix3d bad;
  bad << 1, 0.9, 0.9, 0.9, 1, -0.9, 0.9, -0.9, 1;
  const NeighborhoodCov c(nb, bad, CovProvenance::empirical);
  const auto fixed = psd_repair(c);
  CHECK(fixed.psd_repaired());
  CHECK(fixed.max_clipped() > 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fixed.matrix());
  CHECK(eig.eigenvalues().minCoeff() > -1e-12);
  for (int i = 0; i < 3; ++i) CHECK(fixed.matrix()(i, i) == doctest::Approx(1.0));

  const auto good = kronecker_cov(0.5, 1);
  const auto same = psd_repair(good);
  CHECK_FALSE(same.psd_repaired());
  CHECK((same.matrix() - good.matrix()).cwiseAbs().maxCoeff() == 0.0);

  Eigen::Matrix3d asym = Eigen::Matrix3d::Identity();
  asym(0, 1) = 0.2;
  CHECK_THROWS_AS(psd_repair(NeighborhoodCov(nb, asym, CovProvenance::empirical)), std::invalid_argument);
}

TEST_CASE("pooled lags and pair counts") {
  const std::vector<double> s2{1.0, 1.0};
  const std::vector<int> l10{1, 0};
  CHECK(pooled_lags(l10, s2, false).size() == 1);
  const auto iso = pooled_lags(l10, s2, true);
  CHECK(iso.size() == 4);
  for (const auto& a : iso) CHECK(a[0] * a[0] + a[1] * a[1] == 1);
  const std::vector<int> l11{1, 1};
  CHECK(pooled_lags(l11, s2, true).size() == 4);

  const std::vector<int> l1{1};
  CHECK(lag_pair_count(LatticeSpec({10}), l1, false) == 9);
  CHECK(lag_pair_count(LatticeSpec({10}), l1, true) == 18);
  CHECK(lag_pair_count(LatticeSpec({4, 5}), l10, false) == 15);
  CHECK(lag_pair_count(LatticeSpec({4, 5}), l10, true) == 62);
}

TEST_CASE("empirical covariance recovers the kernel covariance") {
  SimSpec spec;
  spec.lattice = LatticeSpec({30, 30});
  spec.kernel = KernelSpec::isotropic(1.0);
  spec.n_fields = 200;
  spec.seed = 17;
  const auto fields = simulate_gaussian(spec);
  const auto nb = build_neighborhood(NeighborhoodKind::full, 2);
  const auto truth = kernel_cov(spec.kernel, spec.lattice, nb);
  for (bool iso : {false, true}) {
    EmpiricalCovOptions opt;
    opt.isotropic = iso;
    const auto est = empirical_cov(fields, nb, opt);
    CHECK(est.provenance() == CovProvenance::empirical);
    CHECK((est.matrix() - truth.matrix()).cwiseAbs().maxCoeff() < 0.05);
  }
}

TEST_CASE("mixture and axis correlations") {
  const auto nb = build_neighborhood(NeighborhoodKind::partial, 2);
  const LatticeSpec lat({3, 3});
  const auto a = kernel_cov(KernelSpec::elliptical({0.5, 2.0}), lat, nb);
  const auto b = kernel_cov(KernelSpec::elliptical({2.0, 0.5}), lat, nb);
  const auto m = mixture_cov(a, b);
  CHECK((m.matrix() - 0.5 * (a.matrix() + b.matrix())).cwiseAbs().maxCoeff() < 1e-14);
  const auto r = axis_lag1_correlations(m);
  CHECK(r[0] == doctest::Approx(r[1]));
  CHECK(axis_lag1_correlations(a)[1] == doctest::Approx(oracle_axis_corr(2.0, 1)));
}

TEST_CASE("discrete kernel approaches the continuous one for wide kernels") {
  const auto nb = build_neighborhood(NeighborhoodKind::full, 2);
  const LatticeSpec lat({3, 3});
  const auto d = kernel_cov(KernelSpec::isotropic(20.0), lat, nb);
  const auto c = kernel_cov(KernelSpec::continuous({20.0, 20.0}), lat, nb);
  CHECK((d.matrix() - c.matrix()).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("empirical covariance is block Toeplitz") {
  SimSpec spec;
  spec.lattice = LatticeSpec({15, 15});
  spec.kernel = KernelSpec::elliptical({0.7, 1.3});
  spec.n_fields = 10;
  spec.seed = 3;
  const auto fields = simulate_gaussian(spec);
  const auto nb = build_neighborhood(NeighborhoodKind::full, 2);
  const auto est = empirical_cov(fields, nb);
  std::vector<Offset> all{{0, 0}};
  for (const auto& a : nb.offsets()) all.push_back(a);
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = 0; j < all.size(); ++j)
      for (std::size_t k = 0; k < all.size(); ++k)
        for (std::size_t l = 0; l < all.size(); ++l) {
          const bool same = all[j][0] - all[i][0] == all[l][0] - all[k][0] && all[j][1] - all[i][1] == all[l][1] - all[k][1];
          if (same) CHECK(est.matrix()(i, j) == est.matrix()(k, l));
        }
}
