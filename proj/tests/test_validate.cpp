#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "latmax/validate.hpp"

using namespace latmax;

namespace {

// adjusted_(i) = min_{j >= i} m p_(j) / j over the sorted p-values.
std::vector<double> bh_oracle(const std::vector<double>& p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    double best = 1.0;
    for (std::size_t j = i; j < m; ++j) best = std::min(best, p[order[j]] * m / (j + 1));
    out[order[i]] = best;
  }
  return out;
}

}  // namespace

TEST_CASE("BH small example") {
  const std::vector<double> p{0.01, 0.02, 0.2};
  const auto r = bh_adjust(p, 0.05);
  CHECK(r.rejected == std::vector<bool>{true, true, false});
  CHECK(r.num_rejected == 2);
  CHECK(r.adjusted[0] == doctest::Approx(0.03));
  CHECK(r.adjusted[1] == doctest::Approx(0.03));
  CHECK(r.adjusted[2] == doctest::Approx(0.2));
  CHECK(bh_adjust(std::vector<double>{1, 1, 1}).num_rejected == 0);
  CHECK(bh_adjust(std::vector<double>{0, 0}).num_rejected == 2);
  CHECK(bh_adjust(std::vector<double>{}).num_rejected == 0);
  CHECK_THROWS(bh_adjust(std::vector<double>{0.5, 1.2}));
}

TEST_CASE("BH adjusted p-values against the step-up formula") {
  std::mt19937 gen(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> p(1 + rep * 7);
    for (auto& x : p) x = std::pow(u(gen), 3);
    const auto r = bh_adjust(p, 0.1);
    const auto o = bh_oracle(p);
    std::size_t count = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(r.adjusted[i] == doctest::Approx(o[i]));
      CHECK(r.rejected[i] == (o[i] <= 0.1));
      count += r.rejected[i];
    }
    CHECK(count == r.num_rejected);
    // Raising alpha never removes a rejection.
    const auto looser = bh_adjust(p, 0.2);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK((!r.rejected[i] || looser.rejected[i]));
  }
}

TEST_CASE("window summaries") {
  const std::vector<double> ref{0.0005, 0.01, 0.02, 0.05, 0.2};
  const std::vector<double> half{0.00025, 0.005, 0.01, 0.025, 0.1};
  CHECK(mean_ratio(ref, ref) == doctest::Approx(1.0));
  CHECK(mean_ratio(ref, half) == doctest::Approx(0.5));
  CHECK(rmse_identity(ref, ref) == 0.0);
  std::vector<double> shifted = ref;
  for (auto& x : shifted) x += 0.01;
  CHECK(rmse_identity(ref, shifted) == doctest::Approx(0.01));
  CHECK(pp_sup_distance(ref, shifted) == doctest::Approx(0.01));
  PWindow w;
  CHECK_FALSE(w.contains(0.001));
  CHECK(w.contains(0.05));
  CHECK_FALSE(w.contains(0.0501));
}

TEST_CASE("KS statistics") {
  CHECK(ks_two_sample({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(ks_two_sample({1, 2}, {3, 4}) == 1.0);
  CHECK(ks_two_sample({1, 3}, {2, 4}) == doctest::Approx(0.5));
  CHECK(ks_uniform({0.5}) == doctest::Approx(0.5));
  CHECK(ks_uniform({0.25, 0.75}) == doctest::Approx(0.25));
}

TEST_CASE("pp data pairs methods with the reference") {
  const std::vector<double> ref{0.3, 0.1, 0.2};
  const auto d = pp_data(ref, {{"a", {0.35, 0.05, 0.2}}});
  const auto& c = d.curves.at("a");
  CHECK(c.reference == std::vector<double>{0.1, 0.2, 0.3});
  CHECK(c.method == std::vector<double>{0.05, 0.2, 0.35});
  CHECK_THROWS(pp_data(ref, {{"bad", {0.1}}}));
}

TEST_CASE("pp svg is deterministic and well formed") {
  const std::vector<double> ref{0.1, 0.5, 0.9};
  const auto d = pp_data(ref, {{"MCDLM", {0.1, 0.4, 0.9}}, {"ADLM <x>", {0.2, 0.5, 0.8}}});
  const std::string a = pp_svg(d), b = pp_svg(d);
  CHECK(a == b);
  CHECK(a.find("<svg") != std::string::npos);
  CHECK(a.find("</svg>") != std::string::npos);
  CHECK(a.find("class=\"identity\"") != std::string::npos);
  std::size_t n = 0;
  for (std::size_t pos = 0; (pos = a.find("class=\"method\"", pos)) != std::string::npos; ++pos) ++n;
  CHECK(n == 2);
  CHECK(a.find("ADLM &lt;x&gt;") != std::string::npos);
  CHECK(a.find("<x>") == std::string::npos);
}

TEST_CASE("window summaries are invariant to permuting the pairs") {
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> u(0, 0.06);
  std::vector<double> ref(200), met(200);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    ref[i] = u(gen);
    met[i] = ref[i] * (0.8 + 0.4 * u(gen) / 0.06);
  }
  std::vector<std::size_t> perm(ref.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), gen);
  std::vector<double> r2, m2;
  for (std::size_t i : perm) {
    r2.push_back(ref[i]);
    m2.push_back(met[i]);
  }
  CHECK(mean_ratio(ref, met) == doctest::Approx(mean_ratio(r2, m2)));
  CHECK(rmse_identity(ref, met) == doctest::Approx(rmse_identity(r2, m2)));
}

TEST_CASE("calibrated p-values give ratio near one") {
  std::mt19937 gen(4);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> ref(200000), met(200000);
  for (std::size_t i = 0; i < ref.size(); ++i) ref[i] = met[i] = u(gen);
  CHECK(mean_ratio(ref, met) == doctest::Approx(1.0));
  CHECK(rmse_identity(ref, met) == 0.0);
  CHECK(ks_uniform(ref) < 0.005);
}
