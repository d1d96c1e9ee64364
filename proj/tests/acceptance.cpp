// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "latmax/adlm.hpp"
#include "latmax/covariance.hpp"
#include "latmax/fieldsim.hpp"
#include "latmax/lattice.hpp"
#include "latmax/lookup.hpp"
#include "latmax/mcdlm.hpp"
#include "latmax/pipeline.hpp"
#include "latmax/rng.hpp"
#include "latmax/special.hpp"
#include "latmax/validate.hpp"

using namespace latmax;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

PeakSampleSet sample(const NeighborhoodCov& cov, PeakModel model, std::size_t n, std::uint64_t seed) {
  SampleOptions o;
  o.target_n = n;
  o.max_m = 1'000'000'000;
  o.seed = seed;
  return sample_local_maxima(cov, model, o);
}

// sup over both samples' points of |S_a - S_b|, where S_b is a function.
double sup_vs_function(const std::vector<double>& sorted, const std::function<double(double)>& cdf) {
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, std::abs((i + 1) / n - f), std::abs(i / n - f)});
  }
  return d;
}

SimSpec field_spec(std::vector<double> etas, std::size_t n, std::uint64_t seed) {
  SimSpec s;
  s.lattice = LatticeSpec({50, 50});
  s.kernel = KernelSpec::elliptical(std::move(etas));
  s.n_fields = n;
  s.seed = seed;
  return s;
}

NeighborhoodCov analytic_cov(const KernelSpec& k, const Neighborhood& nb) {
  return kernel_cov(k, LatticeSpec(std::vector<std::size_t>(nb.dim(), 3)), nb);
}

std::vector<double> mc_pvalues(const PeakSampleSet& set, const std::vector<double>& heights,
                               const std::function<double(double)>& transform = nullptr) {
  std::vector<double> p(heights.size());
  for (std::size_t i = 0; i < heights.size(); ++i)
    p[i] = peak_pvalue(set, transform ? transform(heights[i]) : heights[i]).value;
  return p;
}

Outcome c1_iid() {
  const Neighborhood nb = build_neighborhood(NeighborhoodKind::full, 2);
  const NeighborhoodCov cov(nb, Eigen::MatrixXd::Identity(9, 9), CovProvenance::kronecker);
  const auto set = sample(cov, PeakModel::gaussian(), 100'000, 101);
  const double ks = sup_vs_function(set.heights(), [](double u) { return std::pow(normal_cdf(u), 9); });
  return {ks < 0.01, "KS vs Phi(u)^9 = " + fmt("%.5f", ks) + " (< 0.01)"};
}

Outcome c2_kronecker() {
  const double expected[9][9] = {
      {1.0000, 0.9900, 0.9606, 0.9900, 0.9801, 0.9510, 0.9606, 0.9510, 0.9227},
      {0.9900, 1.0000, 0.9900, 0.9801, 0.9900, 0.9801, 0.9510, 0.9606, 0.9510},
      {0.9606, 0.9900, 1.0000, 0.9510, 0.9801, 0.9900, 0.9227, 0.9510, 0.9606},
      {0.9900, 0.9801, 0.9510, 1.0000, 0.9900, 0.9606, 0.9900, 0.9801, 0.9510},
      {0.9801, 0.9900, 0.9801, 0.9900, 1.0000, 0.9900, 0.9801, 0.9900, 0.9801},
      {0.9510, 0.9801, 0.9900, 0.9606, 0.9900, 1.0000, 0.9510, 0.9801, 0.9900},
      {0.9606, 0.9510, 0.9227, 0.9900, 0.9801, 0.9510, 1.0000, 0.9900, 0.9606},
      {0.9510, 0.9606, 0.9510, 0.9801, 0.9900, 0.9801, 0.9900, 1.0000, 0.9900},
      {0.9227, 0.9510, 0.9606, 0.9510, 0.9801, 0.9900, 0.9606, 0.9900, 1.0000}};
  const Eigen::MatrixXd m = full_canonical_matrix(kronecker_cov(0.99, 2));
  int bad = 0;
  double worst = 0.0;
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) {
      const double rounded = std::round(m(i, j) * 1e4) / 1e4;
      worst = std::max(worst, std::abs(m(i, j) - expected[i][j]));
      bad += std::abs(rounded - expected[i][j]) > 1e-9;
    }
  return {bad == 0, std::to_string(81 - bad) + "/81 entries match to 4 dp (max raw diff " + fmt("%.2e", worst) + ")"};
}

Outcome c3_adlm_1d() {
  std::string detail;
  bool pass = true;
  for (double rho : {0.5, 0.9}) {
    const auto set = sample(kronecker_cov(rho, 1), PeakModel::gaussian(), 1'000'000, 300 + static_cast<int>(rho * 10));
    const AdlmDistribution adlm(AdlmParams::isotropic(rho, 1));
    const double d = sup_vs_function(set.heights(), [&](double u) { return adlm.cdf(u); });
    pass = pass && d < 0.01;
    detail += "rho=" + fmt("%.1f", rho) + " sup=" + fmt("%.5f", d) + "; ";
  }
  return {pass, detail + "(< 0.01)"};
}

Outcome c4_pc() {
  const Neighborhood nb = build_neighborhood(NeighborhoodKind::partial, 2);
  std::string detail;
  bool pass = true;
  for (double rho : {0.01, 0.5}) {
    const double eta = rho_to_eta(rho);
    const SimSpec spec = field_spec({eta, eta}, 1000, 400 + static_cast<int>(rho * 100));
    const ReferenceDistribution ref = reference_distribution(spec, nb);
    const auto& h = ref.heights();
    const auto p_ref = ref.pvalues();
    const auto set = sample(analytic_cov(spec.kernel, nb), PeakModel::gaussian(), 1'000'000, 410);
    const auto p_mc = mc_pvalues(set, h);
    const double r1 = discrete_axis_correlation(eta, 1.0, 1);
    const AdlmDistribution adlm(AdlmParams::isotropic(r1, 2));
    std::vector<double> p_ad(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) p_ad[i] = adlm.survival(h[i]);
    const double dm = pp_sup_distance(p_ref, p_mc);
    const double da = pp_sup_distance(p_ref, p_ad);
    pass = pass && dm < 0.02 && da < 0.02;
    detail += "rho=" + fmt("%.2f", rho) + " peaks=" + std::to_string(h.size()) + " MCDLM=" + fmt("%.4f", dm) +
              " ADLM=" + fmt("%.4f", da) + "; ";
  }
  return {pass, detail + "(< 0.02)"};
}

Outcome c5_full_connectivity() {
  const Neighborhood nb = build_neighborhood(NeighborhoodKind::full, 2);
  const double eta = rho_to_eta(0.5);
  const SimSpec spec = field_spec({eta, eta}, 1000, 500);
  const ReferenceDistribution ref = reference_distribution(spec, nb);
  const auto& h = ref.heights();
  const auto p_ref = ref.pvalues();
  const auto set = sample(analytic_cov(spec.kernel, nb), PeakModel::gaussian(), 1'000'000, 510);
  const auto p_mc = mc_pvalues(set, h);
  const AdlmDistribution adlm(AdlmParams::isotropic(discrete_axis_correlation(eta, 1.0, 1), 2));
  std::vector<double> p_ad(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) p_ad[i] = adlm.survival(h[i]);
  const PWindow w{0.01, 0.10};
  const double rm = mean_ratio(p_ref, p_mc, w);
  const double ra = mean_ratio(p_ref, p_ad, w);
  return {rm >= 0.90 && rm <= 1.10 && ra < 0.80,
          "MCDLM ratio=" + fmt("%.3f", rm) + " (in [0.90,1.10]), ADLM ratio=" + fmt("%.3f", ra) + " (< 0.80), peaks=" +
              std::to_string(h.size())};
}

Outcome c6_perpendicular() {
  double worst = 0.0;
  for (std::size_t dim : {2u, 3u})
    for (double rho : {0.01, 0.5, 0.99}) {
      const NeighborhoodCov cov = kronecker_cov(rho, dim);
      const auto& offs = cov.nbhd().offsets();
      const Eigen::MatrixXd& m = cov.matrix();
      for (std::size_t a = 0; a < offs.size(); ++a)
        for (std::size_t b = 0; b < offs.size(); ++b) {
          int na = 0, nb = 0, da = -1, db = -1;
          for (std::size_t d = 0; d < dim; ++d) {
            if (offs[a][d]) na++, da = static_cast<int>(d);
            if (offs[b][d]) nb++, db = static_cast<int>(d);
          }
          if (na != 1 || nb != 1 || da == db) continue;
          const auto i = static_cast<Eigen::Index>(a + 1), j = static_cast<Eigen::Index>(b + 1);
          const double cond = m(i, j) - m(i, 0) * m(0, j) / m(0, 0);
          worst = std::max(worst, std::abs(cond));
        }
    }
  return {worst < 1e-12, "max |conditional cross-covariance| = " + fmt("%.2e", worst) + " (< 1e-12)"};
}

Outcome c7_tfield() {
  const Neighborhood nb = build_neighborhood(NeighborhoodKind::full, 2);
  const double eta = rho_to_eta(0.5);
  SimSpec spec = field_spec({eta, eta}, 500, 700);
  spec.model = SimModel::student_t(20);
  const ReferenceDistribution ref = reference_distribution(spec, nb);
  const auto& h = ref.heights();
  const auto p_ref = ref.pvalues();
  const NeighborhoodCov cov = analytic_cov(spec.kernel, nb);
  const auto set_t = sample(cov, PeakModel::student_t(20), 1'000'000, 710);
  const auto set_g = sample(cov, PeakModel::gaussian(), 1'000'000, 720);
  const auto p_t = mc_pvalues(set_t, h);
  const auto p_g = mc_pvalues(set_g, h, [](double t) { return gaussianize_t(t, 20); });
  const double ks_t = ks_two_sample(p_t, p_ref);
  const double ks_gt = ks_two_sample(p_g, p_t);
  const double ks_g = ks_two_sample(p_g, p_ref);
  return {ks_t < 0.03 && ks_gt < 0.04,
          "KS(t, ref)=" + fmt("%.4f", ks_t) + " (< 0.03), KS(gaussianized, t)=" + fmt("%.4f", ks_gt) +
              " (< 0.04), KS(gaussianized, ref)=" + fmt("%.4f", ks_g) + ", peaks=" + std::to_string(h.size())};
}

Outcome c8_empirical() {
  const Neighborhood nb = build_neighborhood(NeighborhoodKind::full, 2);
  const double eta = rho_to_eta(0.5);
  const SimSpec spec = field_spec({eta, eta}, 200, 800);
  const auto fields = simulate_gaussian(spec);
  const NeighborhoodCov est = psd_repair(empirical_cov(fields, nb));
  const NeighborhoodCov truth = analytic_cov(spec.kernel, nb);
  const double maxdiff = (est.matrix() - truth.matrix()).cwiseAbs().maxCoeff();
  const auto a = sample(est, PeakModel::gaussian(), 1'000'000, 810);
  const auto b = sample(truth, PeakModel::gaussian(), 1'000'000, 820);
  const double sup = ks_two_sample(a.heights(), b.heights());
  return {maxdiff < 0.05 && sup < 0.01,
          "max entry diff=" + fmt("%.4f", maxdiff) + " (< 0.05), survival sup diff=" + fmt("%.5f", sup) + " (< 0.01)"};
}

Outcome c9_nonseparable() {
  const Neighborhood nb = build_neighborhood(NeighborhoodKind::full, 2);
  const double e1 = rho_to_eta(0.01), e2 = rho_to_eta(0.5);
  SimSpec spec = field_spec({e1, e2}, 1000, 900);
  spec.model = SimModel::swapped(spec.kernel);
  const ReferenceDistribution ref = reference_distribution(spec, nb);
  const auto& h = ref.heights();
  const auto p_ref = ref.pvalues();
  const NeighborhoodCov cov = mixture_cov(analytic_cov(spec.kernel, nb), analytic_cov(spec.model.second_kernel, nb));
  const auto set = sample(cov, PeakModel::gaussian(), 1'000'000, 910);
  const double d = pp_sup_distance(p_ref, mc_pvalues(set, h));
  return {d < 0.02, "pp sup=" + fmt("%.4f", d) + " (< 0.02), peaks=" + std::to_string(h.size())};
}

Outcome c10_lookup() {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  LookupBuildOptions o;
  o.samples_per_rho = 100'000;
  o.u_points = 100'000;
  o.seed = 1000;
  const LookupTable raw = build_table(2, o);
  const LookupTable table = smooth_table(raw);
  const double build_s = std::chrono::duration<double>(clock::now() - t0).count();
  bool monotone = true;
  for (std::size_t r = 0; r < table.rows(); ++r)
    for (std::size_t j = 1; j < table.cols(); ++j) monotone = monotone && table.at(r, j) >= table.at(r, j - 1);
  std::mt19937_64 gen(1010);
  std::uniform_real_distribution<double> rho_dist(0.01, 0.99), q_dist(0.02, 0.98);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const double rho = rho_dist(gen);
    const auto direct = sample(kronecker_cov(rho, 2), PeakModel::gaussian(), 1'000'000, 1100 + k);
    const auto& hs = direct.heights();
    const double u = hs[static_cast<std::size_t>(q_dist(gen) * static_cast<double>(hs.size()))];
    worst = std::max(worst, std::abs(query(table, rho, u).pvalue - peak_pvalue(direct, u).value));
  }
  return {worst < 0.005 && monotone && build_s < 3600.0,
          "max |dp|=" + fmt("%.5f", worst) + " (< 0.005), rows monotone=" + (monotone ? "yes" : "no") +
              ", build " + fmt("%.0f", build_s) + " s (< 3600)"};
}

Outcome c12_pipeline() {
  const Neighborhood nb = build_neighborhood(NeighborhoodKind::full, 2);
  const double eta = rho_to_eta(0.5);
  double fdp_sum = 0.0;
  std::size_t any = 0, peaks = 0;
  const int studies = 200;
  for (int s = 0; s < studies; ++s) {
    const SimSpec spec = field_spec({eta, eta}, 40, mix64(1200 + s));
    StudyData study;
    study.subjects = simulate_gaussian(spec);
    AnalyzeOptions a;
    a.method = PeakMethod::mcdlm_t;
    a.sampling.target_n = 0;
    a.sampling.seed = mix64(1300 + s);
    const AnalysisResult r = analyze_peaks(study, nb, a);
    std::size_t rej = 0;
    for (bool b : r.rejected) rej += b;
    peaks += r.peaks.size();
    if (rej > 0) {
      fdp_sum += 1.0;  // every rejection is false under the null
      ++any;
    }
  }
  const double fdr = fdp_sum / studies;
  return {fdr <= 0.07, "empirical FDR=" + fmt("%.3f", fdr) + " (<= 0.07), studies with rejections=" +
                           std::to_string(any) + "/200, mean peaks/study=" + fmt("%.1f", peaks / 200.0)};
}

Outcome c11_q() {
  double worst_a = 0.0, worst_b = 0.0;
  for (int i = 1; i <= 10; ++i) {
    const double rho = 0.095 * i;  // 0.095 .. 0.95
    worst_a = std::max(worst_a, std::abs(q_factor(rho, 0.0) - adlm_alpha(rho) / M_PI));
  }
  for (int i = 0; i <= 60; ++i) {
    const double z = -3.0 + 0.1 * i;
    worst_b = std::max(worst_b, std::abs(q_factor(0.0, z) - std::pow(normal_cdf(z), 2)));
  }
  return {worst_a < 1e-9 && worst_b < 1e-6,
          "max |Q(rho,0)-alpha/pi|=" + fmt("%.2e", worst_a) + " (< 1e-9), max |Q(0,z)-Phi(z)^2|=" +
              fmt("%.2e", worst_b) + " (< 1e-6)"};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const Criterion all[] = {
      {1, "IID oracle", 10, c1_iid},
      {2, "Kronecker exactness", 1, c2_kronecker},
      {3, "1D ADLM vs MCDLM", 60, c3_adlm_1d},
      {4, "PC agreement", 600, c4_pc},
      {5, "FC MCDLM vs ADLM", 900, c5_full_connectivity},
      {6, "Perpendicular independence", 1, c6_perpendicular},
      {7, "t-field calibration", 1200, c7_tfield},
      {8, "Empirical covariance recovery", 600, c8_empirical},
      {9, "Nonseparable mixture", 900, c9_nonseparable},
      {10, "Lookup fidelity", 3600 + 600, c10_lookup},
      {11, "Q-function anchors", 1, c11_q},
      {12, "Pipeline null calibration", 1800, c12_pipeline},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("[%s] %2d %-30s %s; %.1f s (budget %.0f s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.budget_s);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
