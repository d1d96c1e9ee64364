#include "latmax/mcdlm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <thread>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "latmax/errors.hpp"
#include "latmax/rng.hpp"
#include "latmax/special.hpp"

namespace latmax {

PeakModel PeakModel::student_t(double nu) {
  if (!(nu > 0.0) || !std::isfinite(nu)) throw std::invalid_argument("degrees of freedom must be > 0");
  return {Kind::student_t, nu};
}

std::string PeakModel::to_string() const {
  if (kind == Kind::gaussian) return "gaussian";
  char buf[64];
  std::snprintf(buf, sizeof buf, "t:%.17g", nu);
  return buf;
}

PeakModel PeakModel::parse(const std::string& text) {
  if (text == "gaussian") return gaussian();
  if (text.rfind("t:", 0) == 0) {
    std::size_t pos = 0;
    const double nu = std::stod(text.substr(2), &pos);
    if (pos != text.size() - 2) throw std::invalid_argument("bad model: " + text);
    return student_t(nu);
  }
  throw std::invalid_argument("model must be 'gaussian' or 't:<nu>', got " + text);
}

std::size_t default_target_n(const NeighborhoodCov& cov) {
  const auto lag1 = axis_lag1_correlations(cov);
  double top = 0.0;
  for (double r : lag1)
    if (std::isfinite(r)) top = std::max(top, r);
  if (top == 0.0 && cov.size() > 1) top = cov.matrix().row(0).tail(cov.size() - 1).maxCoeff();
  return top >= 0.99 - 1e-9 ? 200'000 : 1'000'000;
}

std::uint64_t covariance_fingerprint(const Eigen::MatrixXd& m) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ull;
    }
  };
  const std::int64_t rows = m.rows();
  feed(&rows, sizeof rows);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      feed(&v, sizeof v);
    }
  return h;
}

PeakSampleSet::PeakSampleSet(std::vector<double> heights, std::size_t attempted, std::uint64_t seed,
                             PeakModel model, std::uint64_t fingerprint)
    : heights_(std::move(heights)), attempted_(attempted), seed_(seed), model_(model),
      fingerprint_(fingerprint) {
  if (heights_.size() > attempted_) throw std::invalid_argument("accepted count exceeds attempts");
  if (!std::is_sorted(heights_.begin(), heights_.end())) std::sort(heights_.begin(), heights_.end());
}

Eigen::MatrixXd sampling_factor(const Eigen::MatrixXd& cov) {
  const Eigen::Index n = cov.rows();
  for (double jitter : {0.0, 1e-12, 1e-10, 1e-8}) {
    Eigen::MatrixXd a = cov;
    a.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) continue;
    Eigen::MatrixXd l = llt.matrixL();
    if (l.allFinite() && (l.diagonal().array() > 0.0).all()) return l;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd s = eig.eigenvectors() * root.asDiagonal();
  // s s' = cov; with s' = Q R we get cov = R' R and R' is lower triangular.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(s.transpose());
  Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < n; ++i)
    if (r(i, i) < 0.0) r.row(i) *= -1.0;
  return r.transpose();
}

namespace {

struct ChunkResult {
  std::vector<double> heights;
  std::vector<std::size_t> attempts;  // attempt index of each acceptance
};

void run_chunk(const std::vector<double>& lower, std::size_t k1, const PeakModel& model,
               std::uint64_t seed, std::size_t begin, std::size_t end, ChunkResult& out) {
  std::vector<double> g(k1);
  for (std::size_t m = begin; m < end; ++m) {
    CounterStream stream(seed, m, 0);
    g[0] = stream.normal();
    const double z0 = lower[0] * g[0];
    bool accept = true;
    for (std::size_t j = 1; j < k1; ++j) {
      g[j] = stream.normal();
      const double* row = &lower[j * k1];
      double zj = 0.0;
      for (std::size_t i = 0; i <= j; ++i) zj += row[i] * g[i];
      if (!(z0 > zj)) {
        accept = false;
        break;
      }
    }
    if (!accept) continue;
    double h = z0;
    if (model.kind == PeakModel::Kind::student_t) {
      // A common positive divisor leaves the argmax unchanged, so only
      // accepted draws need the chi-square variate.
      CounterStream chi(seed, m, 1);
      h = z0 / std::sqrt(chi.chi_squared(model.nu) / model.nu);
    }
    out.heights.push_back(h);
    out.attempts.push_back(m);
  }
}

void check_psd(const Eigen::MatrixXd& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw NumericError("covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  if (eig.eigenvalues().minCoeff() < -1e-8 * scale)
    throw NumericError("covariance is not positive semi-definite (min eigenvalue " +
                       std::to_string(eig.eigenvalues().minCoeff()) + "); run psd_repair first");
}

}  // namespace

PeakSampleSet sample_local_maxima(const NeighborhoodCov& cov, const PeakModel& model,
                                  const SampleOptions& options) {
  if (options.target_n < 1) throw std::invalid_argument("target_n must be >= 1");
  if (options.max_m < options.target_n) throw std::invalid_argument("max_m must be >= target_n");
  if (options.chunk < 1) throw std::invalid_argument("chunk must be >= 1");
  if (model.kind == PeakModel::Kind::student_t && !(model.nu > 0.0))
    throw std::invalid_argument("degrees of freedom must be > 0");
  check_psd(cov.matrix());

  const Eigen::MatrixXd l = sampling_factor(cov.matrix());
  const std::size_t k1 = cov.size();
  std::vector<double> lower(k1 * k1, 0.0);
  for (std::size_t i = 0; i < k1; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      lower[i * k1 + j] = l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));

  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  std::vector<double> heights;
  heights.reserve(std::min<std::size_t>(options.target_n, 1u << 24));
  std::size_t next = 0;
  std::size_t attempted = 0;
  bool done = false;
  while (!done && next < options.max_m) {
    std::vector<ChunkResult> results(threads);
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (unsigned t = 0; t < threads && next < options.max_m; ++t) {
      const std::size_t end = std::min(options.max_m, next + options.chunk);
      ranges.emplace_back(next, end);
      next = end;
    }
    if (ranges.size() == 1) {
      run_chunk(lower, k1, model, options.seed, ranges[0].first, ranges[0].second, results[0]);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < ranges.size(); ++t)
        pool.emplace_back(run_chunk, std::cref(lower), k1, std::cref(model), options.seed,
                          ranges[t].first, ranges[t].second, std::ref(results[t]));
      for (auto& th : pool) th.join();
    }
    for (std::size_t t = 0; t < ranges.size() && !done; ++t) {
      const auto& r = results[t];
      const std::size_t need = options.target_n - heights.size();
      if (r.heights.size() >= need) {
        heights.insert(heights.end(), r.heights.begin(), r.heights.begin() + static_cast<std::ptrdiff_t>(need));
        attempted = r.attempts[need - 1] + 1;
        done = true;
      } else {
        heights.insert(heights.end(), r.heights.begin(), r.heights.end());
        attempted = ranges[t].second;
      }
    }
  }
  if (heights.empty())
    throw NumericError("no local maxima accepted after " + std::to_string(attempted) +
                       " attempts; covariance is degenerate");
  std::sort(heights.begin(), heights.end());
  return PeakSampleSet(std::move(heights), attempted, options.seed, model,
                       covariance_fingerprint(cov.matrix()));
}

double empirical_cdf(const PeakSampleSet& set, double u) {
  const auto& h = set.heights();
  if (h.empty()) throw std::invalid_argument("empty sample set");
  const auto it = std::upper_bound(h.begin(), h.end(), u);
  return static_cast<double>(it - h.begin()) / static_cast<double>(h.size());
}

PValue peak_pvalue(const PeakSampleSet& set, double u) {
  const auto& h = set.heights();
  if (h.empty()) throw std::invalid_argument("empty sample set");
  if (u >= h.back()) return {1.0 / static_cast<double>(h.size() + 1), true};
  return {1.0 - empirical_cdf(set, u), false};
}

double gaussianize_t(double t, double nu) {
  if (!(nu > 0.0)) throw std::invalid_argument("degrees of freedom must be > 0");
  if (!std::isfinite(t)) throw std::invalid_argument("gaussianize_t: non-finite input");
  if (t == 0.0) return 0.0;
  // Work on the small tail for accuracy and exact antisymmetry.
  double p = student_t_cdf(-std::abs(t), nu);
  p = std::max(p, std::numeric_limits<double>::min());
  const double z = -normal_quantile(p);
  return t > 0.0 ? z : -z;
}

Field gaussianize_t(const Field& field, double nu) {
  std::vector<double> out(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) out[i] = gaussianize_t(field[i], nu);
  return Field(field.lattice(), std::move(out));
}

}  // namespace latmax
