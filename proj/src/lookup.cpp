#include "latmax/lookup.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "latmax/covariance.hpp"
#include "latmax/mcdlm.hpp"
#include "latmax/rng.hpp"
#include "latmax/smoothing.hpp"

namespace latmax {

void LookupTable::validate() const {
  if (dim < 1 || dim > 3) throw std::invalid_argument("lookup tables cover D = 1, 2, 3");
  if (rhos.size() < 2 || u.size() < 2) throw std::invalid_argument("lookup grid too small");
  if (cdf.size() != rhos.size() * u.size()) throw std::invalid_argument("lookup matrix size mismatch");
  if (!std::is_sorted(rhos.begin(), rhos.end()) || !std::is_sorted(u.begin(), u.end()))
    throw std::invalid_argument("lookup grids must be increasing");
  for (double v : cdf)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("lookup CDF value outside [0,1]");
}

std::vector<double> lookup_rho_grid() {
  std::vector<double> g(99);
  for (int i = 0; i < 99; ++i) g[i] = (i + 1) / 100.0;
  return g;
}

std::uint64_t lookup_row_seed(std::uint64_t seed, std::size_t row) {
  return mix64(seed ^ mix64(0x6c6f6f6b7570ull + row));
}

LookupTable build_table(std::size_t dim, const LookupBuildOptions& options) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("lookup tables cover D = 1, 2, 3");
  if (options.samples_per_rho < 2 || options.u_points < 2)
    throw std::invalid_argument("lookup build needs >= 2 samples and u points");
  LookupTable t;
  t.dim = dim;
  t.rhos = lookup_rho_grid();
  t.seed = options.seed;
  t.samples_per_rho = options.samples_per_rho;
  const std::size_t rows = t.rhos.size();

  std::vector<std::vector<double>> samples(rows);
  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, rows));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t r; (r = next++) < rows;) {
      try {
        SampleOptions so;
        so.target_n = options.samples_per_rho;
        so.max_m = std::max<std::size_t>(100'000'000, 1000 * options.samples_per_rho);
        so.seed = lookup_row_seed(options.seed, r);
        so.threads = 1;
        samples[r] = sample_local_maxima(kronecker_cov(t.rhos[r], dim), PeakModel::gaussian(), so).heights();
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<double> pooled;
  for (const auto& s : samples) pooled.insert(pooled.end(), s.begin(), s.end());
  std::sort(pooled.begin(), pooled.end());
  const std::size_t cols = std::min(options.u_points, pooled.size());
  t.u.resize(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    const auto idx = static_cast<std::size_t>((j + 0.5) * static_cast<double>(pooled.size()) / cols);
    t.u[j] = pooled[std::min(idx, pooled.size() - 1)];
  }
  t.u.erase(std::unique(t.u.begin(), t.u.end()), t.u.end());

  t.cdf.assign(rows * t.u.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& s = samples[r];
    std::size_t k = 0;
    for (std::size_t j = 0; j < t.u.size(); ++j) {
      while (k < s.size() && s[k] <= t.u[j]) ++k;
      t.at(r, j) = static_cast<double>(k) / static_cast<double>(s.size());
    }
  }
  return t;
}

namespace {

std::vector<std::size_t> spread(std::size_t n, std::size_t count) {
  std::vector<std::size_t> idx;
  count = std::min(count, n);
  for (std::size_t i = 0; i < count; ++i) idx.push_back((2 * i + 1) * n / (2 * count));
  return idx;
}

}  // namespace

LookupTable smooth_table(const LookupTable& table) {
  table.validate();
  LookupTable out = table;
  const std::size_t rows = table.rows();
  const std::size_t cols = table.cols();
  if (rows < 5 || cols < 5) throw std::invalid_argument("table too small to smooth with 5-fold CV");

  // Along rho, one column at a time.
  {
    const std::vector<double>& x = table.rhos;
    std::vector<std::vector<double>> series;
    for (std::size_t j : spread(cols, 40)) {
      std::vector<double> col(rows);
      for (std::size_t r = 0; r < rows; ++r) col[r] = table.at(r, j);
      series.push_back(std::move(col));
    }
    const auto grid = lambda_grid(x);
    out.lambda_rho = choose_lambda(x, series, grid);
    std::vector<double> col(rows);
    for (std::size_t j = 0; j < cols; ++j) {
      for (std::size_t r = 0; r < rows; ++r) col[r] = table.at(r, j);
      const SmoothingSpline s = fit_smoothing_spline(x, col, out.lambda_rho);
      for (std::size_t r = 0; r < rows; ++r) out.at(r, j) = s.f[r];
    }
  }

  // Along u, indexed by grid rank.
  {
    std::vector<double> x(cols);
    for (std::size_t j = 0; j < cols; ++j) x[j] = static_cast<double>(j);
    std::vector<std::vector<double>> series;
    for (std::size_t r : spread(rows, 6))
      series.emplace_back(out.cdf.begin() + static_cast<std::ptrdiff_t>(r * cols),
                          out.cdf.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
    const auto grid = lambda_grid(x);
    out.lambda_u = choose_lambda(x, series, grid);
    for (std::size_t r = 0; r < rows; ++r) {
      std::span<double> row(&out.cdf[r * cols], cols);
      const SmoothingSpline s = fit_smoothing_spline(x, std::vector<double>(row.begin(), row.end()), out.lambda_u);
      for (std::size_t j = 0; j < cols; ++j) row[j] = std::clamp(s.f[j], 0.0, 1.0);
      isotonic_increasing(row);
    }
  }
  out.smoothed = true;
  return out;
}

LookupResult query(const LookupTable& table, double rho, double u) {
  if (table.rows() < 2 || table.cols() < 2 || table.cdf.size() != table.rows() * table.cols())
    throw std::invalid_argument("malformed lookup table");
  if (!(rho >= table.rhos.front() - 1e-12 && rho <= table.rhos.back() + 1e-12))
    throw std::invalid_argument("rho outside the table range");
  if (std::isnan(u)) throw std::invalid_argument("query height is NaN");
  rho = std::clamp(rho, table.rhos.front(), table.rhos.back());

  auto bracket = [](const std::vector<double>& g, double v) {
    auto it = std::upper_bound(g.begin(), g.end(), v);
    std::size_t i = it == g.begin() ? 0 : static_cast<std::size_t>(it - g.begin()) - 1;
    i = std::min(i, g.size() - 2);
    const double w = std::clamp((v - g[i]) / (g[i + 1] - g[i]), 0.0, 1.0);
    return std::pair{i, w};
  };
  LookupResult res;
  if (u < table.u.front() || u > table.u.back()) res.censored = true;
  const double uc = std::clamp(u, table.u.front(), table.u.back());
  const auto [r, wr] = bracket(table.rhos, rho);
  const auto [j, wu] = bracket(table.u, uc);
  const double f0 = (1.0 - wu) * table.at(r, j) + wu * table.at(r, j + 1);
  const double f1 = (1.0 - wu) * table.at(r + 1, j) + wu * table.at(r + 1, j + 1);
  const double f = (1.0 - wr) * f0 + wr * f1;
  res.pvalue = std::clamp(1.0 - f, 0.0, 1.0);
  return res;
}

}  // namespace latmax
