#include "latmax/smoothing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "latmax/errors.hpp"

namespace latmax {

namespace {

// Solves A g = b for symmetric positive definite A with bandwidth 2, given as
// diagonals d0 (main), d1 (first super), d2 (second super). LDL' in place.
std::vector<double> solve_pentadiagonal(std::vector<double> d0, std::vector<double> d1,
                                        std::vector<double> d2, std::vector<double> b) {
  const std::size_t m = d0.size();
  // l1[i] = L(i+1, i), l2[i] = L(i+2, i)
  std::vector<double> dd(m), l1(m, 0.0), l2(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double di = d0[i];
    if (i >= 1) di -= l1[i - 1] * l1[i - 1] * dd[i - 1];
    if (i >= 2) di -= l2[i - 2] * l2[i - 2] * dd[i - 2];
    if (!(di > 0.0)) throw NumericError("smoothing system is not positive definite");
    dd[i] = di;
    if (i + 1 < m) {
      double e = d1[i];
      if (i >= 1) e -= l2[i - 1] * l1[i - 1] * dd[i - 1];
      l1[i] = e / di;
    }
    if (i + 2 < m) l2[i] = d2[i] / di;
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (i >= 1) b[i] -= l1[i - 1] * b[i - 1];
    if (i >= 2) b[i] -= l2[i - 2] * b[i - 2];
  }
  for (std::size_t i = 0; i < m; ++i) b[i] /= dd[i];
  for (std::size_t i = m; i-- > 0;) {
    if (i + 1 < m) b[i] -= l1[i] * b[i + 1];
    if (i + 2 < m) b[i] -= l2[i] * b[i + 2];
  }
  return b;
}

}  // namespace

double SmoothingSpline::operator()(double t) const {
  const std::size_t n = x.size();
  if (t <= x.front()) {
    const double h = x[1] - x[0];
    const double slope = (f[1] - f[0]) / h - h * gamma[1] / 6.0;
    return f[0] + slope * (t - x[0]);
  }
  if (t >= x.back()) {
    const double h = x[n - 1] - x[n - 2];
    const double slope = (f[n - 1] - f[n - 2]) / h + h * gamma[n - 2] / 6.0;
    return f[n - 1] + slope * (t - x[n - 1]);
  }
  const auto it = std::upper_bound(x.begin(), x.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - x.begin()) - 1;
  const double h = x[i + 1] - x[i];
  const double a = t - x[i];
  const double b = x[i + 1] - t;
  return (a * f[i + 1] + b * f[i]) / h -
         a * b / 6.0 * ((1.0 + a / h) * gamma[i + 1] + (1.0 + b / h) * gamma[i]);
}

SmoothingSpline fit_smoothing_spline(std::span<const double> x, std::span<const double> y, double lambda) {
  const std::size_t n = x.size();
  if (n < 3 || y.size() != n) throw std::invalid_argument("smoothing spline needs >= 3 matching points");
  if (!(lambda >= 0.0)) throw std::invalid_argument("smoothing parameter must be >= 0");
  std::vector<double> h(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = x[i + 1] - x[i];
    if (!(h[i] > 0.0)) throw std::invalid_argument("spline abscissae must be strictly increasing");
  }
  const std::size_t m = n - 2;
  std::vector<double> a(m), b(m), c(m);
  for (std::size_t k = 0; k < m; ++k) {
    a[k] = 1.0 / h[k];
    c[k] = 1.0 / h[k + 1];
    b[k] = -a[k] - c[k];
  }
  std::vector<double> d0(m), d1(m, 0.0), d2(m, 0.0), rhs(m);
  for (std::size_t k = 0; k < m; ++k) {
    d0[k] = (h[k] + h[k + 1]) / 3.0 + lambda * (a[k] * a[k] + b[k] * b[k] + c[k] * c[k]);
    if (k + 1 < m) d1[k] = h[k + 1] / 6.0 + lambda * (b[k] * a[k + 1] + c[k] * b[k + 1]);
    if (k + 2 < m) d2[k] = lambda * c[k] * a[k + 2];
    rhs[k] = a[k] * y[k] + b[k] * y[k + 1] + c[k] * y[k + 2];
  }
  const std::vector<double> g = solve_pentadiagonal(d0, d1, d2, rhs);
  SmoothingSpline s;
  s.x.assign(x.begin(), x.end());
  s.f.assign(y.begin(), y.end());
  s.gamma.assign(n, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    s.gamma[k + 1] = g[k];
    s.f[k] -= lambda * a[k] * g[k];
    s.f[k + 1] -= lambda * b[k] * g[k];
    s.f[k + 2] -= lambda * c[k] * g[k];
  }
  return s;
}

double cv_error(std::span<const double> x, std::span<const double> y, double lambda, int folds) {
  const std::size_t n = x.size();
  if (folds < 2) throw std::invalid_argument("cross validation needs >= 2 folds");
  double sse = 0.0;
  std::size_t count = 0;
  std::vector<double> tx, ty;
  for (int fold = 0; fold < folds; ++fold) {
    tx.clear();
    ty.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const bool held = i != 0 && i + 1 != n && static_cast<int>(i % folds) == fold;
      if (!held) {
        tx.push_back(x[i]);
        ty.push_back(y[i]);
      }
    }
    if (tx.size() == n || tx.size() < 3) continue;
    const SmoothingSpline s = fit_smoothing_spline(tx, ty, lambda);
    for (std::size_t i = 1; i + 1 < n; ++i)
      if (static_cast<int>(i % folds) == fold) {
        const double e = s(x[i]) - y[i];
        sse += e * e;
        ++count;
      }
  }
  if (count == 0) throw std::invalid_argument("too few points for cross validation");
  return sse / static_cast<double>(count);
}

double choose_lambda(std::span<const double> x, const std::vector<std::vector<double>>& series,
                     std::span<const double> candidates, int folds) {
  if (candidates.empty()) throw std::invalid_argument("no smoothing candidates");
  std::vector<const std::vector<double>*> used;
  for (const auto& s : series) {
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    if (lo != s.end() && *hi > *lo) used.push_back(&s);
  }
  if (used.empty()) throw NumericError("cross validation is degenerate: every series is constant");
  double best = candidates[0];
  double best_err = std::numeric_limits<double>::infinity();
  for (double lambda : candidates) {
    double err = 0.0;
    for (const auto* s : used) err += cv_error(x, *s, lambda, folds);
    if (err < best_err) {
      best_err = err;
      best = lambda;
    }
  }
  return best;
}

std::vector<double> lambda_grid(std::span<const double> x) {
  if (x.size() < 2) throw std::invalid_argument("lambda grid needs >= 2 knots");
  const double h = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
  std::vector<double> out;
  for (int k = -6; k <= 18; ++k) out.push_back(h * h * h * std::pow(10.0, 0.5 * k));
  return out;
}

void isotonic_increasing(std::span<double> y) {
  struct Block {
    double sum;
    std::size_t n;
  };
  std::vector<Block> blocks;
  blocks.reserve(y.size());
  for (double v : y) {
    blocks.push_back({v, 1});
    while (blocks.size() > 1) {
      const Block& b = blocks.back();
      const Block& a = blocks[blocks.size() - 2];
      if (a.sum / a.n <= b.sum / b.n) break;
      const Block merged{a.sum + b.sum, a.n + b.n};
      blocks.pop_back();
      blocks.back() = merged;
    }
  }
  std::size_t i = 0;
  for (const auto& b : blocks) {
    const double mean = b.sum / static_cast<double>(b.n);
    for (std::size_t k = 0; k < b.n; ++k) y[i++] = mean;
  }
}

}  // namespace latmax
