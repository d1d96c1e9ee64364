#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace latmax {

/// Natural cubic smoothing spline: fitted values and second derivatives at
/// the knots.
struct SmoothingSpline {
  std::vector<double> x;
  std::vector<double> f;
  std::vector<double> gamma;  // f'' at the knots; zero at both ends

  double operator()(double t) const;
};

// Minimizes sum (y_i - f(x_i))^2 + lambda * int f''^2 (Reinsch). x must be
// strictly increasing with at least 3 points.
SmoothingSpline fit_smoothing_spline(std::span<const double> x, std::span<const double> y, double lambda);

// Mean squared prediction error of held-out points under k-fold cross
// validation, folds assigned by index modulo k (end points always train).
double cv_error(std::span<const double> x, std::span<const double> y, double lambda, int folds = 5);

// Picks lambda from `candidates` by summed k-fold CV error over several
// series sharing the abscissa. Series with zero range are skipped; throws
// NumericError if every series is constant.
double choose_lambda(std::span<const double> x, const std::vector<std::vector<double>>& series,
                     std::span<const double> candidates, int folds = 5);

// Log-spaced lambda candidates scaled to the mean knot spacing.
std::vector<double> lambda_grid(std::span<const double> x);

// Least-squares non-decreasing fit (pool adjacent violators), in place.
void isotonic_increasing(std::span<double> y);

}  // namespace latmax
