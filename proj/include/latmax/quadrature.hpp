#pragma once

#include <functional>

namespace latmax {

struct QuadratureResult {
  double value = 0.0;
  double abs_error = 0.0;
  int evaluations = 0;
};

// Adaptive 7/15-point Gauss-Kronrod with bisection of the worst interval until
// the summed error estimate is below `abs_tol`. Throws NumericError when the
// interval budget runs out first.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double abs_tol = 1e-10, int max_intervals = 2000);

// A single non-adaptive 15-point Kronrod panel.
double kronrod15(const std::function<double(double)>& f, double a, double b);

}  // namespace latmax
