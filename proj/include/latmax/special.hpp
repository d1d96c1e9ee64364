#pragma once

namespace latmax {

double normal_pdf(double x);
double normal_cdf(double x);
// Upper tail 1 - Phi(x), accurate far into the right tail.
double normal_sf(double x);
double normal_quantile(double p);

double student_t_cdf(double t, double nu);
double student_t_quantile(double p, double nu);

}  // namespace latmax
