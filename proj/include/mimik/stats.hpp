#pragma once

namespace mimik {

/// Standard normal CDF.
double normal_cdf(double x);

/// Inverse standard normal CDF, accurate to full double precision on (0, 1).
double normal_quantile(double p);

/// Standard bivariate normal CDF P(X <= x, Y <= y) with correlation r,
/// Drezner-Wesolowsky/Genz quadrature (absolute error below 5e-16).
double bivariate_normal_cdf(double x, double y, double r);

}  // namespace mimik
