#pragma once

#include <Eigen/Dense>
#include <utility>

// Scalar special functions and the analytic primitives for integrating
// squared-exponential kernels over line segments: single and double definite
// integrals of exp(-q/2) with quadratic exponents, and bivariate normal
// rectangle probabilities (Genz 2004).

namespace bqn::specialfn {

double erf(double x);
double erfc(double x);

// Scaled complementary error function exp(x^2) erfc(x), x >= 0.
double erfcx(double x);

// Standard normal CDF, accurate in both tails.
double norm_cdf(double x);

// log Gamma(x) for x > 0; throws std::domain_error otherwise.
double log_gamma(double x);

// Coefficients of q(t) = alpha t^2 - 2 beta t + gamma, the restriction of a
// squared-exponential exponent to a line segment. alpha >= 0 is required;
// quadratics derived from a valid metric have q(t) >= 0 for all real t.
struct SegmentQuadratic {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

// int_0^1 exp(-q(t)/2) dt.
double se_segment_integral(const SegmentQuadratic& q);
double se_segment_integral(double alpha, double beta, double gamma);

// int_0^1 int_0^1 exp(-c (t - t' + offset)^2 / 2) dt dt', c >= 0.
double se_double_integral_rank1(double c, double offset);

// P(l1 <= X <= u1, l2 <= Y <= u2) for a standard bivariate normal with
// correlation rho. Infinite bounds allowed. Throws std::domain_error for
// |rho| > 1 or lower > upper.
double bvn_rect(const Eigen::Vector2d& lower, const Eigen::Vector2d& upper, double rho);

// int over [0,1]^2 of exp(-(z^T A z - 2 b^T z + c)/2) with z = (t, t') and
// A symmetric positive semidefinite. Degenerate A (rank 0/1, collinear
// paths) is routed to closed forms; the generic case completes the square
// and evaluates a bvn rectangle with rho = -A12/sqrt(A11 A22). A indefinite
// beyond tolerance throws std::invalid_argument.
double se_double_integral_full(const Eigen::Matrix2d& a, const Eigen::Vector2d& b, double c);

}  // namespace bqn::specialfn
