#include "bqn/specialfn.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bqn::specialfn {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;
constexpr double kSqrt2Pi = 2.50662827463100050242;

// Degenerate-branch threshold from the design notes: collinear line-search
// paths make the rank-deficient cases common, not exceptional.
constexpr double kDegenerateEps = 1e-12;

double square(double x) { return x * x; }

}  // namespace

double erf(double x) { return std::erf(x); }

double erfc(double x) { return std::erfc(x); }

double erfcx(double x) {
  // Restricted to x >= 0, which is all the segment integrals need.
  if (!(x >= 0.0)) {
    throw std::domain_error("erfcx: negative argument not supported");
  }
  if (x < 25.0) {
    return std::exp(x * x) * std::erfc(x);
  }
  // Asymptotic series 1/(x sqrt(pi)) * sum (-1)^n (2n-1)!! / (2x^2)^n.
  const double inv2x2 = 1.0 / (2.0 * x * x);
  double term = 1.0;
  double sum = 1.0;
  for (int n = 1; n <= 12; ++n) {
    term *= -(2.0 * n - 1.0) * inv2x2;
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return sum / (x * std::sqrt(kPi));
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double log_gamma(double x) {
  if (!(x > 0.0)) {
    throw std::domain_error("log_gamma: argument must be positive");
  }
  return std::lgamma(x);
}

namespace {

// J_j(beta) = int_0^1 t^j exp(beta (t - 1)) dt for beta >= 0. All values lie
// in [0, 1], so the small-alpha branch never overflows before the final
// exponential factor is applied.
void exp_moments(double beta, double out[3]) {
  if (beta < 6.0) {
    const double damp = std::exp(-beta);
    for (int idx = 0; idx < 3; ++idx) {
      const int j = 2 * idx;
      double term = 1.0 / (j + 1.0);
      double sum = term;
      for (int k = 1; k < 80; ++k) {
        term *= beta / k;
        const double add = term / (j + k + 1.0);
        sum += add;
        if (add < 1e-18 * sum) break;
      }
      out[idx] = damp * sum;
    }
    return;
  }
  // Upward recursion J_j = (1 - j J_{j-1}) / beta is stable for beta >= 6.
  double j0 = -std::expm1(-beta) / beta;
  double prev = j0;
  double vals[5];
  vals[0] = j0;
  for (int j = 1; j <= 4; ++j) {
    prev = (1.0 - j * prev) / beta;
    vals[j] = prev;
  }
  out[0] = vals[0];
  out[1] = vals[2];
  out[2] = vals[4];
}

// Small-curvature branch of the segment integral: the alpha -> 0 limit with
// second-order curvature corrections, exact to ~1e-18 for alpha <= 1e-6.
double segment_small_alpha(double alpha, double beta, double gamma) {
  if (beta < 0.0) {
    // t -> 1 - t maps (alpha, beta, gamma) to (alpha, alpha - beta, q(1)).
    return segment_small_alpha(alpha, alpha - beta, alpha - 2.0 * beta + gamma);
  }
  double j[3];
  exp_moments(beta, j);
  const double series = j[0] - 0.5 * alpha * j[1] + 0.125 * alpha * alpha * j[2];
  const double q1 = alpha - 2.0 * beta + gamma;
  return std::exp(0.5 * (alpha - q1)) * series;
}

}  // namespace

double se_segment_integral(double alpha, double beta, double gamma) {
  if (alpha < 0.0) {
    const double scale = std::max({std::abs(beta), std::abs(gamma), 1.0});
    if (alpha < -1e-9 * scale) {
      throw std::invalid_argument("se_segment_integral: negative curvature");
    }
    alpha = 0.0;
  }
  if (alpha <= 1e-6) {
    return segment_small_alpha(alpha, beta, gamma);
  }

  const double w = std::sqrt(0.5 * alpha);
  const double mu = beta / alpha;
  const double u0 = -w * mu;
  const double u1 = w * (1.0 - mu);
  const double pref = std::sqrt(kPi / (2.0 * alpha));
  const double q1 = alpha - 2.0 * beta + gamma;

  if (mu >= 0.0 && mu <= 1.0) {
    const double qmin = gamma - beta * mu;  // q at the interior vertex
    return pref * std::exp(-0.5 * qmin) * (std::erf(u1) + std::erf(-u0));
  }
  if (mu < 0.0) {
    // Vertex left of the interval: erfcx keeps exp(q/2) erfc(u) stable.
    return pref * (std::exp(-0.5 * gamma) * erfcx(u0) - std::exp(-0.5 * q1) * erfcx(u1));
  }
  return pref * (std::exp(-0.5 * q1) * erfcx(-u1) - std::exp(-0.5 * gamma) * erfcx(-u0));
}

double se_segment_integral(const SegmentQuadratic& q) {
  return se_segment_integral(q.alpha, q.beta, q.gamma);
}

double se_double_integral_rank1(double c, double offset) {
  if (c < 0.0) {
    if (c < -kDegenerateEps) {
      throw std::invalid_argument("se_double_integral_rank1: negative curvature");
    }
    c = 0.0;
  }
  const double d = offset;
  if (c * square(1.0 + std::abs(d)) <= 1e-10) {
    return 1.0 - 0.5 * c * (d * d + 1.0 / 6.0);
  }
  const double gap = std::abs(d) - 1.0;
  if (gap > 0.0 && c * gap * gap > 400.0) {
    return 0.0;  // integrand below exp(-200) everywhere
  }
  if (c >= 1e-4) {
    // Tent identity: integral = second difference of the Gaussian's second
    // antiderivative G2(z) = z P(z) + phi(z)/c at spacing 1.
    const double w = std::sqrt(0.5 * c);
    const double pk = std::sqrt(kPi / (2.0 * c));
    const auto p = [&](double z) { return pk * std::erf(w * z); };
    const auto phi = [&](double z) { return std::exp(-0.5 * c * z * z); };
    return (d + 1.0) * p(d + 1.0) + (d - 1.0) * p(d - 1.0) - 2.0 * d * p(d) +
           (phi(d + 1.0) + phi(d - 1.0) - 2.0 * phi(d)) / c;
  }
  // Mid-range curvature: the closed form loses precision to cancellation, but
  // the integrand is slowly varying, so fixed Gauss-Legendre is exact here.
  using quad = boost::math::quadrature::gauss<double, 30>;
  const auto f = [&](double u) {
    return (1.0 - std::abs(u)) * std::exp(-0.5 * c * square(u + d));
  };
  return quad::integrate(f, -1.0, 0.0) + quad::integrate(f, 0.0, 1.0);
}

namespace {

// Gauss-Legendre half nodes/weights used by Genz's BVND scheme.
constexpr double kGx6[3] = {0.2386191860831969, 0.6612093864662645, 0.9324695142031521};
constexpr double kGw6[3] = {0.4679139345726910, 0.3607615730481386, 0.1713244923791704};
constexpr double kGx12[6] = {0.1252334085114689, 0.3678314989981802, 0.5873179542866175,
                             0.7699026741943047, 0.9041172563704749, 0.9815606342467192};
constexpr double kGw12[6] = {0.2491470458134028, 0.2334925365383548, 0.2031674267230659,
                             0.1600783285433462, 0.1069393259953184, 0.0471753363865118};
constexpr double kGx20[10] = {0.0765265211334973, 0.2277858511416451, 0.3737060887154196,
                              0.5108670019508271, 0.6360536807265150, 0.7463319064601508,
                              0.8391169718222188, 0.9122344282513259, 0.9639719272779138,
                              0.9931285991850949};
constexpr double kGw20[10] = {0.1527533871307258, 0.1491729864726037, 0.1420961093183821,
                              0.1316886384491766, 0.1181945319615184, 0.1019301198172404,
                              0.0832767415767047, 0.0626720483341091, 0.0406014298003869,
                              0.0176140071391521};

// Genz (2004) BVND: P(X > h, Y > k) for a standard bivariate normal with
// correlation r.
double bvn_upper(double h, double k, double r) {
  const double inf = std::numeric_limits<double>::infinity();
  if (h == inf || k == inf) return 0.0;
  if (h == -inf) return (k == -inf) ? 1.0 : norm_cdf(-k);
  if (k == -inf) return norm_cdf(-h);
  if (r == 0.0) return norm_cdf(-h) * norm_cdf(-k);

  double hk = h * k;
  double bvn = 0.0;
  const double ar = std::abs(r);

  if (ar < 0.925) {
    const double* gx = kGx20;
    const double* gw = kGw20;
    int ng = 10;
    if (ar < 0.3) {
      gx = kGx6;
      gw = kGw6;
      ng = 3;
    } else if (ar < 0.75) {
      gx = kGx12;
      gw = kGw12;
      ng = 6;
    }
    const double hs = 0.5 * (h * h + k * k);
    const double asr = std::asin(r);
    for (int i = 0; i < ng; ++i) {
      for (int sgn = -1; sgn <= 1; sgn += 2) {
        const double sn = std::sin(asr * (sgn * gx[i] + 1.0) / 2.0);
        bvn += gw[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      }
    }
    return bvn * asr / (2.0 * kTwoPi) + norm_cdf(-h) * norm_cdf(-k);
  }

  // |r| >= 0.925: transformed integrand handling the r -> +-1 singularity.
  double kk = k;
  if (r < 0.0) {
    kk = -kk;
    hk = -hk;
  }
  if (ar < 1.0) {
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = square(h - kk);
    const double cc = (4.0 - hk) / 8.0;
    const double dd = (12.0 - hk) / 16.0;
    double asr = -(bs / as + hk) / 2.0;
    if (asr > -100.0) {
      bvn = a * std::exp(asr) *
            (1.0 - cc * (bs - as) * (1.0 - dd * bs / 5.0) / 3.0 + cc * dd * as * as / 5.0);
    }
    if (-hk < 100.0) {
      const double b = std::sqrt(bs);
      bvn -= std::exp(-hk / 2.0) * kSqrt2Pi * norm_cdf(-b / a) * b *
             (1.0 - cc * bs * (1.0 - dd * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for (int i = 0; i < 10; ++i) {
      for (int sgn = -1; sgn <= 1; sgn += 2) {
        const double xs = square(a * (sgn * kGx20[i] + 1.0));
        const double rs = std::sqrt(1.0 - xs);
        asr = -(bs / xs + hk) / 2.0;
        if (asr > -100.0) {
          const double sp = 1.0 + cc * xs * (1.0 + dd * xs);
          const double ep = std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs;
          bvn += a * kGw20[i] * std::exp(asr) * (ep - sp);
        }
      }
    }
    bvn = -bvn / kTwoPi;
  }
  if (r > 0.0) {
    bvn += norm_cdf(-std::max(h, kk));
  } else {
    bvn = -bvn;
    if (kk > h) bvn += norm_cdf(kk) - norm_cdf(h);
  }
  return std::clamp(bvn, 0.0, 1.0);
}

}  // namespace

double bvn_rect(const Eigen::Vector2d& lower, const Eigen::Vector2d& upper, double rho) {
  if (!(std::abs(rho) <= 1.0)) {
    throw std::domain_error("bvn_rect: |rho| must be <= 1");
  }
  if (lower(0) > upper(0) || lower(1) > upper(1)) {
    throw std::domain_error("bvn_rect: lower bound exceeds upper bound");
  }
  const double p = bvn_upper(lower(0), lower(1), rho) - bvn_upper(lower(0), upper(1), rho) -
                   bvn_upper(upper(0), lower(1), rho) + bvn_upper(upper(0), upper(1), rho);
  return std::clamp(p, 0.0, 1.0);
}

namespace {

struct Quad2 {
  double a11, a12, a22, b1, b2, c;

  double value(double t, double u) const {
    return a11 * t * t + 2.0 * a12 * t * u + a22 * u * u - 2.0 * b1 * t - 2.0 * b2 * u + c;
  }
};

// Exact minimum of the quadratic over the unit square: interior critical
// point if inside, otherwise edge minimizers and corners.
double min_over_square(const Quad2& q) {
  double best = std::min({q.value(0, 0), q.value(0, 1), q.value(1, 0), q.value(1, 1)});
  const auto consider = [&](double t, double u) {
    if (t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0) {
      best = std::min(best, q.value(t, u));
    }
  };
  if (q.a22 > 0.0) {
    consider(0.0, q.b2 / q.a22);
    consider(1.0, (q.b2 - q.a12) / q.a22);
  }
  if (q.a11 > 0.0) {
    consider(q.b1 / q.a11, 0.0);
    consider((q.b1 - q.a12) / q.a11, 1.0);
  }
  const double det = q.a11 * q.a22 - q.a12 * q.a12;
  if (det > 0.0) {
    consider((q.a22 * q.b1 - q.a12 * q.b2) / det, (q.a11 * q.b2 - q.a12 * q.b1) / det);
  }
  return best;
}

// One variable integrated analytically (the sharper one), the other by the
// supplied 1-D rule. Used for rank-deficient and strongly anisotropic A.
template <typename Integrate1D>
double inner_analytic(const Quad2& q, Integrate1D&& outer) {
  if (q.a11 >= q.a22) {
    return outer([&](double u) {
      return se_segment_integral(q.a11, q.b1 - q.a12 * u,
                                 q.a22 * u * u - 2.0 * q.b2 * u + q.c);
    });
  }
  return outer([&](double t) {
    return se_segment_integral(q.a22, q.b2 - q.a12 * t,
                               q.a11 * t * t - 2.0 * q.b1 * t + q.c);
  });
}

// Collinear-path closed form: with A = vv^T, v = (p, -q), and b parallel to
// v the exponent is a perfect square and the double integral reduces to a
// 4-point combination of F2(z) = z P1(z) + phi(z), the second antiderivative
// of the standard Gaussian.
double trapezoid_rank1(double p, double q, double d, double cres) {
  if (cres < -1400.0) return std::numeric_limits<double>::infinity();
  const auto f2 = [](double z) {
    const double p1 = std::sqrt(kPi / 2.0) * std::erf(z / std::sqrt(2.0));
    return z * p1 + std::exp(-0.5 * z * z);
  };
  const double comb = f2(d + p) - f2(d) - f2(d + p - q) + f2(d - q);
  return std::exp(-0.5 * cres) * comb / (p * q);
}

}  // namespace

double se_double_integral_full(const Eigen::Matrix2d& a, const Eigen::Vector2d& b, double c) {
  double a11 = a(0, 0);
  double a22 = a(1, 1);
  double a12 = 0.5 * (a(0, 1) + a(1, 0));
  const double scale = std::max(std::max(a11, a22), 0.0);

  if (a11 < -1e-9 * std::max(scale, 1.0) || a22 < -1e-9 * std::max(scale, 1.0)) {
    throw std::invalid_argument("se_double_integral_full: A has negative diagonal");
  }
  a11 = std::max(a11, 0.0);
  a22 = std::max(a22, 0.0);
  if (a12 * a12 > a11 * a22 * (1.0 + 1e-6) + kDegenerateEps) {
    throw std::invalid_argument("se_double_integral_full: A indefinite beyond tolerance");
  }
  const double offdiag_cap = std::sqrt(a11 * a22);
  a12 = std::clamp(a12, -offdiag_cap, offdiag_cap);

  Quad2 q{a11, a12, a22, b(0), b(1), c};

  if (scale <= kDegenerateEps) {
    return se_segment_integral(0.0, q.b1, q.c) * se_segment_integral(0.0, q.b2, 0.0);
  }
  if (a11 <= kDegenerateEps * scale) {
    return se_segment_integral(a22, q.b2, q.c) * se_segment_integral(0.0, q.b1, 0.0);
  }
  if (a22 <= kDegenerateEps * scale) {
    return se_segment_integral(a11, q.b1, q.c) * se_segment_integral(0.0, q.b2, 0.0);
  }
  if (min_over_square(q) > 1600.0) {
    return 0.0;
  }

  const double det = a11 * a22 - a12 * a12;
  if (det <= 1e-6 * a11 * a22) {
    if (a12 > 0.0) {
      // t' -> 1 - t' flips the cross term so the ridge runs along t - t'.
      Quad2 flipped{a11, -a12, a22, q.b1 - a12, a22 - q.b2, q.c + a22 - 2.0 * q.b2};
      return se_double_integral_full(
          (Eigen::Matrix2d() << flipped.a11, flipped.a12, flipped.a12, flipped.a22).finished(),
          Eigen::Vector2d(flipped.b1, flipped.b2), flipped.c);
    }
    const double p = std::sqrt(a11);
    const double qq = std::sqrt(a22);
    const double d = q.b1 / p;
    const bool aligned =
        std::abs(q.b2 + d * qq) <= 1e-9 * (std::abs(q.b1) + std::abs(q.b2) + p + qq);
    if (aligned && det <= 1e-10 * a11 * a22 && p * qq >= 1e-3) {
      return trapezoid_rank1(p, qq, -d, q.c - d * d);
    }
    return inner_analytic(q, [](auto&& f) {
      return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, 0.0, 1.0, 15,
                                                                           1e-12);
    });
  }

  if (std::min(a11, a22) <= 0.25) {
    using quad = boost::math::quadrature::gauss<double, 30>;
    return inner_analytic(q, [](auto&& f) { return quad::integrate(f, 0.0, 1.0); });
  }

  // Generic full-rank A: complete the square and evaluate as a scaled
  // bivariate normal rectangle probability.
  const double z1 = (a22 * q.b1 - a12 * q.b2) / det;
  const double z2 = (a11 * q.b2 - a12 * q.b1) / det;
  const double e0 = c - (q.b1 * z1 + q.b2 * z2);
  const double sigma1 = std::sqrt(a22 / det);
  const double sigma2 = std::sqrt(a11 / det);
  const double rho = -a12 / std::sqrt(a11 * a22);
  const Eigen::Vector2d lo((0.0 - z1) / sigma1, (0.0 - z2) / sigma2);
  const Eigen::Vector2d hi((1.0 - z1) / sigma1, (1.0 - z2) / sigma2);
  const double pr = bvn_rect(lo, hi, rho);
  return std::exp(-0.5 * e0) * (kTwoPi / std::sqrt(det)) * pr;
}

}  // namespace bqn::specialfn
