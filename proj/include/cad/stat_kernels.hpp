#pragma once

// Standard normal CDF/quantile and Gaussian mean-test p-values.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cad {

enum class Sided { two_sided, one_sided_greater };

/// Gaussian mean test with known sigma.
struct GaussianTestSpec {
  double mu0 = 0.0;
  double sigma = 1.0;
  double n_eff = 1.0;
  Sided sided = Sided::two_sided;

  void validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      throw std::invalid_argument("sigma must be positive and finite");
    }
    if (!(n_eff >= 1.0) || !std::isfinite(n_eff)) {
      throw std::invalid_argument("n_eff must be >= 1");
    }
    if (!std::isfinite(mu0)) throw std::invalid_argument("mu0 must be finite");
  }
};

namespace detail {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;

inline void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + " must be finite");
}

// Upper tail 1 - Phi(x) without cancellation.
inline double normal_upper_tail(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

// Acklam's rational approximation; relative error ~1e-9, refined below.
inline double quantile_initial(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace detail

/// Phi(x).
inline double std_normal_cdf(double x) {
  detail::require_finite(x, "x");
  return 0.5 * std::erfc(-x * detail::kInvSqrt2);
}

inline double std_normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

/// Phi^{-1}(p) for p in (0, 1).
inline double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("quantile requires p in (0, 1), got " + std::to_string(p));
  }
  // Solve in whichever tail keeps the residual free of cancellation. For
  // p > 1/2 the complement 1 - p is exact in binary floating point.
  const bool upper = p > 0.5;
  const double tail = upper ? 1.0 - p : p;
  double x = detail::quantile_initial(tail);  // x <= 0, Phi(x) = tail
  for (int it = 0; it < 3; ++it) {
    const double err = 0.5 * std::erfc(-x * detail::kInvSqrt2) - tail;
    const double u = err / std_normal_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);  // Halley
  }
  return upper ? -x : x;
}

inline double z_statistic(double sample_mean, const GaussianTestSpec& spec) {
  spec.validate();
  detail::require_finite(sample_mean, "sample mean");
  return (sample_mean - spec.mu0) * std::sqrt(spec.n_eff) / spec.sigma;
}

/// p-value of a z score: 2(1 - Phi(|z|)) two-sided, 1 - Phi(z) one-sided.
inline double z_score_pvalue(double z, Sided sided = Sided::two_sided) {
  if (std::isnan(z)) throw std::invalid_argument("z must not be NaN");
  if (sided == Sided::two_sided) return std::erfc(std::fabs(z) * detail::kInvSqrt2);
  return detail::normal_upper_tail(z);
}

inline double z_pvalue(double sample_mean, const GaussianTestSpec& spec) {
  return z_score_pvalue(z_statistic(sample_mean, spec), spec.sided);
}

/// Rejection threshold on z (|z| for two-sided tests) matching p <= level.
inline double critical_z(double level, Sided sided = Sided::two_sided) {
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("level must lie in (0, 1), got " + std::to_string(level));
  }
  const double tail = sided == Sided::two_sided ? 0.5 * level : level;
  return -std_normal_quantile(tail);
}

}  // namespace cad
