#include "riskmap/gp_distribution.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "riskmap/errors.hpp"

namespace riskmap {
namespace {

void check_lambda(double lambda) {
  if (!std::isfinite(lambda) || lambda <= 0.0) {
    throw DomainError("generalized Poisson: rate must be finite and positive, got " +
                      std::to_string(lambda));
  }
}

void check_count(Count y) {
  if (y < 0) {
    throw DomainError("generalized Poisson: negative count " + std::to_string(y));
  }
}

// phi * lambda^(alpha - 1), evaluated through the logarithm so that every real
// alpha is admissible.
double dispersion_term(double lambda, const GpParams& p) {
  if (p.phi == 0.0) return 0.0;
  return p.phi * std::exp((p.alpha - 1.0) * std::log(lambda));
}

double log_pmf_unchecked(Count y, const GpShape& s, double log_fact) {
  if (y == 0) return -s.omega;
  const double yd = static_cast<double>(y);
  return std::log(s.omega) + (yd - 1.0) * std::log(s.omega + s.psi * yd) - s.omega -
         s.psi * yd - log_fact;
}

// Hard ceiling on the support walk; guards against pathological parameters.
constexpr Count kSupportCeiling = 50'000'000;

}  // namespace

void validate(const GpParams& params) {
  if (!std::isfinite(params.phi) || !std::isfinite(params.alpha)) {
    throw DomainError("generalized Poisson: parameters must be finite");
  }
  if (params.phi < 0.0) {
    throw DomainError("generalized Poisson: dispersion phi must be >= 0, got " +
                      std::to_string(params.phi));
  }
}

double log_factorial(Count y) { return std::lgamma(static_cast<double>(y) + 1.0); }

GpShape gp_shape(double lambda, const GpParams& params) {
  check_lambda(lambda);
  validate(params);
  const double s = dispersion_term(lambda, params);
  const double denom = 1.0 + s;
  return {lambda / denom, s / denom};
}

double gp_log_pmf(Count y, double lambda, const GpParams& params) {
  check_count(y);
  const GpShape shape = gp_shape(lambda, params);
  return log_pmf_unchecked(y, shape, log_factorial(y));
}

double gp_pmf(Count y, double lambda, const GpParams& params) {
  return std::exp(gp_log_pmf(y, lambda, params));
}

double gp_cdf(Count y, double lambda, const GpParams& params) {
  check_count(y);
  const GpShape shape = gp_shape(lambda, params);
  double total = 0.0;
  double log_fact = 0.0;
  for (Count k = 0; k <= y; ++k) {
    if (k > 0) log_fact += std::log(static_cast<double>(k));
    total += std::exp(log_pmf_unchecked(k, shape, log_fact));
    if (total >= 1.0) return 1.0;
  }
  return total;
}

GpMoments gp_moments(double lambda, const GpParams& params) {
  check_lambda(lambda);
  validate(params);
  const double d = 1.0 + dispersion_term(lambda, params);
  return {lambda, lambda * d * d};
}

Count gp_truncation_point(double lambda, const GpParams& params, double tail_tol) {
  const GpShape shape = gp_shape(lambda, params);
  const GpMoments mom = gp_moments(lambda, params);
  // Past the mean the pmf ratios fall monotonically toward psi*exp(1-psi) < 1,
  // so once a ratio r < 1 the remaining tail is at most pmf(y) r / (1 - r).
  double log_fact = 0.0;
  double prev = log_pmf_unchecked(0, shape, 0.0);
  for (Count y = 1; y < kSupportCeiling; ++y) {
    log_fact += std::log(static_cast<double>(y));
    const double cur = log_pmf_unchecked(y, shape, log_fact);
    if (static_cast<double>(y) >= mom.mean) {
      const double r = std::exp(cur - prev);
      if (r < 1.0) {
        const double bound = std::exp(cur) * r / (1.0 - r);
        if (bound < tail_tol) return y;
      }
    }
    prev = cur;
  }
  return kSupportCeiling;
}

Count gp_sample(Rng& rng, double lambda, const GpParams& params) {
  const GpShape shape = gp_shape(lambda, params);
  const double u = rng.uniform();
  double cdf = 0.0;
  double log_fact = 0.0;
  Count last_positive = 0;
  for (Count y = 0; y < kSupportCeiling; ++y) {
    if (y > 0) log_fact += std::log(static_cast<double>(y));
    const double p = std::exp(log_pmf_unchecked(y, shape, log_fact));
    cdf += p;
    if (p > 0.0) last_positive = y;
    if (u <= cdf) return y;
    // Accumulated rounding can leave cdf a hair below u; once the remaining
    // mass is negligible return the last attainable value.
    if (p == 0.0 && static_cast<double>(y) > lambda) return last_positive;
  }
  return last_positive;
}

GpLogPmfDerivs gp_log_pmf_derivs(Count y, double lambda, const GpParams& params,
                                 double log_factorial_y) {
  const double s = dispersion_term(lambda, params);
  const double a1 = params.alpha - 1.0;
  const double yd = static_cast<double>(y);
  const double d = 1.0 + s;
  const double dp = a1 * s;
  const double dpp = a1 * a1 * s;
  const double u = lambda + s * yd;
  const double up = lambda + a1 * s * yd;
  const double upp = lambda + a1 * a1 * s * yd;

  // log p = log(lambda) + (y-1) log u - y log d - u/d - log y!
  GpLogPmfDerivs out{};
  out.value = std::log(lambda) + (yd - 1.0) * std::log(u) - yd * std::log(d) - u / d -
              log_factorial_y;
  const double g = up / d - u * dp / (d * d);
  out.d1 = 1.0 + (yd - 1.0) * up / u - yd * dp / d - g;
  const double gp = upp / d - 2.0 * up * dp / (d * d) - u * dpp / (d * d) +
                    2.0 * u * dp * dp / (d * d * d);
  out.d2 = (yd - 1.0) * (upp / u - (up / u) * (up / u)) - yd * (dpp / d - (dp / d) * (dp / d)) -
           gp;
  return out;
}

}  // namespace riskmap
