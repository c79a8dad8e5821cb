#pragma once

#include <cstdint>
#include <utility>

#include "riskmap/rng.hpp"

namespace riskmap {

using Count = std::int64_t;

// Generalized Poisson observation model in the (Omega, Psi) form:
//   P(Y = y) = exp(-Omega - Psi y) Omega (Omega + Psi y)^(y-1) / y!
// with Omega = lambda / (1 + phi lambda^(alpha-1)) and
//      Psi   = phi lambda^(alpha-1) / (1 + phi lambda^(alpha-1)).
// E[Y] = lambda, Var[Y] = lambda (1 + phi lambda^(alpha-1))^2; phi = 0 is Poisson.
struct GpParams {
  double phi = 0.0;    // dispersion, >= 0
  double alpha = 1.0;  // shape exponent of the variance/mean relation
};

struct GpShape {
  double omega;
  double psi;
};

// Throws DomainError unless phi >= 0 and both fields are finite.
void validate(const GpParams& params);

GpShape gp_shape(double lambda, const GpParams& params);

double gp_log_pmf(Count y, double lambda, const GpParams& params);
double gp_pmf(Count y, double lambda, const GpParams& params);

// P(Y <= y) as the exact finite sum of the pmf.
double gp_cdf(Count y, double lambda, const GpParams& params);

struct GpMoments {
  double mean;
  double variance;
};
GpMoments gp_moments(double lambda, const GpParams& params);

// Smallest Y* such that P(Y > Y*) < tail_tol, certified by a geometric
// majorant on successive pmf ratios once they drop below one.
Count gp_truncation_point(double lambda, const GpParams& params,
                          double tail_tol = 1e-12);

// Inversion sampling on the accumulated cdf.
Count gp_sample(Rng& rng, double lambda, const GpParams& params);

// log-pmf and its first two derivatives with respect to log(lambda), used by
// the latent-field Gaussian approximation.
struct GpLogPmfDerivs {
  double value;
  double d1;
  double d2;
};
GpLogPmfDerivs gp_log_pmf_derivs(Count y, double lambda, const GpParams& params,
                                 double log_factorial_y);

double log_factorial(Count y);

}  // namespace riskmap
