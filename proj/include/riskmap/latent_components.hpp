#pragma once

#include <Eigen/Dense>
#include <vector>

#include "riskmap/rng.hpp"

namespace riskmap {

using Adjacency = std::vector<std::vector<int>>;

// ---------------------------------------------------------------------------
// Second-order random walk trend.

struct Rw2Spec {
  int T = 0;
  double tau_delta = 1.0;
};

// -(tau/2) * sum_{t=2}^{T-1} (d_{t+1} - 2 d_t + d_{t-1})^2
double rw2_quadratic_form(const Eigen::VectorXd& delta, const Rw2Spec& spec);

// Density of the T-2 second differences: the quadratic form plus the
// ((T-2)/2) log(tau / 2pi) normalizer that depends on the precision.
double rw2_log_density(const Eigen::VectorXd& delta, const Rw2Spec& spec);

// Unit-precision structure matrix D'D with D the (T-2) x T second-difference
// operator. Rank T-2; null space spanned by constants and linear trends.
Eigen::MatrixXd rw2_structure(int T);

// ---------------------------------------------------------------------------
// Stationary AR(2) in partial-autocorrelation form.

struct Ar2Spec {
  double psi1 = 0.0;
  double psi2 = 0.0;
  double tau_eps = 1.0;
};

struct Ar2Coefficients {
  double a1;
  double a2;
};

void validate(const Ar2Spec& spec);

// a1 = psi1 (1 - psi2), a2 = psi2
Ar2Coefficients ar2_coefficients(const Ar2Spec& spec);

// Yule-Walker autocovariances gamma(0..max_lag) under innovation variance 1/tau.
std::vector<double> ar2_autocovariance(const Ar2Spec& spec, int max_lag);

// Exact stationary log-density: bivariate stationary start, then the
// conditional recursion.
double ar2_log_density(const Eigen::VectorXd& eps, const Ar2Spec& spec);

// Banded T x T precision matrix of the same Gaussian.
Eigen::MatrixXd ar2_precision(int T, const Ar2Spec& spec);

Eigen::VectorXd sample_ar2(Rng& rng, int T, const Ar2Spec& spec);

// ---------------------------------------------------------------------------
// Distance GMRF: Var(zeta) = (1/tau) (I - (omega / e_max) C)^{-1}.

struct DistanceGmrfSpec {
  Eigen::MatrixXd C;
  double omega = 0.0;
  double tau_zeta = 1.0;
};

double largest_eigenvalue(const Eigen::MatrixXd& symmetric);

// I - (omega / e_max) C, checked positive definite by Cholesky. Throws
// ModelSpecError naming omega and the smallest eigenvalue on failure.
Eigen::MatrixXd distance_structure(const Eigen::MatrixXd& C, double omega, double e_max);

Eigen::MatrixXd distance_covariance(const DistanceGmrfSpec& spec);

// Caches e_max for repeated evaluation at varying (omega, tau).
class DistanceGmrf {
 public:
  DistanceGmrf() = default;
  explicit DistanceGmrf(Eigen::MatrixXd C);

  int size() const { return static_cast<int>(C_.rows()); }
  const Eigen::MatrixXd& interconnection() const { return C_; }
  double e_max() const { return e_max_; }

  Eigen::MatrixXd structure(double omega) const;
  Eigen::MatrixXd precision(double omega, double tau) const;
  Eigen::MatrixXd covariance(double omega, double tau) const;
  double log_density(const Eigen::VectorXd& zeta, double omega, double tau) const;
  Eigen::VectorXd sample(Rng& rng, double omega, double tau) const;

 private:
  Eigen::MatrixXd C_;
  double e_max_ = 0.0;
};

// ---------------------------------------------------------------------------
// Scaled BYM neighbourhood field.

enum class BymConvention {
  // (1/tau) ((1 - phi) Q^- + phi I), the mixture exactly as printed.
  AsPrinted,
  // (1/tau) ((1 - phi) I + phi Q^-), phi weighting the structured part.
  Riebler,
};

struct BymSpec {
  Adjacency adjacency;
  double phi_bym = 0.5;
  double tau_xi = 1.0;
};

void validate_adjacency(const Adjacency& adjacency);

// Q_ii = n_i, Q_ij = -1 for neighbours.
Eigen::MatrixXd besag_precision(const Adjacency& adjacency);

// Moore-Penrose inverse of a symmetric PSD matrix; eigenvalues below
// 1e-10 * max eigenvalue are treated as zero.
Eigen::MatrixXd generalized_inverse(const Eigen::MatrixXd& Q);

// Divides by the geometric mean of the diagonal.
Eigen::MatrixXd scale_besag(const Eigen::MatrixXd& q_minus);

Eigen::MatrixXd bym_covariance(const BymSpec& spec, const Eigen::MatrixXd& q_minus,
                               BymConvention convention = BymConvention::AsPrinted);

// Eigen-decomposed scaled Q^- for repeated density evaluation. The mixture
// shares eigenvectors with Q^-, so every (phi, tau) is diagonal in that basis.
class BymField {
 public:
  BymField() = default;
  BymField(const Adjacency& adjacency, BymConvention convention);

  int size() const { return static_cast<int>(basis_.rows()); }
  BymConvention convention() const { return convention_; }
  const Eigen::MatrixXd& scaled_q_minus() const { return scaled_; }

  // Eigenvalues of the mixture matrix (before dividing by tau).
  Eigen::VectorXd mixture_eigenvalues(double phi_bym) const;

  Eigen::MatrixXd covariance(double phi_bym, double tau) const;
  // Pseudo-inverse of the covariance (zero on degenerate directions).
  Eigen::MatrixXd precision(double phi_bym, double tau) const;
  // Gaussian log-density on the support of the covariance.
  double log_density(const Eigen::VectorXd& xi, double phi_bym, double tau) const;
  Eigen::VectorXd sample(Rng& rng, double phi_bym, double tau) const;

 private:
  BymConvention convention_ = BymConvention::AsPrinted;
  Eigen::MatrixXd scaled_;
  Eigen::MatrixXd basis_;
  Eigen::VectorXd scaled_eigenvalues_;
};

}  // namespace riskmap
