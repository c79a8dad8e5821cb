#pragma once

#include <Eigen/Dense>
#include <array>

#include "riskmap/model_types.hpp"

namespace riskmap {

enum class Transform {
  Identity,  // v = x
  Log,       // v = log x
  Logit,     // v = log(x / (1 - x))
  Interval,  // v = log((1 + x) / (1 - x)), for x in (-1, 1)
};

struct PriorEntry {
  Transform transform = Transform::Identity;
  double mean = 0.0;
  double variance = 1e6;
};

// Independent Gaussian priors declared directly on the transformed scale.
struct PriorSpec {
  std::array<PriorEntry, kNumHyper> entries{};
  // Transformed hyperparameters (everything except the identity-mapped
  // coordinates) are confined to |v| <= support_bound; beyond it the
  // precisions and correlations overflow double arithmetic.
  double support_bound = 20.0;

  // Log transforms on phi and the precisions, logit on omega and phi_bym,
  // interval map on psi1/psi2; N(0, 1e6) everywhere except alpha ~ N(1.5, 1e6).
  static PriorSpec defaults();

  void validate() const;
  bool in_support(const Eigen::VectorXd& v) const;
};

double transform_forward(Transform t, double x);
double transform_inverse(Transform t, double v);

Eigen::VectorXd to_unconstrained(const HyperParams& h, const PriorSpec& spec);
HyperParams from_unconstrained(const Eigen::VectorXd& v, const PriorSpec& spec);

// Sum of the independent Gaussian log-densities; no Jacobian term.
double log_prior(const Eigen::VectorXd& v, const PriorSpec& spec);

// Default starting point: every transformed coordinate at 0 except alpha = 1.5.
HyperParams initial_hyperparams(const PriorSpec& spec = PriorSpec::defaults());

}  // namespace riskmap
