#pragma once

#include <Eigen/Dense>
#include <array>
#include <string_view>

namespace riskmap {

inline constexpr int kNumHyper = 12;

// Row order of every hyperparameter table: observation (phi, alpha), fixed
// effects (mu, beta), temporal (tau_delta, tau_eps, psi1, psi2) and spatial
// (tau_zeta, omega, tau_xi, phi_bym).
inline constexpr std::array<std::string_view, kNumHyper> kHyperNames = {
    "phi",  "alpha", "mu",       "beta",  "tau_delta", "tau_eps",
    "psi1", "psi2",  "tau_zeta", "omega", "tau_xi",    "phi_bym"};

enum HyperIndex : int {
  kPhi = 0,
  kAlpha,
  kMu,
  kBeta,
  kTauDelta,
  kTauEps,
  kPsi1,
  kPsi2,
  kTauZeta,
  kOmega,
  kTauXi,
  kPhiBym,
};

struct HyperParams {
  double phi = 1.0;
  double alpha = 1.5;
  double mu = 0.0;
  double beta = 0.0;
  double tau_delta = 1.0;
  double tau_eps = 1.0;
  double psi1 = 0.0;
  double psi2 = 0.0;
  double tau_zeta = 1.0;
  double omega = 0.5;
  double tau_xi = 1.0;
  double phi_bym = 0.5;

  std::array<double, kNumHyper> to_array() const;
  static HyperParams from_array(const std::array<double, kNumHyper>& values);

  bool operator==(const HyperParams&) const = default;
};

// Throws DomainError naming the first violated constraint. Infinite
// precisions are accepted only when allow_infinite_precision is set (the
// simulator's zero-variance limit).
void validate(const HyperParams& h, bool allow_infinite_precision = false);

// One realization of the four latent components.
struct LatentState {
  Eigen::VectorXd delta;  // RW2 trend, length T
  Eigen::VectorXd eps;    // AR(2) effect, length T
  Eigen::VectorXd zeta;   // distance GMRF, length m
  Eigen::VectorXd xi;     // BYM, length m

  static LatentState zeros(int m, int T);
  int days() const { return static_cast<int>(delta.size()); }
  int regions() const { return static_cast<int>(zeta.size()); }
};

}  // namespace riskmap
