#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "riskmap/laplace.hpp"
#include "riskmap/risk_model.hpp"

namespace riskmap {

struct McmcConfig {
  int chains = 2;
  int iterations = 4000;
  int burn_in = 1500;
  int thin = 1;
  std::uint64_t seed = 20200913;
  int adapt_window = 50;
  // Target acceptance for multivariate blocks; single-coordinate blocks use
  // target_accept_scalar.
  double target_accept = 0.30;
  double target_accept_scalar = 0.44;
  // Start chains from find_mode instead of the default initial values.
  bool init_from_mode = false;

  // Throws ConfigError. (iterations - burn_in) must be a multiple of thin.
  void validate() const;
  int retained_per_chain() const { return (iterations - burn_in) / thin; }
};

struct Draw {
  int chain = 0;
  int iteration = 0;
  HyperParams hyper;
  LatentState latent;
};

// Acceptance bookkeeping for one (chain, block) pair. scale_trace holds the
// proposal scale at the end of every adaptation window, burn-in or not.
struct BlockLedger {
  int chain = 0;
  std::string block;
  long proposed_burn_in = 0;
  long accepted_burn_in = 0;
  long proposed = 0;
  long accepted = 0;
  std::vector<double> scale_trace;

  double acceptance_rate() const {
    return proposed > 0 ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
  }
};

struct PosteriorSamples {
  int chains = 0;
  int regions = 0;
  int days = 0;
  std::uint64_t seed = 0;
  std::vector<Draw> draws;
  std::vector<BlockLedger> ledger;
  std::vector<std::string> warnings;

  std::size_t size() const { return draws.size(); }
  // Values of hyperparameter k (HyperIndex order), optionally one chain only.
  std::vector<double> hyper_values(int k, int chain = -1) const;
  // Draws grouped by chain, in iteration order.
  std::vector<std::vector<double>> hyper_by_chain(int k) const;
};

// The hyperparameter blocks updated jointly with the latent field.
struct HyperBlock {
  std::string name;
  std::vector<int> indices;
};
const std::vector<HyperBlock>& hyper_blocks();

struct ModeResult {
  HyperParams hyper;
  LatentState latent;
  double log_joint = 0.0;
  int sweeps = 0;
  // Objective after every accepted step, starting at the initial value.
  std::vector<double> trace;
};

// Newton ascent on the profile of log_joint: the latent field (with mu and
// beta) is held at its conditional mode while phi, alpha, psi1, psi2, omega
// and phi_bym move jointly, using finite-difference derivatives. Precisions
// stay at their initial values since the joint density is unbounded as a
// precision grows and its field shrinks. `sweeps` counts Newton iterations.
ModeResult find_mode(const ModelContext& ctx, const PriorSpec& priors, const HyperParams& init,
                     int max_sweeps = 500);
ModeResult find_mode(const CountPanel& panel, const RegionTable& regions,
                     const PriorSpec& priors, const HyperParams& init,
                     const ModelOptions& options = {});

// Adaptive Metropolis-within-Gibbs. Each iteration updates the observation,
// temporal and spatial hyperparameter blocks, each jointly with the latent
// field drawn from its Gaussian approximation at the proposed
// hyperparameters, then refreshes the latent field alone. Proposal scales
// adapt during burn-in and are frozen afterwards.
PosteriorSamples run_mcmc(const ModelContext& ctx, const PriorSpec& priors,
                          const McmcConfig& config);
PosteriorSamples run_mcmc(const CountPanel& panel, const RegionTable& regions,
                          const PriorSpec& priors, const McmcConfig& config,
                          const ModelOptions& options = {});

}  // namespace riskmap
