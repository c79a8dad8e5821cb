#pragma once

#include <cstdint>
#include <optional>

#include "riskmap/risk_model.hpp"

namespace riskmap {

// Regions on a near-square grid with rook adjacency (always connected).
// Populations and areas vary by region so that density is not constant.
RegionTable grid_regions(int m, std::uint64_t seed = 1);

struct ScenarioSpec {
  RegionTable regions;
  int days = 60;
  // Infinite precisions switch a component off.
  HyperParams truth;
  std::uint64_t seed = 1;
  // Daily incidence used for the expected counts E_it = P_i * rate.
  double reference_rate = 1e-4;
  BymConvention bym_convention = BymConvention::AsPrinted;
  Date start = Date::from_ymd(2020, 3, 1);
  // Days over which delta is centred; all days when unset. Lets a panel that
  // will be truncated before fitting keep the fitted window centred.
  std::optional<int> centre_days;
};

struct Simulation {
  CountPanel panel;
  LatentState latent;
  RelativeRiskField field;
  Eigen::MatrixXd expected;
};

// delta: RW2 anchored at delta_1 = delta_2 = 0 then centred; eps: stationary
// AR(2); zeta and xi: draws from their covariances conditioned on a zero sum.
Simulation simulate_panel(const ScenarioSpec& spec);

// Conditions a Gaussian draw with covariance `cov` on 1'x = 0.
Eigen::VectorXd condition_zero_sum(const Eigen::VectorXd& x, const Eigen::MatrixXd& cov);

}  // namespace riskmap
