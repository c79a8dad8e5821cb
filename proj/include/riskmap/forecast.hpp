#pragma once

#include <cstdint>
#include <vector>

#include "riskmap/mcmc.hpp"

namespace riskmap {

// delta continues by the RW2 recursion and eps by the AR(2) recursion, each
// with fresh Gaussian innovations (none when the precision is infinite);
// zeta and xi are carried over unchanged.
LatentState extend_latent(const HyperParams& h, const LatentState& s, int k, Rng& rng);

struct CellSummary {
  double mean = 0.0;
  double lower95 = 0.0;
  double upper95 = 0.0;
};

struct ForecastResult {
  int horizon = 0;
  std::vector<Date> dates;
  // region_draws[d](i, j): predictive count for region i on day T + j + 1.
  std::vector<CountMatrix> region_draws;
  // country_draws(j, d) = sum_i region_draws[d](i, j).
  CountMatrix country_draws;
  std::vector<std::vector<CellSummary>> region_summary;  // [i][j]
  std::vector<CellSummary> country_summary;              // [j]
};

// Future expected counts reuse the fitted rate: E_{i,T+j} = P_i * rate.
// Draw d uses its own random stream derived from `seed`.
ForecastResult predictive_counts(const PosteriorSamples& samples, const ModelContext& ctx,
                                 const std::vector<Date>& history, int k, std::uint64_t seed);

struct SeriesRow {
  Date date;
  double observed = 0.0;
  CellSummary fitted;
};

// Per-day posterior summary of sum_i E_it theta_it next to the observed total.
std::vector<SeriesRow> fitted_country_series(const PosteriorSamples& samples,
                                             const ModelContext& ctx,
                                             const std::vector<Date>& dates);

CellSummary summarize_cell(std::vector<double> values);

}  // namespace riskmap
