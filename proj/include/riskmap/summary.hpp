#pragma once

#include <string>
#include <vector>

#include "riskmap/mcmc.hpp"

namespace riskmap {

struct IntervalSummary {
  double mean = 0.0;
  double lower = 0.0;  // 2.5% quantile
  double upper = 0.0;  // 97.5% quantile
};

// Linear-interpolation quantile of already sorted values (p in [0, 1]).
double sorted_quantile(const std::vector<double>& sorted, double p);

// Mean and equal-tailed 95% interval. Throws ContractError on empty input.
IntervalSummary summarize(std::vector<double> values);

// Split-chain potential scale reduction. Every chain is halved; requires at
// least two draws per half. Constant draws give 1.
double split_rhat(const std::vector<std::vector<double>>& chains);

struct SummaryRow {
  std::string parameter;
  double mean = 0.0;
  double lower95 = 0.0;
  double upper95 = 0.0;
  double rhat = 0.0;
};

// One row per hyperparameter, in table order. Throws ContractError when
// fewer than two draws are available.
std::vector<SummaryRow> posterior_summary(const PosteriorSamples& samples);

}  // namespace riskmap
