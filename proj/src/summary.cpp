#include "riskmap/summary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "riskmap/errors.hpp"

namespace riskmap {

double sorted_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw ContractError("quantile of an empty sample");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

IntervalSummary summarize(std::vector<double> values) {
  if (values.empty()) throw ContractError("summary of an empty sample");
  IntervalSummary out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  out.lower = sorted_quantile(values, 0.025);
  out.upper = sorted_quantile(values, 0.975);
  // Rounding in the mean of identical values must not escape the interval.
  out.mean = std::clamp(out.mean, values.front(), values.back());
  return out;
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> halves;
  std::size_t n = std::numeric_limits<std::size_t>::max();
  for (const auto& c : chains) n = std::min(n, c.size() / 2);
  if (chains.empty() || n < 2) throw ContractError("split_rhat: need at least 4 draws per chain");
  for (const auto& c : chains) {
    halves.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(n));
    halves.emplace_back(c.end() - static_cast<std::ptrdiff_t>(n), c.end());
  }
  const double M = static_cast<double>(halves.size());
  const double N = static_cast<double>(n);
  std::vector<double> means, vars;
  for (const auto& h : halves) {
    const double mean = std::accumulate(h.begin(), h.end(), 0.0) / N;
    double ss = 0.0;
    for (double x : h) ss += (x - mean) * (x - mean);
    means.push_back(mean);
    vars.push_back(ss / (N - 1.0));
  }
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / M;
  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between *= N / (M - 1.0);
  const double within = std::accumulate(vars.begin(), vars.end(), 0.0) / M;
  if (within <= 0.0) return between <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (N - 1.0) / N * within + between / N;
  return std::sqrt(var_plus / within);
}

std::vector<SummaryRow> posterior_summary(const PosteriorSamples& samples) {
  if (samples.size() < 2) {
    throw ContractError("posterior_summary: at least two draws are required, got " +
                        std::to_string(samples.size()));
  }
  std::vector<SummaryRow> rows;
  for (int k = 0; k < kNumHyper; ++k) {
    const IntervalSummary s = summarize(samples.hyper_values(k));
    SummaryRow row{std::string(kHyperNames[static_cast<std::size_t>(k)]), s.mean, s.lower, s.upper,
                   std::numeric_limits<double>::quiet_NaN()};
    try {
      row.rhat = split_rhat(samples.hyper_by_chain(k));
    } catch (const ContractError&) {
      // Too few draws per chain for a convergence diagnostic.
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace riskmap
