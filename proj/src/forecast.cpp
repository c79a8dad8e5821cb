#include "riskmap/forecast.hpp"

#include <cmath>

#include "riskmap/errors.hpp"
#include "riskmap/summary.hpp"

namespace riskmap {

LatentState extend_latent(const HyperParams& h, const LatentState& s, int k, Rng& rng) {
  if (k <= 0) throw ContractError("extend_latent: horizon must be positive");
  const int T = s.days();
  if (T < 2) throw ContractError("extend_latent: at least two days of history are required");
  validate(h, true);
  LatentState out = s;
  out.delta.conservativeResize(T + k);
  out.eps.conservativeResize(T + k);
  const double sd_delta = std::isfinite(h.tau_delta) ? 1.0 / std::sqrt(h.tau_delta) : 0.0;
  const double sd_eps = std::isfinite(h.tau_eps) ? 1.0 / std::sqrt(h.tau_eps) : 0.0;
  const auto [a1, a2] = ar2_coefficients({h.psi1, h.psi2, std::isfinite(h.tau_eps) ? h.tau_eps : 1.0});
  for (int t = T; t < T + k; ++t) {
    const double z_delta = rng.normal();
    const double z_eps = rng.normal();
    out.delta[t] = 2.0 * out.delta[t - 1] - out.delta[t - 2] + sd_delta * z_delta;
    out.eps[t] = a1 * out.eps[t - 1] + a2 * out.eps[t - 2] + sd_eps * z_eps;
  }
  return out;
}

CellSummary summarize_cell(std::vector<double> values) {
  const IntervalSummary s = summarize(std::move(values));
  return {s.mean, s.lower, s.upper};
}

ForecastResult predictive_counts(const PosteriorSamples& samples, const ModelContext& ctx,
                                 const std::vector<Date>& history, int k, std::uint64_t seed) {
  if (k <= 0) throw ContractError("forecast: horizon must be positive");
  if (samples.draws.empty()) throw ContractError("forecast: no posterior draws");
  if (static_cast<int>(history.size()) != ctx.days()) {
    throw ContractError("forecast: history dates do not match the panel");
  }
  const int m = ctx.regions();
  const std::size_t n = samples.draws.size();
  ForecastResult out;
  out.horizon = k;
  for (int j = 1; j <= k; ++j) out.dates.push_back(history.back() + j);
  out.country_draws = CountMatrix::Zero(k, static_cast<Eigen::Index>(n));
  const Eigen::MatrixXd future_expected = ctx.expected().col(0).replicate(1, k);

  for (std::size_t d = 0; d < n; ++d) {
    const Draw& draw = samples.draws[d];
    Rng rng = Rng::stream(seed, d);
    const LatentState ext = extend_latent(draw.hyper, draw.latent, k, rng);
    LatentState future = ext;
    future.delta = ext.delta.tail(k);
    future.eps = ext.eps.tail(k);
    const RelativeRiskField field =
        relative_risk_field(draw.hyper, future, ctx.density(), future_expected);
    const GpParams gp{draw.hyper.phi, draw.hyper.alpha};
    CountMatrix counts(m, k);
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < m; ++i) counts(i, j) = gp_sample(rng, field.lambda(i, j), gp);
    }
    out.country_draws.col(static_cast<Eigen::Index>(d)) = counts.colwise().sum().transpose();
    out.region_draws.push_back(std::move(counts));
  }

  out.region_summary.assign(static_cast<std::size_t>(m), std::vector<CellSummary>(static_cast<std::size_t>(k)));
  std::vector<double> values(n);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < m; ++i) {
      for (std::size_t d = 0; d < n; ++d) values[d] = static_cast<double>(out.region_draws[d](i, j));
      out.region_summary[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = summarize_cell(values);
    }
    for (std::size_t d = 0; d < n; ++d) {
      values[d] = static_cast<double>(out.country_draws(j, static_cast<Eigen::Index>(d)));
    }
    out.country_summary.push_back(summarize_cell(values));
  }
  return out;
}

std::vector<SeriesRow> fitted_country_series(const PosteriorSamples& samples,
                                             const ModelContext& ctx,
                                             const std::vector<Date>& dates) {
  if (samples.draws.empty()) throw ContractError("fitted series: no posterior draws");
  const int T = ctx.days();
  if (static_cast<int>(dates.size()) != T) {
    throw ContractError("fitted series: dates do not match the panel");
  }
  const std::size_t n = samples.draws.size();
  Eigen::MatrixXd totals(T, static_cast<Eigen::Index>(n));
  for (std::size_t d = 0; d < n; ++d) {
    const Draw& draw = samples.draws[d];
    const RelativeRiskField field =
        relative_risk_field(draw.hyper, draw.latent, ctx.density(), ctx.expected());
    totals.col(static_cast<Eigen::Index>(d)) = field.lambda.colwise().sum().transpose();
  }
  std::vector<SeriesRow> out;
  std::vector<double> values(n);
  for (int t = 0; t < T; ++t) {
    for (std::size_t d = 0; d < n; ++d) values[d] = totals(t, static_cast<Eigen::Index>(d));
    out.push_back({dates[static_cast<std::size_t>(t)],
                   static_cast<double>(ctx.counts().col(t).sum()), summarize_cell(values)});
  }
  return out;
}

}  // namespace riskmap
