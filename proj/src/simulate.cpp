#include "riskmap/simulate.hpp"

#include <cmath>
#include <string>

#include "riskmap/errors.hpp"

namespace riskmap {

RegionTable grid_regions(int m, std::uint64_t seed) {
  if (m < 2) throw ContractError("grid_regions: at least two regions are required");
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(m))));
  Rng rng(seed);
  std::vector<Region> regions(static_cast<std::size_t>(m));
  auto id = [](int i) { return "R" + std::to_string(i + 1); };
  for (int i = 0; i < m; ++i) {
    Region& r = regions[static_cast<std::size_t>(i)];
    r.id = id(i);
    r.name = "Region " + std::to_string(i + 1);
    r.population = std::round(2e5 * std::exp(0.6 * rng.normal()));
    r.area = std::round(1e3 * std::exp(0.6 * rng.normal())) + 50.0;
    r.x = 100.0 * (i % cols);
    r.y = 100.0 * (i / cols);
    const int right = i + 1;
    const int down = i + cols;
    if (right < m && right % cols != 0) {
      r.neighbors.push_back(id(right));
      regions[static_cast<std::size_t>(right)].neighbors.push_back(r.id);
    }
    if (down < m) {
      r.neighbors.push_back(id(down));
      regions[static_cast<std::size_t>(down)].neighbors.push_back(r.id);
    }
  }
  return RegionTable(std::move(regions));
}

Eigen::VectorXd condition_zero_sum(const Eigen::VectorXd& x, const Eigen::MatrixXd& cov) {
  const Eigen::VectorXd s1 = cov.rowwise().sum();
  const double denom = s1.sum();
  if (!(denom > 0.0)) return x;
  return x - s1 * (x.sum() / denom);
}

Simulation simulate_panel(const ScenarioSpec& spec) {
  const HyperParams& h = spec.truth;
  validate(h, true);
  const int m = spec.regions.size();
  const int T = spec.days;
  if (T < 3) throw ContractError("simulate: at least three days are required");
  if (!(spec.reference_rate > 0.0)) throw DomainError("simulate: reference rate must be positive");
  Rng rng(spec.seed);
  LatentState s = LatentState::zeros(m, T);

  if (std::isfinite(h.tau_delta)) {
    const double sd = 1.0 / std::sqrt(h.tau_delta);
    for (int t = 2; t < T; ++t) s.delta[t] = 2.0 * s.delta[t - 1] - s.delta[t - 2] + sd * rng.normal();
    const int window = spec.centre_days.value_or(T);
    if (window < 1 || window > T) throw ContractError("simulate: centring window out of range");
    s.delta.array() -= s.delta.head(window).mean();
  }
  if (std::isfinite(h.tau_eps)) s.eps = sample_ar2(rng, T, {h.psi1, h.psi2, h.tau_eps});
  if (std::isfinite(h.tau_zeta)) {
    const DistanceGmrf field(spec.regions.distance_matrix());
    s.zeta = condition_zero_sum(field.sample(rng, h.omega, h.tau_zeta),
                                field.covariance(h.omega, h.tau_zeta));
  }
  if (std::isfinite(h.tau_xi)) {
    const BymField field(spec.regions.adjacency(), spec.bym_convention);
    s.xi = condition_zero_sum(field.sample(rng, h.phi_bym, h.tau_xi),
                              field.covariance(h.phi_bym, h.tau_xi));
  }

  Simulation out;
  out.expected = expected_counts(spec.regions, spec.reference_rate, T);
  const Eigen::VectorXd density = standardized_density(spec.regions);
  out.field = relative_risk_field(h, s, density, out.expected);
  out.latent = std::move(s);
  out.panel.counts.resize(m, T);
  const GpParams gp{h.phi, h.alpha};
  for (int t = 0; t < T; ++t) {
    out.panel.dates.push_back(spec.start + t);
    for (int i = 0; i < m; ++i) out.panel.counts(i, t) = gp_sample(rng, out.field.lambda(i, t), gp);
  }
  return out;
}

}  // namespace riskmap
