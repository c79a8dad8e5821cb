#include "riskmap/risk_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

#include "riskmap/errors.hpp"

namespace riskmap {

RegionTable::RegionTable(std::vector<Region> regions) : regions_(std::move(regions)) {
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    const Region& r = regions_[i];
    if (!index.emplace(r.id, static_cast<int>(i)).second) {
      throw ContractError("region table: duplicate id '" + r.id + "'");
    }
    if (!(r.population > 0.0) || !std::isfinite(r.population)) {
      throw DomainError("region '" + r.id + "': population must be positive");
    }
    if (!(r.area > 0.0) || !std::isfinite(r.area)) {
      throw DomainError("region '" + r.id + "': area must be positive");
    }
    if (!std::isfinite(r.x) || !std::isfinite(r.y)) {
      throw DomainError("region '" + r.id + "': centroid must be finite");
    }
  }
  for (const Region& r : regions_) {
    for (const std::string& n : r.neighbors) {
      auto it = index.find(n);
      if (it == index.end()) {
        throw ContractError("region '" + r.id + "': unknown neighbour '" + n + "'");
      }
      if (n == r.id) throw ContractError("region '" + r.id + "' lists itself as a neighbour");
      const auto& back = regions_[static_cast<std::size_t>(it->second)].neighbors;
      if (std::find(back.begin(), back.end(), r.id) == back.end()) {
        throw ContractError("neighbour relation is not symmetric: '" + r.id + "' -> '" + n + "'");
      }
    }
  }
}

std::optional<int> RegionTable::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    if (regions_[i].id == id) return static_cast<int>(i);
  }
  return std::nullopt;
}

Adjacency RegionTable::adjacency() const {
  Adjacency adj(regions_.size());
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    std::set<int> unique;
    for (const std::string& n : regions_[i].neighbors) unique.insert(*index_of(n));
    adj[i].assign(unique.begin(), unique.end());
  }
  return adj;
}

Eigen::MatrixXd RegionTable::distance_matrix() const {
  const int m = size();
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const double dx = (*this)[i].x - (*this)[j].x;
      const double dy = (*this)[i].y - (*this)[j].y;
      C(i, j) = C(j, i) = std::hypot(dx, dy);
    }
  }
  return C;
}

Eigen::VectorXd RegionTable::populations() const {
  Eigen::VectorXd p(size());
  for (int i = 0; i < size(); ++i) p[i] = (*this)[i].population;
  return p;
}

void CountPanel::validate() const {
  if (static_cast<std::size_t>(counts.cols()) != dates.size()) {
    throw ContractError("count panel: " + std::to_string(counts.cols()) + " columns but " +
                        std::to_string(dates.size()) + " dates");
  }
  for (std::size_t t = 1; t < dates.size(); ++t) {
    if (dates[t] - dates[t - 1] != 1) {
      throw ContractError("count panel: dates are not consecutive at " + dates[t].to_string());
    }
  }
  if (counts.size() > 0 && counts.minCoeff() < 0) {
    throw ContractError("count panel: negative count");
  }
}

double incidence_rate(const CountPanel& panel, const RegionTable& regions) {
  if (panel.days() == 0 || panel.regions() == 0) {
    throw ContractError("incidence_rate: empty panel");
  }
  if (panel.regions() != regions.size()) {
    throw ContractError("incidence_rate: panel rows do not match the region table");
  }
  const double total_population = regions.populations().sum();
  if (!(total_population > 0.0)) throw DomainError("incidence_rate: zero total population");
  double acc = 0.0;
  for (int t = 0; t < panel.days(); ++t) {
    acc += static_cast<double>(panel.counts.col(t).sum()) / total_population;
  }
  return acc / panel.days();
}

Eigen::MatrixXd expected_counts(const RegionTable& regions, double rate, int days) {
  if (!(rate >= 0.0) || !std::isfinite(rate)) {
    throw DomainError("expected_counts: rate must be finite and nonnegative");
  }
  const Eigen::VectorXd p = regions.populations() * rate;
  return p.replicate(1, days);
}

Eigen::VectorXd standardized_density(const RegionTable& regions) {
  const int m = regions.size();
  if (m < 2) throw ContractError("standardized_density: needs at least two regions");
  Eigen::VectorXd raw(m);
  for (int i = 0; i < m; ++i) raw[i] = regions[i].population / regions[i].area;
  const double mean = raw.mean();
  const double var = (raw.array() - mean).square().mean();
  if (!(var > 0.0)) throw DomainError("standardized_density: densities have zero variance");
  return (raw.array() - mean) / std::sqrt(var);
}

RelativeRiskField relative_risk_field(const HyperParams& h, const LatentState& s,
                                      const Eigen::VectorXd& density,
                                      const Eigen::MatrixXd& expected) {
  const Eigen::Index m = expected.rows();
  const Eigen::Index T = expected.cols();
  if (density.size() != m || s.zeta.size() != m || s.xi.size() != m || s.delta.size() != T ||
      s.eps.size() != T) {
    throw ContractError("relative_risk_field: dimension mismatch");
  }
  RelativeRiskField out{Eigen::MatrixXd(m, T), Eigen::MatrixXd(m, T), 0};
  for (Eigen::Index i = 0; i < m; ++i) {
    const double spatial = h.mu + h.beta * density[i] + s.zeta[i] + s.xi[i];
    for (Eigen::Index t = 0; t < T; ++t) {
      double eta = spatial + s.delta[t] + s.eps[t];
      if (std::abs(eta) > kLinearPredictorClamp || std::isnan(eta)) {
        ++out.clamped_cells;
        eta = std::isnan(eta) ? eta : std::clamp(eta, -kLinearPredictorClamp, kLinearPredictorClamp);
      }
      out.theta(i, t) = std::exp(eta);
      out.lambda(i, t) = expected(i, t) * out.theta(i, t);
    }
  }
  return out;
}

ModelContext::ModelContext(const CountPanel& panel, const RegionTable& regions,
                           ModelOptions options)
    : m_(panel.regions()), T_(panel.days()), options_(std::move(options)) {
  panel.validate();
  if (m_ != regions.size()) {
    throw ContractError("model: panel has " + std::to_string(m_) + " rows but " +
                        std::to_string(regions.size()) + " regions");
  }
  if (T_ < 3) throw ContractError("model: at least three days are required");
  counts_ = panel.counts;
  log_fact_.resize(m_, T_);
  for (int i = 0; i < m_; ++i) {
    for (int t = 0; t < T_; ++t) log_fact_(i, t) = log_factorial(counts_(i, t));
  }
  rate_ = options_.reference_rate ? *options_.reference_rate : incidence_rate(panel, regions);
  if (!(rate_ > 0.0)) {
    // An all-zero panel has no incidence; fall back to one expected case per
    // region-period so that the model stays defined.
    rate_ = 1.0 / (regions.populations().sum() * T_);
  }
  expected_ = expected_counts(regions, rate_, T_);
  density_ = standardized_density(regions);
  distance_ = DistanceGmrf(regions.distance_matrix());
  bym_ = BymField(regions.adjacency(), options_.bym_convention);
}

namespace {

template <class F>
double component(const char* name, F&& f) {
  try {
    return f();
  } catch (const DomainError& e) {
    throw DomainError(std::string(name) + ": " + e.what());
  } catch (const ContractError& e) {
    throw ContractError(std::string(name) + ": " + e.what());
  } catch (const ModelSpecError& e) {
    throw ModelSpecError(std::string(name) + ": " + e.what());
  }
}

}  // namespace

LogJointTerms log_joint_terms(const ModelContext& ctx, const HyperParams& h,
                              const LatentState& s, const PriorSpec& priors) {
  LogJointTerms out;
  const int m = ctx.regions();
  const int T = ctx.days();
  if (s.delta.size() != T || s.eps.size() != T || s.zeta.size() != m || s.xi.size() != m) {
    throw ContractError("log_joint: latent state dimensions do not match the panel");
  }
  Eigen::VectorXd v;
  component("hyperparameters", [&] {
    validate(h);
    v = to_unconstrained(h, priors);
    return 0.0;
  });

  const RelativeRiskField field = relative_risk_field(h, s, ctx.density(), ctx.expected());
  out.clamped_cells = field.clamped_cells;
  out.observation = component("observation", [&] {
    const GpParams gp{h.phi, h.alpha};
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
      for (int t = 0; t < T; ++t) acc += gp_log_pmf(ctx.counts()(i, t), field.lambda(i, t), gp);
    }
    return acc;
  });
  out.trend = component("trend (RW2)", [&] { return rw2_log_density(s.delta, {T, h.tau_delta}); });
  out.correlation = component("temporal correlation (AR2)", [&] {
    return ar2_log_density(s.eps, {h.psi1, h.psi2, h.tau_eps});
  });
  out.distance = component("distance GMRF", [&] {
    return ctx.distance_field().log_density(s.zeta, h.omega, h.tau_zeta);
  });
  out.neighbourhood = component("BYM", [&] {
    return ctx.bym_field().log_density(s.xi, h.phi_bym, h.tau_xi);
  });
  out.prior = log_prior(v, priors);
  if (ctx.options().sum_to_zero) {
    const double kappa = ctx.options().sum_to_zero_precision;
    const double sd = s.delta.sum();
    const double sz = s.zeta.sum();
    const double sx = s.xi.sum();
    out.penalty = -0.5 * kappa * (sd * sd + sz * sz + sx * sx);
  }
  return out;
}

double log_joint(const ModelContext& ctx, const HyperParams& h, const LatentState& s,
                 const PriorSpec& priors) {
  return log_joint_terms(ctx, h, s, priors).total();
}

double log_joint(const HyperParams& h, const LatentState& s, const CountPanel& panel,
                 const RegionTable& regions, const PriorSpec& priors,
                 const ModelOptions& options) {
  return log_joint(ModelContext(panel, regions, options), h, s, priors);
}

}  // namespace riskmap
