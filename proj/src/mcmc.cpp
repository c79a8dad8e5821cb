#include "riskmap/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "riskmap/errors.hpp"

namespace riskmap {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Consecutive failed evaluations in one block before the run is abandoned.
constexpr int kMaxNonFinite = 500;
constexpr double kInitialStepSd = 0.25;
constexpr double kChainJitterSd = 0.5;

class Posterior {
 public:
  Posterior(const ModelContext& ctx, const PriorSpec& priors)
      : ctx_(ctx), priors_(priors), layout_(ctx.regions(), ctx.days()) {}

  const LatentLayout& layout() const { return layout_; }
  const PriorSpec& priors() const { return priors_; }

  HyperParams hyper(const Eigen::VectorXd& v, const Eigen::VectorXd& x) const {
    HyperParams h = from_unconstrained(v, priors_);
    h.mu = x[LatentLayout::mu()];
    h.beta = x[LatentLayout::beta()];
    return h;
  }

  // log_joint, or -inf when the parameters fall outside a component's domain.
  double log_target(const Eigen::VectorXd& v, const Eigen::VectorXd& x) const {
    try {
      const double out = log_joint(ctx_, hyper(v, x), layout_.unpack(x), priors_);
      return std::isfinite(out) ? out : kNegInf;
    } catch (const DomainError&) {
      return kNegInf;
    } catch (const ModelSpecError&) {
      return kNegInf;
    }
  }

  GaussianApprox approximate(const Eigen::VectorXd& v, const Eigen::VectorXd& start,
                             double tolerance = 1e-10) const {
    const LatentConditional conditional(ctx_, from_unconstrained(v, priors_), priors_);
    return conditional.approximate(start, tolerance);
  }

 private:
  const ModelContext& ctx_;
  const PriorSpec& priors_;
  LatentLayout layout_;
};

void sync_fixed_effects(Eigen::VectorXd& v, const Eigen::VectorXd& x) {
  v[kMu] = x[LatentLayout::mu()];
  v[kBeta] = x[LatentLayout::beta()];
}

struct BlockAdapter {
  const HyperBlock* block = nullptr;
  Eigen::MatrixXd chol;  // proposal covariance factor (before scaling)
  double log_scale = std::log(kInitialStepSd);
  bool empirical = false;
  long window_proposed = 0;
  long window_accepted = 0;
  int windows = 0;
  int consecutive_failures = 0;
  std::vector<Eigen::VectorXd> history;

  int dim() const { return static_cast<int>(block->indices.size()); }
};

Eigen::VectorXd block_values(const Eigen::VectorXd& v, const HyperBlock& b) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(b.indices.size()));
  for (std::size_t k = 0; k < b.indices.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[b.indices[k]];
  return out;
}

// Empirical covariance of the later half of the burn-in history, so the
// transient from an overdispersed start drops out; nothing if degenerate.
std::optional<Eigen::MatrixXd> empirical_factor(const std::vector<Eigen::VectorXd>& history) {
  const auto first = history.begin() + static_cast<std::ptrdiff_t>(history.size() / 2);
  const std::size_t n = static_cast<std::size_t>(history.end() - first);
  if (n < 2) return std::nullopt;
  const Eigen::Index d = history.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (auto h = first; h != history.end(); ++h) mean += *h;
  mean /= static_cast<double>(n);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (auto h = first; h != history.end(); ++h) cov += (*h - mean) * (*h - mean).transpose();
  cov /= static_cast<double>(n - 1);
  if (!(cov.diagonal().minCoeff() > 1e-12)) return std::nullopt;
  cov.diagonal().array() += 1e-10;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) return std::nullopt;
  return Eigen::MatrixXd(llt.matrixL());
}

struct ChainResult {
  std::vector<Draw> draws;
  std::vector<BlockLedger> ledger;
  std::vector<std::string> warnings;
};

ChainResult run_chain(const Posterior& post, const McmcConfig& config, const HyperParams& init,
                      int chain) {
  Rng rng = Rng::stream(config.seed, static_cast<std::uint64_t>(chain));
  const PriorSpec& priors = post.priors();
  const LatentLayout& layout = post.layout();
  const auto& blocks = hyper_blocks();

  Eigen::VectorXd v = to_unconstrained(init, priors);
  if (chain > 0) {
    // Overdispersed starts for every chain after the first.
    for (const auto& b : blocks) {
      for (int k : b.indices) {
        const double bound = priors.support_bound;
        v[k] = std::clamp(v[k] + kChainJitterSd * rng.normal(), -bound, bound);
      }
    }
  }
  Eigen::VectorXd x = layout.pack(init.mu, init.beta,
                                  LatentState::zeros(layout.regions(), layout.days()));
  GaussianApprox approx;
  try {
    approx = post.approximate(v, x);
  } catch (const std::exception& e) {
    throw NumericalError("chain " + std::to_string(chain) + " initialization: " + e.what());
  }
  x = approx.mode();
  sync_fixed_effects(v, x);
  double log_target = post.log_target(v, x);
  if (!std::isfinite(log_target)) {
    throw NumericalError("chain " + std::to_string(chain) +
                         " initialization: log_joint is not finite at the starting point");
  }
  double log_q = approx.log_density(x);

  ChainResult result;
  std::vector<BlockAdapter> adapters(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    adapters[b].block = &blocks[b];
    adapters[b].chol = Eigen::MatrixXd::Identity(adapters[b].dim(), adapters[b].dim());
    BlockLedger ledger;
    ledger.chain = chain;
    ledger.block = blocks[b].name;
    result.ledger.push_back(ledger);
  }
  BlockLedger latent_ledger;
  latent_ledger.chain = chain;
  latent_ledger.block = "latent";
  int latent_failures = 0;

  auto accept = [&](double log_ratio) { return std::log(rng.uniform()) < log_ratio; };
  auto note_failure = [&](int& counter, const std::string& name) {
    if (++counter > kMaxNonFinite) {
      throw NumericalError("block '" + name + "' in chain " + std::to_string(chain) +
                           ": log_joint persistently non-finite");
    }
  };

  // Scale only until half of burn-in, then covariance and scale; the last
  // quarter tunes the scale against the frozen covariance.
  const int covariance_start = config.burn_in / 2;
  const int covariance_freeze = 3 * config.burn_in / 4;

  for (int it = 0; it < config.iterations; ++it) {
    const bool burning = it < config.burn_in;

    for (std::size_t b = 0; b < blocks.size(); ++b) {
      BlockAdapter& ad = adapters[b];
      BlockLedger& led = result.ledger[b];
      const auto& idx = blocks[b].indices;
      Eigen::VectorXd step(ad.dim());
      for (int k = 0; k < ad.dim(); ++k) step[k] = rng.normal();
      step = std::exp(ad.log_scale) * (ad.chol * step);
      Eigen::VectorXd v_new = v;
      for (int k = 0; k < ad.dim(); ++k) v_new[idx[static_cast<std::size_t>(k)]] += step[k];

      ++ad.window_proposed;
      (burning ? led.proposed_burn_in : led.proposed) += 1;
      if (!priors.in_support(v_new)) continue;

      bool ok = false;
      GaussianApprox approx_new;
      Eigen::VectorXd x_new;
      double lt_new = kNegInf, lq_new = 0.0;
      try {
        approx_new = post.approximate(v_new, approx.mode());
        x_new = approx_new.sample(rng);
        lq_new = approx_new.log_density(x_new);
        sync_fixed_effects(v_new, x_new);
        lt_new = post.log_target(v_new, x_new);
        ok = std::isfinite(lt_new) && std::isfinite(lq_new);
      } catch (const NumericalError&) {
      } catch (const DomainError&) {
      } catch (const ModelSpecError&) {
      }
      if (!ok) {
        note_failure(ad.consecutive_failures, blocks[b].name);
        continue;
      }
      ad.consecutive_failures = 0;
      if (accept((lt_new - lq_new) - (log_target - log_q))) {
        v = std::move(v_new);
        x = std::move(x_new);
        approx = std::move(approx_new);
        log_target = lt_new;
        log_q = lq_new;
        ++ad.window_accepted;
        (burning ? led.accepted_burn_in : led.accepted) += 1;
      }
    }

    // Latent refresh: independence proposal from the current approximation.
    {
      (burning ? latent_ledger.proposed_burn_in : latent_ledger.proposed) += 1;
      Eigen::VectorXd x_new = approx.sample(rng);
      Eigen::VectorXd v_new = v;
      sync_fixed_effects(v_new, x_new);
      const double lt_new = post.log_target(v_new, x_new);
      const double lq_new = approx.log_density(x_new);
      if (!std::isfinite(lt_new)) {
        note_failure(latent_failures, "latent");
      } else {
        latent_failures = 0;
        if (accept((lt_new - lq_new) - (log_target - log_q))) {
          v = std::move(v_new);
          x = std::move(x_new);
          log_target = lt_new;
          log_q = lq_new;
          (burning ? latent_ledger.accepted_burn_in : latent_ledger.accepted) += 1;
        }
      }
    }

    for (std::size_t b = 0; b < blocks.size(); ++b) {
      BlockAdapter& ad = adapters[b];
      if (burning) ad.history.push_back(block_values(v, *ad.block));
      if ((it + 1) % config.adapt_window != 0) continue;
      if (burning) {
        ++ad.windows;
        const double rate =
            static_cast<double>(ad.window_accepted) / static_cast<double>(ad.window_proposed);
        if (ad.window_accepted == 0) {
          std::ostringstream msg;
          msg << "chain " << chain << " block '" << ad.block->name
              << "': no acceptances in adaptation window ending at iteration " << it + 1
              << " (proposal scale collapsing)";
          result.warnings.push_back(msg.str());
        }
        const double target =
            ad.dim() > 1 ? config.target_accept : config.target_accept_scalar;
        ad.log_scale += (rate - target) * 2.0 / std::sqrt(static_cast<double>(ad.windows));
        if (it + 1 >= covariance_start && it + 1 <= covariance_freeze) {
          if (auto factor = empirical_factor(ad.history)) {
            ad.chol = *factor;
            if (!ad.empirical) {
              ad.empirical = true;
              ad.log_scale = std::log(2.38 / std::sqrt(static_cast<double>(ad.dim())));
            }
          }
          if (it + 1 + config.adapt_window > covariance_freeze) ad.windows = 0;
        }
      }
      ad.window_proposed = 0;
      ad.window_accepted = 0;
      result.ledger[b].scale_trace.push_back(std::exp(ad.log_scale));
    }

    if (!burning && (it - config.burn_in) % config.thin == 0) {
      Draw d;
      d.chain = chain;
      d.iteration = it;
      d.hyper = post.hyper(v, x);
      d.latent = layout.unpack(x);
      result.draws.push_back(std::move(d));
    }
  }
  result.ledger.push_back(latent_ledger);
  return result;
}

}  // namespace

void McmcConfig::validate() const {
  if (chains < 1) throw ConfigError("mcmc: chains must be at least 1");
  if (burn_in < 0) throw ConfigError("mcmc: burn_in must be nonnegative");
  if (iterations <= burn_in) throw ConfigError("mcmc: iterations must exceed burn_in");
  if (thin < 1) throw ConfigError("mcmc: thin must be at least 1");
  if ((iterations - burn_in) % thin != 0) {
    throw ConfigError("mcmc: iterations - burn_in must be a multiple of thin");
  }
  if (adapt_window < 1) throw ConfigError("mcmc: adapt_window must be at least 1");
  for (double a : {target_accept, target_accept_scalar}) {
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("mcmc: target acceptance must lie in (0, 1)");
  }
}

std::vector<double> PosteriorSamples::hyper_values(int k, int chain) const {
  std::vector<double> out;
  out.reserve(draws.size());
  for (const Draw& d : draws) {
    if (chain >= 0 && d.chain != chain) continue;
    out.push_back(d.hyper.to_array()[static_cast<std::size_t>(k)]);
  }
  return out;
}

std::vector<std::vector<double>> PosteriorSamples::hyper_by_chain(int k) const {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(std::max(chains, 0)));
  for (const Draw& d : draws) {
    if (d.chain < 0) continue;
    if (static_cast<std::size_t>(d.chain) >= out.size()) out.resize(static_cast<std::size_t>(d.chain) + 1);
    out[static_cast<std::size_t>(d.chain)].push_back(d.hyper.to_array()[static_cast<std::size_t>(k)]);
  }
  return out;
}

const std::vector<HyperBlock>& hyper_blocks() {
  static const std::vector<HyperBlock> blocks = {
      {"observation", {kPhi, kAlpha}},
      {"temporal", {kTauDelta, kTauEps, kPsi1, kPsi2}},
      {"spatial", {kTauZeta, kOmega, kTauXi, kPhiBym}},
      // Overdispersion trades off against the day effects; moving both
      // together lets a chain leave a poor local mode.
      {"observation+temporal", {kPhi, kAlpha, kTauDelta, kTauEps, kPsi1, kPsi2}},
  };
  return blocks;
}

ModeResult find_mode(const ModelContext& ctx, const PriorSpec& priors, const HyperParams& init,
                     int max_sweeps) {
  priors.validate();
  const Posterior post(ctx, priors);
  const LatentLayout& layout = post.layout();
  Eigen::VectorXd v = to_unconstrained(init, priors);
  Eigen::VectorXd x =
      layout.pack(init.mu, init.beta, LatentState::zeros(ctx.regions(), ctx.days()));

  ModeResult out;
  double current = post.log_target(v, x);
  if (!std::isfinite(current)) {
    throw NumericalError("find_mode: log_joint is not finite at the initial values");
  }
  out.trace.push_back(current);

  // Profile objective: the latent field (with mu and beta) sits at its
  // conditional mode, solved tightly so that finite differences see a smooth
  // surface.
  constexpr double kProfileTolerance = 1e-15;
  auto profile = [&](const Eigen::VectorXd& w, const Eigen::VectorXd& start, Eigen::VectorXd* mode) {
    if (!priors.in_support(w)) return kNegInf;
    try {
      Eigen::VectorXd xm = post.approximate(w, start, kProfileTolerance).mode();
      Eigen::VectorXd wm = w;
      sync_fixed_effects(wm, xm);
      const double f = post.log_target(wm, xm);
      if (mode) *mode = std::move(xm);
      return f;
    } catch (const NumericalError&) {
      return kNegInf;
    } catch (const DomainError&) {
      return kNegInf;
    }
  };

  {
    Eigen::VectorXd xm;
    const double f = profile(v, x, &xm);
    if (f > current) {
      x = xm;
      sync_fixed_effects(v, x);
      current = f;
      out.trace.push_back(current);
    }
  }

  const std::vector<int> optimized = {kPhi, kAlpha, kPsi1, kPsi2, kOmega, kPhiBym};
  const double bound = priors.support_bound;
  // Difference step sized for profile values that carry ~1e-10 of rounding
  // when a field's precision is large.
  const double h = 1e-3;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    out.sweeps = sweep + 1;
    auto f_at = [&](const Eigen::VectorXd& w) { return profile(w, x, nullptr); };

    // Coordinates pressed against the support bound stay there unless the
    // objective rises when stepping back inside.
    std::vector<int> free;
    for (int k : optimized) {
      if (std::abs(v[k]) + h <= bound) {
        free.push_back(k);
        continue;
      }
      Eigen::VectorXd w = v;
      w[k] = std::copysign(bound - 2.0 * h, v[k]);
      Eigen::VectorXd xm;
      const double f = profile(w, x, &xm);
      if (f > current) {
        v = w;
        x = xm;
        sync_fixed_effects(v, x);
        current = f;
        out.trace.push_back(current);
        free.push_back(k);
      }
    }
    const int d = static_cast<int>(free.size());
    if (d == 0) break;

    Eigen::VectorXd g(d);
    Eigen::MatrixXd H(d, d);
    auto shifted = [&](int a, double da, int b, double db) {
      Eigen::VectorXd w = v;
      w[free[static_cast<std::size_t>(a)]] += da;
      w[free[static_cast<std::size_t>(b)]] += db;
      return f_at(w);
    };
    for (int a = 0; a < d; ++a) {
      const double fp = shifted(a, h, a, 0.0);
      const double fm = shifted(a, -h, a, 0.0);
      g[a] = (fp - fm) / (2.0 * h);
      H(a, a) = (fp - 2.0 * current + fm) / (h * h);
      for (int b = 0; b < a; ++b) {
        H(a, b) = H(b, a) = (shifted(a, h, b, h) - shifted(a, h, b, -h) - shifted(a, -h, b, h) +
                             shifted(a, -h, b, -h)) /
                            (4.0 * h * h);
      }
    }
    if (!g.allFinite() || !H.allFinite()) {
      throw NumericalError("find_mode: non-finite derivative of the profile objective");
    }

    // Newton step in the eigenbasis of the Hessian with curvature magnitudes
    // floored at kMinCurvature (transformed-scale sd 10); convex directions
    // are climbed with |curvature|. Directions flatter than the floor cannot
    // be located to double precision, so they only need to stop sloping.
    constexpr double kMinCurvature = 1e-2;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(-H);
    const Eigen::VectorXd projected = eig.eigenvectors().transpose() * g;
    Eigen::VectorXd scaled(d);
    double identified = 0.0, flat = 0.0;
    for (int a = 0; a < d; ++a) {
      const double c = std::abs(eig.eigenvalues()[a]);
      scaled[a] = projected[a] / std::max(c, kMinCurvature);
      (c >= kMinCurvature ? identified : flat) += projected[a] * scaled[a];
    }
    const double scale = 1.0 + std::abs(current);
    if (identified <= 1e-14 * scale && flat <= 1e-8 * scale) break;
    Eigen::VectorXd step = eig.eigenvectors() * scaled;
    const double longest = step.cwiseAbs().maxCoeff();
    if (longest > 2.0) step *= 2.0 / longest;

    double f_new = kNegInf;
    Eigen::VectorXd v_new, x_new;
    for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
      v_new = v;
      for (int a = 0; a < d; ++a) {
        const int k = free[static_cast<std::size_t>(a)];
        v_new[k] = std::clamp(v[k] + step[a], -bound, bound);
      }
      f_new = profile(v_new, x, &x_new);
      if (f_new > current) break;
    }
    if (!(f_new > current)) break;
    v = v_new;
    x = x_new;
    sync_fixed_effects(v, x);
    current = f_new;
    out.trace.push_back(current);
  }
  out.hyper = post.hyper(v, x);
  out.latent = layout.unpack(x);
  out.log_joint = current;
  return out;
}

ModeResult find_mode(const CountPanel& panel, const RegionTable& regions,
                     const PriorSpec& priors, const HyperParams& init,
                     const ModelOptions& options) {
  const ModelContext ctx(panel, regions, options);
  return find_mode(ctx, priors, init);
}

PosteriorSamples run_mcmc(const ModelContext& ctx, const PriorSpec& priors,
                          const McmcConfig& config) {
  config.validate();
  priors.validate();
  const Posterior post(ctx, priors);
  HyperParams init = initial_hyperparams(priors);
  if (config.init_from_mode) init = find_mode(ctx, priors, init).hyper;

  PosteriorSamples out;
  out.chains = config.chains;
  out.regions = ctx.regions();
  out.days = ctx.days();
  out.seed = config.seed;
  for (int c = 0; c < config.chains; ++c) {
    ChainResult chain = run_chain(post, config, init, c);
    for (auto& d : chain.draws) out.draws.push_back(std::move(d));
    for (auto& l : chain.ledger) out.ledger.push_back(std::move(l));
    for (auto& w : chain.warnings) out.warnings.push_back(std::move(w));
  }
  return out;
}

PosteriorSamples run_mcmc(const CountPanel& panel, const RegionTable& regions,
                          const PriorSpec& priors, const McmcConfig& config,
                          const ModelOptions& options) {
  const ModelContext ctx(panel, regions, options);
  return run_mcmc(ctx, priors, config);
}

}  // namespace riskmap
