// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "riskmap/diagnostics.hpp"
#include "riskmap/errors.hpp"
#include "riskmap/forecast.hpp"
#include "riskmap/io.hpp"
#include "riskmap/simulate.hpp"
#include "riskmap/summary.hpp"

using namespace riskmap;
namespace fs = std::filesystem;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------------------
// Independent closed forms

double gp_log_pmf_oracle(Count y, double lambda, double phi, double alpha) {
  const double s = phi * std::pow(lambda, alpha - 1.0);
  const double omega = lambda / (1.0 + s);
  const double psi = s / (1.0 + s);
  const double yd = static_cast<double>(y);
  return std::log(omega) + (yd - 1.0) * std::log(omega + psi * yd) - omega - psi * yd -
         std::lgamma(yd + 1.0);
}

double dense_gaussian(const Eigen::VectorXd& x, const Eigen::MatrixXd& cov) {
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + ldlt.vectorD().array().log().sum() +
                 x.dot(ldlt.solve(x)));
}

// Yule-Walker autocovariances solved as a linear system.
Eigen::MatrixXd ar2_dense_covariance(int T, double psi1, double psi2, double tau) {
  const double a1 = psi1 * (1.0 - psi2), a2 = psi2;
  Eigen::Matrix3d A;
  A << 1.0, -a1, -a2, -a1, 1.0 - a2, 0.0, -a2, -a1, 1.0;
  const Eigen::Vector3d g = A.fullPivLu().solve(Eigen::Vector3d(1.0 / tau, 0.0, 0.0));
  std::vector<double> gamma = {g[0], g[1]};
  for (int k = 2; k < T; ++k) gamma.push_back(a1 * gamma[k - 1] + a2 * gamma[k - 2]);
  Eigen::MatrixXd S(T, T);
  for (int i = 0; i < T; ++i) {
    for (int j = 0; j < T; ++j) S(i, j) = gamma[static_cast<std::size_t>(std::abs(i - j))];
  }
  return S;
}

Eigen::MatrixXd centroid_distances(const std::vector<Region>& regs) {
  const int m = static_cast<int>(regs.size());
  Eigen::MatrixXd C(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) C(i, j) = std::hypot(regs[i].x - regs[j].x, regs[i].y - regs[j].y);
  }
  return C;
}

double dense_log_joint(const HyperParams& h, const LatentState& s, const CountPanel& panel,
                       const std::vector<Region>& regs, const PriorSpec& priors) {
  const int m = panel.regions();
  const int T = panel.days();
  double pop = 0.0;
  for (const Region& r : regs) pop += r.population;
  const double rate = static_cast<double>(panel.counts.sum()) / pop / T;
  Eigen::VectorXd dens(m);
  for (int i = 0; i < m; ++i) dens[i] = regs[i].population / regs[i].area;
  const double mean = dens.mean();
  dens = (dens.array() - mean) / std::sqrt((dens.array() - mean).square().sum() / m);

  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int t = 0; t < T; ++t) {
      const double lambda = regs[i].population * rate *
                            std::exp(h.mu + h.beta * dens[i] + s.delta[t] + s.eps[t] + s.zeta[i] + s.xi[i]);
      total += gp_log_pmf_oracle(panel.counts(i, t), lambda, h.phi, h.alpha);
    }
  }
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(T - 2, T);
  for (int r = 0; r < T - 2; ++r) D.row(r).segment(r, 3) << 1.0, -2.0, 1.0;
  total += -0.5 * ((T - 2) * (kLog2Pi - std::log(h.tau_delta)) + h.tau_delta * (D * s.delta).squaredNorm());
  total += dense_gaussian(s.eps, ar2_dense_covariance(T, h.psi1, h.psi2, h.tau_eps));

  const Eigen::MatrixXd C = centroid_distances(regs);
  const double emax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(C).eigenvalues().maxCoeff();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
  total += dense_gaussian(s.zeta, (h.tau_zeta * (I - (h.omega / emax) * C)).inverse());

  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    for (const auto& n : regs[i].neighbors) {
      int j = 0;
      while (regs[j].id != n) ++j;
      Q(i, j) = -1.0;
      Q(i, i) += 1.0;
    }
  }
  const Eigen::MatrixXd J = Eigen::MatrixXd::Constant(m, m, 1.0 / m);
  const Eigen::MatrixXd G = (Q + J).inverse() - J;
  double lg = 0.0;
  for (int i = 0; i < m; ++i) lg += std::log(G(i, i));
  const Eigen::MatrixXd Gs = G / std::exp(lg / m);
  total += dense_gaussian(s.xi, (h.phi_bym * I + (1.0 - h.phi_bym) * Gs) / h.tau_xi);

  total += log_prior(to_unconstrained(h, priors), priors);
  total -= 0.5 * 1e6 * (std::pow(s.delta.sum(), 2) + std::pow(s.zeta.sum(), 2) + std::pow(s.xi.sum(), 2));
  return total;
}

Region region(std::string id, double population, double area, double x, double y,
              std::vector<std::string> neighbors) {
  Region r;
  r.id = id;
  r.name = id;
  r.population = population;
  r.area = area;
  r.x = x;
  r.y = y;
  r.neighbors = std::move(neighbors);
  return r;
}

CountPanel panel_of(const CountMatrix& y) {
  CountPanel p;
  for (int t = 0; t < y.cols(); ++t) p.dates.push_back(Date::from_ymd(2020, 4, 1) + t);
  p.counts = y;
  return p;
}

Draw make_draw(const HyperParams& h, const LatentState& s) {
  Draw d;
  d.hyper = h;
  d.latent = s;
  return d;
}

PosteriorSamples samples_of(std::vector<Draw> draws, int m, int T) {
  PosteriorSamples out;
  out.chains = 1;
  out.regions = m;
  out.days = T;
  out.draws = std::move(draws);
  return out;
}

// ---------------------------------------------------------------------------

Outcome criterion_gp() {
  Outcome o;
  double worst_mass = 0.0;
  for (double lambda : {0.5, 5.0, 50.0}) {
    for (double phi : {0.0, 0.5, 1.2}) {
      for (double alpha : {1.0, 1.5, 2.0}) {
        const GpParams p{phi, alpha};
        const Count stop = gp_truncation_point(lambda, p, 1e-12);
        double acc = 0.0;
        for (Count y = 0; y <= stop; ++y) acc += gp_pmf(y, lambda, p);
        worst_mass = std::max(worst_mass, std::abs(acc - 1.0));
      }
    }
  }
  o.require(worst_mass <= 1e-8, "normalization off by " + fmt("%.2e", worst_mass));

  double worst_poisson = 0.0;
  for (double lambda : {0.5, 5.0, 50.0}) {
    for (Count y = 0; y <= 120; ++y) {
      const double poisson = -lambda + y * std::log(lambda) - std::lgamma(y + 1.0);
      for (double alpha : {1.0, 1.5, 2.0}) {
        worst_poisson = std::max(worst_poisson, std::abs(gp_log_pmf(y, lambda, {0.0, alpha}) - poisson));
      }
    }
  }
  o.require(worst_poisson <= 1e-12, "Poisson limit off by " + fmt("%.2e", worst_poisson));

  double worst_moment = 0.0;
  struct Case {
    double lambda;
    GpParams p;
  };
  for (const Case& c : {Case{4.0, {0.0, 1.0}}, Case{5.0, {0.6, 1.5}}, Case{2.0, {0.5, 2.0}},
                        Case{30.0, {0.8, 1.4}}}) {
    Rng rng(42);
    const int n = 1000000;
    double s1 = 0.0, s2 = 0.0;
    for (int k = 0; k < n; ++k) {
      const double y = static_cast<double>(gp_sample(rng, c.lambda, c.p));
      s1 += y;
      s2 += y * y;
    }
    const double mean = s1 / n;
    const double var = s2 / n - mean * mean;
    const GpMoments m = gp_moments(c.lambda, c.p);
    worst_moment = std::max({worst_moment, std::abs(mean / m.mean - 1.0), std::abs(var / m.variance - 1.0)});
  }
  o.require(worst_moment <= 0.02, "sampler moments off by " + fmt("%.3f", worst_moment));
  o.detail = o.detail.empty() ? "mass " + fmt("%.1e", worst_mass) + ", Poisson " + fmt("%.1e", worst_poisson) +
                                    ", moments " + fmt("%.4f", worst_moment)
                              : o.detail;
  return o;
}

Outcome criterion_latent() {
  Outcome o;
  Rng rng(3);
  const int T = 50;
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(T - 2, T);
  for (int r = 0; r < T - 2; ++r) D.row(r).segment(r, 3) << 1.0, -2.0, 1.0;
  double rw2 = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd d(T);
    for (int t = 0; t < T; ++t) d[t] = rng.normal();
    rw2 = std::max(rw2, std::abs(rw2_quadratic_form(d, {T, 1.7}) + 0.5 * 1.7 * (D * d).squaredNorm()));
  }
  o.require(rw2 <= 1e-10, "RW2 off by " + fmt("%.2e", rw2));

  const Ar2Spec spec{0.632, -0.932, 3.0};
  const Eigen::MatrixXd S = ar2_dense_covariance(200, spec.psi1, spec.psi2, spec.tau_eps);
  double ar2 = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd e = sample_ar2(rng, 200, spec);
    ar2 = std::max(ar2, std::abs(ar2_log_density(e, spec) - dense_gaussian(e, S)));
  }
  o.require(ar2 <= 1e-8, "AR(2) off by " + fmt("%.2e", ar2));

  double mp = 0.0;
  for (int m : {5, 9}) {
    Adjacency adj(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
      adj[i] = {(i + 1) % m, (i + m - 1) % m};
      if (i + 2 < m) adj[i].push_back(i + 2);
      if (i >= 2) adj[i].push_back(i - 2);
    }
    const Eigen::MatrixXd Q = besag_precision(adj);
    const Eigen::MatrixXd G = generalized_inverse(Q);
    mp = std::max({mp, (Q * G * Q - Q).cwiseAbs().maxCoeff(), (G * Q * G - G).cwiseAbs().maxCoeff(),
                   (Q * G - (Q * G).transpose()).cwiseAbs().maxCoeff(),
                   (G * Q - (G * Q).transpose()).cwiseAbs().maxCoeff()});
  }
  o.require(mp <= 1e-8, "Moore-Penrose off by " + fmt("%.2e", mp));

  double inv = 0.0;
  for (double w : {0.1, 0.5, 0.95}) {
    std::vector<Region> regs;
    for (int i = 0; i < 10; ++i) regs.push_back(region("r", 1, 1, 100.0 * rng.uniform(), 100.0 * rng.uniform(), {}));
    const Eigen::MatrixXd C = centroid_distances(regs);
    const double emax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(C).eigenvalues().maxCoeff();
    const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(10, 10) - (w / emax) * C;
    const Eigen::MatrixXd Sz = distance_covariance({C, w, 3.0});
    inv = std::max(inv, (Sz * M - Eigen::MatrixXd::Identity(10, 10) / 3.0).cwiseAbs().maxCoeff());
  }
  o.require(inv <= 1e-9, "distance inverse off by " + fmt("%.2e", inv));
  if (o.pass) {
    o.detail = "RW2 " + fmt("%.1e", rw2) + ", AR(2) " + fmt("%.1e", ar2) + ", MP " + fmt("%.1e", mp) +
               ", distance " + fmt("%.1e", inv);
  }
  return o;
}

Outcome criterion_joint() {
  Outcome o;
  Rng rng(2024);
  const PriorSpec priors = PriorSpec::defaults();
  double worst = 0.0;
  const char* ids[] = {"A", "B", "C", "D"};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Region> regs;
    for (int i = 0; i < 4; ++i) {
      regs.push_back(region(ids[i], 1e5 * (1.0 + 3.0 * rng.uniform()), 50.0 + 500.0 * rng.uniform(),
                            100.0 * rng.uniform(), 100.0 * rng.uniform(), {ids[(i + 1) % 4], ids[(i + 3) % 4]}));
    }
    CountMatrix y(4, 10);
    for (Eigen::Index k = 0; k < y.size(); ++k) y.data()[k] = static_cast<Count>(40.0 * rng.uniform());
    const CountPanel panel = panel_of(y);
    HyperParams h;
    h.phi = 0.05 + rng.uniform();
    h.alpha = 1.0 + rng.uniform();
    h.mu = -1.0 + 0.5 * rng.normal();
    h.beta = 0.3 * rng.normal();
    h.tau_delta = std::exp(2.0 + rng.normal());
    h.tau_eps = std::exp(1.0 + rng.normal());
    h.psi1 = 1.6 * rng.uniform() - 0.8;
    h.psi2 = 1.6 * rng.uniform() - 0.8;
    h.tau_zeta = std::exp(1.0 + rng.normal());
    h.omega = 0.9 * rng.uniform();
    h.tau_xi = std::exp(1.0 + rng.normal());
    h.phi_bym = 0.05 + 0.9 * rng.uniform();
    LatentState s = LatentState::zeros(4, 10);
    for (int t = 0; t < 10; ++t) {
      s.delta[t] = 0.3 * rng.normal();
      s.eps[t] = 0.3 * rng.normal();
    }
    for (int i = 0; i < 4; ++i) {
      s.zeta[i] = 0.3 * rng.normal();
      s.xi[i] = 0.3 * rng.normal();
    }
    s.delta.array() -= s.delta.mean() - 1e-4 * rng.normal();
    s.zeta.array() -= s.zeta.mean();
    s.xi.array() -= s.xi.mean();
    const double fast = log_joint(h, s, panel, RegionTable(regs), priors);
    const double dense = dense_log_joint(h, s, panel, regs, priors);
    worst = std::max(worst, std::abs(fast - dense) / std::max(1.0, std::abs(dense)));
  }
  o.require(worst <= 1e-6, "relative error " + fmt("%.2e", worst));
  if (o.pass) o.detail = "100 trials, worst relative error " + fmt("%.1e", worst);
  return o;
}

// ---------------------------------------------------------------------------
// Criteria 4-6 share one batch of simulated fits.

constexpr int kReplicates = 20;
constexpr int kFitDays = 60;
constexpr int kHorizon = 4;

HyperParams recovery_truth() {
  HyperParams h;
  h.phi = 0.8;
  h.alpha = 1.4;
  h.mu = -1.0;
  h.beta = 0.3;
  h.tau_delta = 1e4;
  h.tau_eps = 20.0;
  h.psi1 = 0.6;
  h.psi2 = -0.5;
  h.tau_zeta = 10.0;
  h.omega = 0.5;
  h.tau_xi = 10.0;
  h.phi_bym = 0.5;
  return h;
}

struct Replicate {
  std::vector<SummaryRow> summary;
  double uniformity_p = 0.0;
  double identity_error = 0.0;
  Count future = 0;
  CellSummary forecast;
};

Replicate run_replicate(int r) {
  ScenarioSpec spec;
  spec.regions = grid_regions(6, 7);
  spec.days = kFitDays + kHorizon;
  spec.centre_days = kFitDays;
  spec.truth = recovery_truth();
  spec.seed = 1000 + static_cast<std::uint64_t>(r);
  const Simulation sim = simulate_panel(spec);

  CountPanel fit;
  fit.counts = sim.panel.counts.leftCols(kFitDays);
  fit.dates.assign(sim.panel.dates.begin(), sim.panel.dates.begin() + kFitDays);
  ModelOptions opt;
  opt.reference_rate = spec.reference_rate;
  const ModelContext ctx(fit, spec.regions, opt);

  McmcConfig cfg;
  cfg.chains = 4;
  cfg.seed = static_cast<std::uint64_t>(r) + 1;
  const PosteriorSamples samples = run_mcmc(ctx, PriorSpec::defaults(), cfg);

  Replicate out;
  out.summary = posterior_summary(samples);

  const CpoPit est = cpo_pit(samples, ctx);
  const std::vector<double> hist = mean_pit_histogram(est.pit, est.cpo, 20);
  out.uniformity_p = chi_square_uniformity(hist, static_cast<double>(est.pit.size())).p_value;

  // PIT(y - 1) from the same importance weights, against PIT(y) - CPO(y).
  std::vector<Eigen::MatrixXd> lambdas;
  for (const Draw& d : samples.draws) {
    lambdas.push_back(relative_risk_field(d.hyper, d.latent, ctx.density(), ctx.expected()).lambda);
  }
  for (int i = 0; i < ctx.regions(); ++i) {
    for (int t = 0; t < kFitDays; ++t) {
      const Count y = fit.counts(i, t);
      double wsum = 0.0, acc = 0.0, top = -kInf;
      std::vector<double> logw(samples.size());
      for (std::size_t d = 0; d < samples.size(); ++d) {
        logw[d] = -gp_log_pmf(y, lambdas[d](i, t), {samples.draws[d].hyper.phi, samples.draws[d].hyper.alpha});
        top = std::max(top, logw[d]);
      }
      for (std::size_t d = 0; d < samples.size(); ++d) {
        const GpParams gp{samples.draws[d].hyper.phi, samples.draws[d].hyper.alpha};
        const double w = std::exp(logw[d] - top);
        wsum += w;
        acc += w * (y > 0 ? gp_cdf(y - 1, lambdas[d](i, t), gp) : 0.0);
      }
      out.identity_error = std::max(out.identity_error, std::abs(acc / wsum - (est.pit(i, t) - est.cpo(i, t))));
    }
  }

  const ForecastResult f = predictive_counts(samples, ctx, fit.dates, kHorizon, 500 + static_cast<std::uint64_t>(r));
  out.forecast = f.country_summary[kHorizon - 1];
  out.future = sim.panel.counts.col(kFitDays + kHorizon - 1).sum();
  return out;
}

Outcome criterion_recovery(const std::vector<Replicate>& reps, double seconds) {
  Outcome o;
  const auto truth = recovery_truth().to_array();
  const int named[] = {kPhi, kAlpha, kMu, kBeta, kPsi1, kPsi2};
  std::string counts;
  for (int k : named) {
    int hits = 0;
    for (const Replicate& r : reps) {
      const SummaryRow& row = r.summary[static_cast<std::size_t>(k)];
      hits += truth[k] >= row.lower95 && truth[k] <= row.upper95;
    }
    const std::string name(kHyperNames[static_cast<std::size_t>(k)]);
    counts += (counts.empty() ? "" : " ") + name + " " + std::to_string(hits) + "/20";
    o.require(hits >= 16, name + " covered " + std::to_string(hits) + "/20");
  }
  double worst_rhat = 0.0;
  std::string worst_at;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    for (int k : {kMu, kBeta, kPhi, kAlpha}) {
      const double rhat = reps[r].summary[static_cast<std::size_t>(k)].rhat;
      if (rhat > worst_rhat) {
        worst_rhat = rhat;
        worst_at = std::string(kHyperNames[static_cast<std::size_t>(k)]) + " in fit " + std::to_string(r);
      }
    }
  }
  o.require(worst_rhat < 1.05, "split R-hat " + fmt("%.3f", worst_rhat) + " (" + worst_at + ")");
  o.require(seconds < 1800.0, "fits took " + fmt("%.0f", seconds) + " s");
  const std::string summary = counts + "; max R-hat " + fmt("%.3f", worst_rhat) + "; " + fmt("%.0f", seconds) + " s";
  o.detail = o.pass ? summary : o.detail + "; " + summary;
  return o;
}

Outcome criterion_calibration(const std::vector<Replicate>& reps) {
  Outcome o;
  int uniform = 0;
  double identity = 0.0;
  for (const Replicate& r : reps) {
    uniform += r.uniformity_p > 0.01;
    identity = std::max(identity, r.identity_error);
  }
  o.require(uniform >= 18, "uniformity not rejected in " + std::to_string(uniform) + "/20");
  o.require(identity <= 1e-12, "PIT-CPO identity off by " + fmt("%.2e", identity));

  // Three enumerable latent states with weights 1:2:3 on a 2 x 3 panel.
  Rng rng(5);
  CountMatrix y(2, 3);
  y << 12, 30, 7, 2, 9, 15;
  const RegionTable regions({region("a", 2e5, 100, 0, 0, {"b"}), region("b", 1e5, 400, 30, 15, {"a"})});
  ModelOptions opt;
  opt.reference_rate = 1e-4;
  const ModelContext ctx(panel_of(y), regions, opt);
  std::vector<HyperParams> hs(3);
  for (int k = 0; k < 3; ++k) {
    hs[k].phi = 0.1 + 0.3 * k;
    hs[k].alpha = 1.2 + 0.3 * k;
    hs[k].mu = 0.5 - 0.4 * k;
    hs[k].beta = 0.1;
  }
  std::vector<LatentState> states;
  for (int k = 0; k < 3; ++k) {
    LatentState s = LatentState::zeros(2, 3);
    for (int t = 0; t < 3; ++t) {
      s.delta[t] = 0.4 * rng.normal();
      s.eps[t] = 0.4 * rng.normal();
    }
    for (int i = 0; i < 2; ++i) {
      s.zeta[i] = 0.4 * rng.normal();
      s.xi[i] = 0.4 * rng.normal();
    }
    states.push_back(s);
  }
  std::vector<Draw> draws;
  for (int k = 0; k < 3; ++k) {
    for (int rep = 0; rep <= k; ++rep) draws.push_back(make_draw(hs[k], states[k]));
  }
  const CpoPit est = cpo_pit(samples_of(draws, 2, 3), ctx);
  double enumeration = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int t = 0; t < 3; ++t) {
      double norm = 0.0, cpo_num = 0.0, pit_num = 0.0;
      for (int k = 0; k < 3; ++k) {
        const double lambda = regions[i].population * 1e-4 *
                              std::exp(hs[k].mu + hs[k].beta * ctx.density()[i] + states[k].delta[t] +
                                       states[k].eps[t] + states[k].zeta[i] + states[k].xi[i]);
        const double p = std::exp(gp_log_pmf_oracle(y(i, t), lambda, hs[k].phi, hs[k].alpha));
        double F = 0.0;
        for (Count c = 0; c <= y(i, t); ++c) F += std::exp(gp_log_pmf_oracle(c, lambda, hs[k].phi, hs[k].alpha));
        const double loo = (k + 1) / p;
        norm += loo;
        cpo_num += loo * p;
        pit_num += loo * F;
      }
      enumeration = std::max({enumeration, std::abs(est.cpo(i, t) - cpo_num / norm),
                              std::abs(est.pit(i, t) - pit_num / norm)});
    }
  }
  o.require(enumeration <= 1e-10, "enumeration oracle off by " + fmt("%.2e", enumeration));
  if (o.pass) {
    o.detail = "uniform in " + std::to_string(uniform) + "/20; identity " + fmt("%.1e", identity) +
               "; enumeration " + fmt("%.1e", enumeration);
  }
  return o;
}

Outcome criterion_forecast(const std::vector<Replicate>& reps) {
  Outcome o;
  int covered = 0;
  for (const Replicate& r : reps) {
    const double v = static_cast<double>(r.future);
    covered += v >= r.forecast.lower95 && v <= r.forecast.upper95;
  }
  o.require(covered >= 17, "day-4 aggregate covered " + std::to_string(covered) + "/20");

  HyperParams h = recovery_truth();
  h.tau_delta = kInf;
  LatentState s = LatentState::zeros(2, 6);
  s.delta << 0.1, -0.2, 0.4, 0.05, 0.3, 0.7;
  Rng rng(1);
  const LatentState e = extend_latent(h, s, 6, rng);
  double linear = 0.0;
  for (int j = 1; j <= 6; ++j) linear = std::max(linear, std::abs(e.delta[5 + j] - (0.7 + 0.4 * j)));
  o.require(linear <= 1e-12, "zero-innovation extension off by " + fmt("%.2e", linear));
  if (o.pass) o.detail = "covered " + std::to_string(covered) + "/20; linear extension " + fmt("%.1e", linear);
  return o;
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string first_line(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  return line;
}

Outcome criterion_end_to_end() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  const fs::path root = fs::temp_directory_path() / "riskmap_acceptance_toy";
  fs::remove_all(root);
  const std::string config = std::string(RISKMAP_DATA_DIR) + "/toy/config.txt";
  for (const char* run : {"a", "b"}) {
    for (const char* cmd : {"fit", "diagnose", "forecast", "report"}) {
      const std::string line = std::string(RISKMAP_CLI_PATH) + " " + cmd + " --config " + config +
                               " --output_dir " + (root / run).string() + " > /dev/null 2>&1";
      const int status = std::system(line.c_str());
      if (status == -1 || WEXITSTATUS(status) != 0) {
        o.require(false, std::string(cmd) + " exited with " + std::to_string(WEXITSTATUS(status)));
        return o;
      }
    }
  }
  const char* artifacts[] = {"samples.csv",  "summary.csv", "acceptance.csv",   "calibration.csv",
                             "pit_histogram.csv", "forecast.csv", "trend.csv", "spatial.csv",
                             "country_series.csv"};
  for (const char* name : artifacts) {
    o.require(fs::exists(root / "a" / name), std::string(name) + " missing");
    o.require(slurp(root / "a" / name) == slurp(root / "b" / name), std::string(name) + " differs between runs");
  }
  const std::pair<const char*, const char*> headers[] = {
      {"summary.csv", "parameter,mean,lower95,upper95,rhat"},
      {"trend.csv", "date,delta_mean,delta_lower95,delta_upper95,rr_mean,rr_lower95,rr_upper95"},
      {"spatial.csv", "region_id,name,zeta_mean,zeta_lower95,zeta_upper95,xi_mean,xi_lower95,xi_upper95"},
      {"country_series.csv", "date,kind,observed,mean,lower95,upper95"},
      {"pit_histogram.csv", "bin,lower,upper,height"}};
  for (const auto& [name, header] : headers) {
    o.require(first_line(root / "a" / name) == header, std::string(name) + " header");
  }
  std::vector<std::string> names;
  for (const CsvRow& row : read_csv((root / "a" / "summary.csv").string()).rows) names.push_back(row.fields[0]);
  std::vector<std::string> want(kHyperNames.begin(), kHyperNames.end());
  o.require(names == want, "summary rows");
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.require(seconds < 300.0, "took " + fmt("%.0f", seconds) + " s");
  if (o.pass) o.detail = "two runs byte-identical, 9 artifacts; " + fmt("%.0f", seconds) + " s";
  return o;
}

Outcome criterion_ingestion() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / "riskmap_acceptance_ingest";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream(dir / name, std::ios::binary) << text;
    return (dir / name).string();
  };
  const std::string regions_path = write("regions.csv",
                                         "id,name,population,area_km2,centroid_x,centroid_y\n"
                                         "A,Alpha,1000,10,0,0\n"
                                         "CE,Ceuta,300,20,10,0\n"
                                         "ME,Melilla,700,60,20,0\n");
  const std::string adjacency_path = write("adj.csv", "A,CE\nCE,ME\n");
  const RegionTable plain = load_regions(regions_path, adjacency_path);

  const LoadedCounts diffed = load_counts(write("c1.csv",
                                                "date,region_id,value\n"
                                                "2020-03-01,A,0\n2020-03-02,A,3\n2020-03-03,A,3\n2020-03-04,A,10\n"
                                                "2020-03-01,CE,5\n2020-03-02,CE,4\n2020-03-03,CE,4\n2020-03-04,CE,4\n"
                                                "2020-03-01,ME,0\n2020-03-02,ME,0\n2020-03-03,ME,0\n2020-03-04,ME,0\n"),
                                          CountMode::Cumulative, plain);
  o.require(diffed.panel.counts.row(0) == (Eigen::RowVector<Count, 3>() << 3, 0, 7).finished(),
            "cumulative (0,3,3,10) did not become (3,0,7)");
  o.require(diffed.panel.counts(1, 0) == 0 && diffed.clamped == 1 && diffed.warnings.size() == 1,
            "correction (5,4) not clamped with one warning");

  const MergePlan plan = load_merge(write("merge.csv",
                                          "target_id,target_name,source_id\n"
                                          "CM,Ceuta y Melilla,CE\nCM,Ceuta y Melilla,ME\n"));
  const RegionTable merged = load_regions(regions_path, adjacency_path, plan);
  const auto cm = merged.index_of("CM");
  o.require(merged.size() == 2 && cm.has_value(), "merge did not produce two regions");
  if (cm) {
    o.require(merged[*cm].population == 1000.0 && merged[*cm].area == 80.0, "merge sums");
    o.require(merged[*cm].neighbors == std::vector<std::string>{"A"}, "merge neighbours");
  }

  ScenarioSpec spec;
  spec.regions = grid_regions(7, 5);
  spec.days = 30;
  spec.truth = recovery_truth();
  spec.truth.tau_delta = 1e3;
  spec.seed = 8;
  const Simulation sim = simulate_panel(spec);
  write_regions((dir / "sim_regions.csv").string(), spec.regions);
  write_adjacency((dir / "sim_adj.csv").string(), spec.regions);
  const RegionTable back = load_regions((dir / "sim_regions.csv").string(), (dir / "sim_adj.csv").string());
  bool same_regions = back.size() == spec.regions.size();
  for (int i = 0; same_regions && i < back.size(); ++i) {
    same_regions = back[i].id == spec.regions[i].id && back[i].population == spec.regions[i].population &&
                   back[i].area == spec.regions[i].area && back[i].x == spec.regions[i].x &&
                   back[i].y == spec.regions[i].y && back[i].neighbors == spec.regions[i].neighbors;
  }
  o.require(same_regions, "region round trip");
  for (CountMode mode : {CountMode::Daily, CountMode::Cumulative}) {
    write_counts((dir / "sim_counts.csv").string(), sim.panel, spec.regions, mode);
    const LoadedCounts c = load_counts((dir / "sim_counts.csv").string(), mode, back);
    o.require(c.panel.counts == sim.panel.counts && c.panel.dates == sim.panel.dates,
              mode == CountMode::Daily ? "daily round trip" : "cumulative round trip");
  }
  if (o.pass) o.detail = "differencing, clamp, merge, round trips exact";
  return o;
}

Outcome guarded(const std::function<Outcome()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, std::string("threw: ") + e.what()};
  }
}

void report(int n, const char* name, const Outcome& o, bool& all) {
  std::printf("criterion %d (%s): %s  %s\n", n, name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
  std::fflush(stdout);
  all = all && o.pass;
}

}  // namespace

int main() {
  bool all = true;
  report(1, "generalized Poisson", guarded(criterion_gp), all);
  report(2, "latent components", guarded(criterion_latent), all);
  report(3, "joint density", guarded(criterion_joint), all);

  std::vector<Replicate> reps;
  const auto start = std::chrono::steady_clock::now();
  std::string batch_error;
  try {
    for (int r = 0; r < kReplicates; ++r) reps.push_back(run_replicate(r));
  } catch (const std::exception& e) {
    batch_error = std::string("threw: ") + e.what();
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (batch_error.empty()) {
    report(4, "posterior recovery", guarded([&] { return criterion_recovery(reps, seconds); }), all);
    report(5, "calibration", guarded([&] { return criterion_calibration(reps); }), all);
    report(6, "forecasting", guarded([&] { return criterion_forecast(reps); }), all);
  } else {
    for (int n : {4, 5, 6}) report(n, "simulated fits", {false, batch_error}, all);
  }

  report(7, "end to end", guarded(criterion_end_to_end), all);
  report(8, "ingestion", guarded(criterion_ingestion), all);
  return all ? 0 : 1;
}
