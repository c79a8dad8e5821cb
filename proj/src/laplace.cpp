#include "riskmap/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "riskmap/errors.hpp"

namespace riskmap {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Eigen::LLT<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd& H) {
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() == Eigen::Success) return llt;
  const double base = std::max(1e-300, H.diagonal().cwiseAbs().maxCoeff());
  for (double ridge = 1e-12; ridge < 1.0; ridge *= 10.0) {
    Eigen::MatrixXd J = H;
    J.diagonal().array() += ridge * base;
    llt.compute(J);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw NumericalError("latent Gaussian approximation: precision matrix is not positive definite");
}

void add_block(Eigen::MatrixXd& Q, int offset, const Eigen::MatrixXd& block) {
  Q.block(offset, offset, block.rows(), block.cols()) += block;
}

}  // namespace

Eigen::VectorXd LatentLayout::pack(double mu, double beta, const LatentState& s) const {
  if (s.delta.size() != T_ || s.eps.size() != T_ || s.zeta.size() != m_ || s.xi.size() != m_) {
    throw ContractError("latent layout: state dimensions do not match");
  }
  Eigen::VectorXd x(size());
  x[this->mu()] = mu;
  x[this->beta()] = beta;
  x.segment(delta(), T_) = s.delta;
  x.segment(eps(), T_) = s.eps;
  x.segment(zeta(), m_) = s.zeta;
  x.segment(xi(), m_) = s.xi;
  return x;
}

LatentState LatentLayout::unpack(const Eigen::VectorXd& x) const {
  if (x.size() != size()) throw ContractError("latent layout: vector has the wrong length");
  return {x.segment(delta(), T_), x.segment(eps(), T_), x.segment(zeta(), m_),
          x.segment(xi(), m_)};
}

GaussianApprox::GaussianApprox(Eigen::VectorXd mode, const Eigen::MatrixXd& precision,
                               int newton_steps)
    : mode_(std::move(mode)), newton_steps_(newton_steps) {
  const auto llt = robust_cholesky(precision);
  chol_ = llt.matrixL();
  half_log_det_ = chol_.diagonal().array().log().sum();
}

double GaussianApprox::log_density(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd z = chol_.transpose().triangularView<Eigen::Upper>() * (x - mode_);
  return -0.5 * static_cast<double>(mode_.size()) * kLog2Pi + half_log_det_ - 0.5 * z.squaredNorm();
}

Eigen::VectorXd GaussianApprox::sample(Rng& rng) const {
  Eigen::VectorXd z(mode_.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = rng.normal();
  chol_.transpose().triangularView<Eigen::Upper>().solveInPlace(z);
  return mode_ + z;
}

Eigen::VectorXd GaussianApprox::marginal_sd() const {
  const Eigen::Index n = mode_.size();
  Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(n, n);
  chol_.triangularView<Eigen::Lower>().solveInPlace(inv);
  return inv.colwise().squaredNorm().transpose().cwiseSqrt();
}

LatentConditional::LatentConditional(const ModelContext& ctx, const HyperParams& h,
                                     const PriorSpec& priors)
    : ctx_(ctx), layout_(ctx.regions(), ctx.days()), gp_{h.phi, h.alpha} {
  validate(h);
  validate(gp_);
  const int m = ctx.regions();
  const int T = ctx.days();
  const int n = layout_.size();
  prior_precision_ = Eigen::MatrixXd::Zero(n, n);
  prior_mean_ = Eigen::VectorXd::Zero(n);
  prior_precision_(LatentLayout::mu(), LatentLayout::mu()) = 1.0 / priors.entries[kMu].variance;
  prior_precision_(LatentLayout::beta(), LatentLayout::beta()) = 1.0 / priors.entries[kBeta].variance;
  prior_mean_[LatentLayout::mu()] = priors.entries[kMu].mean;
  prior_mean_[LatentLayout::beta()] = priors.entries[kBeta].mean;

  add_block(prior_precision_, layout_.delta(), h.tau_delta * rw2_structure(T));
  add_block(prior_precision_, layout_.eps(), ar2_precision(T, {h.psi1, h.psi2, h.tau_eps}));
  add_block(prior_precision_, layout_.zeta(), ctx.distance_field().precision(h.omega, h.tau_zeta));
  add_block(prior_precision_, layout_.xi(), ctx.bym_field().precision(h.phi_bym, h.tau_xi));
  // The sum-to-zero penalty stays out of prior_precision_: folded in as a
  // dense kappa * 11' block, Q x cancels terms of size kappa and the value
  // loses about eight digits.
  kappa_ = ctx.options().sum_to_zero ? ctx.options().sum_to_zero_precision : 0.0;
  prior_curvature_ = prior_precision_;
  if (kappa_ > 0.0) {
    add_block(prior_curvature_, layout_.delta(), Eigen::MatrixXd::Constant(T, T, kappa_));
    add_block(prior_curvature_, layout_.zeta(), Eigen::MatrixXd::Constant(m, m, kappa_));
    add_block(prior_curvature_, layout_.xi(), Eigen::MatrixXd::Constant(m, m, kappa_));
  }
  log_expected_ = ctx.expected().col(0).array().log();
}

LatentConditional::Evaluation LatentConditional::evaluate(const Eigen::VectorXd& x,
                                                          bool want_derivatives) const {
  const int m = layout_.regions();
  const int T = layout_.days();
  const Eigen::VectorXd centred = x - prior_mean_;
  const Eigen::VectorXd q_centred = prior_precision_ * centred;
  const double sum_delta = x.segment(layout_.delta(), T).sum();
  const double sum_zeta = x.segment(layout_.zeta(), m).sum();
  const double sum_xi = x.segment(layout_.xi(), m).sum();
  Evaluation out{-0.5 * centred.dot(q_centred) -
                     0.5 * kappa_ * (sum_delta * sum_delta + sum_zeta * sum_zeta + sum_xi * sum_xi),
                 Eigen::VectorXd(), Eigen::MatrixXd()};
  if (want_derivatives) {
    out.gradient = -q_centred;
    out.gradient.segment(layout_.delta(), T).array() -= kappa_ * sum_delta;
    out.gradient.segment(layout_.zeta(), m).array() -= kappa_ * sum_zeta;
    out.gradient.segment(layout_.xi(), m).array() -= kappa_ * sum_xi;
    out.curvature = prior_curvature_;
  }
  const Eigen::VectorXd& d = ctx_.density();
  const double mu = x[LatentLayout::mu()];
  const double beta = x[LatentLayout::beta()];
  for (int i = 0; i < m; ++i) {
    const double spatial = mu + beta * d[i] + x[layout_.zeta() + i] + x[layout_.xi() + i];
    for (int t = 0; t < T; ++t) {
      double eta = spatial + x[layout_.delta() + t] + x[layout_.eps() + t];
      const bool clamped = std::abs(eta) > kLinearPredictorClamp;
      if (clamped) eta = std::clamp(eta, -kLinearPredictorClamp, kLinearPredictorClamp);
      const double lambda = std::exp(log_expected_[i] + eta);
      const auto derivs =
          gp_log_pmf_derivs(ctx_.counts()(i, t), lambda, gp_, ctx_.log_factorials()(i, t));
      out.value += derivs.value;
      if (!want_derivatives || clamped) continue;
      const int idx[6] = {LatentLayout::mu(), LatentLayout::beta(), layout_.delta() + t,
                          layout_.eps() + t,  layout_.zeta() + i,   layout_.xi() + i};
      const double coef[6] = {1.0, d[i], 1.0, 1.0, 1.0, 1.0};
      const double w = std::max(-derivs.d2, 0.0);
      for (int a = 0; a < 6; ++a) {
        out.gradient[idx[a]] += derivs.d1 * coef[a];
        if (w == 0.0) continue;
        for (int b = 0; b < 6; ++b) out.curvature(idx[a], idx[b]) += w * coef[a] * coef[b];
      }
    }
  }
  return out;
}

double LatentConditional::value(const Eigen::VectorXd& x) const { return evaluate(x, false).value; }

Eigen::VectorXd LatentConditional::gradient(const Eigen::VectorXd& x) const {
  return evaluate(x, true).gradient;
}

GaussianApprox LatentConditional::approximate(const Eigen::VectorXd& start, double tolerance,
                                              int max_steps) const {
  if (start.size() != layout_.size()) throw ContractError("latent start has the wrong length");
  Eigen::VectorXd x = start;
  Evaluation ev = evaluate(x, true);
  if (!std::isfinite(ev.value)) {
    throw NumericalError("latent Gaussian approximation: non-finite objective at start");
  }
  int steps = 0;
  for (; steps < max_steps; ++steps) {
    const auto llt = robust_cholesky(ev.curvature);
    const Eigen::VectorXd direction = llt.solve(ev.gradient);
    const double decrement = ev.gradient.dot(direction);
    if (!(decrement > tolerance * (1.0 + std::abs(ev.value)))) break;
    double t = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 50; ++halving, t *= 0.5) {
      const Eigen::VectorXd trial = x + t * direction;
      const double v = evaluate(trial, false).value;
      // A full step that ties to rounding is taken: near the mode the
      // quadratic model is exact while the objective no longer resolves it.
      const double rounding = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(ev.value));
      if (std::isfinite(v) && (v > ev.value || (halving == 0 && v >= ev.value - rounding))) {
        x = trial;
        moved = true;
        break;
      }
    }
    if (!moved) break;
    ev = evaluate(x, true);
  }
  if (!x.allFinite() || !std::isfinite(ev.value)) {
    throw NumericalError("latent Gaussian approximation: diverged");
  }
  return GaussianApprox(std::move(x), ev.curvature, steps);
}

}  // namespace riskmap
