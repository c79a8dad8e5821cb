#pragma once

#include <Eigen/Dense>

#include "riskmap/risk_model.hpp"
#include "riskmap/rng.hpp"

namespace riskmap {

// Packs (mu, beta, delta, eps, zeta, xi) into one vector. mu and beta ride
// with the latent field because, like the random effects, they enter the
// linear predictor with a Gaussian prior.
class LatentLayout {
 public:
  LatentLayout(int regions, int days) : m_(regions), T_(days) {}

  int size() const { return 2 + 2 * T_ + 2 * m_; }
  int regions() const { return m_; }
  int days() const { return T_; }
  static constexpr int mu() { return 0; }
  static constexpr int beta() { return 1; }
  int delta() const { return 2; }
  int eps() const { return 2 + T_; }
  int zeta() const { return 2 + 2 * T_; }
  int xi() const { return 2 + 2 * T_ + m_; }

  Eigen::VectorXd pack(double mu, double beta, const LatentState& s) const;
  LatentState unpack(const Eigen::VectorXd& x) const;

 private:
  int m_;
  int T_;
};

// Gaussian N(mode, H^{-1}) fitted to the conditional density of the packed
// latent vector given the hyperparameters.
class GaussianApprox {
 public:
  GaussianApprox() = default;
  GaussianApprox(Eigen::VectorXd mode, const Eigen::MatrixXd& precision, int newton_steps);

  const Eigen::VectorXd& mode() const { return mode_; }
  int newton_steps() const { return newton_steps_; }
  int size() const { return static_cast<int>(mode_.size()); }

  double log_density(const Eigen::VectorXd& x) const;
  Eigen::VectorXd sample(Rng& rng) const;
  // Marginal standard deviations (diagonal of H^{-1}).
  Eigen::VectorXd marginal_sd() const;

 private:
  Eigen::VectorXd mode_;
  Eigen::MatrixXd chol_;  // lower Cholesky factor of the precision
  double half_log_det_ = 0.0;
  int newton_steps_ = 0;
};

// Conditional log-density of the packed latent vector given hyperparameters
// (mu and beta inside h are ignored): observation log-likelihood + Gaussian
// latent priors + sum-to-zero penalties. Equals log_joint up to terms that
// depend only on the hyperparameters.
class LatentConditional {
 public:
  LatentConditional(const ModelContext& ctx, const HyperParams& h, const PriorSpec& priors);

  const LatentLayout& layout() const { return layout_; }
  double value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;

  // Damped Newton ascent from `start`; stops when the Newton decrement falls
  // below tolerance * (1 + |objective|). Throws NumericalError when no finite
  // mode is reached.
  GaussianApprox approximate(const Eigen::VectorXd& start, double tolerance = 1e-10,
                             int max_steps = 200) const;

 private:
  struct Evaluation {
    double value;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd curvature;  // positive (semi)definite Newton matrix
  };
  Evaluation evaluate(const Eigen::VectorXd& x, bool want_derivatives) const;

  const ModelContext& ctx_;
  LatentLayout layout_;
  GpParams gp_;
  Eigen::MatrixXd prior_precision_;  // latent Gaussian priors
  Eigen::MatrixXd prior_curvature_;  // plus the sum-to-zero penalty
  Eigen::VectorXd prior_mean_;
  double kappa_ = 0.0;
  Eigen::VectorXd log_expected_;  // per region
};

}  // namespace riskmap
