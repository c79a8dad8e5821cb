#include "riskmap/latent_components.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "riskmap/errors.hpp"

namespace riskmap {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)
constexpr double kRankTolerance = 1e-10;

void require_positive(double value, const char* name) {
  if (!std::isfinite(value) || value <= 0.0) {
    std::ostringstream msg;
    msg << name << " must be finite and positive, got " << value;
    throw DomainError(msg.str());
  }
}

void require_square(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw ContractError(std::string(what) + ": matrix must be square");
  }
}

bool is_symmetric(const Eigen::MatrixXd& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale;
}

}  // namespace

// ---------------------------------------------------------------------------
// RW2

double rw2_quadratic_form(const Eigen::VectorXd& delta, const Rw2Spec& spec) {
  if (spec.T < 3) throw ContractError("rw2: horizon T must be at least 3");
  if (delta.size() != spec.T) {
    throw ContractError("rw2: expected " + std::to_string(spec.T) + " values, got " +
                        std::to_string(delta.size()));
  }
  require_positive(spec.tau_delta, "rw2 precision tau_delta");
  double ss = 0.0;
  for (int t = 1; t + 1 < spec.T; ++t) {
    const double d2 = delta[t + 1] - 2.0 * delta[t] + delta[t - 1];
    ss += d2 * d2;
  }
  return -0.5 * spec.tau_delta * ss;
}

double rw2_log_density(const Eigen::VectorXd& delta, const Rw2Spec& spec) {
  const double quad = rw2_quadratic_form(delta, spec);
  const double rank = spec.T - 2;
  return quad + 0.5 * rank * (std::log(spec.tau_delta) - kLog2Pi);
}

Eigen::MatrixXd rw2_structure(int T) {
  if (T < 3) throw ContractError("rw2: horizon T must be at least 3");
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(T, T);
  const double stencil[3] = {1.0, -2.0, 1.0};
  for (int t = 1; t + 1 < T; ++t) {
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        R(t - 1 + a, t - 1 + b) += stencil[a] * stencil[b];
      }
    }
  }
  return R;
}

// ---------------------------------------------------------------------------
// AR(2)

void validate(const Ar2Spec& spec) {
  auto in_open_unit = [](double v) { return std::isfinite(v) && v > -1.0 && v < 1.0; };
  if (!in_open_unit(spec.psi1) || !in_open_unit(spec.psi2)) {
    std::ostringstream msg;
    msg << "ar2: partial autocorrelations must lie in (-1, 1), got psi1=" << spec.psi1
        << " psi2=" << spec.psi2;
    throw DomainError(msg.str());
  }
  require_positive(spec.tau_eps, "ar2 precision tau_eps");
}

Ar2Coefficients ar2_coefficients(const Ar2Spec& spec) {
  return {spec.psi1 * (1.0 - spec.psi2), spec.psi2};
}

std::vector<double> ar2_autocovariance(const Ar2Spec& spec, int max_lag) {
  validate(spec);
  const auto [a1, a2] = ar2_coefficients(spec);
  const double sigma2 = 1.0 / spec.tau_eps;
  std::vector<double> gamma(static_cast<std::size_t>(std::max(max_lag, 1)) + 1);
  gamma[0] = sigma2 * (1.0 - a2) / ((1.0 + a2) * ((1.0 - a2) * (1.0 - a2) - a1 * a1));
  gamma[1] = a1 * gamma[0] / (1.0 - a2);
  for (std::size_t k = 2; k < gamma.size(); ++k) {
    gamma[k] = a1 * gamma[k - 1] + a2 * gamma[k - 2];
  }
  gamma.resize(static_cast<std::size_t>(max_lag) + 1);
  return gamma;
}

double ar2_log_density(const Eigen::VectorXd& eps, const Ar2Spec& spec) {
  validate(spec);
  const Eigen::Index T = eps.size();
  if (T == 0) return 0.0;
  const auto gamma = ar2_autocovariance(spec, 1);
  const double g0 = gamma[0];
  if (T == 1) return -0.5 * (kLog2Pi + std::log(g0) + eps[0] * eps[0] / g0);

  const double g1 = gamma[1];
  const double det = g0 * g0 - g1 * g1;
  const double quad0 = (g0 * eps[0] * eps[0] - 2.0 * g1 * eps[0] * eps[1] + g0 * eps[1] * eps[1]) / det;
  double out = -0.5 * (2.0 * kLog2Pi + std::log(det) + quad0);

  const auto [a1, a2] = ar2_coefficients(spec);
  const double tau = spec.tau_eps;
  double ss = 0.0;
  for (Eigen::Index t = 2; t < T; ++t) {
    const double r = eps[t] - a1 * eps[t - 1] - a2 * eps[t - 2];
    ss += r * r;
  }
  out += 0.5 * static_cast<double>(T - 2) * (std::log(tau) - kLog2Pi) - 0.5 * tau * ss;
  return out;
}

Eigen::MatrixXd ar2_precision(int T, const Ar2Spec& spec) {
  validate(spec);
  if (T < 1) throw ContractError("ar2: horizon must be positive");
  const auto gamma = ar2_autocovariance(spec, 1);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(T, T);
  if (T == 1) {
    P(0, 0) = 1.0 / gamma[0];
    return P;
  }
  Eigen::Matrix2d start;
  start << gamma[0], gamma[1], gamma[1], gamma[0];
  P.topLeftCorner<2, 2>() = start.inverse();
  const auto [a1, a2] = ar2_coefficients(spec);
  const double row[3] = {-a2, -a1, 1.0};
  for (int t = 2; t < T; ++t) {
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        P(t - 2 + a, t - 2 + b) += spec.tau_eps * row[a] * row[b];
      }
    }
  }
  return P;
}

Eigen::VectorXd sample_ar2(Rng& rng, int T, const Ar2Spec& spec) {
  validate(spec);
  Eigen::VectorXd eps(T);
  if (T == 0) return eps;
  const auto gamma = ar2_autocovariance(spec, 1);
  const double g0 = gamma[0];
  const double g1 = gamma[1];
  eps[0] = std::sqrt(g0) * rng.normal();
  if (T == 1) return eps;
  const double cond_sd = std::sqrt(g0 - g1 * g1 / g0);
  eps[1] = (g1 / g0) * eps[0] + cond_sd * rng.normal();
  const auto [a1, a2] = ar2_coefficients(spec);
  const double sd = 1.0 / std::sqrt(spec.tau_eps);
  for (int t = 2; t < T; ++t) {
    eps[t] = a1 * eps[t - 1] + a2 * eps[t - 2] + sd * rng.normal();
  }
  return eps;
}

// ---------------------------------------------------------------------------
// Distance GMRF

double largest_eigenvalue(const Eigen::MatrixXd& symmetric) {
  require_square(symmetric, "largest_eigenvalue");
  if (symmetric.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetric, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().maxCoeff();
}

Eigen::MatrixXd distance_structure(const Eigen::MatrixXd& C, double omega, double e_max) {
  require_square(C, "distance GMRF");
  if (!(omega >= 0.0 && omega < 1.0)) {
    std::ostringstream msg;
    msg << "distance GMRF: omega must lie in [0, 1), got " << omega;
    throw DomainError(msg.str());
  }
  const Eigen::Index m = C.rows();
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(m, m);
  // Without any positive interconnection eigenvalue the field is i.i.d.
  if (e_max > 0.0) M -= (omega / e_max) * C;
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(M, Eigen::EigenvaluesOnly);
    std::ostringstream msg;
    msg << "distance GMRF: I - (omega/e_max) C is not positive definite at omega=" << omega
        << " (smallest eigenvalue " << solver.eigenvalues().minCoeff() << ")";
    throw ModelSpecError(msg.str());
  }
  return M;
}

Eigen::MatrixXd distance_covariance(const DistanceGmrfSpec& spec) {
  if (!is_symmetric(spec.C)) throw ContractError("distance GMRF: C must be symmetric");
  require_positive(spec.tau_zeta, "distance GMRF precision tau_zeta");
  const Eigen::MatrixXd M = distance_structure(spec.C, spec.omega, largest_eigenvalue(spec.C));
  const Eigen::Index m = M.rows();
  Eigen::MatrixXd cov = M.llt().solve(Eigen::MatrixXd::Identity(m, m)) / spec.tau_zeta;
  return 0.5 * (cov + cov.transpose());
}

DistanceGmrf::DistanceGmrf(Eigen::MatrixXd C) : C_(std::move(C)) {
  require_square(C_, "distance GMRF");
  if (!is_symmetric(C_)) throw ContractError("distance GMRF: C must be symmetric");
  e_max_ = largest_eigenvalue(C_);
}

Eigen::MatrixXd DistanceGmrf::structure(double omega) const {
  return distance_structure(C_, omega, e_max_);
}

Eigen::MatrixXd DistanceGmrf::precision(double omega, double tau) const {
  require_positive(tau, "distance GMRF precision tau_zeta");
  return tau * structure(omega);
}

Eigen::MatrixXd DistanceGmrf::covariance(double omega, double tau) const {
  return distance_covariance({C_, omega, tau});
}

double DistanceGmrf::log_density(const Eigen::VectorXd& zeta, double omega, double tau) const {
  if (zeta.size() != C_.rows()) throw ContractError("distance GMRF: dimension mismatch");
  require_positive(tau, "distance GMRF precision tau_zeta");
  const Eigen::MatrixXd M = structure(omega);
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  const double log_det_m = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double m = static_cast<double>(zeta.size());
  const double quad = zeta.dot(M * zeta);
  return 0.5 * (log_det_m + m * std::log(tau) - m * kLog2Pi - tau * quad);
}

Eigen::VectorXd DistanceGmrf::sample(Rng& rng, double omega, double tau) const {
  const Eigen::MatrixXd cov = covariance(omega, tau);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  Eigen::VectorXd z(cov.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return llt.matrixL() * z;
}

// ---------------------------------------------------------------------------
// Besag / BYM

void validate_adjacency(const Adjacency& adjacency) {
  const int m = static_cast<int>(adjacency.size());
  for (int i = 0; i < m; ++i) {
    for (int j : adjacency[static_cast<std::size_t>(i)]) {
      if (j < 0 || j >= m) {
        throw ContractError("adjacency: neighbour index " + std::to_string(j) +
                            " out of range for region " + std::to_string(i));
      }
      if (j == i) throw ContractError("adjacency: self-loop at region " + std::to_string(i));
      const auto& back = adjacency[static_cast<std::size_t>(j)];
      if (std::find(back.begin(), back.end(), i) == back.end()) {
        throw ContractError("adjacency: " + std::to_string(i) + "~" + std::to_string(j) +
                            " is not symmetric");
      }
    }
  }
}

Eigen::MatrixXd besag_precision(const Adjacency& adjacency) {
  validate_adjacency(adjacency);
  const int m = static_cast<int>(adjacency.size());
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j : adjacency[static_cast<std::size_t>(i)]) Q(i, j) = -1.0;
    Q(i, i) = -Q.row(i).sum();
  }
  return Q;
}

Eigen::MatrixXd generalized_inverse(const Eigen::MatrixXd& Q) {
  require_square(Q, "generalized_inverse");
  if (!is_symmetric(Q)) throw ContractError("generalized_inverse: matrix must be symmetric");
  if (Q.size() == 0) return Q;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(Q);
  const Eigen::VectorXd& ev = solver.eigenvalues();
  const double cutoff = kRankTolerance * ev.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (ev[k] > cutoff) inv[k] = 1.0 / ev[k];
  }
  const Eigen::MatrixXd& V = solver.eigenvectors();
  Eigen::MatrixXd out = V * inv.asDiagonal() * V.transpose();
  return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd scale_besag(const Eigen::MatrixXd& q_minus) {
  require_square(q_minus, "scale_besag");
  if (q_minus.size() == 0) return q_minus;
  double log_sum = 0.0;
  for (Eigen::Index i = 0; i < q_minus.rows(); ++i) {
    const double d = q_minus(i, i);
    if (!(d > 0.0)) {
      throw ContractError("scale_besag: diagonal entry " + std::to_string(i) +
                          " is not positive (disconnected or isolated region?)");
    }
    log_sum += std::log(d);
  }
  const double geo_mean = std::exp(log_sum / static_cast<double>(q_minus.rows()));
  return q_minus / geo_mean;
}

Eigen::MatrixXd bym_covariance(const BymSpec& spec, const Eigen::MatrixXd& q_minus,
                               BymConvention convention) {
  if (!(spec.phi_bym >= 0.0 && spec.phi_bym <= 1.0)) {
    std::ostringstream msg;
    msg << "BYM: mixing proportion must lie in [0, 1], got " << spec.phi_bym;
    throw DomainError(msg.str());
  }
  require_positive(spec.tau_xi, "BYM precision tau_xi");
  require_square(q_minus, "bym_covariance");
  const Eigen::Index m = q_minus.rows();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
  const double phi = spec.phi_bym;
  if (convention == BymConvention::AsPrinted) {
    return ((1.0 - phi) * q_minus + phi * I) / spec.tau_xi;
  }
  return ((1.0 - phi) * I + phi * q_minus) / spec.tau_xi;
}

BymField::BymField(const Adjacency& adjacency, BymConvention convention)
    : convention_(convention) {
  scaled_ = scale_besag(generalized_inverse(besag_precision(adjacency)));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(scaled_);
  basis_ = solver.eigenvectors();
  scaled_eigenvalues_ = solver.eigenvalues();
  const double cutoff = kRankTolerance * scaled_eigenvalues_.cwiseAbs().maxCoeff();
  for (Eigen::Index k = 0; k < scaled_eigenvalues_.size(); ++k) {
    if (scaled_eigenvalues_[k] < cutoff) scaled_eigenvalues_[k] = 0.0;
  }
}

Eigen::VectorXd BymField::mixture_eigenvalues(double phi_bym) const {
  if (!(phi_bym >= 0.0 && phi_bym <= 1.0)) {
    std::ostringstream msg;
    msg << "BYM: mixing proportion must lie in [0, 1], got " << phi_bym;
    throw DomainError(msg.str());
  }
  const Eigen::ArrayXd s = scaled_eigenvalues_.array();
  if (convention_ == BymConvention::AsPrinted) return (1.0 - phi_bym) * s + phi_bym;
  return (1.0 - phi_bym) + phi_bym * s;
}

Eigen::MatrixXd BymField::covariance(double phi_bym, double tau) const {
  require_positive(tau, "BYM precision tau_xi");
  const Eigen::VectorXd ev = mixture_eigenvalues(phi_bym) / tau;
  return basis_ * ev.asDiagonal() * basis_.transpose();
}

Eigen::MatrixXd BymField::precision(double phi_bym, double tau) const {
  require_positive(tau, "BYM precision tau_xi");
  const Eigen::VectorXd ev = mixture_eigenvalues(phi_bym);
  const double cutoff = kRankTolerance * ev.maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (ev[k] > cutoff) inv[k] = tau / ev[k];
  }
  return basis_ * inv.asDiagonal() * basis_.transpose();
}

double BymField::log_density(const Eigen::VectorXd& xi, double phi_bym, double tau) const {
  if (xi.size() != basis_.rows()) throw ContractError("BYM: dimension mismatch");
  require_positive(tau, "BYM precision tau_xi");
  const Eigen::VectorXd ev = mixture_eigenvalues(phi_bym);
  const double cutoff = kRankTolerance * ev.maxCoeff();
  const Eigen::VectorXd coords = basis_.transpose() * xi;
  double out = 0.0;
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (ev[k] <= cutoff) continue;
    const double var = ev[k] / tau;
    out += -0.5 * (kLog2Pi + std::log(var) + coords[k] * coords[k] / var);
  }
  return out;
}

Eigen::VectorXd BymField::sample(Rng& rng, double phi_bym, double tau) const {
  require_positive(tau, "BYM precision tau_xi");
  const Eigen::VectorXd ev = mixture_eigenvalues(phi_bym);
  Eigen::VectorXd z(ev.size());
  for (Eigen::Index k = 0; k < ev.size(); ++k) z[k] = std::sqrt(ev[k] / tau) * rng.normal();
  return basis_ * z;
}

}  // namespace riskmap
