#include "riskmap/priors.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "riskmap/errors.hpp"

namespace riskmap {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

}  // namespace

std::array<double, kNumHyper> HyperParams::to_array() const {
  return {phi, alpha, mu, beta, tau_delta, tau_eps, psi1, psi2, tau_zeta, omega, tau_xi, phi_bym};
}

HyperParams HyperParams::from_array(const std::array<double, kNumHyper>& v) {
  HyperParams h;
  h.phi = v[kPhi];
  h.alpha = v[kAlpha];
  h.mu = v[kMu];
  h.beta = v[kBeta];
  h.tau_delta = v[kTauDelta];
  h.tau_eps = v[kTauEps];
  h.psi1 = v[kPsi1];
  h.psi2 = v[kPsi2];
  h.tau_zeta = v[kTauZeta];
  h.omega = v[kOmega];
  h.tau_xi = v[kTauXi];
  h.phi_bym = v[kPhiBym];
  return h;
}

void validate(const HyperParams& h, bool allow_infinite_precision) {
  auto fail = [](std::string_view name, double value, const char* rule) {
    std::ostringstream msg;
    msg << "hyperparameter " << name << "=" << value << " violates " << rule;
    throw DomainError(msg.str());
  };
  const auto v = h.to_array();
  for (int k : {kPhi, kAlpha, kMu, kBeta, kPsi1, kPsi2, kOmega, kPhiBym}) {
    if (!std::isfinite(v[k])) fail(kHyperNames[k], v[k], "finiteness");
  }
  if (h.phi < 0.0) fail("phi", h.phi, "phi >= 0");
  for (int k : {kTauDelta, kTauEps, kTauZeta, kTauXi}) {
    const bool ok = v[k] > 0.0 && (std::isfinite(v[k]) || allow_infinite_precision);
    if (!ok) fail(kHyperNames[k], v[k], "tau > 0");
  }
  if (!(h.psi1 > -1.0 && h.psi1 < 1.0)) fail("psi1", h.psi1, "-1 < psi1 < 1");
  if (!(h.psi2 > -1.0 && h.psi2 < 1.0)) fail("psi2", h.psi2, "-1 < psi2 < 1");
  if (!(h.omega >= 0.0 && h.omega < 1.0)) fail("omega", h.omega, "0 <= omega < 1");
  if (!(h.phi_bym >= 0.0 && h.phi_bym <= 1.0)) fail("phi_bym", h.phi_bym, "0 <= phi_bym <= 1");
}

LatentState LatentState::zeros(int m, int T) {
  return {Eigen::VectorXd::Zero(T), Eigen::VectorXd::Zero(T), Eigen::VectorXd::Zero(m),
          Eigen::VectorXd::Zero(m)};
}

PriorSpec PriorSpec::defaults() {
  PriorSpec spec;
  auto set = [&](int k, Transform t, double mean = 0.0) { spec.entries[k] = {t, mean, 1e6}; };
  set(kPhi, Transform::Log);
  set(kAlpha, Transform::Identity, 1.5);
  set(kMu, Transform::Identity);
  set(kBeta, Transform::Identity);
  set(kTauDelta, Transform::Log);
  set(kTauEps, Transform::Log);
  set(kPsi1, Transform::Interval);
  set(kPsi2, Transform::Interval);
  set(kTauZeta, Transform::Log);
  set(kOmega, Transform::Logit);
  set(kTauXi, Transform::Log);
  set(kPhiBym, Transform::Logit);
  return spec;
}

void PriorSpec::validate() const {
  for (int k = 0; k < kNumHyper; ++k) {
    const auto& e = entries[k];
    if (!std::isfinite(e.mean) || !(e.variance > 0.0) || !std::isfinite(e.variance)) {
      throw DomainError("prior for " + std::string(kHyperNames[k]) +
                        " needs a finite mean and positive variance");
    }
  }
  if (entries[kMu].transform != Transform::Identity ||
      entries[kBeta].transform != Transform::Identity) {
    throw DomainError("mu and beta must use the identity transform");
  }
  if (!(support_bound > 0.0)) throw DomainError("prior support bound must be positive");
}

bool PriorSpec::in_support(const Eigen::VectorXd& v) const {
  for (int k = 0; k < kNumHyper; ++k) {
    if (!std::isfinite(v[k])) return false;
    if (entries[k].transform != Transform::Identity && std::abs(v[k]) > support_bound) return false;
  }
  return true;
}

double transform_forward(Transform t, double x) {
  switch (t) {
    case Transform::Identity:
      return x;
    case Transform::Log:
      if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("log transform needs x > 0");
      return std::log(x);
    case Transform::Logit:
      if (!(x > 0.0 && x < 1.0)) throw DomainError("logit transform needs 0 < x < 1");
      return std::log(x) - std::log1p(-x);
    case Transform::Interval:
      if (!(x > -1.0 && x < 1.0)) throw DomainError("interval transform needs -1 < x < 1");
      return 2.0 * std::atanh(x);
  }
  return x;
}

double transform_inverse(Transform t, double v) {
  switch (t) {
    case Transform::Identity:
      return v;
    case Transform::Log:
      return std::exp(v);
    case Transform::Logit:
      return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    case Transform::Interval:
      return std::tanh(0.5 * v);
  }
  return v;
}

Eigen::VectorXd to_unconstrained(const HyperParams& h, const PriorSpec& spec) {
  const auto x = h.to_array();
  Eigen::VectorXd v(kNumHyper);
  for (int k = 0; k < kNumHyper; ++k) {
    try {
      v[k] = transform_forward(spec.entries[k].transform, x[k]);
    } catch (const DomainError& e) {
      std::ostringstream msg;
      msg << kHyperNames[k] << "=" << x[k] << ": " << e.what();
      throw DomainError(msg.str());
    }
  }
  return v;
}

HyperParams from_unconstrained(const Eigen::VectorXd& v, const PriorSpec& spec) {
  if (v.size() != kNumHyper) throw ContractError("expected 12 transformed hyperparameters");
  std::array<double, kNumHyper> x{};
  for (int k = 0; k < kNumHyper; ++k) {
    if (!std::isfinite(v[k])) {
      throw DomainError("transformed " + std::string(kHyperNames[k]) + " is not finite");
    }
    x[k] = transform_inverse(spec.entries[k].transform, v[k]);
  }
  return HyperParams::from_array(x);
}

double log_prior(const Eigen::VectorXd& v, const PriorSpec& spec) {
  double out = 0.0;
  for (int k = 0; k < kNumHyper; ++k) {
    const auto& e = spec.entries[k];
    const double z = v[k] - e.mean;
    out += -0.5 * (kLog2Pi + std::log(e.variance) + z * z / e.variance);
  }
  return out;
}

HyperParams initial_hyperparams(const PriorSpec& spec) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(kNumHyper);
  v[kAlpha] = 1.5;
  return from_unconstrained(v, spec);
}

}  // namespace riskmap
