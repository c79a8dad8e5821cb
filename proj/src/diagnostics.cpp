#include "riskmap/diagnostics.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <limits>
#include <numeric>

#include "riskmap/errors.hpp"

namespace riskmap {

CpoPit cpo_pit(const PosteriorSamples& samples, const ModelContext& ctx) {
  if (samples.draws.empty()) throw ContractError("cpo/pit: no posterior draws");
  const int m = ctx.regions();
  const int T = ctx.days();
  const std::size_t n = samples.draws.size();
  for (const Draw& d : samples.draws) {
    if (d.latent.regions() != m || d.latent.days() != T) {
      throw ContractError("cpo/pit: draws do not match the panel dimensions");
    }
  }

  std::vector<Eigen::MatrixXd> lambdas;
  std::vector<GpParams> gps;
  lambdas.reserve(n);
  for (const Draw& d : samples.draws) {
    lambdas.push_back(relative_risk_field(d.hyper, d.latent, ctx.density(), ctx.expected()).lambda);
    gps.push_back({d.hyper.phi, d.hyper.alpha});
  }

  CpoPit out{Eigen::MatrixXd(m, T), Eigen::MatrixXd(m, T), Eigen::MatrixXd(m, T), {}};
  std::vector<double> neg_log_p(n), cdf(n);
  for (int i = 0; i < m; ++i) {
    for (int t = 0; t < T; ++t) {
      const Count y = ctx.counts()(i, t);
      bool underflow = false;
      for (std::size_t d = 0; d < n; ++d) {
        const double lambda = lambdas[d](i, t);
        neg_log_p[d] = -gp_log_pmf(y, lambda, gps[d]);
        cdf[d] = gp_cdf(y, lambda, gps[d]);
        if (std::isinf(neg_log_p[d])) underflow = true;
      }
      if (underflow) {
        // An infinite weight dominates: CPO is 0 and the PIT is carried by
        // the draws with zero pmf.
        double acc = 0.0;
        int k = 0;
        for (std::size_t d = 0; d < n; ++d) {
          if (std::isinf(neg_log_p[d])) {
            acc += cdf[d];
            ++k;
          }
        }
        out.cpo(i, t) = 0.0;
        out.pit(i, t) = acc / k;
        out.max_weight(i, t) = 1.0 / k;
        out.zero_pmf.emplace_back(i, t);
        continue;
      }
      const double top = *std::max_element(neg_log_p.begin(), neg_log_p.end());
      double total = 0.0;
      for (std::size_t d = 0; d < n; ++d) total += std::exp(neg_log_p[d] - top);
      const double log_total = top + std::log(total);
      double pit_acc = 0.0;
      double w_max = 0.0;
      for (std::size_t d = 0; d < n; ++d) {
        const double w = std::exp(neg_log_p[d] - log_total);
        pit_acc += w * cdf[d];
        w_max = std::max(w_max, w);
      }
      out.cpo(i, t) = std::exp(std::log(static_cast<double>(n)) - log_total);
      out.pit(i, t) = std::clamp(pit_acc, 0.0, 1.0);
      out.max_weight(i, t) = w_max;
    }
  }
  return out;
}

Eigen::MatrixXd cpo(const PosteriorSamples& samples, const ModelContext& ctx) {
  return cpo_pit(samples, ctx).cpo;
}

Eigen::MatrixXd pit(const PosteriorSamples& samples, const ModelContext& ctx) {
  return cpo_pit(samples, ctx).pit;
}

double nonrandomized_pit_cdf(double u, double pit_y, double cpo_y) {
  if (!(u >= 0.0 && u <= 1.0)) throw ContractError("nonrandomized PIT: u must lie in [0, 1]");
  if (!(cpo_y >= 0.0) || !(pit_y <= 1.0)) {
    throw ContractError("nonrandomized PIT: need 0 <= cpo and pit <= 1");
  }
  if (cpo_y > pit_y) throw ContractError("nonrandomized PIT: cpo exceeds pit");
  const double lower = pit_y - cpo_y;
  if (u <= lower) return 0.0;
  if (u >= pit_y) return 1.0;
  return (u - lower) / cpo_y;
}

std::vector<double> mean_pit_histogram(const Eigen::MatrixXd& pit, const Eigen::MatrixXd& cpo,
                                       int bins) {
  if (bins < 2) throw ContractError("PIT histogram: at least two bins are required");
  if (pit.size() == 0 || pit.rows() != cpo.rows() || pit.cols() != cpo.cols()) {
    throw ContractError("PIT histogram: empty or mismatched inputs");
  }
  const double cells = static_cast<double>(pit.size());
  auto fbar = [&](double u) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < pit.size(); ++k) {
      // Rounding in the estimators can leave cpo a hair above pit.
      const double c = std::min(cpo.data()[k], pit.data()[k]);
      acc += nonrandomized_pit_cdf(u, pit.data()[k], c);
    }
    return acc / cells;
  };
  std::vector<double> out(static_cast<std::size_t>(bins));
  double previous = fbar(0.0);
  for (int j = 1; j <= bins; ++j) {
    const double current = fbar(static_cast<double>(j) / bins);
    out[static_cast<std::size_t>(j - 1)] = current - previous;
    previous = current;
  }
  return out;
}

UniformityTest chi_square_uniformity(const std::vector<double>& heights, double n) {
  if (heights.size() < 2 || !(n > 0.0)) throw ContractError("uniformity test: bad input");
  const double expected = 1.0 / static_cast<double>(heights.size());
  UniformityTest out;
  for (double f : heights) out.statistic += (f - expected) * (f - expected) / expected;
  out.statistic *= n;
  out.degrees_of_freedom = static_cast<int>(heights.size()) - 1;
  const boost::math::chi_squared dist(out.degrees_of_freedom);
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  return out;
}

CalibrationReport calibrate(const PosteriorSamples& samples, const ModelContext& ctx, int bins) {
  CpoPit est = cpo_pit(samples, ctx);
  CalibrationReport out;
  out.histogram = mean_pit_histogram(est.pit, est.cpo, bins);
  const int m = ctx.regions();
  const int T = ctx.days();
  std::vector<Cell> cells;
  for (int i = 0; i < m; ++i) {
    for (int t = 0; t < T; ++t) {
      cells.emplace_back(i, t);
      if (est.max_weight(i, t) > 0.5) out.unreliable.emplace_back(i, t);
    }
  }
  std::stable_sort(cells.begin(), cells.end(), [&](const Cell& a, const Cell& b) {
    return est.cpo(a.first, a.second) < est.cpo(b.first, b.second);
  });
  const auto keep = static_cast<std::size_t>(std::ceil(0.01 * static_cast<double>(cells.size())));
  out.flagged.assign(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(std::max<std::size_t>(keep, 1)));
  out.zero_pmf = est.zero_pmf;
  if (!out.zero_pmf.empty()) {
    out.warnings.push_back(std::to_string(out.zero_pmf.size()) +
                           " cell(s) have a numerically zero pmf under some draw; CPO set to 0");
  }
  if (!out.unreliable.empty()) {
    out.warnings.push_back(std::to_string(out.unreliable.size()) +
                           " cell(s) have a degenerate importance weight (> 0.5)");
  }
  out.cpo = std::move(est.cpo);
  out.pit = std::move(est.pit);
  return out;
}

}  // namespace riskmap
