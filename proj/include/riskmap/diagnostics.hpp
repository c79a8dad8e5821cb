#pragma once

#include <string>
#include <utility>
#include <vector>

#include "riskmap/mcmc.hpp"

namespace riskmap {

using Cell = std::pair<int, int>;  // (region, day)

struct CalibrationReport {
  Eigen::MatrixXd cpo;  // m x T
  Eigen::MatrixXd pit;  // m x T
  std::vector<double> histogram;
  // Lowest 1% of CPO values (at least one cell), ascending CPO.
  std::vector<Cell> flagged;
  // Cells whose largest normalized importance weight exceeds 0.5.
  std::vector<Cell> unreliable;
  // Cells where the pmf underflowed to zero for some draw.
  std::vector<Cell> zero_pmf;
  std::vector<std::string> warnings;
};

// Leave-one-out estimates from full-posterior draws, importance weighted by
// w_d = 1 / p(y_it | draw d). Both matrices come from one pass.
struct CpoPit {
  Eigen::MatrixXd cpo;
  Eigen::MatrixXd pit;
  Eigen::MatrixXd max_weight;  // largest normalized weight per cell
  std::vector<Cell> zero_pmf;
};
CpoPit cpo_pit(const PosteriorSamples& samples, const ModelContext& ctx);

Eigen::MatrixXd cpo(const PosteriorSamples& samples, const ModelContext& ctx);
Eigen::MatrixXd pit(const PosteriorSamples& samples, const ModelContext& ctx);

// Piecewise-linear cdf of the nonrandomized PIT for one count: 0 up to
// pit_y - cpo_y, linear up to pit_y, 1 beyond.
double nonrandomized_pit_cdf(double u, double pit_y, double cpo_y);

// Bar heights f_j = Fbar(j/J) - Fbar((j-1)/J), Fbar the cell average of
// nonrandomized_pit_cdf.
std::vector<double> mean_pit_histogram(const Eigen::MatrixXd& pit, const Eigen::MatrixXd& cpo,
                                       int bins = 20);

struct UniformityTest {
  double statistic = 0.0;
  int degrees_of_freedom = 0;
  double p_value = 1.0;
};
// Pearson statistic n * sum_j (f_j - 1/J)^2 / (1/J) with n the number of
// cells behind the histogram.
UniformityTest chi_square_uniformity(const std::vector<double>& heights, double n);

CalibrationReport calibrate(const PosteriorSamples& samples, const ModelContext& ctx,
                            int bins = 20);

}  // namespace riskmap
