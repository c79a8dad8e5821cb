#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "riskmap/dates.hpp"
#include "riskmap/gp_distribution.hpp"
#include "riskmap/latent_components.hpp"
#include "riskmap/model_types.hpp"
#include "riskmap/priors.hpp"

namespace riskmap {

using CountMatrix = Eigen::Matrix<Count, Eigen::Dynamic, Eigen::Dynamic>;

struct Region {
  std::string id;
  std::string name;
  double population = 0.0;  // persons
  double area = 0.0;        // km^2
  double x = 0.0;           // centroid, planar coordinates
  double y = 0.0;
  std::vector<std::string> neighbors;
};

class RegionTable {
 public:
  RegionTable() = default;
  // Validates: unique ids, positive population and area, known and
  // symmetric neighbours, no self-neighbours.
  explicit RegionTable(std::vector<Region> regions);

  int size() const { return static_cast<int>(regions_.size()); }
  const Region& operator[](int i) const { return regions_[static_cast<std::size_t>(i)]; }
  const std::vector<Region>& regions() const { return regions_; }
  std::optional<int> index_of(const std::string& id) const;

  Adjacency adjacency() const;
  // Euclidean distances between centroids.
  Eigen::MatrixXd distance_matrix() const;
  Eigen::VectorXd populations() const;

 private:
  std::vector<Region> regions_;
};

// Daily new cases: rows follow the RegionTable order, columns the dates.
struct CountPanel {
  std::vector<Date> dates;
  CountMatrix counts;

  int regions() const { return static_cast<int>(counts.rows()); }
  int days() const { return static_cast<int>(counts.cols()); }
  // Throws ContractError on negative counts, non-consecutive dates or a
  // column count that differs from the number of dates.
  void validate() const;
};

// Country-wide homogeneous daily incidence rate:
//   (1/T) sum_t (sum_i Y_it / sum_i P_i)
double incidence_rate(const CountPanel& panel, const RegionTable& regions);

// E_it = P_i * rate for t = 1..T.
Eigen::MatrixXd expected_counts(const RegionTable& regions, double rate, int days);

// Population density standardized to mean 0 and (population) variance 1.
Eigen::VectorXd standardized_density(const RegionTable& regions);

// Linear predictor magnitude beyond which exp() is clamped.
inline constexpr double kLinearPredictorClamp = 50.0;

struct RelativeRiskField {
  Eigen::MatrixXd theta;   // m x T
  Eigen::MatrixXd lambda;  // E * theta
  int clamped_cells = 0;
};

RelativeRiskField relative_risk_field(const HyperParams& h, const LatentState& s,
                                      const Eigen::VectorXd& density,
                                      const Eigen::MatrixXd& expected);

struct ModelOptions {
  BymConvention bym_convention = BymConvention::AsPrinted;
  bool sum_to_zero = true;
  double sum_to_zero_precision = 1e6;
  // Overrides the incidence rate estimated from the panel when building the
  // expected counts.
  std::optional<double> reference_rate;
};

// Everything log_joint needs that does not depend on the parameters.
class ModelContext {
 public:
  ModelContext(const CountPanel& panel, const RegionTable& regions, ModelOptions options = {});

  int regions() const { return m_; }
  int days() const { return T_; }
  const ModelOptions& options() const { return options_; }
  const CountMatrix& counts() const { return counts_; }
  const Eigen::MatrixXd& log_factorials() const { return log_fact_; }
  double rate() const { return rate_; }
  const Eigen::MatrixXd& expected() const { return expected_; }
  const Eigen::VectorXd& density() const { return density_; }
  const DistanceGmrf& distance_field() const { return distance_; }
  const BymField& bym_field() const { return bym_; }

 private:
  int m_ = 0;
  int T_ = 0;
  ModelOptions options_;
  CountMatrix counts_;
  Eigen::MatrixXd log_fact_;
  double rate_ = 0.0;
  Eigen::MatrixXd expected_;
  Eigen::VectorXd density_;
  DistanceGmrf distance_;
  BymField bym_;
};

struct LogJointTerms {
  double observation = 0.0;
  double trend = 0.0;       // RW2
  double correlation = 0.0; // AR(2)
  double distance = 0.0;    // distance GMRF
  double neighbourhood = 0.0;  // BYM
  double prior = 0.0;       // hyperparameter priors on the transformed scale
  double penalty = 0.0;     // soft sum-to-zero constraints
  int clamped_cells = 0;

  double total() const {
    return observation + trend + correlation + distance + neighbourhood + prior + penalty;
  }
};

// Sum of the observation log-likelihood, the four latent log-densities, the
// hyperparameter log-prior and the sum-to-zero penalties. Domain errors are
// rethrown with the failing component named.
LogJointTerms log_joint_terms(const ModelContext& ctx, const HyperParams& h,
                              const LatentState& s, const PriorSpec& priors);

double log_joint(const ModelContext& ctx, const HyperParams& h, const LatentState& s,
                 const PriorSpec& priors);

double log_joint(const HyperParams& h, const LatentState& s, const CountPanel& panel,
                 const RegionTable& regions, const PriorSpec& priors,
                 const ModelOptions& options = {});

}  // namespace riskmap
