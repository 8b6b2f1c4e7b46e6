#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dfm/exact_engine.hpp"

namespace dfm {

/// KL(p | q) = sum over the support of p of p log(p/q), with the conventions
/// 0 log(0/q) = 0 and KL = +infinity when p puts mass where q has none.
double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q);
double kl_divergence(const MarginalDist& p, const MarginalDist& q);

/// Total variation distance (1/2) sum |p - q|, in [0, 1].
double tv_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q);
double tv_distance(const MarginalDist& p, const MarginalDist& q);

/// Histogram of observed state indices.
struct EmpiricalDist {
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;

  static EmpiricalDist from_samples(const std::vector<StateIndex>& finals, StateIndex state_count);
  Eigen::VectorXd frequencies() const;
};

/// Pearson chi-square goodness-of-fit p-value of observed counts against the
/// given probabilities.  Cells with expected count below 5 are pooled.
double chi_square_pvalue(const EmpiricalDist& observed, const Eigen::VectorXd& probs);

/// Upper regularized incomplete gamma Q(s, x); the chi-square tail.
double regularized_gamma_q(double s, double x);

}  // namespace dfm
