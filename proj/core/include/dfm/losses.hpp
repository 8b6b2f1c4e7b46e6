#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dfm/exact_engine.hpp"
#include "dfm/sampler.hpp"

namespace dfm {

/// Positive score table on a grid: theta(k, x, op), parameterized through
/// exponentials of free log-rates so positivity is structural.
class TabularScore {
 public:
  TabularScore(TimeGrid grid, LatticeSpec spec, DynamicsKind kind);

  /// Snapshot of the exact score, optionally perturbed by exp(gamma * g)
  /// with frozen keyed noise.  States with zero interpolant mass at a grid
  /// point receive the neutral value 1 (no objective ever weights them).
  static TabularScore snapshot(const ScoreEngine& engine, const TimeGrid& grid, double gamma = 0.0,
                               std::uint64_t noise_seed = 0);

  const TimeGrid& grid() const { return grid_; }
  const LatticeSpec& spec() const { return spec_; }
  DynamicsKind kind() const { return kind_; }
  int op_count() const { return op_count_; }

  double value(int k, StateIndex x, int op_id) const;
  double log_value(int k, StateIndex x, int op_id) const;
  void set_value(int k, StateIndex x, int op_id, double value);
  void set_log_value(int k, StateIndex x, int op_id, double log_value);

  std::size_t parameter_count() const { return log_values_.size(); }
  std::size_t flat_index(int k, StateIndex x, int op_id) const;
  std::vector<double>& log_values() { return log_values_; }
  const std::vector<double>& log_values() const { return log_values_; }

  /// JSON round trip: {"grid":{"h":..,"eta":..},"theta":[[k,state,op,value],..]}
  std::string to_json_text() const;
  static TabularScore from_json_text(const std::string& text, const LatticeSpec& spec,
                                     DynamicsKind kind);
  void save(const std::string& path) const;
  static TabularScore load(const std::string& path, const LatticeSpec& spec, DynamicsKind kind);

 private:
  TimeGrid grid_;
  LatticeSpec spec_;
  DynamicsKind kind_;
  int op_count_;
  std::vector<double> log_values_;
};

/// ScoreModel adapter so trained tables drive the sampler.
class TabularScoreModel : public ScoreModel {
 public:
  explicit TabularScoreModel(TabularScore table) : table_(std::move(table)) {}
  double score(int k, StateIndex x, int op_id) const override {
    return table_.value(k, x, op_id);
  }
  const TabularScore& table() const { return table_; }

 private:
  TabularScore table_;
};

/// Any positive score on the grid; evaluated lazily per (k, x, op).
using ScoreFn = std::function<double(int k, StateIndex x, int op_id)>;

ScoreFn make_score_fn(const TabularScore& table);
ScoreFn make_score_fn(const ScoreModel& model);

struct LossReport {
  double l_entropy = 0.0;
  double l_two = 0.0;
  double l_total = 0.0;
  double l_tractable = 0.0;
  std::vector<double> per_interval_total;  // size K
};

/// Score-entropy objective with exact expectations:
/// sum_k h_{k+1} E[ sum_sigma q^theta phi(q^M / q^theta) ].
double loss_entropy(const ScoreFn& theta, const ScoreEngine& engine, const TimeGrid& grid);
/// Concrete score-matching objective sum_k h_{k+1} E[ sum_sigma (q^theta - q^M)^2 ].
double loss_l2(const ScoreFn& theta, const ScoreEngine& engine, const TimeGrid& grid);
/// Tractable surrogate using closed-form conditional rates q^{(x1)}; differs
/// from loss_entropy + loss_l2 by a theta-independent constant.
double loss_tractable(const ScoreFn& theta, const ScoreEngine& engine, const TimeGrid& grid);
LossReport loss_report(const ScoreFn& theta, const ScoreEngine& engine, const TimeGrid& grid);

/// epsilon~ of the approximation-error assumption: sqrt(total loss).
double epsilon_tilde(const ScoreFn& theta, const ScoreEngine& engine, const TimeGrid& grid);

/// Analytic gradient of the total loss in the free log-rate parameters:
/// d/dpsi = h_{k+1} p_{t_k}(x) (q^theta - q^M)(1 + 2 q^theta).
std::vector<double> loss_gradient(const TabularScore& theta, const ScoreEngine& engine,
                                  const TimeGrid& grid);

struct TrainRecord {
  int step = 0;
  double l_entropy = 0.0;
  double l_two = 0.0;
  double l_total = 0.0;
};

struct TrainResult {
  TabularScore theta;
  std::vector<TrainRecord> history;  // entry 0 is the initial point
};

/// Full-batch gradient descent on the total loss with halving backtracking
/// (at most 30 halvings per step); the recorded loss history is
/// non-increasing.  Stops early once the gradient sup-norm falls below 1e-12.
TrainResult train_tabular(const ScoreEngine& engine, const TimeGrid& grid, TabularScore init,
                          double learning_rate, int steps);

}  // namespace dfm
