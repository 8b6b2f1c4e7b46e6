#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <vector>

#include "dfm/exact_engine.hpp"
#include "dfm/lattice.hpp"
#include "dfm/rng.hpp"

namespace dfm {

/// The geometric discretization grid of [0, 1 - eta]:
/// t_k = 1 - (1+h)^{-k} for k < K, final point clipped to exactly 1 - eta,
/// K = ceil(log(1/eta) / log(1+h)).
struct TimeGrid {
  double h = 0.0;
  double eta = 0.0;
  int interval_count = 0;          // K
  std::vector<double> points;      // size K + 1, points[0] = 0, points[K] = 1 - eta

  double step(int k) const { return points[k + 1] - points[k]; }  // h_{k+1}
};

TimeGrid build_grid(double h, double eta);

/// A score evaluated on the grid: u_{t_k}(x, sigma(x)) by (interval index,
/// state, op id).  Implementations must be safe for concurrent readers.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;
  virtual double score(int k, StateIndex x, int op_id) const = 0;
};

/// Exact projected score, lazily tabulated per grid point.
class ExactScoreModel : public ScoreModel {
 public:
  ExactScoreModel(std::shared_ptr<const ScoreEngine> engine, TimeGrid grid);
  double score(int k, StateIndex x, int op_id) const override;

 private:
  const std::vector<double>& table(int k) const;

  std::shared_ptr<const ScoreEngine> engine_;
  TimeGrid grid_;
  int op_count_;
  mutable std::mutex mutex_;
  mutable std::vector<std::shared_ptr<const std::vector<double>>> tables_;
};

/// Exact score with a frozen multiplicative perturbation exp(gamma * g),
/// g a deterministic standard-normal table keyed by (noise_seed, k, x, op).
class PerturbedScoreModel : public ScoreModel {
 public:
  PerturbedScoreModel(std::shared_ptr<const ScoreEngine> engine, TimeGrid grid, double gamma,
                      std::uint64_t noise_seed);
  double score(int k, StateIndex x, int op_id) const override;

 private:
  ExactScoreModel exact_;
  double gamma_;
  std::uint64_t noise_seed_;
};

/// Arbitrary score function; used for test doubles and probes.
class FunctionScoreModel : public ScoreModel {
 public:
  using Fn = std::function<double(int, StateIndex, int)>;
  explicit FunctionScoreModel(Fn fn) : fn_(std::move(fn)) {}
  double score(int k, StateIndex x, int op_id) const override { return fn_(k, x, op_id); }

 private:
  Fn fn_;
};

struct JumpEvent {
  double time = 0.0;
  StateIndex from = 0;
  int op_id = 0;
  StateIndex to = 0;
};

struct PathSample {
  std::uint64_t seed = 0;     // master seed of the run
  std::uint64_t path_id = 0;  // stream id within the run
  std::vector<JumpEvent> events;
  StateIndex final_state = 0;
};

/// One DMPM trajectory.  Within [t_k, t_{k+1}) the jump rates are frozen at
/// lambda(m) u_{t_k}(X_{t_k}, sigma(X_{t_k})): each operator keeps the rate
/// computed at the interval start even after jumps move the current state.
/// Holding times are exponential via inverse CDF on the (seed, path_id)
/// counter stream, so results are reproducible for any thread count.
PathSample simulate_path(const ScoreModel& model, const TimeGrid& grid, const Dynamics& dyn,
                         StateIndex init, std::uint64_t seed, std::uint64_t path_id = 0);

/// n paths with initial states drawn from mu0 by inverse CDF (the first draw
/// of each path's stream).  Paths are split across `threads` workers.
std::vector<PathSample> sample_paths(const ScoreModel& model, const TimeGrid& grid,
                                     const Dynamics& dyn, const Eigen::VectorXd& mu0,
                                     std::size_t n, std::uint64_t seed, int threads = 1);

/// Exact time-(1.0 - eta) law of the DMPM sampler: for each interval and each
/// start state, the frozen-rate interval kernel is integrated densely (RK4 on
/// the forward equation) and the mixture over start states composed.  When
/// given, `raw_mass_defect` receives |total mass - 1| before normalization.
MarginalDist algorithm_law(const ScoreModel& model, const TimeGrid& grid, const Dynamics& dyn,
                           const Eigen::VectorXd& mu0, double* raw_mass_defect = nullptr);

}  // namespace dfm
