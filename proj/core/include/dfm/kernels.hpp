#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "dfm/lattice.hpp"

namespace dfm {

/// A base random-walk dynamics on Z_m^d: NNRW (rate 1/2 per jump operator)
/// or URW (rate 1/m per jump operator).
class Dynamics {
 public:
  Dynamics(DynamicsKind kind, LatticeSpec spec) : kind_(kind), spec_(spec) {}

  DynamicsKind kind() const { return kind_; }
  const LatticeSpec& spec() const { return spec_; }
  /// The fixed per-operator jump rate lambda(m).
  double jump_rate() const {
    return kind_ == DynamicsKind::kNearestNeighbor ? 0.5 : 1.0 / spec_.m();
  }
  std::vector<JumpOp> jump_ops() const { return jump_family(kind_, spec_); }

 private:
  DynamicsKind kind_;
  LatticeSpec spec_;
};

/// Modified Bessel function of the first kind, integer order b >= 0, by power
/// series: I_b(z) = sum_n (z/2)^(2n+b) / (n! (n+b)!).  Intended for z in
/// [0, 2] (durations never exceed 1; kept with margin); absolute error below
/// 1e-15 there.  Terms stop once below 1e-16 of the running sum, capped at
/// 500 terms.
double bessel_i(int b, double z);

/// Torus-wrapped Skellam pmf: sum_k exp(-t) I_{|a+km|}(t).  The wraparound
/// sum stops once a band contributes less than 1e-18 of the running total;
/// the bands decay super-geometrically in |k| m.
double wrapped_skellam(std::int64_t a, double t, int m);

/// One-dimensional NNRW kernel by displacement: entry a = wrapped_skellam(a, t, m).
Eigen::VectorXd nnrw_kernel_1d(int m, double t);

/// URW closed-form ingredients: alpha_t = (1-e^-t) / (1+(m-1)e^-t).
double urw_alpha(double t, int m);

/// Generator entry q(x, y).  Off-diagonal entries accumulate operator
/// multiplicity (for m = 2 the NNRW forward and backward jumps share a
/// target, so q(x, y) = 1 there), which is what makes rows sum to zero and
/// matches the Skellam transition law.
double generator_rate(const Dynamics& dyn, StateIndex x, StateIndex y);

/// Dense S x S generator; throws CapacityError above kMaxExactStates.
Eigen::MatrixXd generator_matrix(const Dynamics& dyn);

/// Transition probability p_{s+t|s}(y|x) for duration t in [0, 1]
/// (InputError outside).  NNRW: product of wrapped Skellam marginals.
/// URW: ((1+(m-1)e^-t)/m)^d * alpha_t^{d_H(x,y)}.
double transition_prob(const Dynamics& dyn, double t, StateIndex x, StateIndex y);

/// Same value without the [0, 1] duration guard; valid for any t >= 0
/// (stationary-limit checks use large t).
double transition_prob_unchecked(const Dynamics& dyn, double t, StateIndex x, StateIndex y);

/// Dense S x S kernel for duration t >= 0.
Eigen::MatrixXd kernel_matrix(const Dynamics& dyn, double t);

/// max_y | d/dt p_t(y|x) - sum_z p_t(z|x) q(z,y) |, the Kolmogorov forward
/// defect, with a central finite difference of step 1e-5.
double kolmogorov_residual(const Dynamics& dyn, double t, StateIndex x);

/// Immutable dense kernel tables memoized per exact duration.  Table
/// construction is single-writer; returned tables are shared and read-only.
class KernelCache {
 public:
  explicit KernelCache(const Dynamics& dyn) : dyn_(dyn) {}

  std::shared_ptr<const Eigen::MatrixXd> table(double t) const;
  const Dynamics& dynamics() const { return dyn_; }

 private:
  Dynamics dyn_;
  mutable std::mutex mutex_;
  mutable std::map<std::int64_t, std::shared_ptr<const Eigen::MatrixXd>> tables_;
};

/// Cache key shared by every time-indexed memo table.  Keys are the exact
/// bit pattern of t: grid revisits pass identical doubles, and distinct
/// times never alias (a quantized key can serve a matrix built for a
/// slightly different time, which is visible at score-singularity scales).
std::int64_t time_key(double t);

}  // namespace dfm
