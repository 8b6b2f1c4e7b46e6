#include "dfm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace dfm {

double bessel_i(int b, double z) {
  if (b < 0) throw InputError("bessel_i: order must be nonnegative");
  if (!(z >= 0.0)) throw InputError("bessel_i: argument must be nonnegative");
  if (z == 0.0) return b == 0 ? 1.0 : 0.0;

  const double half = 0.5 * z;
  double term = 1.0;  // (z/2)^b / b!
  for (int i = 1; i <= b; ++i) term *= half / i;
  if (term == 0.0) return 0.0;  // high order underflows the whole series

  double sum = term;
  const double quarter_sq = half * half;
  for (int n = 1; n <= 500; ++n) {
    term *= quarter_sq / (static_cast<double>(n) * (n + b));
    sum += term;
    if (term < 1e-16 * sum) break;
  }
  return sum;
}

double wrapped_skellam(std::int64_t a, double t, int m) {
  if (m < 2) throw InputError("wrapped_skellam: m must be >= 2");
  if (!(t >= 0.0 && t <= 2.0)) throw InputError("wrapped_skellam: t outside [0, 2]");
  int r = static_cast<int>(((a % m) + m) % m);
  // the wrapped orders {|a+km|} and {|m-a+km|} are the same multiset; folding
  // to the smaller residue makes the symmetry p(a) = p(m-a) bitwise
  r = std::min(r, m - r);
  const double decay = std::exp(-t);

  double sum = decay * bessel_i(r, t);
  for (int k = 1; k <= 64; ++k) {
    // band k covers net displacements r + km and r - km
    const double band =
        decay * (bessel_i(r + k * m, t) + bessel_i(k * m - r, t));
    sum += band;
    if (band < 1e-18 * sum) break;
  }
  return sum;
}

Eigen::VectorXd nnrw_kernel_1d(int m, double t) {
  Eigen::VectorXd w(m);
  for (int a = 0; a < m; ++a) w[a] = wrapped_skellam(a, t, m);
  return w;
}

double urw_alpha(double t, int m) {
  const double decay = std::exp(-t);
  return (1.0 - decay) / (1.0 + (m - 1) * decay);
}

double generator_rate(const Dynamics& dyn, StateIndex x, StateIndex y) {
  const LatticeSpec& spec = dyn.spec();
  const int m = spec.m();
  if (x >= spec.state_count() || y >= spec.state_count()) {
    throw InputError("generator_rate: state index outside lattice");
  }
  if (dyn.kind() == DynamicsKind::kNearestNeighbor) {
    if (x == y) return -static_cast<double>(spec.d());
    // exactly one axis may differ, by +-1 mod m; count matching operators
    int diff_axes = 0;
    int multiplicity = 0;
    for (int i = 0; i < spec.d(); ++i) {
      const int a = static_cast<int>(x % m);
      const int b = static_cast<int>(y % m);
      x /= m;
      y /= m;
      if (a == b) continue;
      ++diff_axes;
      const int delta = ((b - a) % m + m) % m;
      multiplicity = (delta == 1) + (delta == m - 1);
    }
    if (diff_axes != 1) return 0.0;
    return 0.5 * multiplicity;
  }
  if (x == y) return -static_cast<double>(spec.d()) * (m - 1) / m;
  return hamming(x, y, spec) == 1 ? 1.0 / m : 0.0;
}

Eigen::MatrixXd generator_matrix(const Dynamics& dyn) {
  const StateIndex s = dyn.spec().state_count();
  if (s > kMaxExactStates) throw CapacityError("generator_matrix: state count exceeds dense capacity");
  const auto n = static_cast<Eigen::Index>(s);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  const JumpTable jumps(dyn.kind(), dyn.spec());
  const double rate = dyn.jump_rate();
  for (StateIndex x = 0; x < s; ++x) {
    double total = 0.0;
    for (int j = 0; j < jumps.op_count(); ++j) {
      const StateIndex y = jumps.target(x, j);
      q(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) += rate;
      total += rate;
    }
    q(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x)) = -total;
  }
  return q;
}

namespace {

double nnrw_prob(const LatticeSpec& spec, double t, StateIndex x, StateIndex y) {
  const int m = spec.m();
  double p = 1.0;
  for (int i = 0; i < spec.d(); ++i) {
    const auto a = static_cast<std::int64_t>(y % m) - static_cast<std::int64_t>(x % m);
    p *= wrapped_skellam(a, t, m);
    x /= m;
    y /= m;
  }
  return p;
}

double urw_prob(const LatticeSpec& spec, double t, StateIndex x, StateIndex y) {
  const int m = spec.m();
  const double decay = std::exp(-t);
  const double prefactor = (1.0 + (m - 1) * decay) / m;
  const double alpha = urw_alpha(t, m);
  const int dist = hamming(x, y, spec);
  double p = 1.0;
  for (int i = 0; i < spec.d(); ++i) p *= prefactor;
  for (int i = 0; i < dist; ++i) p *= alpha;
  return p;
}

}  // namespace

double transition_prob_unchecked(const Dynamics& dyn, double t, StateIndex x, StateIndex y) {
  if (!(t >= 0.0)) throw InputError("transition_prob: duration must be nonnegative");
  if (dyn.kind() == DynamicsKind::kNearestNeighbor) {
    // Skellam arguments stay within the series domain; beyond t = 2 the NNRW
    // tables are never needed (URW covers the stationary-limit checks).
    return nnrw_prob(dyn.spec(), t, x, y);
  }
  return urw_prob(dyn.spec(), t, x, y);
}

double transition_prob(const Dynamics& dyn, double t, StateIndex x, StateIndex y) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw InputError("transition_prob: duration " + std::to_string(t) + " outside [0, 1]");
  }
  return transition_prob_unchecked(dyn, t, x, y);
}

Eigen::MatrixXd kernel_matrix(const Dynamics& dyn, double t) {
  const LatticeSpec& spec = dyn.spec();
  const StateIndex s = spec.state_count();
  if (s > kMaxExactStates) throw CapacityError("kernel_matrix: state count exceeds dense capacity");
  const auto n = static_cast<Eigen::Index>(s);
  Eigen::MatrixXd k(n, n);
  if (dyn.kind() == DynamicsKind::kNearestNeighbor) {
    const Eigen::VectorXd w = nnrw_kernel_1d(spec.m(), t);
    for (StateIndex x = 0; x < s; ++x) {
      for (StateIndex y = 0; y < s; ++y) {
        double p = 1.0;
        StateIndex xa = x, ya = y;
        for (int i = 0; i < spec.d(); ++i) {
          const int a = static_cast<int>(((ya % spec.m()) + spec.m() - (xa % spec.m())) % spec.m());
          p *= w[a];
          xa /= spec.m();
          ya /= spec.m();
        }
        k(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = p;
      }
    }
  } else {
    for (StateIndex x = 0; x < s; ++x) {
      for (StateIndex y = 0; y < s; ++y) {
        k(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = urw_prob(spec, t, x, y);
      }
    }
  }
  return k;
}

double kolmogorov_residual(const Dynamics& dyn, double t, StateIndex x) {
  constexpr double kStep = 1e-5;
  const StateIndex s = dyn.spec().state_count();
  const Eigen::MatrixXd q = generator_matrix(dyn);

  Eigen::VectorXd row_lo(static_cast<Eigen::Index>(s));
  Eigen::VectorXd row_mid(static_cast<Eigen::Index>(s));
  Eigen::VectorXd row_hi(static_cast<Eigen::Index>(s));
  for (StateIndex y = 0; y < s; ++y) {
    const auto yi = static_cast<Eigen::Index>(y);
    row_lo[yi] = transition_prob_unchecked(dyn, t - kStep, x, y);
    row_mid[yi] = transition_prob_unchecked(dyn, t, x, y);
    row_hi[yi] = transition_prob_unchecked(dyn, t + kStep, x, y);
  }
  const Eigen::VectorXd ddt = (row_hi - row_lo) / (2.0 * kStep);
  const Eigen::VectorXd flow = q.transpose() * row_mid;  // sum_z p_t(z|x) q(z, y)
  return (ddt - flow).cwiseAbs().maxCoeff();
}

std::int64_t time_key(double t) {
  std::int64_t key = 0;
  static_assert(sizeof(key) == sizeof(t));
  std::memcpy(&key, &t, sizeof(key));
  return key;
}

std::shared_ptr<const Eigen::MatrixXd> KernelCache::table(double t) const {
  const std::int64_t key = time_key(t);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = tables_.find(key);
    if (it != tables_.end()) return it->second;
  }
  auto fresh = std::make_shared<const Eigen::MatrixXd>(kernel_matrix(dyn_, t));
  std::lock_guard<std::mutex> lock(mutex_);
  auto [it, inserted] = tables_.emplace(key, std::move(fresh));
  return it->second;
}

}  // namespace dfm
