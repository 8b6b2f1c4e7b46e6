#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dfm/errors.hpp"

namespace dfm {

using StateIndex = std::uint64_t;

/// Largest state count for which dense S x S objects are built.
inline constexpr StateIndex kMaxExactStates = 4096;

/// The torus Z_m^d.  States are integers in [0, m^d) under the little-endian
/// mixed-radix encoding: index = sum_i coords[i] * m^i, coordinate 0 least
/// significant.  This convention is normative for every file format.
class LatticeSpec {
 public:
  LatticeSpec(int m, int d);

  int m() const { return m_; }
  int d() const { return d_; }
  StateIndex state_count() const { return states_; }

  friend bool operator==(const LatticeSpec& a, const LatticeSpec& b) {
    return a.m_ == b.m_ && a.d_ == b.d_;
  }

 private:
  int m_;
  int d_;
  StateIndex states_;
};

StateIndex encode(std::span<const int> coords, const LatticeSpec& spec);
std::vector<int> decode(StateIndex index, const LatticeSpec& spec);

/// Coordinate form of a state together with its index.
struct State {
  std::vector<int> coords;
  StateIndex index = 0;
};

State make_state(std::span<const int> coords, const LatticeSpec& spec);
State state_from_index(StateIndex index, const LatticeSpec& spec);

/// Number of differing coordinates.  Throws InputError on length mismatch.
int hamming(std::span<const int> x, std::span<const int> y);
int hamming(const State& x, const State& y);
int hamming(StateIndex x, StateIndex y, const LatticeSpec& spec);

enum class DynamicsKind {
  kNearestNeighbor,  // jumps of +-1 per axis, 2d operators
  kUniform,          // jumps of n in [1, m-1] per axis, d(m-1) operators
};

/// A single jump operator sigma: modular shift on one axis.
/// NNRW operators carry param = +1 (forward) or -1 (backward); URW operators
/// carry param = n in [1, m-1].  Operators commute pairwise.
struct JumpOp {
  DynamicsKind family = DynamicsKind::kNearestNeighbor;
  int axis = 0;  // 0-based
  int param = 1;

  /// Displacement added on `axis`, reduced to [1, m-1].
  int displacement(int m) const;
  /// The inverse operator within the same family.
  JumpOp inverse(int m) const;
};

/// The full operator family in canonical op_id order:
/// NNRW: (axis 0,+), (axis 0,-), (axis 1,+), ...; URW: (axis 0, n=1..m-1), ...
std::vector<JumpOp> jump_family(DynamicsKind kind, const LatticeSpec& spec);

StateIndex apply_jump(StateIndex x, const JumpOp& op, const LatticeSpec& spec);

/// Precomputed jump targets, S x |M|, for hot loops.
class JumpTable {
 public:
  JumpTable(DynamicsKind kind, const LatticeSpec& spec);

  int op_count() const { return op_count_; }
  const std::vector<JumpOp>& ops() const { return ops_; }
  StateIndex target(StateIndex x, int op_id) const {
    return targets_[x * op_count_ + op_id];
  }

 private:
  int op_count_;
  std::vector<JumpOp> ops_;
  std::vector<StateIndex> targets_;
};

}  // namespace dfm
