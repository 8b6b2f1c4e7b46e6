#include "dfm/lattice.hpp"

#include <limits>
#include <string>

namespace dfm {

LatticeSpec::LatticeSpec(int m, int d) : m_(m), d_(d) {
  if (m < 2) throw InputError("lattice: vocabulary size m must be >= 2, got " + std::to_string(m));
  if (d < 1) throw InputError("lattice: dimension d must be >= 1, got " + std::to_string(d));
  StateIndex s = 1;
  const StateIndex limit = std::numeric_limits<StateIndex>::max();
  for (int i = 0; i < d; ++i) {
    if (s > limit / static_cast<StateIndex>(m)) {
      throw InputError("lattice: state count m^d overflows the native unsigned integer");
    }
    s *= static_cast<StateIndex>(m);
  }
  states_ = s;
}

StateIndex encode(std::span<const int> coords, const LatticeSpec& spec) {
  if (static_cast<int>(coords.size()) != spec.d()) {
    throw InputError("encode: expected " + std::to_string(spec.d()) + " coordinates, got " +
                     std::to_string(coords.size()));
  }
  StateIndex index = 0;
  StateIndex radix = 1;
  for (int i = 0; i < spec.d(); ++i) {
    const int c = coords[i];
    if (c < 0 || c >= spec.m()) {
      throw InputError("encode: coordinate " + std::to_string(i) + " = " + std::to_string(c) +
                       " outside [0, " + std::to_string(spec.m() - 1) + "]");
    }
    index += static_cast<StateIndex>(c) * radix;
    radix *= static_cast<StateIndex>(spec.m());
  }
  return index;
}

std::vector<int> decode(StateIndex index, const LatticeSpec& spec) {
  if (index >= spec.state_count()) {
    throw InputError("decode: index " + std::to_string(index) + " outside [0, " +
                     std::to_string(spec.state_count()) + ")");
  }
  std::vector<int> coords(spec.d());
  for (int i = 0; i < spec.d(); ++i) {
    coords[i] = static_cast<int>(index % static_cast<StateIndex>(spec.m()));
    index /= static_cast<StateIndex>(spec.m());
  }
  return coords;
}

State make_state(std::span<const int> coords, const LatticeSpec& spec) {
  State s;
  s.coords.assign(coords.begin(), coords.end());
  s.index = encode(coords, spec);
  return s;
}

State state_from_index(StateIndex index, const LatticeSpec& spec) {
  State s;
  s.coords = decode(index, spec);
  s.index = index;
  return s;
}

int hamming(std::span<const int> x, std::span<const int> y) {
  if (x.size() != y.size()) throw InputError("hamming: coordinate lengths differ");
  int count = 0;
  for (std::size_t i = 0; i < x.size(); ++i) count += (x[i] != y[i]);
  return count;
}

int hamming(const State& x, const State& y) {
  return hamming(std::span<const int>(x.coords), std::span<const int>(y.coords));
}

int hamming(StateIndex x, StateIndex y, const LatticeSpec& spec) {
  int count = 0;
  for (int i = 0; i < spec.d(); ++i) {
    count += (x % spec.m() != y % spec.m());
    x /= spec.m();
    y /= spec.m();
  }
  return count;
}

int JumpOp::displacement(int m) const {
  if (family == DynamicsKind::kNearestNeighbor) return param > 0 ? 1 : m - 1;
  return param;
}

JumpOp JumpOp::inverse(int m) const {
  JumpOp inv = *this;
  if (family == DynamicsKind::kNearestNeighbor) {
    inv.param = -param;
  } else {
    inv.param = m - param;
  }
  return inv;
}

std::vector<JumpOp> jump_family(DynamicsKind kind, const LatticeSpec& spec) {
  std::vector<JumpOp> ops;
  if (kind == DynamicsKind::kNearestNeighbor) {
    ops.reserve(2 * spec.d());
    for (int axis = 0; axis < spec.d(); ++axis) {
      ops.push_back({kind, axis, +1});
      ops.push_back({kind, axis, -1});
    }
  } else {
    ops.reserve(static_cast<std::size_t>(spec.d()) * (spec.m() - 1));
    for (int axis = 0; axis < spec.d(); ++axis) {
      for (int n = 1; n < spec.m(); ++n) ops.push_back({kind, axis, n});
    }
  }
  return ops;
}

StateIndex apply_jump(StateIndex x, const JumpOp& op, const LatticeSpec& spec) {
  if (op.axis < 0 || op.axis >= spec.d()) throw InputError("apply_jump: axis outside lattice");
  const int disp = op.displacement(spec.m());
  if (disp < 1 || disp >= spec.m()) throw InputError("apply_jump: shift outside [1, m-1]");
  StateIndex radix = 1;
  for (int i = 0; i < op.axis; ++i) radix *= static_cast<StateIndex>(spec.m());
  const int digit = static_cast<int>((x / radix) % static_cast<StateIndex>(spec.m()));
  const int moved = (digit + disp) % spec.m();
  return x + (static_cast<StateIndex>(moved) - static_cast<StateIndex>(digit)) * radix;
}

JumpTable::JumpTable(DynamicsKind kind, const LatticeSpec& spec) : ops_(jump_family(kind, spec)) {
  op_count_ = static_cast<int>(ops_.size());
  const StateIndex s = spec.state_count();
  if (s > kMaxExactStates) {
    throw CapacityError("jump table: state count " + std::to_string(s) + " exceeds " +
                        std::to_string(kMaxExactStates));
  }
  targets_.resize(static_cast<std::size_t>(s) * op_count_);
  for (StateIndex x = 0; x < s; ++x) {
    for (int j = 0; j < op_count_; ++j) {
      targets_[x * op_count_ + j] = apply_jump(x, ops_[j], spec);
    }
  }
}

}  // namespace dfm
