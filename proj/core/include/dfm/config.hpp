#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dfm/coupling.hpp"
#include "dfm/lattice.hpp"

namespace dfm {

enum class ScoreVariant { kExact, kTabular, kPerturbed };

struct SweepLists {
  std::vector<double> h;
  std::vector<double> eta;
  std::vector<double> gamma;
};

/// One experiment = one JSON file.  Coupling is inline per the coupling
/// schema (inner object; optional top-level m/d must agree).
struct ExperimentConfig {
  DynamicsKind dynamics = DynamicsKind::kUniform;
  int m = 2;
  int d = 1;
  std::string coupling_json;  // inner {"type": ...} object, as text
  double h = 0.1;
  double eta = 0.05;
  std::uint64_t seed = 0;
  std::uint64_t paths = 0;
  ScoreVariant score = ScoreVariant::kExact;
  std::string tabular_path;  // score = tabular:<path>
  double gamma = 0.0;        // score = perturbed:<gamma>
  bool dump_events = false;
  std::optional<SweepLists> sweep;

  static ExperimentConfig load(const std::string& path);
  static ExperimentConfig from_json_text(const std::string& text);

  LatticeSpec lattice() const { return LatticeSpec(m, d); }
  Dynamics make_dynamics() const { return Dynamics(dynamics, lattice()); }
  Coupling make_coupling() const;
};

}  // namespace dfm
