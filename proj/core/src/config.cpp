#include "dfm/config.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace dfm {

using nlohmann::json;

namespace {

std::vector<double> read_double_list(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) {
    throw InputError("config: sweep." + field + " must be a nonempty array");
  }
  std::vector<double> out;
  out.reserve(j.size());
  for (const json& v : j) {
    if (!v.is_number()) throw InputError("config: sweep." + field + " entries must be numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw InputError("config: not valid JSON");
  if (!j.is_object()) throw InputError("config: top level must be an object");

  ExperimentConfig cfg;
  const auto require = [&](const char* field) -> const json& {
    if (!j.contains(field)) throw InputError(std::string("config: missing field \"") + field + "\"");
    return j.at(field);
  };

  const std::string dyn = require("dynamics").get<std::string>();
  if (dyn == "nnrw") {
    cfg.dynamics = DynamicsKind::kNearestNeighbor;
  } else if (dyn == "urw") {
    cfg.dynamics = DynamicsKind::kUniform;
  } else {
    throw InputError("config: dynamics must be \"nnrw\" or \"urw\", got \"" + dyn + "\"");
  }

  cfg.m = require("m").get<int>();
  cfg.d = require("d").get<int>();
  const LatticeSpec spec(cfg.m, cfg.d);  // validates m, d and overflow
  if (spec.state_count() > kMaxExactStates) {
    throw InputError("config: m^d = " + std::to_string(spec.state_count()) +
                     " exceeds the exact-mode capacity " + std::to_string(kMaxExactStates));
  }

  const json& coupling = require("coupling");
  if (coupling.contains("m") && coupling.at("m").get<int>() != cfg.m) {
    throw InputError("config: coupling.m disagrees with config m");
  }
  if (coupling.contains("d") && coupling.at("d").get<int>() != cfg.d) {
    throw InputError("config: coupling.d disagrees with config d");
  }
  cfg.coupling_json = coupling.dump();

  cfg.h = require("h").get<double>();
  if (!(cfg.h > 0.0 && cfg.h < 1.0)) throw InputError("config: h must lie in (0, 1)");
  cfg.eta = require("eta").get<double>();
  if (!(cfg.eta >= 1e-3 && cfg.eta < 0.5)) {
    throw InputError("config: eta must lie in [1e-3, 0.5)");
  }

  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.paths = j.value("paths", std::uint64_t{0});
  cfg.dump_events = j.value("dump_events", false);

  const std::string score = j.value("score", std::string("exact"));
  if (score == "exact") {
    cfg.score = ScoreVariant::kExact;
  } else if (score.rfind("tabular:", 0) == 0) {
    cfg.score = ScoreVariant::kTabular;
    cfg.tabular_path = score.substr(8);
    if (cfg.tabular_path.empty()) throw InputError("config: tabular score needs a path");
  } else if (score.rfind("perturbed:", 0) == 0) {
    cfg.score = ScoreVariant::kPerturbed;
    try {
      cfg.gamma = std::stod(score.substr(10));
    } catch (const std::exception&) {
      throw InputError("config: perturbed score needs a numeric gamma");
    }
    if (!(cfg.gamma >= 0.0)) throw InputError("config: perturbed gamma must be >= 0");
  } else {
    throw InputError("config: score must be exact | tabular:<path> | perturbed:<gamma>");
  }

  if (j.contains("sweep")) {
    const json& sw = j.at("sweep");
    if (!sw.is_object()) throw InputError("config: sweep must be an object");
    SweepLists lists;
    lists.h = sw.contains("h") ? read_double_list(sw.at("h"), "h") : std::vector<double>{cfg.h};
    lists.eta =
        sw.contains("eta") ? read_double_list(sw.at("eta"), "eta") : std::vector<double>{cfg.eta};
    lists.gamma = sw.contains("gamma") ? read_double_list(sw.at("gamma"), "gamma")
                                       : std::vector<double>{0.0};
    for (const double hv : lists.h) {
      if (!(hv > 0.0 && hv < 1.0)) throw InputError("config: sweep.h entries must lie in (0, 1)");
    }
    for (const double ev : lists.eta) {
      if (!(ev >= 1e-3 && ev < 0.5)) {
        throw InputError("config: sweep.eta entries must lie in [1e-3, 0.5)");
      }
    }
    for (const double gv : lists.gamma) {
      if (!(gv >= 0.0)) throw InputError("config: sweep.gamma entries must be >= 0");
    }
    cfg.sweep = std::move(lists);
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config: cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

Coupling ExperimentConfig::make_coupling() const {
  return Coupling::from_inline_json_text(coupling_json, lattice());
}

}  // namespace dfm
