#include "dfm/coupling.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace dfm {

using nlohmann::json;

namespace {

constexpr double kSumTolerance = 1e-6;

Eigen::VectorXd validated_probability_vector(Eigen::VectorXd v, const std::string& field,
                                             StateIndex expected_size) {
  if (static_cast<StateIndex>(v.size()) != expected_size) {
    throw InputError("coupling: " + field + " must have m^d = " + std::to_string(expected_size) +
                     " entries, got " + std::to_string(v.size()));
  }
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0)) {
      throw InputError("coupling: " + field + "[" + std::to_string(i) + "] is negative or NaN");
    }
  }
  const double total = v.sum();
  if (total <= 0.0) throw InputError("coupling: " + field + " has zero total mass");
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw InputError("coupling: " + field + " sums to " + std::to_string(total) +
                     ", outside 1e-6 of 1");
  }
  return v / total;
}

json parse_json(const std::string& text, const std::string& origin) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw InputError(origin + ": not valid JSON");
  return j;
}

}  // namespace

Coupling::Coupling(const LatticeSpec& spec, Eigen::MatrixXd weights)
    : spec_(spec), weights_(std::move(weights)) {
  const double total = weights_.sum();
  if (total <= 0.0) throw InputError("coupling: weights have zero total mass");
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw InputError("coupling: weights sum to " + std::to_string(total) +
                     ", outside 1e-6 of 1");
  }
  weights_ /= total;
  mu0_ = weights_.rowwise().sum();
  mu1_ = weights_.colwise().sum().transpose();
}

Coupling Coupling::independent(const LatticeSpec& spec, Eigen::VectorXd mu0,
                               Eigen::VectorXd mu1) {
  const StateIndex s = spec.state_count();
  if (s > kMaxExactStates) throw CapacityError("coupling: state count exceeds dense capacity");
  Eigen::VectorXd a = validated_probability_vector(std::move(mu0), "mu0", s);
  Eigen::VectorXd b = validated_probability_vector(std::move(mu1), "mu1", s);
  return Coupling(spec, a * b.transpose());
}

Coupling Coupling::explicit_entries(
    const LatticeSpec& spec,
    const std::vector<std::tuple<StateIndex, StateIndex, double>>& entries) {
  const StateIndex s = spec.state_count();
  if (s > kMaxExactStates) throw CapacityError("coupling: state count exceeds dense capacity");
  const auto n = static_cast<Eigen::Index>(s);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  std::size_t row = 0;
  for (const auto& [x0, x1, weight] : entries) {
    if (x0 >= s || x1 >= s) {
      throw InputError("coupling: entries[" + std::to_string(row) + "] state index outside [0, " +
                       std::to_string(s) + ")");
    }
    if (!(weight >= 0.0)) {
      throw InputError("coupling: entries[" + std::to_string(row) + "] weight is negative or NaN");
    }
    // duplicate (x0, x1) pairs accumulate
    w(static_cast<Eigen::Index>(x0), static_cast<Eigen::Index>(x1)) += weight;
    ++row;
  }
  return Coupling(spec, std::move(w));
}

Coupling Coupling::from_inline_json_text(const std::string& json_text, const LatticeSpec& spec) {
  const json j = parse_json(json_text, "coupling");
  if (!j.is_object() || !j.contains("type")) {
    throw InputError("coupling: missing \"type\" field");
  }
  const std::string type = j.at("type").get<std::string>();
  if (type == "independent") {
    if (!j.contains("mu0") || !j.contains("mu1")) {
      throw InputError("coupling: independent coupling needs \"mu0\" and \"mu1\"");
    }
    const auto read_vec = [&](const char* field) {
      const json& arr = j.at(field);
      if (!arr.is_array()) throw InputError(std::string("coupling: ") + field + " must be an array");
      Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
      for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number()) {
          throw InputError(std::string("coupling: ") + field + "[" + std::to_string(i) +
                           "] is not a number");
        }
        v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
      }
      return v;
    };
    return independent(spec, read_vec("mu0"), read_vec("mu1"));
  }
  if (type == "explicit") {
    if (!j.contains("entries") || !j.at("entries").is_array()) {
      throw InputError("coupling: explicit coupling needs an \"entries\" array");
    }
    std::vector<std::tuple<StateIndex, StateIndex, double>> entries;
    std::size_t row = 0;
    for (const json& e : j.at("entries")) {
      if (!e.is_array() || e.size() != 3) {
        throw InputError("coupling: entries[" + std::to_string(row) +
                         "] must be [x0_index, x1_index, weight]");
      }
      entries.emplace_back(e[0].get<StateIndex>(), e[1].get<StateIndex>(), e[2].get<double>());
      ++row;
    }
    return explicit_entries(spec, entries);
  }
  throw InputError("coupling: unknown type \"" + type + "\" (expected independent|explicit)");
}

Coupling Coupling::from_json_text(const std::string& json_text) {
  const json j = parse_json(json_text, "coupling file");
  if (!j.contains("m") || !j.contains("d") || !j.contains("coupling")) {
    throw InputError("coupling file: requires top-level \"m\", \"d\" and \"coupling\" fields");
  }
  const LatticeSpec spec(j.at("m").get<int>(), j.at("d").get<int>());
  return from_inline_json_text(j.at("coupling").dump(), spec);
}

Coupling Coupling::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("coupling file: cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

bool Coupling::is_point_mass() const { return weights_.maxCoeff() > 1.0 - 1e-12; }

ReweightedCoupling::ReweightedCoupling(Coupling coupling, Dynamics dynamics)
    : coupling_(std::move(coupling)), dynamics_(dynamics) {
  if (!(coupling_.spec() == dynamics_.spec())) {
    throw InputError("reweight: coupling and dynamics lattice specs differ");
  }
  const Eigen::MatrixXd k1 = kernel_matrix(dynamics_, 1.0);  // p_{1|0}, strictly positive
  const Eigen::MatrixXd& pi = coupling_.weights();
  pi_tilde_ = Eigen::MatrixXd::Zero(pi.rows(), pi.cols());
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    for (Eigen::Index j = 0; j < pi.cols(); ++j) {
      if (pi(i, j) > 0.0) pi_tilde_(i, j) = pi(i, j) / k1(i, j);
    }
  }
}

}  // namespace dfm
