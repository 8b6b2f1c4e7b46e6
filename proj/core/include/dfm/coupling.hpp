#pragma once

#include <Eigen/Dense>
#include <string>
#include <tuple>
#include <vector>

#include "dfm/kernels.hpp"
#include "dfm/lattice.hpp"

namespace dfm {

/// A coupling pi over Z_m^d x Z_m^d with marginals mu0 (rows) and mu1
/// (columns).  Dense S x S storage only; loading renormalizes totals within
/// 1e-6 of 1 and rejects anything further off.
class Coupling {
 public:
  static Coupling independent(const LatticeSpec& spec, Eigen::VectorXd mu0, Eigen::VectorXd mu1);
  static Coupling explicit_entries(
      const LatticeSpec& spec,
      const std::vector<std::tuple<StateIndex, StateIndex, double>>& entries);
  /// Parse the JSON coupling schema.  `json_text` must carry top-level
  /// {"m":..., "d":..., "coupling":{...}}; see also from_inline_json.
  static Coupling from_json_text(const std::string& json_text);
  static Coupling load(const std::string& path);
  /// Parse just the inner {"type": ...} object against a known lattice.
  static Coupling from_inline_json_text(const std::string& json_text, const LatticeSpec& spec);

  const LatticeSpec& spec() const { return spec_; }
  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::VectorXd& mu0() const { return mu0_; }
  const Eigen::VectorXd& mu1() const { return mu1_; }
  /// True when pi is concentrated on a single (x0, x1) pair.
  bool is_point_mass() const;

 private:
  Coupling(const LatticeSpec& spec, Eigen::MatrixXd weights);

  LatticeSpec spec_;
  Eigen::MatrixXd weights_;
  Eigen::VectorXd mu0_;
  Eigen::VectorXd mu1_;
};

/// The reweighting pi~(x0, x1) = pi(x0, x1) / p_{1|0}(x1|x0), zero exactly
/// where pi is zero.  Ties the coupling to a base dynamics.
class ReweightedCoupling {
 public:
  ReweightedCoupling(Coupling coupling, Dynamics dynamics);

  const Coupling& coupling() const { return coupling_; }
  const Dynamics& dynamics() const { return dynamics_; }
  const LatticeSpec& spec() const { return coupling_.spec(); }
  const Eigen::MatrixXd& pi_tilde() const { return pi_tilde_; }

 private:
  Coupling coupling_;
  Dynamics dynamics_;
  Eigen::MatrixXd pi_tilde_;
};

inline ReweightedCoupling reweight(Coupling coupling, const Dynamics& dynamics) {
  return ReweightedCoupling(std::move(coupling), dynamics);
}

}  // namespace dfm
