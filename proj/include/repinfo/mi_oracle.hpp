#pragma once

#include "repinfo/probe.hpp"
#include "repinfo/tensor.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace repinfo {

/// A finite joint over (atom, class). Row i of `atoms` is the representation
/// value z_i; joint(i, j) = p(z_i, y_j).
struct DiscreteJointSpec {
  Matrix atoms;  // atoms x dim
  Matrix joint;  // atoms x classes

  int atom_count() const { return static_cast<int>(joint.rows()); }
  int classes() const { return static_cast<int>(joint.cols()); }
  std::vector<double> class_marginal() const;
  /// Throws InputError unless shapes agree, 1 <= atoms <= 64,
  /// 2 <= classes <= 16, entries >= 0 and the table sums to 1 within 1e-9.
  void validate() const;
};

/// I(Z;Y) in bits by summation over the table.
double exact_mutual_information(const DiscreteJointSpec& joint);

struct JointDraw {
  Matrix z;
  std::vector<int> y;
};

/// iid draws from the joint.
JointDraw sample_joint(const DiscreteJointSpec& joint, std::size_t count, std::uint64_t seed);

struct OracleResult {
  double exact_mi = 0.0;
  InfoEstimate estimate;  // h_y is the exact class-marginal entropy
};

/// Trains a probe on n_train draws and evaluates on n_test fresh draws.
/// probe_config.seed seeds both sampling and probe training.
OracleResult mi_bound_oracle(const DiscreteJointSpec& joint, const ProbeConfig& probe_config,
                             int n_train, int n_test);

enum class JointFamily { independent, deterministic, noisy_channel, dirichlet };
const char* to_string(JointFamily family);

/// Canned examples.
DiscreteJointSpec independent_joint(const Matrix& atoms, std::span<const double> p_z,
                                    std::span<const double> p_y);
/// Uniform atoms, y = labels[i] for atom i.
DiscreteJointSpec deterministic_joint(const Matrix& atoms, std::span<const int> labels, int classes);

/// Random member of `family` with Gaussian atoms of width `dim`.
DiscreteJointSpec random_joint(JointFamily family, std::uint64_t seed, int dim = 32);

struct OracleTrial {
  int index = 0;
  JointFamily family = JointFamily::independent;
  int atoms = 0;
  int classes = 0;
  double exact_mi = 0.0;
  double h_y = 0.0;
  double iu_raw = 0.0;
  bool bound_ok = false;  // iu_raw <= exact_mi + slack
  bool tight_ok = true;   // deterministic trials: iu_raw >= 0.9 exact_mi
};

struct OracleOptions {
  int trials = 20;
  std::uint64_t seed = 0;
  int n_train = 2500;
  int n_test = 10000;
  int atom_dim = 32;
  double slack_bits = 0.05;
  double tight_fraction = 0.9;
  ProbeConfig probe;
  unsigned jobs = 1;
};

struct OracleSummary {
  std::vector<OracleTrial> trials;
  bool bound_holds() const;
  bool tight_holds() const;
};

/// Trial i uses family i mod 4 in enum order.
OracleSummary run_oracle_trials(const OracleOptions& options);

}  // namespace repinfo
