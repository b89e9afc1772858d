#include "repinfo/errors.hpp"
#include "repinfo/mi_oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace repinfo;

namespace {

// Reference MI via H(Y) - H(Y|Z), computed independently of the library.
double reference_mi(const Matrix& joint) {
  double h_y = 0.0, h_y_given_z = 0.0;
  for (Eigen::Index j = 0; j < joint.cols(); ++j) {
    const double p = joint.col(j).sum();
    if (p > 0) h_y -= p * std::log2(p);
  }
  for (Eigen::Index i = 0; i < joint.rows(); ++i) {
    const double pz = joint.row(i).sum();
    for (Eigen::Index j = 0; j < joint.cols(); ++j) {
      const double p = joint(i, j);
      if (p > 0) h_y_given_z -= p * std::log2(p / pz);
    }
  }
  return h_y - h_y_given_z;
}

Matrix atoms(int k, int dim = 4) {
  Rng rng(k);
  std::normal_distribution<double> normal;
  Matrix a(k, dim);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  return a;
}

ProbeConfig quick_probe() {
  ProbeConfig c;
  c.epochs = 20;
  c.learning_rate = 0.1;
  return c;
}

}  // namespace

TEST(ExactMi, IndependentIsZero) {
  const std::vector<double> pz{0.2, 0.3, 0.5}, py{0.6, 0.4};
  const DiscreteJointSpec j = independent_joint(atoms(3), pz, py);
  EXPECT_NEAR(exact_mutual_information(j), 0.0, 1e-12);
  const auto marginal = j.class_marginal();
  EXPECT_NEAR(marginal[0], 0.6, 1e-15);
}

TEST(ExactMi, DeterministicEqualsLabelEntropy) {
  const std::vector<int> labels{0, 1, 2, 3, 0, 1, 2, 3};
  EXPECT_NEAR(exact_mutual_information(deterministic_joint(atoms(8), labels, 4)), 2.0, 1e-12);
  const std::vector<int> uneven{0, 0, 0, 1};
  EXPECT_NEAR(exact_mutual_information(deterministic_joint(atoms(4), uneven, 2)),
              -(0.75 * std::log2(0.75) + 0.25 * std::log2(0.25)), 1e-12);
}

TEST(ExactMi, BinarySymmetricChannel) {
  DiscreteJointSpec j;
  j.atoms = atoms(2);
  j.joint.resize(2, 2);
  j.joint << 0.45, 0.05, 0.05, 0.45;
  const double h = -(0.9 * std::log2(0.9) + 0.1 * std::log2(0.1));
  EXPECT_NEAR(exact_mutual_information(j), 1.0 - h, 1e-12);
}

TEST(ExactMi, MatchesReferenceOnRandomFamilies) {
  for (int family = 0; family < 4; ++family) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      const DiscreteJointSpec j = random_joint(static_cast<JointFamily>(family), seed, 3);
      const double mi = exact_mutual_information(j);
      EXPECT_NEAR(mi, reference_mi(j.joint), 1e-9);
      EXPECT_GE(mi, 0.0);
      EXPECT_LE(mi, std::log2(j.classes()) + 1e-12);
    }
  }
}

TEST(RandomJoint, FamilyShapes) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto ind = random_joint(JointFamily::independent, seed);
    EXPECT_NEAR(exact_mutual_information(ind), 0.0, 1e-9);
    EXPECT_EQ(ind.atoms.cols(), 32);
    const auto det = random_joint(JointFamily::deterministic, seed);
    EXPECT_NEAR(exact_mutual_information(det), entropy_bits(det.class_marginal()), 1e-9);
    const auto noisy = random_joint(JointFamily::noisy_channel, seed);
    EXPECT_EQ(noisy.classes(), 2);
    const auto dir = random_joint(JointFamily::dirichlet, seed);
    EXPECT_LE(dir.atom_count(), 32);
    EXPECT_LE(dir.classes(), 8);
  }
}

TEST(JointValidation, Rejections) {
  DiscreteJointSpec j;
  j.atoms = atoms(2);
  j.joint = Matrix::Constant(2, 2, 0.25);
  EXPECT_NO_THROW(j.validate());
  DiscreteJointSpec bad = j;
  bad.joint(0, 0) = 0.3;
  EXPECT_THROW(bad.validate(), InputError);
  bad = j;
  bad.joint << 0.5, -0.25, 0.5, 0.25;
  EXPECT_THROW(bad.validate(), InputError);
  bad = j;
  bad.atoms = atoms(3);
  EXPECT_THROW(bad.validate(), InputError);
  bad = j;
  bad.joint = Matrix::Constant(2, 1, 0.5);
  EXPECT_THROW(bad.validate(), InputError);
  bad.atoms = atoms(65);
  bad.joint = Matrix::Constant(65, 2, 1.0 / 130);
  EXPECT_THROW(bad.validate(), InputError);
  const std::vector<int> out_of_range{0, 2};
  EXPECT_THROW(deterministic_joint(atoms(2), out_of_range, 2), InputError);
}

TEST(SampleJoint, EmpiricalFrequenciesMatchTable) {
  DiscreteJointSpec j;
  j.atoms = atoms(3);
  j.joint.resize(3, 2);
  j.joint << 0.1, 0.2, 0.0, 0.3, 0.25, 0.15;
  const JointDraw d = sample_joint(j, 100000, 7);
  Matrix counts = Matrix::Zero(3, 2);
  for (std::size_t r = 0; r < d.y.size(); ++r) {
    int atom = -1;
    for (int i = 0; i < 3; ++i) {
      if (d.z.row(static_cast<Eigen::Index>(r)) == j.atoms.row(i)) atom = i;
    }
    ASSERT_GE(atom, 0);
    counts(atom, d.y[r]) += 1e-5;
  }
  for (Eigen::Index i = 0; i < 6; ++i) EXPECT_NEAR(counts.data()[i], j.joint.data()[i], 0.005);
  EXPECT_EQ(counts(1, 0), 0.0);
}

TEST(Oracle, IndependentJointGivesNoInformation) {
  const std::vector<double> pz(8, 0.125), py{0.5, 0.5};
  const OracleResult r = mi_bound_oracle(independent_joint(atoms(8), pz, py), quick_probe(), 1000, 4000);
  EXPECT_EQ(r.exact_mi, 0.0);
  EXPECT_LE(std::abs(r.estimate.iu_raw), 0.05);
}

TEST(Oracle, DeterministicJointIsRecovered) {
  const std::vector<int> labels{0, 1, 2, 3, 3, 2, 1, 0};
  const OracleResult r = mi_bound_oracle(deterministic_joint(atoms(8, 16), labels, 4), quick_probe(), 1000, 4000);
  EXPECT_NEAR(r.exact_mi, 2.0, 1e-12);
  EXPECT_GE(r.estimate.iu_raw, 0.9 * r.exact_mi);
  EXPECT_LE(r.estimate.iu_raw, r.exact_mi + 0.05);
}

TEST(Oracle, NoisyChannelBounded) {
  DiscreteJointSpec j;
  j.atoms = atoms(2, 8);
  j.joint.resize(2, 2);
  j.joint << 0.45, 0.05, 0.05, 0.45;
  const OracleResult r = mi_bound_oracle(j, quick_probe(), 1000, 4000);
  EXPECT_LE(r.estimate.iu_raw, r.exact_mi + 0.05);
  EXPECT_GE(r.estimate.iu_raw, 0.5 * r.exact_mi);
}

TEST(Oracle, BadCountsAreInputError) {
  const std::vector<double> pz{0.5, 0.5}, py{0.5, 0.5};
  const auto j = independent_joint(atoms(2), pz, py);
  EXPECT_THROW(mi_bound_oracle(j, quick_probe(), 0, 10), InputError);
  OracleOptions o;
  o.trials = 0;
  EXPECT_THROW(run_oracle_trials(o), InputError);
}

TEST(Oracle, TrialsCycleFamiliesAndAreDeterministic) {
  OracleOptions o;
  o.trials = 4;
  o.n_train = 300;
  o.n_test = 300;
  o.probe.epochs = 2;
  o.probe.hidden = {8};
  const OracleSummary a = run_oracle_trials(o);
  o.jobs = 2;
  const OracleSummary b = run_oracle_trials(o);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(a.trials[static_cast<std::size_t>(i)].family, static_cast<JointFamily>(i));
    EXPECT_EQ(a.trials[static_cast<std::size_t>(i)].iu_raw, b.trials[static_cast<std::size_t>(i)].iu_raw);
  }
}
