#include "repinfo/mi_oracle.hpp"

#include "repinfo/errors.hpp"
#include "repinfo/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace repinfo {

namespace {

constexpr int kMaxAtoms = 64;
constexpr int kMaxClasses = 16;

std::vector<double> dirichlet(Rng& rng, int k, double alpha) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> p(static_cast<std::size_t>(k));
  double sum = 0.0;
  for (double& v : p) {
    v = gamma(rng);
    sum += v;
  }
  if (sum <= 0.0) return std::vector<double>(p.size(), 1.0 / k);
  for (double& v : p) v /= sum;
  return p;
}

Matrix gaussian_atoms(Rng& rng, int k, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix atoms(k, dim);
  for (Eigen::Index i = 0; i < atoms.size(); ++i) atoms.data()[i] = normal(rng);
  return atoms;
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

}  // namespace

std::vector<double> DiscreteJointSpec::class_marginal() const {
  std::vector<double> p(static_cast<std::size_t>(classes()));
  for (int j = 0; j < classes(); ++j) p[static_cast<std::size_t>(j)] = joint.col(j).sum();
  return p;
}

void DiscreteJointSpec::validate() const {
  if (atoms.rows() != joint.rows()) throw InputError("joint: atoms and table row counts differ");
  if (atom_count() < 1 || atom_count() > kMaxAtoms) throw InputError("joint: atom count must be in [1, 64]");
  if (classes() < 2 || classes() > kMaxClasses) throw InputError("joint: class count must be in [2, 16]");
  if (atoms.cols() < 1) throw InputError("joint: atoms need at least one dimension");
  if (!atoms.allFinite()) throw InputError("joint: atoms must be finite");
  if (!joint.allFinite() || joint.minCoeff() < 0.0) throw InputError("joint: probabilities must be >= 0");
  if (std::abs(joint.sum() - 1.0) > 1e-9) throw InputError("joint: table must sum to 1");
}

double exact_mutual_information(const DiscreteJointSpec& joint) {
  joint.validate();
  const auto p_y = joint.class_marginal();
  double mi = 0.0;
  for (int i = 0; i < joint.atom_count(); ++i) {
    const double p_z = joint.joint.row(i).sum();
    for (int j = 0; j < joint.classes(); ++j) {
      const double p = joint.joint(i, j);
      if (p > 0.0) mi += p * std::log2(p / (p_z * p_y[static_cast<std::size_t>(j)]));
    }
  }
  return std::max(mi, 0.0);
}

JointDraw sample_joint(const DiscreteJointSpec& joint, std::size_t count, std::uint64_t seed) {
  joint.validate();
  const int c = joint.classes();
  std::vector<double> cdf(static_cast<std::size_t>(joint.joint.size()));
  std::partial_sum(joint.joint.data(), joint.joint.data() + joint.joint.size(), cdf.begin());

  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, cdf.back());
  JointDraw draw;
  draw.z.resize(static_cast<Eigen::Index>(count), joint.atoms.cols());
  draw.y.resize(count);
  for (std::size_t r = 0; r < count; ++r) {
    auto cell = static_cast<int>(std::upper_bound(cdf.begin(), cdf.end(), unit(rng)) - cdf.begin());
    cell = std::min(cell, static_cast<int>(cdf.size()) - 1);
    // skip zero-mass cells that upper_bound can land on at the top edge
    while (joint.joint.data()[cell] == 0.0 && cell > 0) --cell;
    draw.z.row(static_cast<Eigen::Index>(r)) = joint.atoms.row(cell / c);
    draw.y[r] = cell % c;
  }
  return draw;
}

OracleResult mi_bound_oracle(const DiscreteJointSpec& joint, const ProbeConfig& probe_config, int n_train,
                             int n_test) {
  joint.validate();
  if (n_train < 1 || n_test < 1) throw InputError("oracle sample counts must be positive");
  ProbeConfig cfg = probe_config;
  cfg.train_samples = n_train;
  cfg.test_samples = n_test;
  cfg.validate();

  const JointDraw train = sample_joint(joint, static_cast<std::size_t>(n_train), derive_seed(cfg.seed, 1));
  const JointDraw test = sample_joint(joint, static_cast<std::size_t>(n_test), derive_seed(cfg.seed, 2));
  const ProbeState probe = train_probe(train.z, train.y, joint.classes(), cfg);

  OracleResult result;
  result.exact_mi = exact_mutual_information(joint);
  result.estimate = estimate_usable_info(probe, test.z, test.y, joint.class_marginal());
  result.estimate.probe_seed = cfg.seed;
  return result;
}

const char* to_string(JointFamily family) {
  switch (family) {
    case JointFamily::independent: return "independent";
    case JointFamily::deterministic: return "deterministic";
    case JointFamily::noisy_channel: return "noisy_channel";
    case JointFamily::dirichlet: return "dirichlet";
  }
  return "?";
}

DiscreteJointSpec independent_joint(const Matrix& atoms, std::span<const double> p_z,
                                    std::span<const double> p_y) {
  if (static_cast<Eigen::Index>(p_z.size()) != atoms.rows()) throw InputError("p_z length must match atoms");
  DiscreteJointSpec j;
  j.atoms = atoms;
  j.joint.resize(static_cast<Eigen::Index>(p_z.size()), static_cast<Eigen::Index>(p_y.size()));
  for (std::size_t a = 0; a < p_z.size(); ++a) {
    for (std::size_t b = 0; b < p_y.size(); ++b) {
      j.joint(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = p_z[a] * p_y[b];
    }
  }
  j.validate();
  return j;
}

DiscreteJointSpec deterministic_joint(const Matrix& atoms, std::span<const int> labels, int classes) {
  if (static_cast<Eigen::Index>(labels.size()) != atoms.rows()) throw InputError("one label per atom");
  DiscreteJointSpec j;
  j.atoms = atoms;
  j.joint = Matrix::Zero(atoms.rows(), classes);
  for (std::size_t a = 0; a < labels.size(); ++a) {
    if (labels[a] < 0 || labels[a] >= classes) throw InputError("label out of range");
    j.joint(static_cast<Eigen::Index>(a), labels[a]) = 1.0 / static_cast<double>(labels.size());
  }
  j.validate();
  return j;
}

DiscreteJointSpec random_joint(JointFamily family, std::uint64_t seed, int dim) {
  Rng rng(seed);
  switch (family) {
    case JointFamily::independent: {
      const int k = uniform_int(rng, 2, kMaxAtoms);
      const int c = uniform_int(rng, 2, kMaxClasses);
      const auto p_z = dirichlet(rng, k, 1.0);
      const auto p_y = dirichlet(rng, c, 1.0);
      return independent_joint(gaussian_atoms(rng, k, dim), p_z, p_y);
    }
    case JointFamily::deterministic: {
      const int k = uniform_int(rng, 4, kMaxAtoms);
      const int c = uniform_int(rng, 2, std::min(kMaxClasses, k));
      std::vector<int> labels(static_cast<std::size_t>(k));
      for (int i = 0; i < k; ++i) labels[static_cast<std::size_t>(i)] = i % c;
      std::shuffle(labels.begin(), labels.end(), rng);
      return deterministic_joint(gaussian_atoms(rng, k, dim), labels, c);
    }
    case JointFamily::noisy_channel: {
      const int k = uniform_int(rng, 2, kMaxAtoms);
      DiscreteJointSpec j;
      j.atoms = gaussian_atoms(rng, k, dim);
      j.joint.resize(k, 2);
      std::bernoulli_distribution flip(0.5);
      for (int i = 0; i < k; ++i) {
        const int favoured = flip(rng) ? 1 : 0;
        j.joint(i, favoured) = 0.9 / k;
        j.joint(i, 1 - favoured) = 0.1 / k;
      }
      j.validate();
      return j;
    }
    case JointFamily::dirichlet: {
      const int k = uniform_int(rng, 2, 32);
      const int c = uniform_int(rng, 2, 8);
      DiscreteJointSpec j;
      j.atoms = gaussian_atoms(rng, k, dim);
      const auto cells = dirichlet(rng, k * c, 0.5);
      j.joint = Eigen::Map<const Matrix>(cells.data(), k, c);
      j.joint /= j.joint.sum();
      j.validate();
      return j;
    }
  }
  throw InputError("unknown joint family");
}

bool OracleSummary::bound_holds() const {
  return std::all_of(trials.begin(), trials.end(), [](const OracleTrial& t) { return t.bound_ok; });
}

bool OracleSummary::tight_holds() const {
  return std::all_of(trials.begin(), trials.end(), [](const OracleTrial& t) { return t.tight_ok; });
}

OracleSummary run_oracle_trials(const OracleOptions& options) {
  if (options.trials < 1) throw InputError("oracle needs at least one trial");
  OracleSummary summary;
  summary.trials.resize(static_cast<std::size_t>(options.trials));
  parallel_for(summary.trials.size(), options.jobs, [&](std::size_t i) {
    OracleTrial& t = summary.trials[i];
    t.index = static_cast<int>(i);
    t.family = static_cast<JointFamily>(i % 4);
    const DiscreteJointSpec joint = random_joint(t.family, derive_seed(options.seed, 0x6a6f696e74, i),
                                                 options.atom_dim);
    ProbeConfig cfg = options.probe;
    cfg.seed = derive_seed(options.seed, 0x70726f6265, i);
    const OracleResult r = mi_bound_oracle(joint, cfg, options.n_train, options.n_test);
    t.atoms = joint.atom_count();
    t.classes = joint.classes();
    t.exact_mi = r.exact_mi;
    t.h_y = r.estimate.h_y;
    t.iu_raw = r.estimate.iu_raw;
    t.bound_ok = t.iu_raw <= t.exact_mi + options.slack_bits;
    if (t.family == JointFamily::deterministic) t.tight_ok = t.iu_raw >= options.tight_fraction * t.exact_mi;
  });
  return summary;
}

}  // namespace repinfo
