#include "repinfo/checkerboard.hpp"
#include "repinfo/errors.hpp"
#include "repinfo/probe.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace repinfo;

namespace {

ProbeConfig quick_probe() {
  ProbeConfig c;
  c.epochs = 15;
  c.train_samples = 600;
  c.test_samples = 1200;
  c.learning_rate = 0.1;
  c.seed = 3;
  return c;
}

Matrix gaussian(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

NetworkState small_net(std::uint64_t seed) {
  const std::vector<int> hidden{10, 7, 5, 4, 3};
  return init_network(dense_relu_spec(6, hidden, 2), seed);
}

}  // namespace

TEST(Entropy, Examples) {
  const std::vector<double> fair{0.5, 0.5}, certain{1.0, 0.0}, four(4, 0.25);
  EXPECT_DOUBLE_EQ(entropy_bits(fair), 1.0);
  EXPECT_DOUBLE_EQ(entropy_bits(certain), 0.0);
  EXPECT_DOUBLE_EQ(entropy_bits(four), 2.0);
  EXPECT_NEAR(entropy_bits(uniform_marginal(10)), std::log2(10.0), 1e-12);
}

TEST(Entropy, RejectsNonDistributions) {
  const std::vector<double> short_sum{0.5, 0.4}, negative{1.5, -0.5}, empty;
  EXPECT_THROW(entropy_bits(short_sum), InputError);
  EXPECT_THROW(entropy_bits(negative), InputError);
  EXPECT_THROW(entropy_bits(empty), InputError);
}

TEST(Entropy, BoundedByLog2Classes) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + trial % 15;
    std::vector<double> p(static_cast<std::size_t>(k));
    double total = 0;
    for (double& v : p) total += v = u(rng);
    for (double& v : p) v /= total;
    const double h = entropy_bits(p);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log2(k) + 1e-12);
  }
}

TEST(DecoderSpec, BlockStructure) {
  const NetworkSpec spec = ProbeConfig{}.decoder_spec(7, 3);
  ASSERT_EQ(spec.layers.size(), 13u);
  const LayerKind block[4] = {LayerKind::affine, LayerKind::batch_norm, LayerKind::leaky_relu,
                              LayerKind::dropout};
  const int widths[3] = {128, 64, 32};
  for (int b = 0; b < 3; ++b) {
    for (int k = 0; k < 4; ++k) EXPECT_EQ(spec.layers[static_cast<std::size_t>(4 * b + k)].kind, block[k]);
    EXPECT_EQ(spec.layers[static_cast<std::size_t>(4 * b)].out_width, widths[b]);
    EXPECT_DOUBLE_EQ(spec.layers[static_cast<std::size_t>(4 * b + 2)].slope, 0.2);
    EXPECT_DOUBLE_EQ(spec.layers[static_cast<std::size_t>(4 * b + 3)].drop_prob, 0.7);
  }
  EXPECT_EQ(spec.layers.back().out_width, 3);
  EXPECT_EQ(spec.input_dim, 7);
}

TEST(ProbeConfig, Validation) {
  auto bad = [](auto mutate) {
    ProbeConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  bad([](ProbeConfig& c) { c.hidden.clear(); });
  bad([](ProbeConfig& c) { c.hidden = {0}; });
  bad([](ProbeConfig& c) { c.drop_prob = 1.0; });
  bad([](ProbeConfig& c) { c.epochs = 0; });
  bad([](ProbeConfig& c) { c.learning_rate = 0.0; });
  bad([](ProbeConfig& c) { c.train_samples = 0; });
}

TEST(Capture, LastHiddenOfSmallFcHasWidthThree) {
  const NetworkState net = small_net(1);
  const auto samples = draw_samples(CBConfig{.n = 2}, 50, 2);
  const ActivationMatrix a = capture_activations(net, samples, 4, 7);
  EXPECT_EQ(a.values.rows(), 50);
  EXPECT_EQ(a.values.cols(), 3);
  EXPECT_EQ(a.epoch, 7);
  EXPECT_EQ(a.layer_index, 4);
  EXPECT_EQ(capture_activations(net, samples, 0).values.cols(), 10);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(a.direction[i], samples[i].direction);
    EXPECT_EQ(a.color[i], samples[i].color);
  }
  EXPECT_TRUE((a.values.array() >= 0.0).all());  // post-ReLU
}

TEST(Capture, DeterministicAndStateUntouched) {
  const NetworkState net = small_net(4);
  const NetworkState copy = net;
  const auto samples = draw_samples(CBConfig{.n = 2}, 20, 2);
  EXPECT_TRUE(capture_activations(net, samples, 2).values == capture_activations(net, samples, 2).values);
  EXPECT_TRUE(net == copy);
}

TEST(Capture, BadArguments) {
  const NetworkState net = small_net(0);
  const auto samples = draw_samples(CBConfig{.n = 2}, 5, 0);
  EXPECT_THROW(capture_activations(net, samples, 5), InputError);
  EXPECT_THROW(capture_activations(net, samples, -1), InputError);
  EXPECT_THROW(capture_activations(net, {}, 0), InputError);
  EXPECT_THROW(capture_activations(net, draw_samples(CBConfig{.n = 3}, 5, 0), 0), ShapeError);
  EXPECT_THROW(capture_activations(net, samples, 0).labels(LabelKind::coarse), InputError);
}

TEST(UsableInfo, ConstantLabelOfTwoHasZeroCe) {
  // All labels equal 0: the probe learns to predict it; ce -> 0 and with a
  // point-mass marginal h_y = 0, so iu stays within [0, h_y].
  const ProbeConfig cfg = quick_probe();
  const Matrix z = gaussian(1800, 4, 1);
  const std::vector<int> y(1800, 0);
  const ProbeState p = train_probe(z, y, 2, cfg);
  const std::vector<double> marginal{1.0, 0.0};
  const InfoEstimate e = estimate_usable_info(p, z.bottomRows(1200), std::span(y).last(1200), marginal);
  EXPECT_LT(e.ce_test, 0.05);
  EXPECT_DOUBLE_EQ(e.h_y, 0.0);
  EXPECT_DOUBLE_EQ(e.iu, 0.0);
}

TEST(UsableInfo, IndependentNoiseGivesNearZero) {
  const ProbeConfig cfg = quick_probe();
  const Matrix z = gaussian(1800, 5, 2);
  Rng rng(8);
  std::vector<int> y(1800);
  for (int& v : y) v = static_cast<int>(rng() % 2);
  const ProbeState p = train_probe(z, y, 2, cfg);
  const InfoEstimate e =
      estimate_usable_info(p, z.bottomRows(1200), std::span(y).last(1200), uniform_marginal(2));
  EXPECT_NEAR(e.ce_test, 1.0, 0.1);
  EXPECT_LE(e.iu_raw, 0.05);
}

TEST(UsableInfo, SeparableSignalIsRecovered) {
  const ProbeConfig cfg = quick_probe();
  Matrix z = gaussian(1800, 3, 5) * 0.1;
  std::vector<int> y(1800);
  for (int i = 0; i < 1800; ++i) {
    y[static_cast<std::size_t>(i)] = i % 4;
    z(i, 0) += static_cast<double>(i % 4);
  }
  const ProbeState p = train_probe(z, y, 4, cfg);
  const InfoEstimate e =
      estimate_usable_info(p, z.bottomRows(1200), std::span(y).last(1200), uniform_marginal(4));
  EXPECT_GT(e.iu, 1.7);
  EXPECT_LE(e.iu, e.h_y);
}

TEST(UsableInfo, UniformOutputDecoderGivesZero) {
  ProbeState p{init_network(ProbeConfig{}.decoder_spec(3, 4), 0)};
  p.decoder.layers.back().weight.setZero();
  p.decoder.layers.back().bias.setZero();
  const Matrix z = gaussian(100, 3, 1);
  std::vector<int> y(100);
  for (int i = 0; i < 100; ++i) y[static_cast<std::size_t>(i)] = i % 4;
  const InfoEstimate e = estimate_usable_info(p, z, y, uniform_marginal(4));
  EXPECT_NEAR(e.iu_raw, 0.0, 1e-12);
  EXPECT_NEAR(e.h_y, 2.0, 1e-12);
}

TEST(UsableInfo, ClampKeepsRawNegative) {
  // A decoder confidently wrong on every row: ce > h_y.
  ProbeState p{init_network(ProbeConfig{}.decoder_spec(1, 2), 0)};
  for (auto& l : p.decoder.layers) {
    if (l.weight.size() && l.running_mean.size() == 0) l.weight.setZero();
  }
  p.decoder.layers.back().bias(0, 0) = 5.0;
  const Matrix z = Matrix::Ones(10, 1);
  const std::vector<int> y(10, 1);
  const InfoEstimate e = estimate_usable_info(p, z, y, uniform_marginal(2));
  EXPECT_LT(e.iu_raw, -1.0);
  EXPECT_EQ(e.iu, 0.0);
  EXPECT_DOUBLE_EQ(e.iu_raw, e.h_y - e.ce_test);
}

TEST(UsableInfo, EmptyTestSetIsInputError) {
  ProbeState p{init_network(ProbeConfig{}.decoder_spec(3, 2), 0)};
  const std::vector<int> none;
  EXPECT_THROW(estimate_usable_info(p, Matrix(0, 3), none, uniform_marginal(2)), InputError);
  const std::vector<int> y(4, 0);
  EXPECT_THROW(estimate_usable_info(p, Matrix::Zero(4, 2), y, uniform_marginal(2)), InputError);
  EXPECT_THROW(estimate_usable_info(p, Matrix::Zero(4, 3), y, uniform_marginal(3)), InputError);
}

TEST(TrainProbe, DeterministicInSeed) {
  ProbeConfig cfg = quick_probe();
  cfg.epochs = 3;
  const Matrix z = gaussian(700, 3, 4);
  std::vector<int> y(700);
  for (int i = 0; i < 700; ++i) y[static_cast<std::size_t>(i)] = z(i, 0) > 0;
  EXPECT_TRUE(train_probe(z, y, 2, cfg).decoder == train_probe(z, y, 2, cfg).decoder);
  ProbeConfig other = cfg;
  other.seed = 4;
  EXPECT_FALSE(train_probe(z, y, 2, cfg).decoder == train_probe(z, y, 2, other).decoder);
}

TEST(TrainProbe, TooFewRowsIsInputError) {
  const ProbeConfig cfg = quick_probe();
  const std::vector<int> y(10, 0);
  EXPECT_THROW(train_probe(Matrix::Zero(10, 2), y, 2, cfg), InputError);
  const std::vector<int> y2(600, 0);
  EXPECT_THROW(train_probe(Matrix::Zero(600, 2), y2, 1, cfg), InputError);
}
