#include "repinfo/checkpoint.hpp"
#include "repinfo/errors.hpp"
#include "repinfo/network.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace repinfo;

namespace {

NetworkState trained_state() {
  NetworkSpec spec;
  spec.input_dim = 4;
  spec.output_classes = 3;
  spec.layers = {LayerSpec::affine(6), LayerSpec::batch_norm(), LayerSpec::leaky_relu(0.2),
                 LayerSpec::dropout(0.3), LayerSpec::affine(5), LayerSpec::relu(),
                 LayerSpec::affine(3)};
  NetworkState s = init_network(spec, 17);
  LabeledSet d;
  d.inputs = Matrix::Random(40, 4);
  d.classes = 3;
  for (int i = 0; i < 40; ++i) d.labels.push_back(i % 3);
  TrainConfig cfg;
  cfg.momentum = 0.9;
  cfg.batch_size = 8;
  for (int e = 0; e < 3; ++e) train_epoch(s, d, cfg);
  return s;
}

}  // namespace

TEST(Checkpoint, StreamRoundTripIsBitExact) {
  const NetworkState s = trained_state();
  std::stringstream buf;
  write_state(buf, s);
  const NetworkState back = read_state(buf);
  EXPECT_TRUE(back == s);
  EXPECT_EQ(back.epoch_counter, 3u);
}

TEST(Checkpoint, RestoredRngContinuesIdentically) {
  NetworkState s = trained_state();
  std::stringstream buf;
  write_state(buf, s);
  NetworkState back = read_state(buf);
  const Matrix x = Matrix::Ones(5, 4);
  EXPECT_TRUE(forward(s, x, Mode::train).logits() == forward(back, x, Mode::train).logits());
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "repinfo_ckpt_test.bin";
  const NetworkState s = trained_state();
  save_state(path, s);
  EXPECT_TRUE(load_state(path) == s);
  std::filesystem::remove(path);
}

TEST(Checkpoint, MissingFileIsIoError) {
  EXPECT_THROW(load_state("/nonexistent/dir/state.bin"), IoError);
}

TEST(Checkpoint, BadMagicAndTruncationAreRejected) {
  std::stringstream junk("XXXXnot a checkpoint");
  EXPECT_THROW(read_state(junk), Error);
  std::stringstream buf;
  write_state(buf, trained_state());
  const std::string full = buf.str();
  std::stringstream cut(full.substr(0, full.size() / 2));
  EXPECT_THROW(read_state(cut), Error);
}
