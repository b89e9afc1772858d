#include "repinfo/config.hpp"
#include "repinfo/errors.hpp"

#include <gtest/gtest.h>

using namespace repinfo;

namespace {
std::string error_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}
}  // namespace

TEST(Presets, SmallFcN2) {
  const ExperimentPlan p = preset("smallfc_n2");
  EXPECT_EQ(p.task.n, 2);
  EXPECT_EQ(p.task.num_samples, 10000);
  EXPECT_EQ(p.hidden, (std::vector<int>{10, 7, 5, 4, 3}));
  EXPECT_EQ(p.training.batch_size, 32);
  EXPECT_DOUBLE_EQ(p.training.learning_rate, 0.05);
  EXPECT_DOUBLE_EQ(p.probe.learning_rate, 0.05);
  EXPECT_EQ(p.training.epochs, 100);
  EXPECT_EQ(p.probe.hidden, (std::vector<int>{128, 64, 32}));
  EXPECT_EQ(p.probe.train_samples, 1250);
  EXPECT_EQ(p.probe.test_samples, 3750);
  EXPECT_EQ(p.probe_schedule, every_epoch_schedule(100));
}

TEST(Presets, MediumFc) {
  const ExperimentPlan p = preset("mediumfc_n20");
  EXPECT_EQ(p.task.n, 20);
  EXPECT_EQ(p.task.num_samples, 50000);
  EXPECT_EQ(p.hidden, (std::vector<int>{100, 20, 20, 20}));
  EXPECT_EQ(p.training.batch_size, 128);
  EXPECT_DOUBLE_EQ(p.training.learning_rate, 0.5);
  EXPECT_DOUBLE_EQ(p.probe.learning_rate, 0.5);
  EXPECT_EQ(preset("mediumfc_n10").training.batch_size, 64);
  EXPECT_EQ(preset("mediumfc_n25").task.num_samples, 75000);
}

TEST(Presets, CoarseAndUnknown) {
  const ExperimentPlan p = preset("coarse_n10");
  EXPECT_EQ(p.task.coarse_groups, 2);
  EXPECT_EQ(p.main_kind, LabelKind::coarse);
  EXPECT_NO_THROW(p.validate());
  EXPECT_THROW(preset("bigfc"), ConfigError);
  for (const auto& name : preset_names()) EXPECT_NO_THROW(preset(name).validate()) << name;
}

TEST(Parse, PresetWithOverrides) {
  const ConfigDocument d = parse_config_text(R"({
    "preset": "smallfc_n2",
    "training": {"epochs": 10},
    "schedule": "final",
    "seeds": 3,
    "output": {"dir": "out"}
  })");
  EXPECT_EQ(d.plan.training.epochs, 10);
  EXPECT_EQ(d.plan.probe_schedule, (std::vector<int>{10}));
  EXPECT_EQ(d.plan.seeds, (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_EQ(d.output_dir, "out");
  EXPECT_EQ(d.plan.hidden, preset("smallfc_n2").hidden);
}

TEST(Parse, UnknownKeyIsNamed) {
  EXPECT_EQ(error_of(R"({"training": {"learning_rt": 0.1}})").rfind("training.learning_rt: unknown key", 0), 0u);
  EXPECT_EQ(error_of(R"({"bogus": 1})").rfind("bogus: unknown key", 0), 0u);
}

TEST(Parse, InvalidValuesAreConfigErrors) {
  EXPECT_FALSE(error_of("{not json").empty());
  EXPECT_FALSE(error_of(R"({"training": {"learning_rate": "fast"}})").empty());
  EXPECT_FALSE(error_of(R"({"training": {"learning_rate": -1}})").empty());
  EXPECT_FALSE(error_of(R"({"task": {"n": 1}})").empty());
  EXPECT_FALSE(error_of(R"({"format_version": 99})").empty());
  EXPECT_FALSE(error_of(R"({"preset": "nope"})").empty());
  EXPECT_THROW(parse_config("/nonexistent/plan.json"), ConfigError);
}

TEST(Serialize, RoundTripEveryPreset) {
  for (const auto& name : preset_names()) {
    ExperimentPlan p = preset(name);
    if (p.main_kind == LabelKind::direction) p.pretrain = PretrainSpec{LabelKind::color, 3};
    p.seeds = {4, 9};
    p.probed_layers = {0, 2};
    const ConfigDocument d = parse_config_text(serialize_plan(p, std::string("runs_x")));
    EXPECT_EQ(d.plan, p) << name;
    EXPECT_EQ(d.output_dir, "runs_x");
  }
}

TEST(Defaults, PretrainEpochs) {
  EXPECT_EQ(default_pretrain_epochs(), (std::vector<int>{0, 1, 2, 5, 10, 20}));
}
