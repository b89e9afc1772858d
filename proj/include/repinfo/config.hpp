#pragma once

#include "repinfo/harness.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace repinfo {

/// A parsed plan document. Sections: task, network, training, probe,
/// schedule, pretrain, seeds, output. An optional top-level "preset" names
/// the base plan that the other sections override.
struct ConfigDocument {
  ExperimentPlan plan;
  std::optional<std::string> output_dir;
};

constexpr int kPlanFormatVersion = 1;

/// Named plans: smallfc_n2, mediumfc_n10, mediumfc_n20, mediumfc_n25,
/// coarse_n10. Throws ConfigError for any other name.
ExperimentPlan preset(std::string_view name);
std::vector<std::string> preset_names();

/// Throws ConfigError whose message starts with the offending field path
/// (e.g. "training.learning_rt: unknown key").
ConfigDocument parse_config_text(std::string_view json_text);
ConfigDocument parse_config(const std::filesystem::path& path);

/// Full document with every field explicit; parse_config_text inverts it.
std::string serialize_plan(const ExperimentPlan& plan, const std::optional<std::string>& output_dir = {});

/// Colour pretraining epoch counts swept by default.
std::vector<int> default_pretrain_epochs();

}  // namespace repinfo
