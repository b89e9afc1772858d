#include "repinfo/config.hpp"

#include "repinfo/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace repinfo {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

// One JSON object being consumed; keys never read are rejected by finish().
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_, "expected an object");
  }

  std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* child(const std::string& key) {
    seen_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  void get(const std::string& key, int& out) {
    if (const json* v = child(key)) {
      if (!v->is_number_integer()) fail(path(key), "expected an integer");
      const auto wide = v->get<std::int64_t>();
      if (wide < INT32_MIN || wide > INT32_MAX) fail(path(key), "integer out of range");
      out = static_cast<int>(wide);
    }
  }
  void get(const std::string& key, double& out) {
    if (const json* v = child(key)) {
      if (!v->is_number()) fail(path(key), "expected a number");
      out = v->get<double>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (const json* v = child(key)) {
      if (!v->is_boolean()) fail(path(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, std::uint64_t& out) {
    if (const json* v = child(key)) out = as_seed(*v, path(key));
  }
  void get(const std::string& key, std::string& out) {
    if (const json* v = child(key)) {
      if (!v->is_string()) fail(path(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  void get(const std::string& key, std::vector<int>& out) {
    if (const json* v = child(key)) {
      if (!v->is_array()) fail(path(key), "expected an array of integers");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        const json& e = (*v)[i];
        if (!e.is_number_integer()) fail(path(key) + "[" + std::to_string(i) + "]", "expected an integer");
        out.push_back(e.get<int>());
      }
    }
  }
  void get(const std::string& key, LabelKind& out) {
    if (const json* v = child(key)) out = as_kind(*v, path(key));
  }

  static std::uint64_t as_seed(const json& v, const std::string& at) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      fail(at, "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  static LabelKind as_kind(const json& v, const std::string& at) {
    if (!v.is_string()) fail(at, "expected direction, color or coarse");
    try {
      return parse_label_kind(v.get<std::string>());
    } catch (const InputError&) {
      fail(at, "unknown label kind '" + v.get<std::string>() + "'");
    }
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.contains(it.key())) fail(path(it.key()), "unknown key");
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Fn>
void checked(const std::string& section, Fn&& validate) {
  try {
    validate();
  } catch (const ConfigError& e) {
    fail(section, e.what());
  } catch (const InputError& e) {
    fail(section, e.what());
  }
}

ExperimentPlan base_plan(const std::string& name, int n, int samples, std::vector<int> hidden, int batch,
                         double lr) {
  ExperimentPlan p;
  p.name = name;
  p.task.n = n;
  p.task.num_samples = samples;
  p.task.train_fraction = 0.9;
  p.hidden = std::move(hidden);
  p.training.batch_size = batch;
  p.training.learning_rate = lr;
  p.training.epochs = 100;
  p.probe.learning_rate = lr;
  p.probe_schedule = every_epoch_schedule(p.training.epochs);
  return p;
}

const std::vector<int> kSmallFc{10, 7, 5, 4, 3};
const std::vector<int> kMediumFc{100, 20, 20, 20};

}  // namespace

ExperimentPlan preset(std::string_view name) {
  if (name == "smallfc_n2") return base_plan("smallfc_n2", 2, 10000, kSmallFc, 32, 0.05);
  if (name == "mediumfc_n10") return base_plan("mediumfc_n10", 10, 25000, kMediumFc, 64, 0.5);
  if (name == "mediumfc_n20") return base_plan("mediumfc_n20", 20, 50000, kMediumFc, 128, 0.5);
  if (name == "mediumfc_n25") return base_plan("mediumfc_n25", 25, 75000, kMediumFc, 128, 0.5);
  if (name == "coarse_n10") {
    ExperimentPlan p = base_plan("coarse_n10", 10, 25000, kMediumFc, 32, 0.5);
    p.task.coarse_groups = 2;
    p.main_kind = LabelKind::coarse;
    p.probed_kinds = {LabelKind::coarse, LabelKind::direction};
    return p;
  }
  throw ConfigError("preset: unknown preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() {
  return {"smallfc_n2", "mediumfc_n10", "mediumfc_n20", "mediumfc_n25", "coarse_n10"};
}

std::vector<int> default_pretrain_epochs() { return {0, 1, 2, 5, 10, 20}; }

ConfigDocument parse_config_text(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail("(document)", std::string("invalid JSON: ") + e.what());
  }
  Section top(root, "");

  ConfigDocument doc;
  ExperimentPlan& plan = doc.plan;
  std::string preset_name;
  top.get("preset", preset_name);
  if (!preset_name.empty()) plan = preset(preset_name);

  int format_version = kPlanFormatVersion;
  top.get("format_version", format_version);
  if (format_version != kPlanFormatVersion) {
    fail("format_version", "unsupported version " + std::to_string(format_version));
  }
  top.get("name", plan.name);

  if (const json* t = top.child("task")) {
    Section s(*t, "task");
    s.get("n", plan.task.n);
    s.get("num_samples", plan.task.num_samples);
    s.get("noise_std", plan.task.noise_std);
    s.get("seed", plan.task.seed);
    s.get("train_fraction", plan.task.train_fraction);
    if (const json* g = s.child("coarse_groups")) {
      if (g->is_null()) {
        plan.task.coarse_groups.reset();
      } else if (g->is_number_integer()) {
        plan.task.coarse_groups = g->get<int>();
      } else {
        fail("task.coarse_groups", "expected an integer or null");
      }
    }
    s.finish();
  }
  checked("task", [&] { plan.task.validate(); });

  if (const json* n = top.child("network")) {
    Section s(*n, "network");
    s.get("hidden", plan.hidden);
    s.finish();
  }

  if (const json* t = top.child("training")) {
    Section s(*t, "training");
    s.get("label_kind", plan.main_kind);
    s.get("learning_rate", plan.training.learning_rate);
    s.get("batch_size", plan.training.batch_size);
    s.get("epochs", plan.training.epochs);
    s.get("momentum", plan.training.momentum);
    s.get("anneal_factor", plan.training.anneal_factor);
    s.get("weight_decay", plan.training.weight_decay);
    s.finish();
  }
  checked("training", [&] { plan.training.validate(); });

  if (const json* p = top.child("probe")) {
    Section s(*p, "probe");
    s.get("hidden", plan.probe.hidden);
    s.get("leaky_slope", plan.probe.leaky_slope);
    s.get("drop_prob", plan.probe.drop_prob);
    s.get("batch_norm", plan.probe.batch_norm);
    s.get("epochs", plan.probe.epochs);
    s.get("learning_rate", plan.probe.learning_rate);
    s.get("batch_size", plan.probe.batch_size);
    s.get("train_samples", plan.probe.train_samples);
    s.get("test_samples", plan.probe.test_samples);
    s.get("seed", plan.probe.seed);
    if (const json* kinds = s.child("label_kinds")) {
      if (!kinds->is_array()) fail("probe.label_kinds", "expected an array");
      plan.probed_kinds.clear();
      for (std::size_t i = 0; i < kinds->size(); ++i) {
        plan.probed_kinds.push_back(
            Section::as_kind((*kinds)[i], "probe.label_kinds[" + std::to_string(i) + "]"));
      }
    }
    s.get("layers", plan.probed_layers);
    s.finish();
  }
  checked("probe", [&] { plan.probe.validate(); });

  if (const json* sched = top.child("schedule")) {
    if (sched->is_string()) {
      const auto style = sched->get<std::string>();
      if (style == "every_epoch") {
        plan.probe_schedule = every_epoch_schedule(plan.training.epochs);
      } else if (style == "sparse") {
        plan.probe_schedule = sparse_schedule(plan.training.epochs);
      } else if (style == "final") {
        plan.probe_schedule = {plan.training.epochs};
      } else {
        fail("schedule", "expected every_epoch, sparse, final or an array of epochs");
      }
    } else if (sched->is_array()) {
      plan.probe_schedule.clear();
      for (std::size_t i = 0; i < sched->size(); ++i) {
        const json& e = (*sched)[i];
        if (!e.is_number_integer()) fail("schedule[" + std::to_string(i) + "]", "expected an integer");
        plan.probe_schedule.push_back(e.get<int>());
      }
    } else {
      fail("schedule", "expected every_epoch, sparse, final or an array of epochs");
    }
  } else {
    plan.probe_schedule = every_epoch_schedule(plan.training.epochs);
  }

  if (const json* p = top.child("pretrain")) {
    if (p->is_null()) {
      plan.pretrain.reset();
    } else {
      Section s(*p, "pretrain");
      PretrainSpec spec;
      s.get("label_kind", spec.label_kind);
      s.get("epochs", spec.epochs);
      s.finish();
      plan.pretrain = spec;
    }
  }

  if (const json* seeds = top.child("seeds")) {
    plan.seeds.clear();
    if (seeds->is_number_integer()) {
      const int k = seeds->get<int>();
      if (k < 1) fail("seeds", "seed count must be >= 1");
      for (int i = 0; i < k; ++i) plan.seeds.push_back(static_cast<std::uint64_t>(i));
    } else if (seeds->is_array()) {
      for (std::size_t i = 0; i < seeds->size(); ++i) {
        plan.seeds.push_back(Section::as_seed((*seeds)[i], "seeds[" + std::to_string(i) + "]"));
      }
    } else {
      fail("seeds", "expected a seed count or an array of seeds");
    }
  }

  if (const json* o = top.child("output")) {
    Section s(*o, "output");
    std::string dir;
    s.get("dir", dir);
    s.finish();
    if (!dir.empty()) doc.output_dir = dir;
  }
  top.finish();

  checked("plan", [&] { plan.validate(); });
  return doc;
}

ConfigDocument parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_plan(const ExperimentPlan& plan, const std::optional<std::string>& output_dir) {
  json kinds = json::array();
  for (LabelKind k : plan.probed_kinds) kinds.push_back(to_string(k));

  json root;
  root["format_version"] = kPlanFormatVersion;
  root["name"] = plan.name;
  root["task"] = {{"n", plan.task.n},
                  {"num_samples", plan.task.num_samples},
                  {"noise_std", plan.task.noise_std},
                  {"seed", plan.task.seed},
                  {"train_fraction", plan.task.train_fraction},
                  {"coarse_groups", plan.task.coarse_groups ? json(*plan.task.coarse_groups) : json(nullptr)}};
  root["network"] = {{"hidden", plan.hidden}};
  root["training"] = {{"label_kind", to_string(plan.main_kind)},
                      {"learning_rate", plan.training.learning_rate},
                      {"batch_size", plan.training.batch_size},
                      {"epochs", plan.training.epochs},
                      {"momentum", plan.training.momentum},
                      {"anneal_factor", plan.training.anneal_factor},
                      {"weight_decay", plan.training.weight_decay}};
  root["probe"] = {{"hidden", plan.probe.hidden},
                   {"leaky_slope", plan.probe.leaky_slope},
                   {"drop_prob", plan.probe.drop_prob},
                   {"batch_norm", plan.probe.batch_norm},
                   {"epochs", plan.probe.epochs},
                   {"learning_rate", plan.probe.learning_rate},
                   {"batch_size", plan.probe.batch_size},
                   {"train_samples", plan.probe.train_samples},
                   {"test_samples", plan.probe.test_samples},
                   {"seed", plan.probe.seed},
                   {"label_kinds", kinds},
                   {"layers", plan.probed_layers}};
  root["schedule"] = plan.probe_schedule;
  root["pretrain"] = plan.pretrain ? json{{"label_kind", to_string(plan.pretrain->label_kind)},
                                          {"epochs", plan.pretrain->epochs}}
                                   : json(nullptr);
  root["seeds"] = plan.seeds;
  if (output_dir) root["output"] = {{"dir", *output_dir}};
  return root.dump(2) + "\n";
}

}  // namespace repinfo
