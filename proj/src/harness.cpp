#include "repinfo/harness.hpp"

#include "repinfo/errors.hpp"
#include "repinfo/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <map>
#include <set>
#include <tuple>

namespace repinfo {

namespace {

constexpr std::uint64_t kTagTask = 0x7461736b;
constexpr std::uint64_t kTagInit = 0x696e6974;
constexpr std::uint64_t kTagProbeData = 0x70646174;
constexpr std::uint64_t kTagProbe = 0x70726f62;

// Abort when the training loss is non-finite or above this many bits for
// kDivergedEpochs consecutive epochs.
constexpr double kDivergedLossBits = 100.0;
constexpr int kDivergedEpochs = 3;

}  // namespace

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

NetworkSpec ExperimentPlan::network_spec() const {
  return dense_relu_spec(input_dim(task.n), hidden, task.classes(main_kind));
}

std::vector<int> ExperimentPlan::layers_to_probe() const {
  if (!probed_layers.empty()) return probed_layers;
  std::vector<int> all(hidden.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return all;
}

void ExperimentPlan::validate() const {
  task.validate();
  training.validate();
  probe.validate();
  if (hidden.empty()) throw ConfigError("network.hidden must be nonempty");
  for (int w : hidden) {
    if (w < 1) throw ConfigError("network.hidden widths must be >= 1");
  }
  if (main_kind == LabelKind::color) {
    throw ConfigError("training.label_kind must be direction or coarse");
  }
  const int classes = task.classes(main_kind);
  if (pretrain) {
    if (pretrain->epochs < 0 || pretrain->epochs >= training.epochs) {
      throw ConfigError("pretrain.epochs must be in [0, training.epochs)");
    }
    if (task.classes(pretrain->label_kind) != classes) {
      throw ConfigError("pretrain.label_kind must have as many classes as training.label_kind");
    }
  }
  for (int e : probe_schedule) {
    if (e < 0 || e > training.epochs) {
      throw ConfigError("schedule epoch " + std::to_string(e) + " outside [0, training.epochs]");
    }
  }
  if (seeds.empty()) throw ConfigError("seeds must be nonempty");
  if (probed_kinds.empty()) throw ConfigError("probe.label_kinds must be nonempty");
  for (LabelKind k : probed_kinds) task.classes(k);
  for (int l : probed_layers) {
    if (l < 0 || l >= hidden_layer_count()) {
      throw ConfigError("probe.layers entry " + std::to_string(l) + " outside [0, " +
                        std::to_string(hidden_layer_count()) + ")");
    }
  }
}

std::vector<int> every_epoch_schedule(int epochs) {
  std::vector<int> s;
  for (int e = 0; e <= epochs; ++e) s.push_back(e);
  return s;
}

std::vector<int> sparse_schedule(int epochs) {
  std::vector<int> s;
  for (int e = 0; e <= std::min(10, epochs); ++e) s.push_back(e);
  for (int e = 15; e <= epochs; e += 5) s.push_back(e);
  if (s.back() != epochs) s.push_back(epochs);
  return s;
}

const char* to_string(RunStatus status) {
  return status == RunStatus::completed ? "completed" : "aborted";
}

RunStatus parse_run_status(std::string_view text) {
  if (text == "completed") return RunStatus::completed;
  if (text == "aborted") return RunStatus::aborted;
  throw InputError("unknown run status '" + std::string(text) + "'");
}

std::vector<InfoEstimate> RunRecord::curve(int layer, LabelKind kind) const {
  std::vector<InfoEstimate> out;
  for (const auto& e : info) {
    if (e.layer_index == layer && e.label_kind == kind) out.push_back(e);
  }
  return out;
}

const InfoEstimate* RunRecord::find(int epoch, int layer, LabelKind kind) const {
  for (const auto& e : info) {
    if (e.epoch == epoch && e.layer_index == layer && e.label_kind == kind) return &e;
  }
  return nullptr;
}

int RunRecord::final_probed_epoch() const {
  int last = -1;
  for (const auto& e : info) last = std::max(last, e.epoch);
  return last;
}

double RunRecord::final_val_acc() const {
  return metrics.empty() ? 0.0 : metrics.back().val_acc;
}

std::uint64_t task_seed(const ExperimentPlan& plan, std::uint64_t seed) {
  return derive_seed(plan.task.seed, seed, kTagTask);
}

std::uint64_t init_seed(std::uint64_t seed) { return derive_seed(seed, kTagInit); }

std::uint64_t probe_data_seed(const ExperimentPlan& plan, std::uint64_t seed, int epoch) {
  return derive_seed(plan.probe.seed, seed, kTagProbeData, epoch);
}

std::uint64_t probe_job_seed(const ExperimentPlan& plan, std::uint64_t seed, int epoch, int layer,
                             LabelKind kind) {
  return derive_seed(plan.probe.seed, seed, kTagProbe, epoch, layer, static_cast<int>(kind));
}

std::vector<InfoEstimate> probe_checkpoint(const ExperimentPlan& plan, std::uint64_t seed, int epoch,
                                           const NetworkState& state, unsigned jobs) {
  const ProbeConfig& pc = plan.probe;
  const auto total = static_cast<std::size_t>(pc.train_samples + pc.test_samples);
  const auto fresh = draw_samples(plan.task, total, probe_data_seed(plan, seed, epoch));

  Matrix x(static_cast<Eigen::Index>(total), state.spec.input_dim);
  for (std::size_t r = 0; r < total; ++r) {
    x.row(static_cast<Eigen::Index>(r)) =
        Eigen::Map<const RowVector>(fresh[r].input.data(), state.spec.input_dim);
  }
  const ForwardTrace trace = forward(state, x);
  const auto reps = state.spec.representation_layers();

  std::vector<std::pair<int, LabelKind>> work;
  for (int layer : plan.layers_to_probe()) {
    for (LabelKind kind : plan.probed_kinds) work.emplace_back(layer, kind);
  }

  std::vector<InfoEstimate> out(work.size());
  parallel_for(work.size(), jobs, [&](std::size_t j) {
    const auto [layer, kind] = work[j];
    const Matrix& z = trace.outputs.at(reps.at(static_cast<std::size_t>(layer)));
    std::vector<int> y(total);
    for (std::size_t r = 0; r < total; ++r) y[r] = fresh[r].label(kind);

    ProbeConfig cfg = pc;
    cfg.seed = probe_job_seed(plan, seed, epoch, layer, kind);
    const int classes = plan.task.classes(kind);
    const ProbeState probe = train_probe(z, y, classes, cfg);

    const Matrix z_test = z.bottomRows(pc.test_samples);
    const std::span<const int> y_test(y.data() + pc.train_samples, static_cast<std::size_t>(pc.test_samples));
    InfoEstimate est = estimate_usable_info(probe, z_test, y_test, uniform_marginal(classes));
    est.label_kind = kind;
    est.layer_index = layer;
    est.epoch = epoch;
    est.probe_seed = cfg.seed;
    out[j] = est;
  });
  return out;
}

RunRecord run_experiment(const ExperimentPlan& plan, std::uint64_t seed, const RunOptions& options) {
  plan.validate();
  const auto t0 = std::chrono::steady_clock::now();

  RunRecord record;
  record.plan = plan;
  record.seed = seed;
  record.started_at = utc_timestamp();
  if (options.sink) options.sink->begin(plan, seed);

  CBConfig task = plan.task;
  task.seed = task_seed(plan, seed);
  const Dataset data = generate(task);

  std::map<LabelKind, std::pair<LabeledSet, LabeledSet>> sets;
  auto split_for = [&](LabelKind kind) -> const std::pair<LabeledSet, LabeledSet>& {
    auto it = sets.find(kind);
    if (it == sets.end()) {
      it = sets.emplace(kind, std::make_pair(data.labeled(data.train, kind),
                                             data.labeled(data.validation, kind))).first;
    }
    return it->second;
  };

  NetworkState state = init_network(plan.network_spec(), init_seed(seed));
  const std::set<int> schedule(plan.probe_schedule.begin(), plan.probe_schedule.end());
  const int pre_epochs = plan.pretrain ? plan.pretrain->epochs : 0;

  auto abort_run = [&](const std::string& why) {
    record.status = RunStatus::aborted;
    record.failure = why;
  };
  auto probe_now = [&](int epoch) {
    if (!schedule.contains(epoch)) return;
    if (options.sink) options.sink->checkpoint(epoch, state);
    auto rows = probe_checkpoint(plan, seed, epoch, state, options.jobs);
    if (options.sink) options.sink->info(rows);
    record.info.insert(record.info.end(), rows.begin(), rows.end());
  };

  try {
    probe_now(0);
    int diverged = 0;
    for (int e = 1; e <= plan.training.epochs; ++e) {
      const bool pretraining = e <= pre_epochs;
      const LabelKind kind = pretraining ? plan.pretrain->label_kind : plan.main_kind;
      if (pre_epochs > 0 && e == pre_epochs + 1) state.reset_velocity();

      const auto& [train_set, val_set] = split_for(kind);
      const EpochMetrics m = train_epoch(state, train_set, plan.training);
      EpochRecord row;
      row.epoch = e;
      row.phase = pretraining ? "pretrain" : "train";
      row.train_loss_bits = m.loss_bits;
      row.train_acc = m.accuracy;
      row.val_acc = evaluate(state, val_set).accuracy;
      row.lr = m.lr;
      record.metrics.push_back(row);
      if (options.sink) options.sink->epoch(row);

      if (!std::isfinite(m.loss_bits) || m.loss_bits > kDivergedLossBits) {
        if (++diverged >= kDivergedEpochs) {
          abort_run("training loss diverged for " + std::to_string(kDivergedEpochs) + " epochs");
          break;
        }
      } else {
        diverged = 0;
      }
      probe_now(e);
    }
  } catch (const NumericalError& err) {
    abort_run(err.what());
  }

  record.final_state = state;
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (options.sink) options.sink->finish(record);
  return record;
}

MeanSem mean_sem(std::span<const double> values) {
  MeanSem m;
  m.count = static_cast<int>(values.size());
  if (values.empty()) return m;
  double sum = 0.0;
  for (double v : values) sum += v;
  m.mean = sum / m.count;
  if (m.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.sem = std::sqrt(ss / (m.count - 1)) / std::sqrt(static_cast<double>(m.count));
  }
  return m;
}

Aggregate aggregate_runs(std::span<const RunRecord> runs) {
  using Key = std::tuple<int, int, LabelKind>;
  std::map<Key, std::pair<std::vector<double>, std::vector<double>>> info;
  std::map<int, std::vector<double>> acc;
  Aggregate agg;
  for (const RunRecord& r : runs) {
    if (r.status != RunStatus::completed) continue;
    for (const InfoEstimate& e : r.info) {
      auto& [clamped, raw] = info[Key{e.epoch, e.layer_index, e.label_kind}];
      clamped.push_back(e.iu);
      raw.push_back(e.iu_raw);
      agg.h_y_max = std::max(agg.h_y_max, e.h_y);
    }
    for (const EpochRecord& m : r.metrics) acc[m.epoch].push_back(m.val_acc);
  }
  for (const auto& [key, vals] : info) {
    AggregatePoint p;
    std::tie(p.epoch, p.layer, p.kind) = key;
    p.iu = mean_sem(vals.first);
    p.iu_raw = mean_sem(vals.second);
    agg.info.push_back(p);
  }
  for (const auto& [epoch, vals] : acc) agg.val_acc.emplace_back(epoch, mean_sem(vals));
  return agg;
}

std::size_t SeedSweep::failures() const {
  return static_cast<std::size_t>(std::count(failed.begin(), failed.end(), true));
}

SeedSweep run_seed_sweep(const ExperimentPlan& plan, const RunOptions& options,
                         const std::vector<RunSink*>& sinks) {
  if (plan.seeds.size() < 2) throw InputError("a seed sweep needs at least 2 seeds");
  plan.validate();
  if (!sinks.empty() && sinks.size() != plan.seeds.size()) {
    throw InputError("need one sink per seed");
  }
  SeedSweep sweep;
  sweep.runs.resize(plan.seeds.size());
  const unsigned outer = std::min<unsigned>(std::max(1u, options.jobs), static_cast<unsigned>(plan.seeds.size()));
  parallel_for(plan.seeds.size(), outer, [&](std::size_t i) {
    RunOptions inner;
    inner.jobs = outer > 1 ? 1 : options.jobs;
    inner.sink = sinks.empty() ? nullptr : sinks[i];
    sweep.runs[i] = run_experiment(plan, plan.seeds[i], inner);
  });
  for (const auto& r : sweep.runs) sweep.failed.push_back(r.status != RunStatus::completed);
  sweep.aggregate = aggregate_runs(sweep.runs);
  return sweep;
}

ExperimentPlan pretraining_plan(const ExperimentPlan& base, int pretrain_epochs, int post_epochs) {
  if (pretrain_epochs < 0 || post_epochs < 1) throw InputError("invalid pretraining epoch counts");
  ExperimentPlan plan = base;
  plan.name = base.name + "_pre" + std::to_string(pretrain_epochs);
  plan.training.epochs = pretrain_epochs + post_epochs;
  plan.pretrain.reset();
  if (pretrain_epochs > 0) plan.pretrain = PretrainSpec{LabelKind::color, pretrain_epochs};
  plan.probe_schedule = {plan.training.epochs};
  if (plan.probed_layers.empty()) plan.probed_layers = {plan.hidden_layer_count() - 1};
  plan.probed_kinds = {LabelKind::direction, LabelKind::color};
  return plan;
}

std::vector<PretrainPoint> run_pretraining_sweep(const ExperimentPlan& plan,
                                                 std::span<const int> pretrain_epochs, int post_epochs,
                                                 const RunOptions& options) {
  if (pretrain_epochs.empty()) throw InputError("pretraining sweep needs at least one epoch count");
  std::vector<PretrainPoint> out;
  for (int p : pretrain_epochs) {
    const ExperimentPlan sub = pretraining_plan(plan, p, post_epochs);
    PretrainPoint point;
    point.pretrain_epochs = p;
    point.sweep = run_seed_sweep(sub, options);
    const int last = sub.hidden_layer_count() - 1;
    std::vector<double> dir, col, acc;
    for (const RunRecord& r : point.sweep.runs) {
      if (r.status != RunStatus::completed) continue;
      if (const auto* d = r.find(sub.training.epochs, last, LabelKind::direction)) dir.push_back(d->iu);
      if (const auto* c = r.find(sub.training.epochs, last, LabelKind::color)) col.push_back(c->iu);
      acc.push_back(r.final_val_acc());
    }
    point.direction_iu = mean_sem(dir);
    point.color_iu = mean_sem(col);
    point.val_acc = mean_sem(acc);
    out.push_back(std::move(point));
  }
  return out;
}

CoarseResult run_coarse_variant(const ExperimentPlan& plan, std::uint64_t seed, const RunOptions& options) {
  if (!plan.task.coarse_groups) throw ConfigError("coarse variant needs task.coarse_groups");
  if (plan.main_kind != LabelKind::coarse) throw ConfigError("coarse variant trains on coarse labels");
  auto has = [&](LabelKind k) {
    return std::find(plan.probed_kinds.begin(), plan.probed_kinds.end(), k) != plan.probed_kinds.end();
  };
  if (!has(LabelKind::coarse) || !has(LabelKind::direction)) {
    throw ConfigError("coarse variant must probe both coarse and direction labels");
  }

  CoarseResult result;
  result.record = run_experiment(plan, seed, options);
  const RunRecord& r = result.record;

  const auto layers = plan.layers_to_probe();
  const int last = *std::max_element(layers.begin(), layers.end());
  const auto fine = r.curve(last, LabelKind::direction);
  if (!fine.empty()) {
    result.max_fine_iu = fine.front().iu;
    result.max_fine_epoch = fine.front().epoch;
    for (const auto& e : fine) {
      if (e.iu > result.max_fine_iu) {
        result.max_fine_iu = e.iu;
        result.max_fine_epoch = e.epoch;
      }
    }
    result.final_fine_iu = fine.back().iu;
    result.forgetting_gap = result.max_fine_iu - result.final_fine_iu;
  }

  bool first = true;
  for (const auto& c : r.info) {
    if (c.label_kind != LabelKind::coarse) continue;
    result.max_coarse_iu = std::max(result.max_coarse_iu, c.iu);
    if (const auto* f = r.find(c.epoch, c.layer_index, LabelKind::direction)) {
      const double margin = f->iu - c.iu;
      result.hierarchy_margin = first ? margin : std::min(result.hierarchy_margin, margin);
      first = false;
    }
  }
  return result;
}

std::vector<CoarseRegime> default_coarse_regimes() {
  return {{"small_batch_high_lr", 32, 0.5}, {"large_batch_low_lr", 512, 0.01}};
}

ExperimentPlan with_regime(const ExperimentPlan& plan, const CoarseRegime& regime) {
  ExperimentPlan p = plan;
  p.name = plan.name + "_" + regime.name;
  p.training.batch_size = regime.batch_size;
  p.training.learning_rate = regime.learning_rate;
  return p;
}

}  // namespace repinfo
