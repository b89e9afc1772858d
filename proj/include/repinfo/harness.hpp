#pragma once

#include "repinfo/checkerboard.hpp"
#include "repinfo/network.hpp"
#include "repinfo/probe.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace repinfo {

struct PretrainSpec {
  LabelKind label_kind = LabelKind::color;
  int epochs = 0;

  bool operator==(const PretrainSpec&) const = default;
};

/// Everything needed to reproduce one experiment for any seed.
struct ExperimentPlan {
  std::string name = "experiment";
  CBConfig task;
  std::vector<int> hidden{10, 7, 5, 4, 3};  // affine+relu widths
  TrainConfig training;                      // training.epochs includes pretraining
  ProbeConfig probe;
  std::vector<int> probe_schedule;           // epochs to probe; 0 = before training
  LabelKind main_kind = LabelKind::direction;
  std::optional<PretrainSpec> pretrain;
  std::vector<std::uint64_t> seeds{0};
  std::vector<LabelKind> probed_kinds{LabelKind::direction, LabelKind::color};
  std::vector<int> probed_layers;            // empty = every hidden representation

  NetworkSpec network_spec() const;
  int hidden_layer_count() const { return static_cast<int>(hidden.size()); }
  /// probed_layers, or all hidden representations when empty.
  std::vector<int> layers_to_probe() const;
  void validate() const;

  bool operator==(const ExperimentPlan&) const = default;
};

/// Probe every epoch 0..epochs.
std::vector<int> every_epoch_schedule(int epochs);
/// 0..10, then every 5th epoch, always including the last.
std::vector<int> sparse_schedule(int epochs);

/// Current UTC time as YYYYMMDDTHHMMSSZ.
std::string utc_timestamp();

enum class RunStatus : std::uint8_t { completed, aborted };
const char* to_string(RunStatus status);
RunStatus parse_run_status(std::string_view text);

struct EpochRecord {
  int epoch = 0;
  std::string phase;  // "pretrain" | "train"
  double train_loss_bits = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct RunRecord {
  ExperimentPlan plan;
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::completed;
  std::string failure;
  std::vector<EpochRecord> metrics;
  std::vector<InfoEstimate> info;  // ordered by (epoch, layer, label kind)
  std::optional<NetworkState> final_state;
  std::string started_at;
  double wall_seconds = 0.0;

  /// One label kind at one layer, in epoch order.
  std::vector<InfoEstimate> curve(int layer, LabelKind kind) const;
  const InfoEstimate* find(int epoch, int layer, LabelKind kind) const;
  /// Last probed epoch, or -1 when nothing was probed.
  int final_probed_epoch() const;
  double final_val_acc() const;
};

/// Observer for streaming a run to storage while it executes.
class RunSink {
 public:
  virtual ~RunSink() = default;
  virtual void begin(const ExperimentPlan& plan, std::uint64_t seed) = 0;
  virtual void epoch(const EpochRecord& row) = 0;
  virtual void info(std::span<const InfoEstimate> rows) = 0;
  virtual void checkpoint(int epoch, const NetworkState& state) = 0;
  virtual void finish(const RunRecord& record) = 0;
};

struct RunOptions {
  unsigned jobs = 1;
  RunSink* sink = nullptr;
};

/// Seed streams used inside one run. Exposed so tests can check the
/// derivation contract.
std::uint64_t task_seed(const ExperimentPlan& plan, std::uint64_t seed);
std::uint64_t init_seed(std::uint64_t seed);
std::uint64_t probe_data_seed(const ExperimentPlan& plan, std::uint64_t seed, int epoch);
std::uint64_t probe_job_seed(const ExperimentPlan& plan, std::uint64_t seed, int epoch, int layer,
                             LabelKind kind);

/// Fresh-data usable-information estimates for a frozen network at one
/// checkpoint, for every (layer, kind) pair. Result order is layers-major.
std::vector<InfoEstimate> probe_checkpoint(const ExperimentPlan& plan, std::uint64_t seed, int epoch,
                                           const NetworkState& state, unsigned jobs);

/// Train (optionally pretrain) on a generated dataset, probing at each
/// scheduled epoch. Divergence is recorded as status aborted, not thrown.
RunRecord run_experiment(const ExperimentPlan& plan, std::uint64_t seed, const RunOptions& options = {});

struct MeanSem {
  double mean = 0.0;
  double sem = 0.0;  // sample std / sqrt(count); 0 for a single value
  int count = 0;
};
MeanSem mean_sem(std::span<const double> values);

struct AggregatePoint {
  int epoch = 0;
  int layer = 0;
  LabelKind kind = LabelKind::direction;
  MeanSem iu;      // clamped
  MeanSem iu_raw;
};

struct Aggregate {
  std::vector<AggregatePoint> info;
  std::vector<std::pair<int, MeanSem>> val_acc;  // by epoch
  double h_y_max = 0.0;
};

/// Pointwise mean/SEM over completed runs.
Aggregate aggregate_runs(std::span<const RunRecord> runs);

struct SeedSweep {
  std::vector<RunRecord> runs;
  std::vector<bool> failed;
  Aggregate aggregate;

  std::size_t failures() const;
};

/// Runs plan.seeds (at least 2) in parallel and aggregates them.
SeedSweep run_seed_sweep(const ExperimentPlan& plan, const RunOptions& options = {},
                         const std::vector<RunSink*>& sinks = {});

struct PretrainPoint {
  int pretrain_epochs = 0;
  SeedSweep sweep;
  MeanSem direction_iu, color_iu, val_acc;  // final epoch, last hidden layer
};

/// Plan with `pretrain_epochs` of colour pretraining followed by
/// `post_epochs` of training on plan.main_kind, probed only at the end.
ExperimentPlan pretraining_plan(const ExperimentPlan& base, int pretrain_epochs, int post_epochs);

std::vector<PretrainPoint> run_pretraining_sweep(const ExperimentPlan& plan,
                                                 std::span<const int> pretrain_epochs,
                                                 int post_epochs = 80, const RunOptions& options = {});

struct CoarseResult {
  RunRecord record;
  double forgetting_gap = 0.0;  // max fine iu - final fine iu (last hidden)
  double max_fine_iu = 0.0;
  int max_fine_epoch = 0;
  double final_fine_iu = 0.0;
  // min over probed (epoch, layer) of fine iu - coarse iu
  double hierarchy_margin = 0.0;
  double max_coarse_iu = 0.0;
};

CoarseResult run_coarse_variant(const ExperimentPlan& plan, std::uint64_t seed,
                                const RunOptions& options = {});

struct CoarseRegime {
  std::string name;
  int batch_size = 32;
  double learning_rate = 0.5;
};

/// {batch 32, lr 0.5} and {batch 512, lr 0.01}.
std::vector<CoarseRegime> default_coarse_regimes();

ExperimentPlan with_regime(const ExperimentPlan& plan, const CoarseRegime& regime);

}  // namespace repinfo
