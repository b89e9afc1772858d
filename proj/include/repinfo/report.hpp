#pragma once

#include "repinfo/harness.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace repinfo {

inline constexpr const char* kInfoHeader =
    "seed,epoch,layer,label_kind,h_y_bits,ce_bits,iu_raw_bits,iu_bits,probe_seed";
inline constexpr const char* kMetricsHeader = "seed,epoch,phase,train_loss_bits,train_acc,val_acc,lr";

std::string format_info_row(std::uint64_t seed, const InfoEstimate& e);
std::string format_metrics_row(std::uint64_t seed, const EpochRecord& r);

/// Parse a whole file body including the header. Throws InputError on a
/// header mismatch or malformed row (message includes the line number).
std::vector<InfoEstimate> read_info_csv(std::istream& in);
std::vector<EpochRecord> read_metrics_csv(std::istream& in);

/// Directory layout per run: plan.json, metrics.csv, info.csv,
/// checkpoints/, figures/.
class RunStore {
 public:
  explicit RunStore(std::filesystem::path root);
  const std::filesystem::path& root() const { return root_; }

  /// Creates root/run_<timestamp>_<seed>, suffixing _2, _3, ... rather
  /// than reusing an existing directory.
  std::filesystem::path create_run_dir(const std::string& timestamp, std::uint64_t seed) const;

 private:
  std::filesystem::path root_;
};

/// Streams one run into a fresh directory of `store`. Not thread-safe; one
/// writer per run.
class RunWriter : public RunSink {
 public:
  explicit RunWriter(const RunStore& store);

  void begin(const ExperimentPlan& plan, std::uint64_t seed) override;
  void epoch(const EpochRecord& row) override;
  void info(std::span<const InfoEstimate> rows) override;
  void checkpoint(int epoch, const NetworkState& state) override;
  void finish(const RunRecord& record) override;

  /// Empty until begin().
  const std::filesystem::path& path() const { return dir_; }

 private:
  void append(const std::string& file, const std::string& line) const;

  const RunStore& store_;
  std::filesystem::path dir_;
  ExperimentPlan plan_;
  std::uint64_t seed_ = 0;
};

std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, int epoch);
std::filesystem::path final_checkpoint_path(const std::filesystem::path& run_dir);

/// Writes a complete record to a fresh directory in one go.
std::filesystem::path save_run(const RunRecord& record, const RunStore& store);
/// Reads plan.json, metrics.csv, info.csv and the final checkpoint if present.
RunRecord load_run(const std::filesystem::path& run_dir);

/// Every run directory directly under `root`, sorted by name.
std::vector<std::filesystem::path> list_runs(const std::filesystem::path& root);

enum class FigureKind { info_curves, scatter, sweep_summary };

struct FigureSpec {
  FigureKind kind = FigureKind::info_curves;
  std::string title;
  std::string x_label = "epoch";
  std::string y_label = "usable information (bits)";
  std::vector<int> layers;          // empty = all present
  std::vector<LabelKind> kinds;     // empty = all present
  bool raw = false;                 // plot iu_raw instead of clamped iu
  bool show_val_acc = true;         // right-hand axis
  int width = 720;
  int height = 440;
};

/// One line per (layer, kind); deeper layers darker. The y axis spans
/// [0, h_y] (extended below zero for raw values). Throws InputError when the
/// selection matches nothing.
std::string render_info_curves(const RunRecord& record, const FigureSpec& spec);
/// Mean lines with SEM bands.
std::string render_info_curves(const Aggregate& aggregate, const FigureSpec& spec);

/// First two principal components (largest-magnitude loading positive);
/// marker shape = direction, fill = colour. Throws InputError for width < 2.
std::string render_scatter(const ActivationMatrix& acts, const std::string& title = {});

/// Final direction/colour iu and validation accuracy against P.
std::string render_sweep_summary(std::span<const PretrainPoint> points, const std::string& title = {});

/// Writes figures/info_curves.svg, figures/info_curves_raw.svg and, when the
/// record holds a final state, figures/scatter_last_hidden.svg (fresh task
/// samples). Returns the paths written.
std::vector<std::filesystem::path> write_run_figures(const std::filesystem::path& run_dir,
                                                     const RunRecord& record);

/// 2-D principal-component coordinates of the rows of `values`.
Matrix pca_project(const Matrix& values);

struct SummaryRow {
  std::string label;
  int runs = 0;
  std::optional<MeanSem> direction_iu, color_iu, coarse_iu;
  MeanSem val_acc;
  std::optional<MeanSem> forgetting_gap;
};

struct SummaryTable {
  std::vector<SummaryRow> rows;

  std::string text() const;
  std::string csv() const;
};

/// Final-epoch, last-probed-layer iu per label kind and final validation
/// accuracy across completed records, as one row. Forgetting gap is added for
/// coarse-label plans. Throws InputError for an empty list.
SummaryTable summarize(std::span<const RunRecord> records);
/// One row per pretraining epoch count.
SummaryTable summarize(std::span<const PretrainPoint> points);

}  // namespace repinfo
