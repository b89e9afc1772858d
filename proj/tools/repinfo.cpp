// repinfo: train checkerboard networks, probe usable information, report.
//
// Exit codes: 0 success, 1 configuration error, 2 numerical failure,
// 3 I/O error.

#include "repinfo/checkerboard.hpp"
#include "repinfo/config.hpp"
#include "repinfo/errors.hpp"
#include "repinfo/gradcheck.hpp"
#include "repinfo/harness.hpp"
#include "repinfo/mi_oracle.hpp"
#include "repinfo/parallel.hpp"
#include "repinfo/report.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

namespace fs = std::filesystem;
using namespace repinfo;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitIo = 3;

struct Common {
  std::string out;
  unsigned jobs = default_jobs();
};

struct PlanSource {
  std::string config;
  std::string preset;
  int seeds = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--out", c.out,
                  "Output root directory (default: $REPINFO_OUT, then the config's output.dir, then ./runs)");
  cmd->add_option("--jobs", c.jobs, "Worker threads (default: hardware concurrency)")
      ->check(CLI::PositiveNumber);
}

void add_plan_source(CLI::App* cmd, PlanSource& p, const std::string& default_preset) {
  auto* config = cmd->add_option("--config", p.config, "JSON plan document");
  cmd->add_option("--preset", p.preset,
                  "Named plan: smallfc_n2, mediumfc_n10, mediumfc_n20, mediumfc_n25, coarse_n10" +
                      (default_preset.empty() ? std::string() : " (default " + default_preset + ")"))
      ->excludes(config);
  cmd->add_option("--seeds", p.seeds, "Run seeds 0..k-1 instead of the plan's seed list")
      ->check(CLI::PositiveNumber);
}

ConfigDocument load_plan(const PlanSource& p, const std::string& default_preset) {
  ConfigDocument doc;
  if (!p.config.empty()) {
    doc = parse_config(p.config);
  } else if (!p.preset.empty()) {
    doc.plan = preset(p.preset);
  } else if (!default_preset.empty()) {
    doc.plan = preset(default_preset);
  } else {
    throw ConfigError("one of --config or --preset is required");
  }
  if (p.seeds > 0) {
    doc.plan.seeds.clear();
    for (int i = 0; i < p.seeds; ++i) doc.plan.seeds.push_back(static_cast<std::uint64_t>(i));
  }
  doc.plan.validate();
  return doc;
}

fs::path output_root(const Common& c, const std::optional<std::string>& config_dir = {}) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("REPINFO_OUT"); env && *env) return env;
  if (config_dir) return *config_dir;
  return "runs";
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string(), "write failed");
}

fs::path make_group_dir(const fs::path& root, const std::string& prefix) {
  fs::create_directories(root);
  const std::string base = prefix + "_" + utc_timestamp();
  for (int i = 1;; ++i) {
    const fs::path dir = root / (i == 1 ? base : base + "_" + std::to_string(i));
    if (fs::create_directory(dir)) return dir;
  }
}

// ---------------------------------------------------------------- commands

int cmd_gradcheck(std::uint64_t seed, double step) {
  bool ok = true;
  double worst = 0.0;
  for (const auto& c : standard_gradcheck_suite()) {
    const GradCheckReport r = gradient_check(c.spec, seed, step);
    const bool pass = r.max_rel_error < c.tolerance;
    ok = ok && pass;
    worst = std::max(worst, r.max_rel_error);
    std::printf("%-12s max_rel_error=%.3e tolerance=%.0e checked=%zu skipped=%zu %s\n", c.name.c_str(),
                r.max_rel_error, c.tolerance, r.checked, r.skipped_kinks, pass ? "ok" : "FAIL");
  }
  std::printf("max relative error %.3e: %s\n", worst, ok ? "pass" : "fail");
  return ok ? kExitOk : kExitNumerical;
}

struct GenerateArgs {
  int n = 2;
  int samples = 10000;
  double noise = 0.1;
  std::uint64_t seed = 0;
  double train_fraction = 0.9;
  int coarse_groups = 0;
  std::string file;
};

int cmd_generate(const GenerateArgs& a, const Common& common) {
  CBConfig cfg;
  cfg.n = a.n;
  cfg.num_samples = a.samples;
  cfg.noise_std = a.noise;
  cfg.seed = a.seed;
  cfg.train_fraction = a.train_fraction;
  if (a.coarse_groups > 0) cfg.coarse_groups = a.coarse_groups;
  try {
    cfg.validate();
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  const Dataset data = generate(cfg);
  fs::path path = a.file;
  if (path.empty()) {
    const fs::path root = output_root(common);
    fs::create_directories(root);
    path = root / ("checkerboard_n" + std::to_string(a.n) + "_seed" + std::to_string(a.seed) + ".csv");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  write_csv(out, data);
  if (!out) throw IoError(path.string(), "write failed");
  std::printf("wrote %zu samples (%zu train, %zu validation) to %s\n", data.samples.size(), data.train.size(),
              data.validation.size(), path.c_str());
  return kExitOk;
}

int cmd_experiment(const PlanSource& src, const Common& common) {
  const ConfigDocument doc = load_plan(src, "");
  const ExperimentPlan& plan = doc.plan;
  const RunStore store(output_root(common, doc.output_dir));

  std::vector<std::unique_ptr<RunWriter>> writers;
  std::vector<RunSink*> sinks;
  for (std::size_t i = 0; i < plan.seeds.size(); ++i) {
    writers.push_back(std::make_unique<RunWriter>(store));
    sinks.push_back(writers.back().get());
  }

  std::vector<RunRecord> runs;
  if (plan.seeds.size() == 1) {
    runs.push_back(run_experiment(plan, plan.seeds[0], {common.jobs, sinks[0]}));
  } else {
    SeedSweep sweep = run_seed_sweep(plan, {common.jobs, nullptr}, sinks);
    runs = std::move(sweep.runs);
    const fs::path group = make_group_dir(store.root(), "sweep_" + plan.name);
    const SummaryTable table = summarize(runs);
    write_file(group / "summary.csv", table.csv());
    write_file(group / "summary.txt", table.text());
    FigureSpec spec;
    spec.title = plan.name + " (" + std::to_string(runs.size()) + " seeds)";
    if (!sweep.aggregate.info.empty()) {
      write_file(group / "info_curves.svg", render_info_curves(sweep.aggregate, spec));
      spec.raw = true;
      write_file(group / "info_curves_raw.svg", render_info_curves(sweep.aggregate, spec));
    }
    std::printf("sweep summary: %s\n", group.c_str());
  }

  bool all_ok = true;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    write_run_figures(writers[i]->path(), runs[i]);
    std::printf("seed %llu: %s, final val_acc %.4f, %s\n", static_cast<unsigned long long>(runs[i].seed),
                to_string(runs[i].status), runs[i].final_val_acc(), writers[i]->path().c_str());
    if (runs[i].status != RunStatus::completed) {
      all_ok = false;
      std::fprintf(stderr, "seed %llu aborted: %s\n", static_cast<unsigned long long>(runs[i].seed),
                   runs[i].failure.c_str());
    }
  }
  std::fputs(summarize(runs).text().c_str(), stdout);
  return all_ok ? kExitOk : kExitNumerical;
}

int cmd_pretrain_sweep(const PlanSource& src, const Common& common, std::vector<int> epochs_list, int post) {
  const ConfigDocument doc = load_plan(src, "");
  if (epochs_list.empty()) epochs_list = default_pretrain_epochs();
  if (doc.plan.seeds.size() < 2) throw ConfigError("seeds: a pretraining sweep needs at least 2 seeds");
  const RunStore store(output_root(common, doc.output_dir));
  const auto points = run_pretraining_sweep(doc.plan, epochs_list, post, {common.jobs, nullptr});

  const fs::path group = make_group_dir(store.root(), "pretrain_" + doc.plan.name);
  const RunStore runs_store(group);
  bool all_ok = true;
  for (const auto& p : points) {
    for (const auto& r : p.sweep.runs) {
      save_run(r, runs_store);
      all_ok = all_ok && r.status == RunStatus::completed;
    }
  }
  const SummaryTable table = summarize(std::span<const PretrainPoint>(points));
  write_file(group / "summary.csv", table.csv());
  write_file(group / "summary.txt", table.text());
  write_file(group / "sweep_summary.svg", render_sweep_summary(points, doc.plan.name + " colour pretraining"));
  std::fputs(table.text().c_str(), stdout);
  std::printf("written to %s\n", group.c_str());
  return all_ok ? kExitOk : kExitNumerical;
}

int cmd_coarse(const PlanSource& src, const Common& common, const std::string& regime_name) {
  const ConfigDocument doc = load_plan(src, "coarse_n10");
  const RunStore store(output_root(common, doc.output_dir));
  std::vector<CoarseRegime> regimes;
  for (const auto& r : default_coarse_regimes()) {
    if (regime_name == "all" || regime_name == r.name) regimes.push_back(r);
  }
  if (regime_name == "plan") regimes.push_back({"plan", doc.plan.training.batch_size, doc.plan.training.learning_rate});
  if (regimes.empty()) throw ConfigError("--regime: unknown regime '" + regime_name + "'");

  bool all_ok = true;
  std::printf("%-22s %6s %8s %10s %14s %12s %16s %14s\n", "regime", "batch", "lr", "seed", "forgetting_gap",
              "max_fine_iu", "hierarchy_margin", "max_coarse_iu");
  for (const auto& regime : regimes) {
    const ExperimentPlan plan = regime.name == "plan" ? doc.plan : with_regime(doc.plan, regime);
    for (std::uint64_t seed : plan.seeds) {
      RunWriter writer(store);
      const CoarseResult r = run_coarse_variant(plan, seed, {common.jobs, &writer});
      write_run_figures(writer.path(), r.record);
      std::printf("%-22s %6d %8.3g %10llu %14.4f %12.4f %16.4f %14.4f\n", regime.name.c_str(), regime.batch_size,
                  regime.learning_rate, static_cast<unsigned long long>(seed), r.forgetting_gap, r.max_fine_iu,
                  r.hierarchy_margin, r.max_coarse_iu);
      if (r.record.status != RunStatus::completed) {
        all_ok = false;
        std::fprintf(stderr, "%s seed %llu aborted: %s\n", regime.name.c_str(),
                     static_cast<unsigned long long>(seed), r.record.failure.c_str());
      }
    }
  }
  return all_ok ? kExitOk : kExitNumerical;
}

int cmd_oracle(OracleOptions options, const Common& common) {
  options.jobs = common.jobs;
  const OracleSummary s = run_oracle_trials(options);
  std::printf("%5s %-14s %6s %7s %12s %12s %6s %6s\n", "trial", "family", "atoms", "classes", "exact_mi",
              "iu_raw", "bound", "tight");
  for (const auto& t : s.trials) {
    std::printf("%5d %-14s %6d %7d %12.6f %12.6f %6s %6s\n", t.index, to_string(t.family), t.atoms, t.classes,
                t.exact_mi, t.iu_raw, t.bound_ok ? "ok" : "FAIL",
                t.family == JointFamily::deterministic ? (t.tight_ok ? "ok" : "FAIL") : "-");
  }
  std::printf("bound iu_raw <= exact_mi + %.2f: %s\n", options.slack_bits, s.bound_holds() ? "holds" : "violated");
  std::printf("deterministic trials iu_raw >= %.2f exact_mi: %s\n", options.tight_fraction,
              s.tight_holds() ? "holds" : "violated");
  return s.bound_holds() ? kExitOk : kExitNumerical;
}

int cmd_report(const std::string& run_dir, const std::string& format) {
  if (!fs::is_directory(run_dir)) throw IoError(run_dir, "not a run directory");
  const RunRecord record = load_run(run_dir);
  const SummaryTable table = summarize(std::span<const RunRecord>(&record, 1));
  if (format == "csv") {
    fs::create_directories(fs::path(run_dir) / "figures");
    const fs::path path = fs::path(run_dir) / "figures" / "summary.csv";
    write_file(path, table.csv());
    std::printf("wrote %s\n", path.c_str());
  } else {
    for (const auto& p : write_run_figures(run_dir, record)) std::printf("wrote %s\n", p.c_str());
  }
  std::fputs(table.text().c_str(), stdout);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"repinfo: usable-information probes for checkerboard networks"};
  app.require_subcommand(1);
  app.footer("Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 I/O error.");

  Common common;
  PlanSource plan_src;

  std::uint64_t gc_seed = 0;
  double gc_step = 1e-3;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every layer kind");
  gradcheck->add_option("--seed", gc_seed, "Initialization seed (default 0)");
  gradcheck->add_option("--step", gc_step, "Central-difference step (default 1e-3)")->check(CLI::PositiveNumber);

  GenerateArgs gen;
  auto* generate_cmd = app.add_subcommand("generate", "Write a checkerboard dataset as CSV");
  generate_cmd->add_option("--n", gen.n, "Number of colours / targets (default 2)");
  generate_cmd->add_option("--samples", gen.samples, "Sample count (default 10000)");
  generate_cmd->add_option("--noise", gen.noise, "Checkerboard noise standard deviation (default 0.1)");
  generate_cmd->add_option("--seed", gen.seed, "Dataset seed (default 0)");
  generate_cmd->add_option("--train-fraction", gen.train_fraction, "Training split fraction (default 0.9)");
  generate_cmd->add_option("--coarse-groups", gen.coarse_groups, "Coarse grouping g dividing n (default none)");
  generate_cmd->add_option("--file", gen.file, "Output CSV path (default <out>/checkerboard_n<N>_seed<S>.csv)");
  add_common(generate_cmd, common);

  auto* experiment = app.add_subcommand("experiment", "Train and probe one plan for each seed");
  add_plan_source(experiment, plan_src, "");
  add_common(experiment, common);

  std::vector<int> epochs_list;
  int post_epochs = 80;
  auto* pretrain = app.add_subcommand("pretrain-sweep", "Colour pretraining for P epochs, then the main task");
  add_plan_source(pretrain, plan_src, "");
  pretrain->add_option("--epochs-list", epochs_list, "Pretraining epoch counts (default 0,1,2,5,10,20)")
      ->delimiter(',');
  pretrain->add_option("--post-epochs", post_epochs, "Main-task epochs after pretraining (default 80)")
      ->check(CLI::PositiveNumber);
  add_common(pretrain, common);

  std::string regime = "all";
  auto* coarse = app.add_subcommand("coarse", "Train on coarse labels, probe coarse and fine information");
  add_plan_source(coarse, plan_src, "coarse_n10");
  coarse->add_option("--regime", regime,
                     "all, small_batch_high_lr (batch 32, lr 0.5), large_batch_low_lr (batch 512, lr 0.01), "
                     "or plan (use the plan's own batch and rate); default all");
  add_common(coarse, common);

  OracleOptions oracle_opts;
  auto* oracle = app.add_subcommand("oracle", "Usable information against exact mutual information");
  oracle->add_option("--trials", oracle_opts.trials, "Random joint distributions (default 20)")
      ->check(CLI::PositiveNumber);
  oracle->add_option("--seed", oracle_opts.seed, "Master seed (default 0)");
  oracle->add_option("--train-samples", oracle_opts.n_train, "Probe training draws (default 2500)")
      ->check(CLI::PositiveNumber);
  oracle->add_option("--test-samples", oracle_opts.n_test, "Probe test draws (default 10000)")
      ->check(CLI::PositiveNumber);
  oracle->add_option("--jobs", common.jobs, "Worker threads (default: hardware concurrency)")
      ->check(CLI::PositiveNumber);

  std::string run_dir, format = "svg";
  auto* report = app.add_subcommand("report", "Render figures or a summary table for a saved run");
  report->add_option("--run", run_dir, "Run directory (contains plan.json)")->required();
  report->add_option("--format", format, "svg (figures) or csv (summary table); default svg")
      ->check(CLI::IsMember({"svg", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gradcheck) return cmd_gradcheck(gc_seed, gc_step);
    if (*generate_cmd) return cmd_generate(gen, common);
    if (*experiment) return cmd_experiment(plan_src, common);
    if (*pretrain) return cmd_pretrain_sweep(plan_src, common, epochs_list, post_epochs);
    if (*coarse) return cmd_coarse(plan_src, common, regime);
    if (*oracle) return cmd_oracle(oracle_opts, common);
    if (*report) return cmd_report(run_dir, format);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kExitIo;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}
