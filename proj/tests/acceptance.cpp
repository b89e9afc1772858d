// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Runs are written under --out so the iu <= h_y sweep (criterion 8) can read
// every info.csv produced here.

#include "repinfo/config.hpp"
#include "repinfo/gradcheck.hpp"
#include "repinfo/harness.hpp"
#include "repinfo/mi_oracle.hpp"
#include "repinfo/parallel.hpp"
#include "repinfo/report.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

using namespace repinfo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<std::uint64_t> seeds8() { return {0, 1, 2, 3, 4, 5, 6, 7}; }

/// Runs a plan over its seeds, streaming each run into `store`.
std::vector<RunRecord> sweep_to_disk(const ExperimentPlan& plan, const RunStore& store, unsigned jobs,
                                     std::vector<fs::path>* dirs = nullptr) {
  std::vector<std::unique_ptr<RunWriter>> writers;
  std::vector<RunSink*> sinks;
  for (std::size_t i = 0; i < plan.seeds.size(); ++i) {
    writers.push_back(std::make_unique<RunWriter>(store));
    sinks.push_back(writers.back().get());
  }
  SeedSweep sweep = run_seed_sweep(plan, RunOptions{.jobs = jobs}, sinks);
  if (dirs) {
    for (const auto& w : writers) dirs->push_back(w->path());
  }
  return std::move(sweep.runs);
}

double iu_at(const RunRecord& r, int layer, LabelKind kind) {
  const InfoEstimate* e = r.find(r.plan.training.epochs, layer, kind);
  return e ? e->iu : std::nan("");
}

class Suite {
 public:
  Suite(fs::path out, unsigned jobs) : out_(std::move(out)), jobs_(jobs) { fs::create_directories(out_); }

  Outcome gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string worst;
    for (const auto& c : standard_gradcheck_suite()) {
      const GradCheckReport r = gradient_check(c.spec, 0, 1e-3);
      ok = ok && r.max_rel_error < c.tolerance;
      worst += fmt(" %s=%.2e", c.name.c_str(), r.max_rel_error);
    }
    const double t = seconds_since(t0);
    return {ok && t < 10.0, fmt("%.2fs;", t) + worst};
  }

  Outcome bound_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    OracleOptions o;
    o.trials = 20;
    o.jobs = jobs_;
    const OracleSummary s = run_oracle_trials(o);
    const double t = seconds_since(t0);
    int bounded = 0, det = 0, tight = 0;
    for (const auto& tr : s.trials) {
      bounded += tr.bound_ok;
      if (tr.family == JointFamily::deterministic) {
        ++det;
        tight += tr.tight_ok;
      }
    }
    return {s.bound_holds() && s.tight_holds() && t < 300.0,
            fmt("bound %d/20, deterministic tight %d/%d, %.1fs", bounded, tight, det, t)};
  }

  // Criterion 3 plan: Small FC n=2 preset, probed at the final epoch on the
  // last hidden layer.
  static ExperimentPlan small_fc_plan() {
    ExperimentPlan p = preset("smallfc_n2");
    p.seeds = seeds8();
    p.probe_schedule = {p.training.epochs};
    p.probed_layers = {p.hidden_layer_count() - 1};
    return p;
  }

  Outcome small_fc() {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentPlan p = small_fc_plan();
    small_runs_ = sweep_to_disk(p, RunStore(out_ / "c3_smallfc_n2"), jobs_, &small_dirs_);
    const int last = p.hidden_layer_count() - 1;
    int good = 0;
    std::string per_seed;
    for (const auto& r : small_runs_) {
      const double d = iu_at(r, last, LabelKind::direction), c = iu_at(r, last, LabelKind::color);
      const double acc = r.final_val_acc();
      const bool ok = r.status == RunStatus::completed && d >= 0.9 && c <= 0.1 && acc >= 0.98;
      good += ok;
      per_seed += fmt(" [s%llu dir=%.3f col=%.3f acc=%.3f%s]", static_cast<unsigned long long>(r.seed), d, c,
                      acc, ok ? "" : " x");
    }
    return {good >= 6, fmt("%d/8 seeds meet dir>=0.9, col<=0.1, val_acc>=0.98; %.0fs;", good, seconds_since(t0)) +
                           per_seed};
  }

  // Criteria 4 and 5 share one n=10 sweep probed at the final epoch on every layer.
  void ensure_medium_runs() {
    if (!medium_runs_.empty()) return;
    ExperimentPlan p = preset("mediumfc_n10");
    p.seeds = seeds8();
    p.probe_schedule = {p.training.epochs};
    medium_runs_ = sweep_to_disk(p, RunStore(out_ / "c4_mediumfc_n10"), jobs_);
  }

  Outcome medium_fc() {
    ensure_medium_runs();
    const int last = medium_runs_.front().plan.hidden_layer_count() - 1;
    int good = 0;
    std::string per_seed;
    for (const auto& r : medium_runs_) {
      const double d = iu_at(r, last, LabelKind::direction), c = iu_at(r, last, LabelKind::color);
      const bool ok = r.status == RunStatus::completed && d >= 3.0 && c <= 0.3;
      good += ok;
      per_seed += fmt(" [s%llu dir=%.3f col=%.3f%s]", static_cast<unsigned long long>(r.seed), d, c, ok ? "" : " x");
    }
    return {good >= 6, fmt("%d/8 seeds meet dir>=3.0, col<=0.3;", good) + per_seed};
  }

  Outcome layer_ordering() {
    ensure_medium_runs();
    const int last = medium_runs_.front().plan.hidden_layer_count() - 1;
    int good = 0;
    std::string per_seed;
    for (const auto& r : medium_runs_) {
      const double first = iu_at(r, 0, LabelKind::color), final_layer = iu_at(r, last, LabelKind::color);
      const bool ok = r.status == RunStatus::completed && final_layer <= first - 0.2;
      good += ok;
      per_seed += fmt(" [s%llu first=%.3f last=%.3f%s]", static_cast<unsigned long long>(r.seed), first,
                      final_layer, ok ? "" : " x");
    }
    return {good >= 6, fmt("%d/8 seeds meet last<=first-0.2;", good) + per_seed};
  }

  Outcome pretraining() {
    ExperimentPlan base = preset("mediumfc_n10");
    base.seeds = seeds8();
    const std::vector<int> ps{0, 20};
    const auto points = run_pretraining_sweep(base, ps, 80, RunOptions{.jobs = jobs_});
    const RunStore store(out_ / "c6_pretrain_n10");
    for (const auto& pt : points) {
      for (const auto& r : pt.sweep.runs) save_run(r, store);
    }
    const PretrainPoint& p0 = points[0];
    const PretrainPoint& p20 = points[1];
    const bool ok = p20.color_iu.mean >= p0.color_iu.mean + 0.5 && p20.val_acc.mean < p0.val_acc.mean;
    return {ok, fmt("P=0 color %.3f+-%.3f acc %.4f; P=20 color %.3f+-%.3f acc %.4f", p0.color_iu.mean,
                    p0.color_iu.sem, p0.val_acc.mean, p20.color_iu.mean, p20.color_iu.sem, p20.val_acc.mean)};
  }

  Outcome coarse_hierarchy() {
    ExperimentPlan base = preset("coarse_n10");
    base.probe_schedule = {0, 1, 2, 5, 10, 20, 40, 60, 80, base.training.epochs};
    bool ok = true;
    std::string detail;
    for (const auto& regime : default_coarse_regimes()) {
      const ExperimentPlan p = with_regime(base, regime);
      const RunStore store(out_ / ("c7_" + regime.name));
      RunWriter writer(store);
      const CoarseResult r = run_coarse_variant(p, 0, RunOptions{.jobs = jobs_, .sink = &writer});
      const bool regime_ok =
          r.record.status == RunStatus::completed && r.hierarchy_margin >= -0.1 && r.max_coarse_iu <= 1.0;
      ok = ok && regime_ok;
      detail += fmt(" [%s margin=%.3f max_coarse=%.3f forgetting_gap=%.3f (max %.3f@%d, final %.3f)%s]",
                    regime.name.c_str(), r.hierarchy_margin, r.max_coarse_iu, r.forgetting_gap, r.max_fine_iu,
                    r.max_fine_epoch, r.final_fine_iu, regime_ok ? "" : " x");
    }
    return {ok, "fine>=coarse-0.1 and coarse<=1;" + detail};
  }

  Outcome estimator_sanity() {
    // Independence null: Gaussian Z, balanced binary labels drawn independently.
    ProbeConfig cfg;
    Rng rng(20261015);
    std::normal_distribution<double> normal;
    const int rows = cfg.train_samples + cfg.test_samples;
    Matrix z(rows, 16);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
    std::vector<int> y(static_cast<std::size_t>(rows));
    for (int i = 0; i < rows; ++i) y[static_cast<std::size_t>(i)] = i % 2;
    std::shuffle(y.begin(), y.end(), rng);
    const ProbeState probe = train_probe(z, y, 2, cfg);
    const InfoEstimate e =
        estimate_usable_info(probe, z.bottomRows(cfg.test_samples), std::span(y).last(cfg.test_samples),
                             uniform_marginal(2));
    const bool null_ok = std::abs(e.iu_raw) <= 0.05;

    // Ceiling: every info.csv under the output root.
    std::size_t files = 0, rows_checked = 0, violations = 0;
    for (const auto& entry : fs::recursive_directory_iterator(out_)) {
      if (entry.path().filename() != "info.csv") continue;
      std::ifstream in(entry.path(), std::ios::binary);
      for (const auto& row : read_info_csv(in)) {
        ++rows_checked;
        violations += !(row.iu <= row.h_y);
      }
      ++files;
    }
    const bool ceiling_ok = violations == 0 && rows_checked > 0;
    return {null_ok && ceiling_ok, fmt("null iu_raw=%.4f; iu<=h_y on %zu rows in %zu info.csv files, %zu violations",
                                       e.iu_raw, rows_checked, files, violations)};
  }

  Outcome determinism() {
    if (small_dirs_.empty()) small_fc();
    std::vector<fs::path> again;
    sweep_to_disk(small_fc_plan(), RunStore(out_ / "c9_smallfc_n2_repeat"), jobs_, &again);
    auto slurp = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      std::ostringstream s;
      s << in.rdbuf();
      return s.str();
    };
    int identical = 0;
    for (std::size_t i = 0; i < again.size(); ++i) {
      identical += slurp(small_dirs_[i] / "info.csv") == slurp(again[i] / "info.csv") &&
                   slurp(small_dirs_[i] / "metrics.csv") == slurp(again[i] / "metrics.csv");
    }
    return {identical == static_cast<int>(again.size()),
            fmt("%d/%zu seeds bit-identical info.csv and metrics.csv", identical, again.size())};
  }

 private:
  fs::path out_;
  unsigned jobs_;
  std::vector<RunRecord> small_runs_, medium_runs_;
  std::vector<fs::path> small_dirs_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string out = "acceptance_runs";
  unsigned jobs = default_jobs();
  std::vector<int> only;
  app.add_option("--out", out, "Directory for runs written by the suite");
  app.add_option("--jobs", jobs, "Worker threads");
  app.add_option("--only", only, "Criterion numbers to run (default all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  std::error_code ec;
  fs::remove_all(out, ec);
  Suite suite(out, jobs);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 gradient correctness", [&] { return suite.gradients(); }},
      {"2 mutual-information bound", [&] { return suite.bound_oracle(); }},
      {"3 small FC n=2 minimality", [&] { return suite.small_fc(); }},
      {"4 medium FC n=10 minimality", [&] { return suite.medium_fc(); }},
      {"5 colour information decreases with depth", [&] { return suite.layer_ordering(); }},
      {"6 colour pretraining effect", [&] { return suite.pretraining(); }},
      {"7 coarse-label hierarchy", [&] { return suite.coarse_hierarchy(); }},
      {"8 estimator sanity", [&] { return suite.estimator_sanity(); }},
      {"9 determinism", [&] { return suite.determinism(); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && !selected.count(static_cast<int>(i + 1))) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
