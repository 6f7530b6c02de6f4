#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fishdip/augcodec.hpp"
#include "fishdip/errors.hpp"
#include "fishdip/masking.hpp"
#include "fishdip/metrics.hpp"
#include "fishdip/model.hpp"
#include "fishdip/param_store.hpp"

namespace fishdip {

// Update strategies: dense fine-tuning, a mask fixed from importance scores
// at initialization, or a mask rebuilt every m steps from the currently
// worst-performing examples.
enum class Method { full, fixed_fish, fishdip };

const char* method_name(Method method);
Method method_from_name(std::string_view name);

struct ExperimentConfig {
  std::string corpus_dir;
  Task task = Task::ner;
  Method method = Method::fishdip;

  double k_percent = 1.0;       // fraction of parameters allowed to update
  int m_steps = 100;            // mask recalibration period
  int n_regressing = 15;        // examples scored at each recalibration
  int fisher_init_samples = 0;  // fixed_fish sample count; 0 = min(1024, |train|)

  double lr = 5e-4;
  double lr_decay = 1.0;        // per-step multiplicative factor; 1 = constant
  double adam_beta1 = 0.9;      // optimizer first-moment horizon
  double adam_beta2 = 0.999;    // optimizer second-moment horizon
  int total_steps = 0;
  int batch_size = 8;
  std::uint64_t seed = 0;

  double train_fraction = 1.0;  // applied to the 70% train pool
  std::uint64_t split_seed = 0; // split identity, independent of the run seed

  // When set, recalibration ranks only the current minibatch instead of
  // sweeping the whole train split.
  bool rank_on_minibatch = false;

  // Cap on dev examples decoded per evaluation; 0 = whole dev split.
  int dev_eval_max = 0;

  ModelConfig model;            // vocab_size 0 = fill from the corpus
  std::string output_dir;       // empty = keep the run in memory only

  // config_error on out-of-range fields (k outside (0,100], nonpositive
  // m/n/batch, lr <= 0, fraction outside (0,1], bad model dims).
  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

// ---------------------------------------------------------------------------
// Run records
// ---------------------------------------------------------------------------

struct StepRecord {
  int t = 0;
  std::vector<int> minibatch;  // train-split positions, ascending
  double mean_loss = 0.0;
};

struct MaskEvent {
  int t = 0;
  std::size_t popcount = 0;
  std::optional<double> jaccard_prev;  // absent on the first event
};

struct TrajectoryRow {
  int t = 0;
  std::vector<double> losses;  // one per train example, split order
};

struct DevPoint {
  int step = 0;   // number of completed updates
  double value = 0.0;
};

struct RunLog {
  ExperimentConfig config;

  std::vector<StepRecord> steps;
  std::vector<TrajectoryRow> trajectory;   // rows at recalibration times + final
  std::vector<MaskEvent> mask_events;
  std::vector<SparsityMask> masks;         // every mask built, in event order
  std::vector<DevPoint> dev_history;
  std::vector<MetricReport> final_metrics; // test metrics at the selected checkpoint

  int best_step = 0;                       // updates completed at the kept checkpoint
  double best_dev = 0.0;
  std::vector<double> best_params;
  std::vector<double> final_params;        // parameters after the last update

  std::vector<int> train_ids, dev_ids, test_ids;  // corpus indices
  std::uint64_t split_digest = 0;          // hash of the id lists + split knobs
  double final_sample_loss_variance = 0.0; // population variance of the last row
};

// ---------------------------------------------------------------------------
// Generic training loop
// ---------------------------------------------------------------------------

// Objective callbacks: any differentiable model over a flat ParamStore can
// run the loop (the step-trace tests use a two-parameter regression).
struct LoopHooks {
  int train_size = 0;
  // Current loss of one train example; must not touch parameters or grads.
  LossFn example_loss;
  // Gradient of one example's loss, written (not accumulated) into the span.
  GradFn example_grad;
  // Accumulates the gradient of the minibatch MEAN loss into store.grad and
  // returns that mean. Ids may repeat (sampling is with replacement).
  std::function<double(std::span<const int> ids)> batch_loss_backward;
};

struct LoopConfig {
  Method method = Method::fishdip;
  double k_percent = 1.0;
  int m_steps = 100;
  int n_regressing = 15;
  int fisher_init_samples = 0;  // 0 = min(1024, train_size)
  double lr = 5e-4;
  double lr_decay = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  int total_steps = 0;
  int batch_size = 8;
  std::uint64_t seed = 0;
  bool rank_on_minibatch = false;
};

// Runs the masked-update loop, filling log.steps / trajectory / mask_events /
// masks. `periodic` (optional) fires after every m-th update and after the
// final one, receiving the number of completed updates; the experiment
// runner hangs dev evaluation on it. numeric_error on NaN losses, naming
// the step and minibatch.
void run_loop(const LoopConfig& cfg, ParamStore& store, const LoopHooks& hooks, RunLog& log,
              const std::function<void(int completed)>& periodic = {});

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

// Loads the corpus, splits it, builds vocab + model, runs the loop with dev
// checkpoint selection, evaluates test with the kept checkpoint, and writes
// the run directory when config.output_dir is set.
RunLog run(const ExperimentConfig& config);

// Greedy-decodes each example, parses the generations, and scores them
// against the stored labels. max_examples 0 = all. The model must share the
// vocab the ids were encoded with.
std::vector<MetricReport> evaluate_model(Seq2SeqModel& model, const Vocab& vocab,
                                         std::span<const AugmentedExample> examples,
                                         const TaskSchema& schema, int max_examples = 0);

// Run directory layout: run.json, vocab.json, steps.jsonl, trajectory.csv,
// mask_events.jsonl, metrics.json, checkpoint.bin. The model must hold the
// selected (best) parameters; log.config.output_dir names the directory.
void save_run_log(const RunLog& log, const Vocab& vocab, const Seq2SeqModel& model);

// The slice of a run directory needed for reporting (metrics.json).
struct RunSummary {
  Task task = Task::ner;
  Method method = Method::fishdip;
  std::uint64_t seed = 0;
  std::uint64_t split_digest = 0;
  int total_steps = 0;
  int best_step = 0;
  double best_dev = 0.0;
  std::vector<MetricReport> test_metrics;
  double final_sample_loss_variance = 0.0;
};

RunSummary summarize(const RunLog& log);
RunSummary load_run_summary(const std::string& dir);  // reads dir/metrics.json

struct MethodReport {
  Method method = Method::fishdip;
  std::vector<RunSummary> runs;    // sorted by seed
  double mean_metric = 0.0;        // primary test metric
  std::optional<double> std_metric;  // absent for a single run
  double mean_smoothness = 0.0;    // mean final per-sample loss variance
};

struct CompareReport {
  Task task = Task::ner;
  std::string metric;
  std::vector<MethodReport> methods;  // sorted by method name
};

// contract_error when summaries mix tasks, splits, or step budgets, or when
// methods cover different seed sets.
CompareReport compare(std::span<const RunSummary> summaries);

std::string render_text(const CompareReport& report);

}  // namespace fishdip
