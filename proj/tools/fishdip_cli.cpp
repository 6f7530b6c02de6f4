// fishdip — sparse fine-tuning laboratory CLI.
//
// Subcommands:
//   gen        build a synthetic corpus from a generator spec
//   train      run one training experiment (config file + flag overrides)
//   eval       score a saved checkpoint on a corpus split
//   compare    aggregate run directories into a per-method report
//   mask-stats summarize mask size and churn from a run directory
//
// Exit codes: 0 success, 1 configuration/usage error, 2 runtime failure.
// FISHDIP_LOG_LEVEL in {error, info, debug} controls stderr verbosity.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fishdip/corpus.hpp"
#include "fishdip/errors.hpp"
#include "fishdip/serialize.hpp"
#include "fishdip/trainer.hpp"

namespace {

using nlohmann::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw fishdip::io_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw fishdip::parse_error(path + ": " + e.what());
  }
}

// User-supplied config/spec files with missing or mistyped fields are
// configuration errors (exit 1), not runtime failures.
template <typename T>
T config_from_file(const std::string& path) {
  try {
    return read_json_file(path).get<T>();
  } catch (const json::exception& e) {
    throw fishdip::config_error(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenArgs {
  std::string spec_path;
  std::string out_dir;
};

int run_gen(const GenArgs& args) {
  const auto spec = config_from_file<fishdip::GenSpec>(args.spec_path);
  spec.validate();
  const auto examples = fishdip::generate(spec);
  fishdip::save_corpus(args.out_dir, spec.schema(), examples);
  std::cout << "wrote " << examples.size() << " " << fishdip::task_name(spec.task)
            << " examples to " << args.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config_path;
  std::optional<std::string> corpus_dir, task, method, output_dir;
  std::optional<double> k, lr, lr_decay, beta1, beta2, fraction;
  std::optional<int> m, n, fisher_samples, steps, batch, dev_eval_max;
  std::optional<std::uint64_t> seed, split_seed;
  std::optional<int> d_model, heads, enc_layers, dec_layers, max_len;
  bool rank_on_minibatch = false;
};

int run_train(const TrainArgs& args) {
  fishdip::ExperimentConfig config;
  if (!args.config_path.empty())
    config = config_from_file<fishdip::ExperimentConfig>(args.config_path);

  if (args.corpus_dir) config.corpus_dir = *args.corpus_dir;
  if (args.task) config.task = fishdip::task_from_name(*args.task);
  if (args.method) config.method = fishdip::method_from_name(*args.method);
  if (args.k) config.k_percent = *args.k;
  if (args.m) config.m_steps = *args.m;
  if (args.n) config.n_regressing = *args.n;
  if (args.fisher_samples) config.fisher_init_samples = *args.fisher_samples;
  if (args.lr) config.lr = *args.lr;
  if (args.lr_decay) config.lr_decay = *args.lr_decay;
  if (args.beta1) config.adam_beta1 = *args.beta1;
  if (args.beta2) config.adam_beta2 = *args.beta2;
  if (args.steps) config.total_steps = *args.steps;
  if (args.batch) config.batch_size = *args.batch;
  if (args.seed) config.seed = *args.seed;
  if (args.fraction) config.train_fraction = *args.fraction;
  if (args.split_seed) config.split_seed = *args.split_seed;
  if (args.dev_eval_max) config.dev_eval_max = *args.dev_eval_max;
  if (args.output_dir) config.output_dir = *args.output_dir;
  if (args.rank_on_minibatch) config.rank_on_minibatch = true;
  if (args.d_model) config.model.d_model = *args.d_model;
  if (args.heads) config.model.n_heads = *args.heads;
  if (args.enc_layers) config.model.n_enc_layers = *args.enc_layers;
  if (args.dec_layers) config.model.n_dec_layers = *args.dec_layers;
  if (args.max_len) config.model.max_len = *args.max_len;

  config.validate();
  const fishdip::RunLog log = fishdip::run(config);

  for (const auto& report : log.final_metrics) {
    char line[128];
    std::snprintf(line, sizeof line, "test %s: %.4f", report.metric.c_str(), report.value);
    std::cout << line << " (checkpoint from step " << log.best_step << ")\n";
  }
  if (!config.output_dir.empty()) std::cout << "run written to " << config.output_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string run_dir;
  std::string corpus_dir;  // override; default from run.json
  std::string split = "test";
  int max_examples = 0;
};

int run_eval(const EvalArgs& args) {
  const auto run_json = read_json_file(args.run_dir + "/run.json");
  const auto config = run_json.get<fishdip::ExperimentConfig>();

  const std::string corpus_dir = args.corpus_dir.empty() ? config.corpus_dir : args.corpus_dir;
  const fishdip::Corpus corpus = fishdip::load_corpus(corpus_dir);
  if (corpus.schema.task != config.task)
    throw fishdip::config_error("corpus task does not match the run's task");

  const fishdip::Split split =
      fishdip::subsample(corpus.examples, config.train_fraction, config.split_seed);
  const std::vector<fishdip::AugmentedExample>* examples = nullptr;
  if (args.split == "test") examples = &split.test;
  else if (args.split == "dev") examples = &split.dev;
  else if (args.split == "train") examples = &split.train;
  else throw fishdip::config_error("--split must be one of test, dev, train");

  const fishdip::Vocab vocab =
      read_json_file(args.run_dir + "/vocab.json").get<fishdip::Vocab>();
  fishdip::Seq2SeqModel model = fishdip::load_model(args.run_dir + "/checkpoint.bin");

  const auto reports =
      fishdip::evaluate_model(model, vocab, *examples, corpus.schema, args.max_examples);
  json out = json::object();
  out["split"] = args.split;
  out["n_examples"] = examples->size();
  for (const auto& r : reports) {
    out["metrics"][r.metric] = r.value;
    out["counts"][r.metric] = {{"precision", r.counts.precision()},
                               {"recall", r.counts.recall()},
                               {"f1", r.counts.f1()}};
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

int run_compare(const std::vector<std::string>& run_dirs) {
  std::vector<fishdip::RunSummary> summaries;
  summaries.reserve(run_dirs.size());
  for (const auto& dir : run_dirs) summaries.push_back(fishdip::load_run_summary(dir));
  const fishdip::CompareReport report = fishdip::compare(summaries);
  std::cout << fishdip::render_text(report);
  return 0;
}

// ---------------------------------------------------------------------------
// mask-stats
// ---------------------------------------------------------------------------

int run_mask_stats(const std::string& run_dir) {
  std::ifstream in(run_dir + "/mask_events.jsonl");
  if (!in.good()) throw fishdip::io_error("cannot open " + run_dir + "/mask_events.jsonl");

  std::vector<int> steps;
  std::vector<std::size_t> popcounts;
  std::vector<double> jaccards;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw fishdip::parse_error("mask_events.jsonl line " + std::to_string(line_no) + ": " +
                                 e.what());
    }
    steps.push_back(j.at("t").get<int>());
    popcounts.push_back(j.at("popcount").get<std::size_t>());
    if (!j.at("jaccard_prev").is_null()) jaccards.push_back(j["jaccard_prev"].get<double>());
  }

  if (steps.empty()) {
    std::cout << "no mask events (dense run)\n";
    return 0;
  }

  std::size_t min_pop = popcounts.front(), max_pop = popcounts.front();
  double sum_pop = 0.0;
  for (const auto p : popcounts) {
    min_pop = std::min(min_pop, p);
    max_pop = std::max(max_pop, p);
    sum_pop += static_cast<double>(p);
  }
  char buf[160];
  std::cout << "mask events: " << steps.size() << " (steps " << steps.front() << ".."
            << steps.back() << ")\n";
  std::snprintf(buf, sizeof buf, "popcount: min %zu, mean %.1f, max %zu\n", min_pop,
                sum_pop / static_cast<double>(popcounts.size()), max_pop);
  std::cout << buf;
  if (!jaccards.empty()) {
    double sum_j = 0.0, min_j = jaccards.front(), max_j = jaccards.front();
    for (const double v : jaccards) {
      sum_j += v;
      min_j = std::min(min_j, v);
      max_j = std::max(max_j, v);
    }
    const double mean_j = sum_j / static_cast<double>(jaccards.size());
    std::snprintf(buf, sizeof buf,
                  "consecutive jaccard: min %.4f, mean %.4f, max %.4f\n"
                  "mean churn (1 - jaccard): %.4f\n",
                  min_j, mean_j, max_j, 1.0 - mean_j);
    std::cout << buf;
  } else {
    std::cout << "single mask, no churn to report\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fishdip: sample-aware dynamic sparse fine-tuning laboratory"};
  app.require_subcommand(1);

  GenArgs gen_args;
  auto* gen = app.add_subcommand("gen", "generate a synthetic corpus from a spec file");
  gen->add_option("--spec", gen_args.spec_path, "generator spec (JSON)")->required();
  gen->add_option("--out", gen_args.out_dir, "output corpus directory")->required();

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "run a training experiment");
  train->add_option("--config", train_args.config_path, "experiment config (JSON)");
  train->add_option("--corpus", train_args.corpus_dir, "corpus directory");
  train->add_option("--task", train_args.task, "task name (ner, re, joint_er, dst, srl)");
  train->add_option("--method", train_args.method, "full, fixed_fish, or fishdip");
  train->add_option("--seed", train_args.seed, "run seed");
  train->add_option("--k", train_args.k, "percent of parameters allowed to update");
  train->add_option("--m", train_args.m, "mask recalibration period (steps)");
  train->add_option("--n", train_args.n, "regressing examples per recalibration");
  train->add_option("--fisher-samples", train_args.fisher_samples,
                    "fixed-mask sample count (0 = min(1024, train size))");
  train->add_option("--lr", train_args.lr, "learning rate");
  train->add_option("--lr-decay", train_args.lr_decay, "per-step decay factor (1 = constant)");
  train->add_option("--beta1", train_args.beta1, "optimizer first-moment horizon");
  train->add_option("--beta2", train_args.beta2, "optimizer second-moment horizon");
  train->add_option("--steps", train_args.steps, "total update steps");
  train->add_option("--batch", train_args.batch, "minibatch size");
  train->add_option("--fraction", train_args.fraction, "train pool fraction");
  train->add_option("--split-seed", train_args.split_seed, "corpus split seed");
  train->add_option("--dev-eval-max", train_args.dev_eval_max,
                    "dev examples decoded per evaluation (0 = all)");
  train->add_option("--output", train_args.output_dir, "run directory to write");
  train->add_flag("--rank-on-minibatch", train_args.rank_on_minibatch,
                  "rank only the current minibatch at recalibration");
  train->add_option("--d-model", train_args.d_model, "model width");
  train->add_option("--heads", train_args.heads, "attention heads");
  train->add_option("--enc-layers", train_args.enc_layers, "encoder layers");
  train->add_option("--dec-layers", train_args.dec_layers, "decoder layers");
  train->add_option("--max-len", train_args.max_len, "maximum sequence length");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "score a saved checkpoint on a corpus split");
  eval->add_option("--run", eval_args.run_dir, "run directory with checkpoint.bin")->required();
  eval->add_option("--corpus", eval_args.corpus_dir, "corpus directory (default: from run.json)");
  eval->add_option("--split", eval_args.split, "test (default), dev, or train");
  eval->add_option("--max-examples", eval_args.max_examples, "cap on decoded examples (0 = all)");

  std::vector<std::string> compare_dirs;
  auto* cmp = app.add_subcommand("compare", "aggregate run directories into a method report");
  cmp->add_option("runs", compare_dirs, "run directories")->required()->expected(-1);

  std::string stats_dir;
  auto* stats = app.add_subcommand("mask-stats", "mask size and churn summary for one run");
  stats->add_option("run", stats_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*gen) return run_gen(gen_args);
    if (*train) return run_train(train_args);
    if (*eval) return run_eval(eval_args);
    if (*cmp) return run_compare(compare_dirs);
    if (*stats) return run_mask_stats(stats_dir);
    std::cerr << app.help();
    return 1;
  } catch (const fishdip::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const fishdip::contract_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
}
