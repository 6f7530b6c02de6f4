#include "fishdip/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "fishdip/corpus.hpp"
#include "fishdip/rng.hpp"
#include "fishdip/serialize.hpp"

namespace fishdip {

namespace {

// ---------------------------------------------------------------------------
// Logging: FISHDIP_LOG_LEVEL in {error, info, debug}, default info. All
// output goes to stderr so run artifacts stay deterministic.
// ---------------------------------------------------------------------------

int log_level() {
  static const int level = [] {
    const char* raw = std::getenv("FISHDIP_LOG_LEVEL");
    if (raw == nullptr) return 1;
    const std::string v(raw);
    if (v == "error") return 0;
    if (v == "debug") return 2;
    return 1;
  }();
  return level;
}

void log_line(int level, const std::string& msg) {
  if (log_level() < level) return;
  std::cerr << (level >= 2 ? "[debug] " : "[info] ") << msg << '\n';
}

std::string format_double(double v, const char* fmt = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Method names
// ---------------------------------------------------------------------------

const char* method_name(Method method) {
  switch (method) {
    case Method::full: return "full";
    case Method::fixed_fish: return "fixed_fish";
    case Method::fishdip: return "fishdip";
  }
  throw contract_error("unknown method enum value");
}

Method method_from_name(std::string_view name) {
  if (name == "full") return Method::full;
  if (name == "fixed_fish") return Method::fixed_fish;
  if (name == "fishdip") return Method::fishdip;
  throw config_error("unknown method '" + std::string(name) +
                     "' (expected full, fixed_fish, or fishdip)");
}

// ---------------------------------------------------------------------------
// ExperimentConfig
// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (!(k_percent > 0.0) || k_percent > 100.0)
    throw config_error("k_percent must be in (0, 100], got " + format_double(k_percent, "%g"));
  if (m_steps < 1) throw config_error("m_steps must be positive");
  if (n_regressing < 1) throw config_error("n_regressing must be positive");
  if (fisher_init_samples < 0) throw config_error("fisher_init_samples must be >= 0");
  if (!(lr > 0.0)) throw config_error("lr must be positive");
  if (!(lr_decay > 0.0) || lr_decay > 1.0)
    throw config_error("lr_decay must be in (0, 1]");
  if (!(adam_beta1 >= 0.0) || adam_beta1 >= 1.0)
    throw config_error("adam_beta1 must be in [0, 1)");
  if (!(adam_beta2 >= 0.0) || adam_beta2 >= 1.0)
    throw config_error("adam_beta2 must be in [0, 1)");
  if (total_steps < 0) throw config_error("total_steps must be >= 0");
  if (batch_size < 1) throw config_error("batch_size must be positive");
  if (!(train_fraction > 0.0) || train_fraction > 1.0)
    throw config_error("train_fraction must be in (0, 1]");
  if (dev_eval_max < 0) throw config_error("dev_eval_max must be >= 0");
  if (corpus_dir.empty()) throw config_error("corpus_dir is required");

  ModelConfig probe = model;
  if (probe.vocab_size == 0) probe.vocab_size = Vocab::kNumReserved;  // filled from the corpus
  probe.validate();
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{{"corpus_dir", c.corpus_dir},
                     {"task", task_name(c.task)},
                     {"method", method_name(c.method)},
                     {"k_percent", c.k_percent},
                     {"m_steps", c.m_steps},
                     {"n_regressing", c.n_regressing},
                     {"fisher_init_samples", c.fisher_init_samples},
                     {"lr", c.lr},
                     {"lr_decay", c.lr_decay},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"total_steps", c.total_steps},
                     {"batch_size", c.batch_size},
                     {"seed", c.seed},
                     {"train_fraction", c.train_fraction},
                     {"split_seed", c.split_seed},
                     {"rank_on_minibatch", c.rank_on_minibatch},
                     {"dev_eval_max", c.dev_eval_max},
                     {"model", c.model},
                     {"output_dir", c.output_dir}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  c.corpus_dir = j.value("corpus_dir", std::string{});
  c.task = task_from_name(j.value("task", std::string{"ner"}));
  c.method = method_from_name(j.value("method", std::string{"fishdip"}));
  c.k_percent = j.value("k_percent", 1.0);
  c.m_steps = j.value("m_steps", 100);
  c.n_regressing = j.value("n_regressing", 15);
  c.fisher_init_samples = j.value("fisher_init_samples", 0);
  c.lr = j.value("lr", 5e-4);
  c.lr_decay = j.value("lr_decay", 1.0);
  c.adam_beta1 = j.value("adam_beta1", 0.9);
  c.adam_beta2 = j.value("adam_beta2", 0.999);
  c.total_steps = j.value("total_steps", 0);
  c.batch_size = j.value("batch_size", 8);
  c.seed = j.value("seed", std::uint64_t{0});
  c.train_fraction = j.value("train_fraction", 1.0);
  c.split_seed = j.value("split_seed", std::uint64_t{0});
  c.rank_on_minibatch = j.value("rank_on_minibatch", false);
  c.dev_eval_max = j.value("dev_eval_max", 0);
  if (j.contains("model")) j.at("model").get_to(c.model);
  c.output_dir = j.value("output_dir", std::string{});
}

// ---------------------------------------------------------------------------
// Generic loop
// ---------------------------------------------------------------------------

void run_loop(const LoopConfig& cfg, ParamStore& store, const LoopHooks& hooks, RunLog& log,
              const std::function<void(int completed)>& periodic) {
  if (hooks.train_size <= 0) throw contract_error("training needs a nonempty train set");
  if (!hooks.example_loss || !hooks.example_grad || !hooks.batch_loss_backward)
    throw contract_error("all loop hooks must be set");
  if (cfg.batch_size < 1 || cfg.total_steps < 0 || !(cfg.lr > 0.0) || cfg.m_steps < 1 ||
      cfg.n_regressing < 1 || !(cfg.k_percent > 0.0) || cfg.k_percent > 100.0 ||
      !(cfg.lr_decay > 0.0) || cfg.fisher_init_samples < 0)
    throw contract_error("loop config out of range");

  const std::size_t n_params = store.size();
  const int n_train = hooks.train_size;

  OptimizerState opt(n_params, cfg.lr);
  opt.beta1 = cfg.adam_beta1;
  opt.beta2 = cfg.adam_beta2;
  // Dense update for `full`; the sparse methods start from an empty mask
  // that their t=0 build replaces before the first update.
  SparsityMask mask = cfg.method == Method::full
                          ? SparsityMask::all_active(n_params)
                          : SparsityMask(n_params, {}, cfg.k_percent);

  auto sweep_losses = [&](int t) {
    std::vector<double> losses(static_cast<std::size_t>(n_train));
    for (int i = 0; i < n_train; ++i) {
      losses[static_cast<std::size_t>(i)] = hooks.example_loss(i);
      if (!std::isfinite(losses[static_cast<std::size_t>(i)]))
        throw numeric_error("loss is not finite for example " + std::to_string(i) +
                            " during the sweep at step " + std::to_string(t));
    }
    return losses;
  };

  auto record_mask = [&](int t, const SparsityMask& built) {
    MaskEvent event;
    event.t = t;
    event.popcount = built.popcount();
    if (!log.masks.empty()) event.jaccard_prev = log.masks.back().jaccard(built);
    log.mask_events.push_back(event);
    log.masks.push_back(built);
    log_line(2, "mask rebuilt at step " + std::to_string(t) + ": " +
                    std::to_string(event.popcount) + " active" +
                    (event.jaccard_prev
                         ? ", jaccard " + format_double(*event.jaccard_prev, "%.4f")
                         : std::string{}));
  };

  if (cfg.method == Method::fixed_fish) {
    // One importance estimate at initialization over a random subset.
    const int want = cfg.fisher_init_samples == 0
                         ? std::min(1024, n_train)
                         : std::min(cfg.fisher_init_samples, n_train);
    std::vector<int> ids(static_cast<std::size_t>(n_train));
    std::iota(ids.begin(), ids.end(), 0);
    auto eng = rng::engine(cfg.seed, "fisher_init");
    std::shuffle(ids.begin(), ids.end(), eng);
    ids.resize(static_cast<std::size_t>(want));
    mask = build_mask(empirical_fisher(ids, n_params, hooks.example_grad), cfg.k_percent);
    record_mask(0, mask);
  }

  // Sweep the train losses (one trajectory row for every method) and, for
  // the dynamic method, rebuild the mask from the worst performers.
  auto recalibrate = [&](int t, std::span<const int> minibatch) {
    const std::vector<double> losses = sweep_losses(t);
    log.trajectory.push_back({t, losses});
    if (cfg.method != Method::fishdip) return;

    std::vector<std::pair<int, double>> pool;
    if (cfg.rank_on_minibatch && !minibatch.empty()) {
      std::vector<int> unique_ids(minibatch.begin(), minibatch.end());
      unique_ids.erase(std::unique(unique_ids.begin(), unique_ids.end()), unique_ids.end());
      for (const int id : unique_ids)
        pool.emplace_back(id, losses[static_cast<std::size_t>(id)]);
    } else {
      for (int i = 0; i < n_train; ++i)
        pool.emplace_back(i, losses[static_cast<std::size_t>(i)]);
    }
    const std::vector<int> selected = select_regressing(pool, cfg.n_regressing);
    mask = build_mask(empirical_fisher(selected, n_params, hooks.example_grad), cfg.k_percent);
    record_mask(t, mask);
  };

  auto batch_eng = rng::engine(cfg.seed, "minibatch");
  std::uniform_int_distribution<int> pick(0, n_train - 1);

  for (int t = 0; t < cfg.total_steps; ++t) {
    // Sampled before recalibration so every method consumes the stream
    // identically and minibatch-ranking has its pool.
    std::vector<int> ids(static_cast<std::size_t>(cfg.batch_size));
    for (int& id : ids) id = pick(batch_eng);
    std::sort(ids.begin(), ids.end());

    if (t % cfg.m_steps == 0) recalibrate(t, ids);

    const double mean_loss = hooks.batch_loss_backward(ids);
    if (!std::isfinite(mean_loss)) {
      std::string id_list;
      for (const int id : ids) {
        if (!id_list.empty()) id_list += ", ";
        id_list += std::to_string(id);
      }
      throw numeric_error("loss is not finite at step " + std::to_string(t) +
                          ", minibatch [" + id_list + "]");
    }
    opt.lr = cfg.lr * std::pow(cfg.lr_decay, t);
    masked_update(store, mask, opt);
    log.steps.push_back({t, std::move(ids), mean_loss});

    if ((t + 1) % cfg.m_steps == 0 || t + 1 == cfg.total_steps) {
      log_line(1, "step " + std::to_string(t + 1) + "/" + std::to_string(cfg.total_steps) +
                      ": batch loss " + format_double(mean_loss, "%.6f"));
      if (periodic) periodic(t + 1);
    }
  }

  if (cfg.total_steps == 0) {
    // The t=0 recalibration still happens (the mask is initialized before
    // the first would-be update), and the single trajectory row is the
    // initial state.
    recalibrate(0, {});
  } else {
    log.trajectory.push_back({cfg.total_steps, sweep_losses(cfg.total_steps)});
  }
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

namespace {

struct EncodedExample {
  std::vector<int> input;
  std::vector<int> target;
};

std::vector<EncodedExample> encode_examples(const Vocab& vocab,
                                            std::span<const AugmentedExample> examples,
                                            Task task, int max_len, const char* split_name) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    EncodedExample e;
    e.input = vocab.encode(model_input_tokens(examples[i], task));
    e.target = vocab.encode(whitespace_tokenize(examples[i].augmented_target));
    if (static_cast<int>(e.input.size()) > max_len ||
        static_cast<int>(e.target.size()) + 1 > max_len)
      throw fishdip::length_error(std::string(split_name) + " example " + std::to_string(i) +
                                  " does not fit max_len " + std::to_string(max_len));
    out.push_back(std::move(e));
  }
  return out;
}

std::uint64_t split_digest_of(const Split& split) {
  std::string s =
      "fraction=" + format_double(split.fraction) + ";seed=" + std::to_string(split.seed);
  const auto append_ids = [&s](const char* name, const std::vector<int>& ids) {
    s += ';';
    s += name;
    s += '=';
    for (const int id : ids) {
      s += std::to_string(id);
      s += ',';
    }
  };
  append_ids("train", split.train_ids);
  append_ids("dev", split.dev_ids);
  append_ids("test", split.test_ids);
  return rng::fnv1a(s);
}

double population_variance(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double mean = 0.0;
  for (const double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (const double x : xs) var += (x - mean) * (x - mean);
  return var / static_cast<double>(xs.size());
}

}  // namespace

std::vector<MetricReport> evaluate_model(Seq2SeqModel& model, const Vocab& vocab,
                                         std::span<const AugmentedExample> examples,
                                         const TaskSchema& schema, int max_examples) {
  const std::size_t n = max_examples > 0
                            ? std::min<std::size_t>(static_cast<std::size_t>(max_examples),
                                                    examples.size())
                            : examples.size();
  std::vector<std::vector<StructuredLabel>> preds, golds;
  preds.reserve(n);
  golds.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ex = examples[i];
    const auto input_ids = vocab.encode(model_input_tokens(ex, schema.task));
    const auto out_ids = model.greedy_decode(input_ids, model.config().max_len);
    const auto out_tokens = vocab.tokens_of(out_ids);
    std::string generated;
    for (const auto& tok : out_tokens) {
      if (!generated.empty()) generated += ' ';
      generated += tok;
    }
    preds.push_back(decode(generated, ex.input_tokens, schema));
    golds.push_back(ex.labels);
  }
  return evaluate(schema.task, preds, golds);
}

RunLog run(const ExperimentConfig& config_in) {
  ExperimentConfig config = config_in;
  config.validate();

  const Corpus corpus = load_corpus(config.corpus_dir);
  if (corpus.schema.task != config.task)
    throw config_error(std::string("corpus task '") + task_name(corpus.schema.task) +
                       "' does not match configured task '" + task_name(config.task) + "'");

  const Split split = subsample(corpus.examples, config.train_fraction, config.split_seed);
  log_line(1, "split: " + std::to_string(split.train.size()) + " train / " +
                  std::to_string(split.dev.size()) + " dev / " +
                  std::to_string(split.test.size()) + " test");

  std::vector<std::string> all_tokens;
  for (const auto& ex : corpus.examples) {
    for (auto& tok : model_input_tokens(ex, config.task)) all_tokens.push_back(std::move(tok));
    for (auto& tok : whitespace_tokenize(ex.augmented_target))
      all_tokens.push_back(std::move(tok));
  }
  const Vocab vocab = Vocab::build(all_tokens);

  ModelConfig mc = config.model;
  mc.vocab_size = vocab.size();
  mc.seed = config.seed;
  mc.validate();
  config.model = mc;  // the log records the resolved model config

  Seq2SeqModel model(mc);
  log_line(1, "model: " + std::to_string(mc.param_count()) + " parameters, vocab " +
                  std::to_string(vocab.size()));

  const auto train_enc = encode_examples(vocab, split.train, config.task, mc.max_len, "train");
  encode_examples(vocab, split.dev, config.task, mc.max_len, "dev");    // length check
  encode_examples(vocab, split.test, config.task, mc.max_len, "test");  // length check

  RunLog log;
  log.config = config;
  log.train_ids = split.train_ids;
  log.dev_ids = split.dev_ids;
  log.test_ids = split.test_ids;
  log.split_digest = split_digest_of(split);

  LoopHooks hooks;
  hooks.train_size = static_cast<int>(split.train.size());
  hooks.example_loss = [&](int id) {
    const auto& e = train_enc[static_cast<std::size_t>(id)];
    return model.example_loss(e.input, e.target);
  };
  hooks.example_grad = [&](int id, std::span<double> grad_out) {
    model.store().zero_grad();
    const auto& e = train_enc[static_cast<std::size_t>(id)];
    model.example_loss_backward(e.input, e.target);
    const auto& grad = model.store().grad;
    std::copy(grad.begin(), grad.end(), grad_out.begin());
    model.store().zero_grad();
  };
  hooks.batch_loss_backward = [&](std::span<const int> ids) {
    double total = 0.0;
    for (const int id : ids) {
      const auto& e = train_enc[static_cast<std::size_t>(id)];
      total += model.example_loss_backward(e.input, e.target);
    }
    const double inv = 1.0 / static_cast<double>(ids.size());
    for (double& g : model.store().grad) g *= inv;
    return total * inv;
  };

  log.best_step = 0;
  log.best_dev = -std::numeric_limits<double>::infinity();
  log.best_params = model.store().data;

  const TaskSchema& schema = corpus.schema;
  const auto periodic = [&](int completed) {
    if (split.dev.empty()) return;
    const auto reports = evaluate_model(model, vocab, split.dev, schema, config.dev_eval_max);
    const double value = reports.empty() ? 0.0 : reports.front().value;
    log.dev_history.push_back({completed, value});
    log_line(1, "dev " + (reports.empty() ? std::string("metric") : reports.front().metric) +
                    " at step " + std::to_string(completed) + ": " +
                    format_double(value, "%.4f"));
    if (value > log.best_dev) {
      log.best_dev = value;
      log.best_step = completed;
      log.best_params = model.store().data;
    }
  };

  LoopConfig lc;
  lc.method = config.method;
  lc.k_percent = config.k_percent;
  lc.m_steps = config.m_steps;
  lc.n_regressing = config.n_regressing;
  lc.fisher_init_samples = config.fisher_init_samples;
  lc.lr = config.lr;
  lc.lr_decay = config.lr_decay;
  lc.adam_beta1 = config.adam_beta1;
  lc.adam_beta2 = config.adam_beta2;
  lc.total_steps = config.total_steps;
  lc.batch_size = config.batch_size;
  lc.seed = config.seed;
  lc.rank_on_minibatch = config.rank_on_minibatch;

  run_loop(lc, model.store(), hooks, log, periodic);

  log.final_params = model.store().data;
  if (log.dev_history.empty()) {
    // Never evaluated (no dev split or zero steps): keep the final state.
    log.best_params = log.final_params;
    log.best_step = config.total_steps;
    log.best_dev = 0.0;
  }

  log.final_sample_loss_variance = population_variance(log.trajectory.back().losses);

  model.store().data = log.best_params;
  if (!split.test.empty()) {
    log.final_metrics = evaluate_model(model, vocab, split.test, schema, 0);
    for (const auto& r : log.final_metrics)
      log_line(1, "test " + r.metric + ": " + format_double(r.value, "%.4f") +
                      " (checkpoint from step " + std::to_string(log.best_step) + ")");
  }

  if (!config.output_dir.empty()) save_run_log(log, vocab, model);
  return log;
}

// ---------------------------------------------------------------------------
// Run directory
// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const RunSummary& s) {
  j = nlohmann::json{{"task", task_name(s.task)},
                     {"method", method_name(s.method)},
                     {"seed", s.seed},
                     {"split_digest", s.split_digest},
                     {"total_steps", s.total_steps},
                     {"best_step", s.best_step},
                     {"best_dev", s.best_dev},
                     {"test_metrics", s.test_metrics},
                     {"final_sample_loss_variance", s.final_sample_loss_variance}};
}

void from_json(const nlohmann::json& j, RunSummary& s) {
  s.task = task_from_name(j.at("task").get<std::string>());
  s.method = method_from_name(j.at("method").get<std::string>());
  s.seed = j.at("seed").get<std::uint64_t>();
  s.split_digest = j.at("split_digest").get<std::uint64_t>();
  s.total_steps = j.at("total_steps").get<int>();
  s.best_step = j.at("best_step").get<int>();
  s.best_dev = j.at("best_dev").get<double>();
  s.test_metrics = j.at("test_metrics").get<std::vector<MetricReport>>();
  s.final_sample_loss_variance = j.at("final_sample_loss_variance").get<double>();
}

RunSummary summarize(const RunLog& log) {
  RunSummary s;
  s.task = log.config.task;
  s.method = log.config.method;
  s.seed = log.config.seed;
  s.split_digest = log.split_digest;
  s.total_steps = log.config.total_steps;
  s.best_step = log.best_step;
  s.best_dev = log.best_dev;
  s.test_metrics = log.final_metrics;
  s.final_sample_loss_variance = log.final_sample_loss_variance;
  return s;
}

void save_run_log(const RunLog& log, const Vocab& vocab, const Seq2SeqModel& model) {
  const std::string& dir = log.config.output_dir;
  if (dir.empty()) throw contract_error("run has no output_dir");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw io_error("cannot create directory '" + dir + "': " + ec.message());

  const auto write_text = [&dir](const std::string& name, const std::string& body) {
    const std::string path = dir + "/" + name;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot write '" + path + "'");
    out << body;
    if (!out) throw io_error("short write to '" + path + "'");
  };

  write_text("run.json", nlohmann::json(log.config).dump(2) + "\n");
  write_text("vocab.json", nlohmann::json(vocab).dump() + "\n");

  std::string steps;
  for (const auto& s : log.steps) {
    steps += nlohmann::json{{"t", s.t}, {"minibatch", s.minibatch}, {"mean_loss", s.mean_loss}}
                 .dump();
    steps += '\n';
  }
  write_text("steps.jsonl", steps);

  std::string events;
  for (const auto& e : log.mask_events) {
    nlohmann::json j{{"t", e.t}, {"popcount", e.popcount}};
    j["jaccard_prev"] =
        e.jaccard_prev ? nlohmann::json(*e.jaccard_prev) : nlohmann::json(nullptr);
    events += j.dump();
    events += '\n';
  }
  write_text("mask_events.jsonl", events);

  std::string csv = "t";
  const std::size_t n_cols = log.trajectory.empty() ? 0 : log.trajectory.front().losses.size();
  for (std::size_t i = 0; i < n_cols; ++i) csv += ",loss_" + std::to_string(i);
  csv += '\n';
  for (const auto& row : log.trajectory) {
    csv += std::to_string(row.t);
    for (const double v : row.losses) {
      csv += ',';
      csv += format_double(v);
    }
    csv += '\n';
  }
  write_text("trajectory.csv", csv);

  write_text("metrics.json", nlohmann::json(summarize(log)).dump(2) + "\n");

  save_checkpoint(dir + "/checkpoint.bin", model.config(), model.store());
}

RunSummary load_run_summary(const std::string& dir) {
  const std::string path = dir + "/metrics.json";
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in).get<RunSummary>();
  } catch (const nlohmann::json::exception& e) {
    throw parse_error("'" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Comparison report
// ---------------------------------------------------------------------------

CompareReport compare(std::span<const RunSummary> summaries) {
  if (summaries.empty()) throw contract_error("compare needs at least one run");
  const Task task = summaries.front().task;
  const std::uint64_t digest = summaries.front().split_digest;
  const int total_steps = summaries.front().total_steps;
  for (const auto& s : summaries) {
    if (s.task != task) throw contract_error("compared runs mix tasks");
    if (s.split_digest != digest)
      throw contract_error("compared runs use different corpus splits");
    if (s.total_steps != total_steps)
      throw contract_error("compared runs use different step budgets");
    if (s.test_metrics.empty()) throw contract_error("a compared run has no test metrics");
  }

  std::map<std::string, MethodReport> by_method;  // keyed by name for stable order
  for (const auto& s : summaries) {
    auto& m = by_method[method_name(s.method)];
    m.method = s.method;
    m.runs.push_back(s);
  }

  std::optional<std::multiset<std::uint64_t>> seed_ref;
  for (const auto& [name, m] : by_method) {
    std::multiset<std::uint64_t> seeds;
    for (const auto& r : m.runs) seeds.insert(r.seed);
    if (!seed_ref)
      seed_ref = std::move(seeds);
    else if (*seed_ref != seeds)
      throw contract_error("compared methods cover different seed sets");
  }

  CompareReport report;
  report.task = task;
  report.metric = summaries.front().test_metrics.front().metric;
  for (auto& [name, m] : by_method) {
    std::sort(m.runs.begin(), m.runs.end(),
              [](const RunSummary& a, const RunSummary& b) { return a.seed < b.seed; });
    double mean = 0.0, smooth = 0.0;
    for (const auto& r : m.runs) {
      mean += r.test_metrics.front().value;
      smooth += r.final_sample_loss_variance;
    }
    const auto n = static_cast<double>(m.runs.size());
    mean /= n;
    smooth /= n;
    m.mean_metric = mean;
    m.mean_smoothness = smooth;
    if (m.runs.size() > 1) {
      double ss = 0.0;
      for (const auto& r : m.runs) {
        const double d = r.test_metrics.front().value - mean;
        ss += d * d;
      }
      m.std_metric = std::sqrt(ss / (n - 1.0));
    }
    report.methods.push_back(std::move(m));
  }
  return report;
}

std::string render_text(const CompareReport& report) {
  std::string out = "task " + std::string(task_name(report.task)) + ", metric " + report.metric +
                    "\n\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s %5s %10s %10s %14s\n", "method", "runs", "mean", "std",
                "smoothness");
  out += buf;
  for (const auto& m : report.methods) {
    std::snprintf(buf, sizeof buf, "%-12s %5zu %10.4f %10s %14.6g\n", method_name(m.method),
                  m.runs.size(), m.mean_metric,
                  m.std_metric ? format_double(*m.std_metric, "%.4f").c_str() : "-",
                  m.mean_smoothness);
    out += buf;
  }
  out += '\n';
  for (const auto& m : report.methods) {
    for (const auto& r : m.runs) {
      std::snprintf(buf, sizeof buf,
                    "%-12s seed %-6llu metric %.4f  smoothness %.6g  best step %d\n",
                    method_name(m.method), static_cast<unsigned long long>(r.seed),
                    r.test_metrics.front().value, r.final_sample_loss_variance, r.best_step);
      out += buf;
    }
  }
  return out;
}

}  // namespace fishdip
