// Acceptance gate: ten end-to-end checks of the sparse fine-tuning
// laboratory, each verified against an independent oracle (finite
// differences, exhaustive enumeration, a straight-line re-implementation,
// stored golden files, or byte comparison of artifacts). One PASS/FAIL
// line is printed per check.
//
// Check 9 is statistical by design; its failure is reported but does not
// fail the gate. Every other check must pass for exit code 0.
//
// Usage: acceptance [--out DIR]   (DIR holds generated corpora and run
// artifacts; default "acceptance_runs", wiped on startup)

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oracles.hpp"

#include "fishdip/align.hpp"
#include "fishdip/augcodec.hpp"
#include "fishdip/autodiff.hpp"
#include "fishdip/corpus.hpp"
#include "fishdip/masking.hpp"
#include "fishdip/metrics.hpp"
#include "fishdip/model.hpp"
#include "fishdip/param_store.hpp"
#include "fishdip/rng.hpp"
#include "fishdip/trainer.hpp"

namespace fs = std::filesystem;
using namespace fishdip;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Reporting plumbing
// ---------------------------------------------------------------------------

struct CheckResult {
  bool pass = true;
  bool soft = false;  // statistical check: reported, never gates the exit code
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (detail.tellp() > 0) detail << "; ";
      detail << what;
    }
  }
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream ss;
  ss.precision(precision);
  ss << v;
  return ss.str();
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool near(double a, double b, double tol) {
  return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw io_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string repo_path(const std::string& rel) {
  return std::string(FISHDIP_REPO_DIR) + "/" + rel;
}

// ---------------------------------------------------------------------------
// Check 1 — autodiff gradients vs central finite differences
// ---------------------------------------------------------------------------

// Randomly shaped feed-forward graph exercising every differentiable op:
// embedding or dense input, a chain of dense/relu, dense/softmax,
// layer-norm, elementwise-square and concat-slice blocks, an optionally
// transposed output head, and a cross-entropy loss with an occasional
// ignored row.
struct RandomNet {
  ParamStore store;
  int bsz = 0, din = 0, dout = 0, vocab = 0;
  bool use_embedding = false, head_transposed = false;
  std::vector<int> ids, targets;
  std::vector<double> x;

  enum Kind { dense_relu, dense_softmax, norm, square, concat_slice };
  struct Block {
    Kind kind;
    int width_in = 0, width_out = 0;
    std::string w, b;
  };
  std::vector<Block> blocks;
  std::string head_w = "head_w", head_b = "head_b";
  int head_in = 0;

  explicit RandomNet(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto pick = [&](int lo, int hi) {
      return std::uniform_int_distribution<int>(lo, hi)(rng);
    };
    bsz = pick(1, 3);
    din = pick(2, 5);
    dout = pick(2, 4);
    vocab = pick(5, 8);
    use_embedding = pick(0, 1) == 1;
    head_transposed = pick(0, 1) == 1;

    if (use_embedding) {
      store.add_segment("emb", static_cast<std::size_t>(vocab) * din);
      for (int i = 0; i < bsz; ++i) ids.push_back(pick(0, vocab - 1));
    }

    int width = din;
    const int n_blocks = pick(1, 3);
    for (int bi = 0; bi < n_blocks; ++bi) {
      Block blk;
      blk.kind = static_cast<Kind>(pick(0, 4));
      blk.width_in = width;
      const std::string tag = std::to_string(bi);
      switch (blk.kind) {
        case dense_relu:
        case dense_softmax: {
          blk.width_out = pick(2, 6);
          blk.w = "w" + tag;
          blk.b = "b" + tag;
          store.add_segment(blk.w, static_cast<std::size_t>(width) * blk.width_out);
          store.add_segment(blk.b, static_cast<std::size_t>(blk.width_out));
          width = blk.width_out;
          break;
        }
        case norm: {
          blk.w = "g" + tag;
          blk.b = "b" + tag;
          store.add_segment(blk.w, static_cast<std::size_t>(width));
          store.add_segment(blk.b, static_cast<std::size_t>(width));
          blk.width_out = width;
          break;
        }
        case square:
          blk.width_out = width;
          break;
        case concat_slice:
          blk.width_out = width + std::min(2, width);
          width = blk.width_out;
          break;
      }
      blocks.push_back(blk);
    }
    head_in = width;
    store.add_segment(head_w, static_cast<std::size_t>(head_in) * dout);
    store.add_segment(head_b, static_cast<std::size_t>(dout));

    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (double& v : store.data) v = u(rng);
    if (!use_embedding) {
      x.resize(static_cast<std::size_t>(bsz) * din);
      for (double& v : x) v = u(rng);
    }
    for (int i = 0; i < bsz; ++i) {
      // Row 0 always contributes so the loss never degenerates to a constant.
      const bool ignored = i > 0 && pick(0, 3) == 0;
      targets.push_back(ignored ? -1 : pick(0, dout - 1));
    }
  }

  TensorId param_of(Tape& tape, const std::string& name, std::vector<int> shape) const {
    const auto& seg = store.segment(name);
    return tape.param(store, seg.offset, seg.length, std::move(shape));
  }

  double forward(Tape* out_tape, TensorId* out_loss) const {
    Tape tape;
    TensorId h;
    if (use_embedding) {
      h = tape.embedding_lookup(param_of(tape, "emb", {vocab, din}), ids);
    } else {
      h = tape.leaf({bsz, din}, x);
    }
    for (const Block& blk : blocks) {
      switch (blk.kind) {
        case dense_relu:
        case dense_softmax: {
          TensorId w = param_of(tape, blk.w, {blk.width_in, blk.width_out});
          TensorId b = param_of(tape, blk.b, {blk.width_out});
          TensorId z = tape.add(tape.matmul(h, w), b);
          h = blk.kind == dense_relu ? tape.relu(z) : tape.softmax(z);
          break;
        }
        case norm: {
          TensorId g = param_of(tape, blk.w, {blk.width_in});
          TensorId b = param_of(tape, blk.b, {blk.width_in});
          h = tape.layer_norm(h, g, b);
          break;
        }
        case square:
          h = tape.mul(h, h);
          break;
        case concat_slice: {
          const int c = std::min(2, blk.width_in);
          std::vector<TensorId> parts{h, tape.slice(h, 1, 0, c)};
          h = tape.concat_cols(parts);
          break;
        }
      }
    }
    TensorId logits;
    if (head_transposed) {
      TensorId wt = param_of(tape, head_w, {dout, head_in});
      logits = tape.add(tape.matmul(h, tape.transpose(wt)), param_of(tape, head_b, {dout}));
    } else {
      TensorId w = param_of(tape, head_w, {head_in, dout});
      logits = tape.add(tape.matmul(h, w), param_of(tape, head_b, {dout}));
    }
    TensorId l = tape.cross_entropy_with_logits(logits, targets, -1);
    const double value = tape.at(l).values[0];
    if (out_tape != nullptr) {
      *out_tape = std::move(tape);
      *out_loss = l;
    }
    return value;
  }
};

CheckResult check_gradients() {
  CheckResult r;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    RandomNet net(9000 + seed);
    net.store.zero_grad();
    Tape tape;
    TensorId loss{};
    net.forward(&tape, &loss);
    tape.backward(loss, net.store);
    const std::vector<double> analytic = net.store.grad;
    net.store.zero_grad();
    const std::vector<double> fd = oracles::finite_difference_gradient(
        net.store, [&] { return net.forward(nullptr, nullptr); });
    const double err = oracles::max_rel_err(analytic, fd);
    worst = std::max(worst, err);
    r.require(err < 1e-4, "network " + std::to_string(seed) + " rel err " + fmt(err));
  }
  if (r.pass) r.detail << "50 networks, max rel err " << fmt(worst, 3);
  return r;
}

// ---------------------------------------------------------------------------
// Check 2 — importance scores vs an independent squared-gradient oracle
// ---------------------------------------------------------------------------

CheckResult check_importance_scores() {
  CheckResult r;
  double worst = 0.0;
  for (std::uint64_t set = 0; set < 3; ++set) {
    // Quadratic-feature regression: loss_i(w) = (w0 + w1*x_i + w2*x_i^2 - y_i)^2.
    std::mt19937_64 rng(21 + set);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    std::array<double, 4> xs{}, ys{};
    for (auto& v : xs) v = u(rng);
    for (auto& v : ys) v = u(rng);
    std::array<double, 3> w{u(rng), u(rng), u(rng)};

    auto loss_at = [&](const std::array<double, 3>& p, int i) {
      const double e = p[0] + p[1] * xs[static_cast<std::size_t>(i)] +
                       p[2] * xs[static_cast<std::size_t>(i)] * xs[static_cast<std::size_t>(i)] -
                       ys[static_cast<std::size_t>(i)];
      return e * e;
    };
    const LossFn loss_fn = [&](int i) { return loss_at(w, i); };
    const GradFn grad_fn = [&](int i, std::span<double> g) {
      const double x = xs[static_cast<std::size_t>(i)];
      const double e = w[0] + w[1] * x + w[2] * x * x - ys[static_cast<std::size_t>(i)];
      g[0] = 2.0 * e;
      g[1] = 2.0 * e * x;
      g[2] = 2.0 * e * x * x;
    };

    const std::vector<int> ids{0, 1, 2, 3};
    const FisherScores scores = empirical_fisher(ids, 3, grad_fn);
    r.require(scores.n_samples_used == 4, "expected 4 samples used");

    // Oracle: central finite differences per example, squared, averaged.
    const double h = 1e-5;
    std::array<double, 3> oracle{};
    for (int i = 0; i < 4; ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        std::array<double, 3> up = w, down = w;
        up[c] += h;
        down[c] -= h;
        const double g = (loss_at(up, i) - loss_at(down, i)) / (2.0 * h);
        oracle[c] += g * g;
      }
    }
    for (auto& v : oracle) v /= 4.0;
    for (std::size_t c = 0; c < 3; ++c) {
      const double err = oracles::rel_err(scores.scores[c], oracle[c]);
      worst = std::max(worst, err);
      r.require(err < 1e-3,
                "set " + std::to_string(set) + " coord " + std::to_string(c) +
                    " rel err " + fmt(err));
    }

    // Keeping n >= N examples must reduce to plain averaging over all of them.
    for (const int n : {4, 16}) {
      const FisherScores reduced = dynamic_fisher(ids, n, 3, loss_fn, grad_fn);
      for (std::size_t c = 0; c < 3; ++c) {
        r.require(near(reduced.scores[c], scores.scores[c], 1e-12),
                  "n=" + std::to_string(n) + " reduction mismatch at coord " +
                      std::to_string(c));
      }
    }
  }
  if (r.pass) r.detail << "3 toy sets of 4 examples, max rel err " << fmt(worst, 3);
  return r;
}

// ---------------------------------------------------------------------------
// Check 3 — mask cardinality and frozen-coordinate invariants
// ---------------------------------------------------------------------------

CheckResult check_mask_invariants() {
  CheckResult r;
  const std::array<double, 3> ks{0.5, 1.0, 5.0};
  const std::array<std::size_t, 3> ns{997, 1000, 123456};

  // Integer ceiling oracle, independent of the library's arithmetic.
  auto expected_active = [](double k, std::size_t n) -> std::size_t {
    if (k == 0.5) return (n + 199) / 200;
    if (k == 1.0) return (n + 99) / 100;
    return (n + 19) / 20;  // k == 5
  };

  for (const double k : ks) {
    for (const std::size_t n : ns) {
      std::mt19937_64 rng(77 + static_cast<std::uint64_t>(k * 10) + n);
      std::uniform_real_distribution<double> u(0.0, 1.0);

      FisherScores scores;
      scores.scores.resize(n);
      scores.n_samples_used = 1;
      for (double& v : scores.scores) v = u(rng);
      const SparsityMask first = build_mask(scores, k);
      const std::size_t want = expected_active(k, n);
      r.require(first.popcount() == want,
                "k=" + fmt(k) + " n=" + std::to_string(n) + ": popcount " +
                    std::to_string(first.popcount()) + " != " + std::to_string(want));

      // 500 update steps with a mask rebuilt every 100 steps; coordinates
      // outside the union of all masks must keep their exact bit pattern.
      ParamStore store;
      store.add_segment("theta", n);
      for (double& v : store.data) v = u(rng) - 0.5;
      const std::vector<double> init = store.data;
      std::vector<double> base(n);
      for (double& v : base) v = u(rng) - 0.5;

      OptimizerState opt(n, 1e-3);
      SparsityMask mask = first;
      std::vector<char> ever_active(n, 0);
      for (int t = 0; t < 500; ++t) {
        if (t % 100 == 0) {
          if (t > 0) {
            for (double& v : scores.scores) v = u(rng);
            mask = build_mask(scores, k);
          }
          for (std::size_t i = 0; i < n; ++i)
            if (mask.test(i)) ever_active[i] = 1;
        }
        const double scale = (t % 2 == 0 ? 1.0 : -1.0) * (0.5 + 1e-3 * t);
        for (std::size_t i = 0; i < n; ++i) store.grad[i] = base[i] * scale;
        masked_update(store, mask, opt);
      }

      std::size_t frozen = 0, moved = 0;
      bool frozen_ok = true;
      for (std::size_t i = 0; i < n; ++i) {
        if (ever_active[i]) {
          if (store.data[i] != init[i]) ++moved;
        } else {
          ++frozen;
          if (std::memcmp(&store.data[i], &init[i], sizeof(double)) != 0) frozen_ok = false;
        }
      }
      r.require(frozen_ok, "k=" + fmt(k) + " n=" + std::to_string(n) +
                               ": a never-masked coordinate changed");
      r.require(frozen > 0 && moved > 0,
                "k=" + fmt(k) + " n=" + std::to_string(n) + ": vacuous run");
    }
  }
  if (r.pass) r.detail << "9 (k, size) combos; 500 steps each with rebuilt masks";
  return r;
}

// ---------------------------------------------------------------------------
// Check 4 — training loop vs a straight-line re-implementation
// ---------------------------------------------------------------------------

// Two-parameter regression: loss_i = (w0 + w1 * x_i - y_i)^2.
struct ToyProblem {
  std::vector<double> xs, ys;

  double loss(const ParamStore& store, int i) const {
    const double e = store.data[0] + store.data[1] * xs[static_cast<std::size_t>(i)] -
                     ys[static_cast<std::size_t>(i)];
    return e * e;
  }

  LoopHooks hooks(ParamStore& store) const {
    LoopHooks h;
    h.train_size = static_cast<int>(xs.size());
    h.example_loss = [this, &store](int i) { return loss(store, i); };
    h.example_grad = [this, &store](int i, std::span<double> g) {
      const double x = xs[static_cast<std::size_t>(i)];
      const double e = store.data[0] + store.data[1] * x - ys[static_cast<std::size_t>(i)];
      g[0] = 2.0 * e;
      g[1] = 2.0 * e * x;
    };
    h.batch_loss_backward = [this, &store](std::span<const int> ids) {
      double total = 0.0;
      for (const int id : ids) {
        const double x = xs[static_cast<std::size_t>(id)];
        const double e = store.data[0] + store.data[1] * x - ys[static_cast<std::size_t>(id)];
        total += e * e;
        store.grad[0] += 2.0 * e;
        store.grad[1] += 2.0 * e * x;
      }
      const double inv = 1.0 / static_cast<double>(ids.size());
      store.grad[0] *= inv;
      store.grad[1] *= inv;
      return total * inv;
    };
    return h;
  }
};

struct ToyTrace {
  std::vector<std::vector<int>> minibatches;
  std::vector<double> batch_losses;
  std::vector<std::vector<double>> sweeps;
  std::vector<std::size_t> active_coord;
  std::vector<std::array<double, 2>> params_after;
};

// Independent simulation: own minibatch stream, own sweep/selection, own
// mean-squared-gradient scores, own Adam with masked deltas.
ToyTrace simulate_toy(const ToyProblem& p, double w0, double w1, int T, int n_keep, double lr,
                      std::uint64_t seed) {
  ToyTrace trace;
  double w[2] = {w0, w1};
  double m1[2] = {0.0, 0.0}, m2[2] = {0.0, 0.0};
  const int N = static_cast<int>(p.xs.size());
  auto eng = rng::engine(seed, "minibatch");
  std::uniform_int_distribution<int> pick(0, N - 1);

  for (int t = 0; t < T; ++t) {
    std::vector<int> ids(8);
    for (int& id : ids) id = pick(eng);
    std::sort(ids.begin(), ids.end());
    trace.minibatches.push_back(ids);

    std::vector<double> losses(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) {
      const double e = w[0] + w[1] * p.xs[static_cast<std::size_t>(i)] -
                       p.ys[static_cast<std::size_t>(i)];
      losses[static_cast<std::size_t>(i)] = e * e;
    }
    trace.sweeps.push_back(losses);

    std::vector<int> order(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return losses[static_cast<std::size_t>(a)] > losses[static_cast<std::size_t>(b)];
    });
    order.resize(static_cast<std::size_t>(n_keep));

    double fisher[2] = {0.0, 0.0};
    for (const int id : order) {
      const double x = p.xs[static_cast<std::size_t>(id)];
      const double e = w[0] + w[1] * x - p.ys[static_cast<std::size_t>(id)];
      fisher[0] += (2.0 * e) * (2.0 * e);
      fisher[1] += (2.0 * e * x) * (2.0 * e * x);
    }
    fisher[0] /= n_keep;
    fisher[1] /= n_keep;
    const std::size_t active = fisher[1] > fisher[0] ? 1 : 0;
    trace.active_coord.push_back(active);

    double g[2] = {0.0, 0.0};
    double total = 0.0;
    for (const int id : ids) {
      const double x = p.xs[static_cast<std::size_t>(id)];
      const double e = w[0] + w[1] * x - p.ys[static_cast<std::size_t>(id)];
      total += e * e;
      g[0] += 2.0 * e;
      g[1] += 2.0 * e * x;
    }
    for (double& v : g) v /= 8.0;
    trace.batch_losses.push_back(total / 8.0);

    const int step = t + 1;
    for (int c = 0; c < 2; ++c) {
      m1[c] = 0.9 * m1[c] + 0.1 * g[c];
      m2[c] = 0.999 * m2[c] + 0.001 * g[c] * g[c];
    }
    const double bc1 = 1.0 - std::pow(0.9, step);
    const double bc2 = 1.0 - std::pow(0.999, step);
    const double mhat = m1[active] / bc1;
    const double vhat = m2[active] / bc2;
    w[active] -= lr * mhat / (std::sqrt(vhat) + 1e-8);

    trace.params_after.push_back({w[0], w[1]});
  }
  return trace;
}

CheckResult check_step_trace() {
  CheckResult r;
  ToyProblem p;
  p.xs = {0.5, -1.0, 2.0, 0.0, 1.5, -2.0, 3.0, -0.5};
  p.ys = {1.0, -0.5, 3.5, 0.2, 2.0, -3.0, 5.5, 0.0};
  const double w0 = 0.3, w1 = -0.2, lr = 0.05;
  const std::uint64_t seed = 5;
  const int T = 6;

  LoopConfig cfg;
  cfg.method = Method::fishdip;
  cfg.k_percent = 50.0;  // one of two coordinates
  cfg.m_steps = 1;       // recalibrate at every step
  cfg.n_regressing = 2;
  cfg.lr = lr;
  cfg.total_steps = T;
  cfg.batch_size = 8;
  cfg.seed = seed;

  const ToyTrace oracle = simulate_toy(p, w0, w1, T, 2, lr, seed);

  // The minibatch stream is a pure function of the seed, so running with
  // budgets 1..T exposes the parameter vector after every single step.
  for (int upto = 1; upto <= T; ++upto) {
    ParamStore store;
    store.add_segment("w", 2);
    store.data = {w0, w1};
    RunLog log;
    LoopConfig prefix = cfg;
    prefix.total_steps = upto;
    run_loop(prefix, store, p.hooks(store), log);

    const std::string at = " (budget " + std::to_string(upto) + ")";
    r.require(log.steps.size() == static_cast<std::size_t>(upto), "step count" + at);
    r.require(log.mask_events.size() == static_cast<std::size_t>(upto), "event count" + at);
    r.require(log.trajectory.size() == static_cast<std::size_t>(upto) + 1,
              "trajectory rows" + at);
    if (!r.pass) return r;

    for (int t = 0; t < upto; ++t) {
      const auto ut = static_cast<std::size_t>(t);
      const std::string where = " at step " + std::to_string(t) + at;
      r.require(log.steps[ut].minibatch == oracle.minibatches[ut], "minibatch ids" + where);
      r.require(near(log.steps[ut].mean_loss, oracle.batch_losses[ut], 1e-10),
                "batch loss" + where);
      r.require(log.trajectory[ut].losses.size() == 8, "sweep width" + where);
      for (std::size_t i = 0; i < 8; ++i)
        r.require(near(log.trajectory[ut].losses[i], oracle.sweeps[ut][i], 1e-10),
                  "sweep loss" + where);
      r.require(log.mask_events[ut].t == t && log.mask_events[ut].popcount == 1,
                "mask event" + where);
      r.require(log.masks[ut].test(oracle.active_coord[ut]) &&
                    !log.masks[ut].test(1 - oracle.active_coord[ut]),
                "mask bits" + where);
    }
    const auto& expect = oracle.params_after[static_cast<std::size_t>(upto - 1)];
    r.require(near(store.data[0], expect[0], 1e-10) && near(store.data[1], expect[1], 1e-10),
              "final parameters" + at);
  }
  if (r.pass) r.detail << T << " steps replayed with per-step budgets, tol 1e-10";
  return r;
}

// ---------------------------------------------------------------------------
// Check 5 — codec golden encodings, round-trips, fuzz totality
// ---------------------------------------------------------------------------

struct Golden {
  TaskSchema schema;
  AugmentedExample ex;
  std::string marked_input;  // srl only
};

Golden load_golden(const std::string& name) {
  std::ifstream in(repo_path("data/golden/" + name + ".json"));
  if (!in.good()) throw io_error("missing golden file " + name);
  json j;
  in >> j;
  Golden g;
  g.schema = j.at("schema").get<TaskSchema>();
  g.ex = j.get<AugmentedExample>();
  g.marked_input = j.value("marked_input", std::string{});
  return g;
}

std::string reencode(const Golden& g) {
  switch (g.schema.task) {
    case Task::ner:
      return encode_ner(g.ex.input_tokens, entities_of(g.ex.labels));
    case Task::re:
      return encode_relation(g.ex.input_tokens, re_instances_of(g.ex.labels).at(0));
    case Task::joint_er:
      return encode_joint_er(g.ex.input_tokens, entities_of(g.ex.labels),
                             relations_of(g.ex.labels));
    case Task::dst:
      return encode_dst({}, belief_of(g.ex.labels).value(), g.schema);
    case Task::srl: {
      const auto all = srl_args_of(g.ex.labels, true);
      Span pred{};
      std::vector<SrlArg> args;
      for (const auto& a : all) {
        if (a.role == kPredicateRole) {
          pred = {a.start, a.end};
        } else {
          args.push_back(a);
        }
      }
      return encode_srl(g.ex.input_tokens, pred, args).second;
    }
  }
  return {};
}

CheckResult check_codec() {
  CheckResult r;
  const std::vector<std::string> names{"ner", "re", "joint_er", "dst", "srl"};
  for (const auto& name : names) {
    const Golden g = load_golden(name);
    r.require(reencode(g) == g.ex.augmented_target, name + " golden encoding differs");
    if (g.schema.task == Task::srl) {
      const auto all = srl_args_of(g.ex.labels, true);
      Span pred{};
      std::vector<SrlArg> args;
      for (const auto& a : all) {
        if (a.role == kPredicateRole) {
          pred = {a.start, a.end};
        } else {
          args.push_back(a);
        }
      }
      r.require(encode_srl(g.ex.input_tokens, pred, args).first == g.marked_input,
                "srl golden marked input differs");
    }
  }

  // Round-trips: encode then decode recovers the exact label structure on
  // seeded random instances, 1000 per task.
  int rt_fail = 0;

  {  // entity spans
    auto eng = rng::engine(7, "augcodec-rt-ner");
    TaskSchema schema;
    schema.task = Task::ner;
    schema.entity_types = {"alpha", "beta", "gamma"};
    const std::vector<std::string> types{"alpha", "beta", "gamma"};
    std::vector<std::string> vocab;
    for (int i = 0; i < 60; ++i) vocab.push_back("w" + std::to_string(i));
    std::uniform_int_distribution<int> len_d(1, 20);
    std::uniform_int_distribution<std::size_t> word_d(0, vocab.size() - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int iter = 0; iter < 1000; ++iter) {
      const int n = len_d(eng);
      std::vector<std::string> toks;
      for (int i = 0; i < n; ++i) toks.push_back(vocab[word_d(eng)]);
      std::vector<EntitySpan> ents;
      int i = 0;
      while (i < n) {
        if (u(eng) < 0.4) {
          std::uniform_int_distribution<int> span_d(1, std::min(3, n - i));
          const int end = i + span_d(eng);
          ents.push_back({i, end, types[word_d(eng) % types.size()]});
          i = end;
        } else {
          ++i;
        }
      }
      const std::vector<StructuredLabel> expected(ents.begin(), ents.end());
      if (decode(encode_ner(toks, ents), toks, schema) != expected) ++rt_fail;
    }
  }

  {  // srl frames
    auto eng = rng::engine(7, "augcodec-rt-srl");
    TaskSchema schema;
    schema.task = Task::srl;
    schema.role_labels = {"A0", "A1", "AM-LOC"};
    const std::vector<std::string> roles{"A0", "A1", "AM-LOC"};
    std::vector<std::string> vocab;
    for (int i = 0; i < 60; ++i) vocab.push_back("s" + std::to_string(i));
    std::uniform_int_distribution<int> len_d(2, 20);
    std::uniform_int_distribution<std::size_t> word_d(0, vocab.size() - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int iter = 0; iter < 1000; ++iter) {
      const int n = len_d(eng);
      std::vector<std::string> toks;
      for (int i = 0; i < n; ++i) toks.push_back(vocab[word_d(eng)]);
      std::uniform_int_distribution<int> pred_d(0, n - 1);
      const int pred = pred_d(eng);
      std::vector<SrlArg> args;
      int i = 0;
      while (i < n) {
        if (i == pred) {
          ++i;
          continue;
        }
        if (u(eng) < 0.35) {
          const int cap = i < pred ? pred - i : n - i;
          std::uniform_int_distribution<int> span_d(1, std::min(3, cap));
          const int end = i + span_d(eng);
          args.push_back({i, end, roles[word_d(eng) % roles.size()]});
          i = end;
        } else {
          ++i;
        }
      }
      const auto [marked, target] = encode_srl(toks, Span{pred, pred + 1}, args);
      const std::vector<StructuredLabel> expected(args.begin(), args.end());
      if (decode(target, toks, schema) != expected) ++rt_fail;
      if (!decode(marked, toks, schema).empty()) ++rt_fail;
    }
  }

  {  // joint entities + relations
    auto eng = rng::engine(7, "augcodec-rt-joint");
    TaskSchema schema;
    schema.task = Task::joint_er;
    schema.entity_types = {"person", "location"};
    schema.relation_types = {"knows", "near"};
    const std::vector<std::string> etypes{"person", "location"};
    const std::vector<std::string> rtypes{"knows", "near"};
    std::vector<std::string> vocab;
    for (int i = 0; i < 100; ++i) vocab.push_back("j" + std::to_string(i));
    std::uniform_int_distribution<int> len_d(1, 18);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int iter = 0; iter < 1000; ++iter) {
      std::shuffle(vocab.begin(), vocab.end(), eng);
      const int n = len_d(eng);
      const std::vector<std::string> toks(vocab.begin(), vocab.begin() + n);
      std::vector<EntitySpan> ents;
      std::uniform_int_distribution<std::size_t> pick(0, 1);
      int i = 0;
      while (i < n) {
        if (u(eng) < 0.35) {
          std::uniform_int_distribution<int> span_d(1, std::min(2, n - i));
          const int end = i + span_d(eng);
          ents.push_back({i, end, etypes[pick(eng)]});
          i = end;
        } else {
          ++i;
        }
      }
      std::vector<RelationLabel> rels;
      for (std::size_t a = 0; a < ents.size(); ++a) {
        for (std::size_t b = 0; b < ents.size(); ++b) {
          if (a == b || rels.size() >= 4) continue;
          if (u(eng) < 0.25) rels.push_back({ents[a], ents[b], rtypes[pick(eng)]});
        }
      }
      const std::string target = encode_joint_er(toks, ents, rels);
      std::vector<StructuredLabel> expected(ents.begin(), ents.end());
      std::sort(rels.begin(), rels.end());
      for (const auto& rel : rels) expected.emplace_back(rel);
      if (decode(target, toks, schema) != expected) ++rt_fail;
    }
  }

  {  // head/tail relation instances
    auto eng = rng::engine(7, "augcodec-rt-re");
    TaskSchema schema;
    schema.task = Task::re;
    schema.relation_types = {"related to", "part of"};
    const std::vector<std::string> rtypes{"related to", "part of"};
    std::vector<std::string> vocab;
    for (int i = 0; i < 100; ++i) vocab.push_back("q" + std::to_string(i));
    std::uniform_int_distribution<int> len_d(2, 20);
    std::uniform_int_distribution<std::size_t> pick(0, 1);
    for (int iter = 0; iter < 1000; ++iter) {
      std::shuffle(vocab.begin(), vocab.end(), eng);
      const int n = len_d(eng);
      const std::vector<std::string> toks(vocab.begin(), vocab.begin() + n);
      std::uniform_int_distribution<int> hs_d(0, n - 2);
      const int hs = hs_d(eng);
      std::uniform_int_distribution<int> hl_d(1, std::min(2, (n - 1) - hs));
      const int he = hs + hl_d(eng);
      std::uniform_int_distribution<int> ts_d(he, n - 1);
      const int ts = ts_d(eng);
      std::uniform_int_distribution<int> tl_d(1, std::min(2, n - ts));
      const int te = ts + tl_d(eng);
      const ReInstance inst{{hs, he}, {ts, te}, rtypes[pick(eng)]};
      const std::vector<StructuredLabel> expected{inst};
      if (decode(encode_relation(toks, inst), toks, schema) != expected) ++rt_fail;
    }
  }

  {  // belief states
    auto eng = rng::engine(7, "augcodec-rt-dst");
    TaskSchema schema;
    schema.task = Task::dst;
    schema.slot_names = {"svc area", "svc area code", "svc name", "zone"};
    std::vector<std::string> values;
    for (int i = 0; i < 50; ++i) values.push_back("v" + std::to_string(i));
    std::uniform_int_distribution<std::size_t> val_d(0, values.size() - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int iter = 0; iter < 1000; ++iter) {
      BeliefState state;
      for (const auto& slot : schema.slot_names) {
        if (u(eng) < 0.5) {
          std::string v = values[val_d(eng)];
          if (u(eng) < 0.3) v += " " + values[val_d(eng)];
          state.slots[slot] = v;
        } else {
          state.slots[slot] = kNotGiven;
        }
      }
      const std::vector<StructuredLabel> expected{state};
      if (decode(encode_dst({}, state, schema), {}, schema) != expected) ++rt_fail;
    }
  }

  r.require(rt_fail == 0, std::to_string(rt_fail) + " round-trip mismatches");

  // Fuzz: decoding arbitrary token soup must never throw and must be
  // deterministic.
  int fuzz_fail = 0;
  {
    auto eng = rng::engine(11, "augcodec-fuzz");
    std::vector<TaskSchema> schemas;
    for (const auto& name : names) schemas.push_back(load_golden(name).schema);
    const std::vector<std::string> input{"w1", "w2", "Paris", "x", "north"};
    const std::vector<std::string> alphabet{"[",      "]",     "|",    "=",     ",",
                                            "belief", "hotel", "area", "north", "w1",
                                            "w2",     "Paris", "x,",   "not",   "given"};
    std::uniform_int_distribution<int> len_d(0, 25);
    std::uniform_int_distribution<std::size_t> tok_d(0, alphabet.size() - 1);
    for (int iter = 0; iter < 10000; ++iter) {
      const int n = len_d(eng);
      std::string s;
      for (int i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += alphabet[tok_d(eng)];
      }
      const auto& schema = schemas[static_cast<std::size_t>(iter) % schemas.size()];
      try {
        const auto out1 = decode(s, input, schema);
        const auto out2 = decode(s, input, schema);
        if (out1 != out2) ++fuzz_fail;
      } catch (...) {
        ++fuzz_fail;
      }
    }
  }
  r.require(fuzz_fail == 0, std::to_string(fuzz_fail) + " fuzz failures");

  if (r.pass)
    r.detail << "5 goldens byte-exact; 5x1000 round-trips; 10000 fuzzed decodes";
  return r;
}

// ---------------------------------------------------------------------------
// Check 6 — alignment score vs exhaustive enumeration
// ---------------------------------------------------------------------------

CheckResult check_alignment() {
  CheckResult r;
  std::mt19937_64 rng(20240817);
  const std::vector<std::string> pool{"a",   "b",   "ab",  "ba", "abc",
                                      "bca", "cab", "x",   "xy", "zzz"};
  std::uniform_int_distribution<std::size_t> len_dist(0, 8);
  std::uniform_int_distribution<std::size_t> tok_dist(0, pool.size() - 1);
  AlignScoring scoring;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> a(len_dist(rng)), b(len_dist(rng));
    for (auto& t : a) t = pool[tok_dist(rng)];
    for (auto& t : b) t = pool[tok_dist(rng)];
    const double expected = oracles::best_alignment_score_enum(a, b, scoring);
    const Alignment al = needleman_wunsch(a, b, scoring);
    worst = std::max(worst, std::fabs(al.score - expected));
    r.require(std::fabs(al.score - expected) <= 1e-12,
              "trial " + std::to_string(trial) + ": " + fmt(al.score) + " vs " +
                  fmt(expected));
  }
  if (r.pass) r.detail << "200 pairs (len <= 8), max |dp - enum| = " << fmt(worst, 3);
  return r;
}

// ---------------------------------------------------------------------------
// Check 7 — masking reductions on a real training run
// ---------------------------------------------------------------------------

std::string make_reduction_corpus(const fs::path& out) {
  GenSpec spec;
  spec.task = Task::ner;
  spec.n_sentences = 100;
  spec.seed = 404;
  spec.lexicons = {
      {"person", {"alice", "bob", "carol", "dan"}},
      {"location", {"paris", "berlin", "oslo"}},
  };
  spec.templates = {
      "{person} visited {location} today",
      "{person} met {person} in {location}",
      "{location} welcomed {person}",
  };
  const auto examples = generate(spec);
  const auto dir = (out / "reduction_corpus").string();
  save_corpus(dir, spec.schema(), examples);
  return dir;
}

ExperimentConfig reduction_config(const std::string& corpus, Method method) {
  ExperimentConfig c;
  c.corpus_dir = corpus;
  c.task = Task::ner;
  c.method = method;
  c.k_percent = 1.0;
  c.m_steps = 100;
  c.n_regressing = 5;
  c.lr = 1e-3;
  c.total_steps = 500;
  c.batch_size = 4;
  c.seed = 7;
  c.dev_eval_max = 3;
  c.model.d_model = 16;
  c.model.n_heads = 2;
  c.model.n_enc_layers = 1;
  c.model.n_dec_layers = 1;
  c.model.max_len = 48;
  return c;
}

CheckResult check_reductions(const fs::path& out) {
  CheckResult r;
  const std::string corpus = make_reduction_corpus(out);

  // k = 100% dynamic masking must be indistinguishable from dense training.
  ExperimentConfig dynamic = reduction_config(corpus, Method::fishdip);
  dynamic.k_percent = 100.0;
  const RunLog a = run(dynamic);
  const RunLog b = run(reduction_config(corpus, Method::full));
  r.require(!a.final_params.empty(), "empty parameter vector");
  r.require(same_bits(a.final_params, b.final_params), "k=100 final params differ from dense");
  bool streams_equal = a.steps.size() == b.steps.size();
  if (streams_equal)
    for (std::size_t i = 0; i < a.steps.size(); ++i)
      streams_equal = streams_equal && a.steps[i].minibatch == b.steps[i].minibatch &&
                      a.steps[i].mean_loss == b.steps[i].mean_loss;
  r.require(streams_equal, "k=100 step stream differs from dense");

  // Ranking every example and never recalibrating must equal the fixed-mask
  // method scored over the whole train split.
  ExperimentConfig degenerate = reduction_config(corpus, Method::fishdip);
  degenerate.n_regressing = 1000;  // >= |train|
  degenerate.m_steps = degenerate.total_steps + 1;
  const RunLog c = run(degenerate);
  ExperimentConfig fixed = reduction_config(corpus, Method::fixed_fish);
  fixed.fisher_init_samples = 1000;  // clamped to |train|
  const RunLog d = run(fixed);
  r.require(c.mask_events.size() == 1 && d.mask_events.size() == 1, "expected one mask each");
  if (c.masks.size() == 1 && d.masks.size() == 1) {
    const auto wa = c.masks[0].words();
    const auto wb = d.masks[0].words();
    r.require(wa.size() == wb.size() && std::equal(wa.begin(), wa.end(), wb.begin()),
              "masks differ");
  } else {
    r.require(false, "missing masks");
  }
  r.require(same_bits(c.final_params, d.final_params),
            "rank-everything final params differ from fixed mask");

  if (r.pass)
    r.detail << "500-step runs, " << a.final_params.size()
             << " params: k=100 == dense and rank-all == fixed mask, bit-exact";
  return r;
}

// ---------------------------------------------------------------------------
// Checks 8-10 — reference-corpus learning, smoothness, determinism
// ---------------------------------------------------------------------------

std::string make_reference_corpus(const fs::path& out) {
  std::ifstream in(repo_path("data/specs/ner_reference.json"));
  if (!in.good()) throw io_error("missing reference corpus spec");
  json j;
  in >> j;
  const auto spec = j.get<GenSpec>();
  spec.validate();
  const auto examples = generate(spec);
  const auto dir = (out / "reference_corpus").string();
  save_corpus(dir, spec.schema(), examples);
  return dir;
}

ExperimentConfig reference_config(const std::string& corpus) {
  ExperimentConfig c;
  c.corpus_dir = corpus;
  c.task = Task::ner;
  c.method = Method::fishdip;
  c.k_percent = 1.0;
  c.m_steps = 100;
  c.n_regressing = 15;
  c.lr = 0.05;
  c.total_steps = 3000;
  c.batch_size = 8;
  c.seed = 3;
  c.split_seed = 0;
  c.train_fraction = 64.0 / 700.0;  // 64 of the 700-example train pool
  c.dev_eval_max = 32;
  c.model.d_model = 64;
  c.model.n_heads = 4;
  c.model.n_enc_layers = 1;
  c.model.n_dec_layers = 1;
  c.model.max_len = 32;
  return c;
}

double entity_f1_of(const std::vector<MetricReport>& reports) {
  for (const auto& m : reports)
    if (m.metric == "entity_f1") return m.value;
  throw contract_error("no entity_f1 metric in report");
}

CheckResult check_learning(const fs::path& out, const std::string& corpus) {
  CheckResult r;
  ExperimentConfig cfg = reference_config(corpus);
  cfg.output_dir = (out / "learning_run").string();

  const auto t0 = std::chrono::steady_clock::now();
  const RunLog log = run(cfg);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const double f1 = entity_f1_of(log.final_metrics);
  const std::size_t n_params = log.final_params.size();
  r.require(f1 >= 0.90, "test entity F1 " + fmt(f1) + " < 0.90");
  r.require(n_params >= 50000 && n_params <= 200000,
            "parameter count " + std::to_string(n_params) + " not near 1e5");
  r.require(log.train_ids.size() == 64, "train split is not 64 sentences");
  r.require(log.test_ids.size() == 200, "test split is not 200 sentences");
  std::size_t max_pop = 0;
  for (const auto& e : log.mask_events) max_pop = std::max(max_pop, e.popcount);
  r.require(!log.mask_events.empty() && max_pop * 100 <= n_params,
            "a mask exceeded 1% of parameters");
  r.require(secs < 900.0, "run took " + fmt(secs) + "s (budget 900s)");

  if (r.pass)
    r.detail << "test entity F1 " << fmt(f1) << " within " << log.steps.size()
             << " steps; " << n_params << " params, <= " << max_pop
             << " active per step (" << fmt(100.0 * max_pop / n_params, 4) << "%); "
             << fmt(secs, 3) << "s";
  return r;
}

// Runs the smoothness comparison and hands the seed-1 dynamic-mask config to
// the determinism check so it can re-run an identical configuration.
struct SmoothnessOutcome {
  CheckResult result;
  ExperimentConfig repeat_config;  // seed-1 dynamic run, output_dir unset
  fs::path repeat_reference;       // directory holding that run's artifacts
};

SmoothnessOutcome check_smoothness(const fs::path& out, const std::string& corpus) {
  SmoothnessOutcome outcome;
  CheckResult& r = outcome.result;
  r.soft = true;

  int wins = 0;
  std::ostringstream per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    double variance[2] = {0.0, 0.0};
    for (const Method method : {Method::fishdip, Method::fixed_fish}) {
      ExperimentConfig cfg = reference_config(corpus);
      cfg.method = method;
      cfg.seed = seed;
      cfg.total_steps = 1500;
      cfg.dev_eval_max = 8;
      const std::string name =
          std::string("smooth_") + method_name(method) + "_s" + std::to_string(seed);
      cfg.output_dir = (out / name).string();
      const RunLog log = run(cfg);
      variance[method == Method::fishdip ? 0 : 1] = log.final_sample_loss_variance;

      // The loss-trajectory artifact must be present and rectangular so the
      // per-sample curves can be plotted.
      std::ifstream traj(fs::path(cfg.output_dir) / "trajectory.csv");
      r.require(traj.good(), name + " trajectory.csv missing");
      std::string line;
      std::size_t cols = 0, rows = 0;
      while (std::getline(traj, line)) {
        const std::size_t commas =
            static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
        if (rows == 0) cols = commas;
        r.require(commas == cols, name + " trajectory.csv is ragged");
        ++rows;
      }
      r.require(rows >= 3, name + " trajectory.csv has too few rows");

      if (method == Method::fishdip && seed == 1) {
        outcome.repeat_config = cfg;
        outcome.repeat_config.output_dir.clear();
        outcome.repeat_reference = cfg.output_dir;
      }
    }
    const bool win = variance[0] < variance[1];
    wins += win ? 1 : 0;
    per_seed << " s" << seed << ": " << fmt(variance[0], 3) << (win ? " < " : " >= ")
             << fmt(variance[1], 3);
  }
  r.require(wins >= 3, "dynamic masking smoother in only " + std::to_string(wins) +
                           "/5 seeds (statistical check — investigate)");
  r.detail << "dynamic vs fixed final loss variance, wins " << wins << "/5 —" << per_seed.str();
  return outcome;
}

CheckResult check_determinism(const fs::path& out, const SmoothnessOutcome& smoothness) {
  CheckResult r;
  ExperimentConfig cfg = smoothness.repeat_config;
  if (cfg.corpus_dir.empty()) {
    r.require(false, "no reference run available to repeat");
    return r;
  }
  cfg.output_dir = (out / "determinism_rerun").string();
  (void)run(cfg);

  // Everything except run.json (which records the output directory itself)
  // must come out byte-identical.
  const std::vector<std::string> files{"metrics.json",     "steps.jsonl",
                                       "trajectory.csv",   "mask_events.jsonl",
                                       "vocab.json",       "checkpoint.bin"};
  std::size_t total_bytes = 0;
  for (const auto& f : files) {
    const std::string first = slurp(smoothness.repeat_reference / f);
    const std::string second = slurp(fs::path(cfg.output_dir) / f);
    total_bytes += first.size();
    r.require(first == second, f + " differs between repeated runs");
  }
  if (r.pass)
    r.detail << files.size() << " artifact files byte-identical across repeated runs ("
             << total_bytes << " bytes)";
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  // Keep the report readable: one line per check. An explicit
  // FISHDIP_LOG_LEVEL in the environment still wins.
  setenv("FISHDIP_LOG_LEVEL", "error", /*overwrite=*/0);

  std::string out_dir = "acceptance_runs";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--out" && i + 1 < argc) {
      out_dir = argv[++i];
    } else {
      std::cerr << "usage: acceptance [--out DIR]\n";
      return 2;
    }
  }
  const fs::path out(out_dir);
  std::error_code ec;
  fs::remove_all(out, ec);
  fs::create_directories(out);

  bool all_hard_pass = true;
  auto timed = [&](int id, const std::string& title,
                   const std::function<CheckResult()>& fn, bool soft = false) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult res;
    try {
      res = fn();
    } catch (const std::exception& e) {
      res.pass = false;
      res.detail << "exception: " << e.what();
    }
    res.soft = res.soft || soft;
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!res.pass && !res.soft) all_hard_pass = false;
    const char* tag = res.pass ? "PASS" : (res.soft ? "SOFT-FAIL" : "FAIL");
    std::ostringstream line;
    line << "[" << tag << "] " << (id < 10 ? " " : "") << id << "  " << title;
    const std::string detail = res.detail.str();
    if (!detail.empty()) line << " — " << detail;
    line << " (" << fmt(secs, 3) << "s)";
    std::cout << line.str() << std::endl;
  };

  timed(1, "autodiff gradients match central finite differences", check_gradients);
  timed(2, "importance scores match the squared-gradient oracle", check_importance_scores);
  timed(3, "mask cardinality exact; frozen coordinates bit-stable", check_mask_invariants);
  timed(4, "training loop reproduces the independent step trace", check_step_trace);
  timed(5, "codec goldens byte-exact, round-trips, fuzz totality", check_codec);
  timed(6, "alignment score equals exhaustive enumeration", check_alignment);
  timed(7, "k=100 == dense; rank-all == fixed mask (bit-exact)",
        [&] { return check_reductions(out); });

  std::string corpus;
  timed(8, "reference-corpus learning hits F1 target under sparsity", [&] {
    corpus = make_reference_corpus(out);
    return check_learning(out, corpus);
  });

  SmoothnessOutcome smoothness;
  timed(
      9, "dynamic masking smooths per-sample losses (soft)",
      [&] {
        if (corpus.empty()) corpus = make_reference_corpus(out);
        SmoothnessOutcome run_outcome = check_smoothness(out, corpus);
        smoothness.repeat_config = run_outcome.repeat_config;
        smoothness.repeat_reference = run_outcome.repeat_reference;
        return std::move(run_outcome.result);
      },
      /*soft=*/true);

  timed(10, "repeated runs yield byte-identical artifacts",
        [&] { return check_determinism(out, smoothness); });

  std::cout << (all_hard_pass ? "acceptance: all hard checks passed"
                              : "acceptance: FAILURES above")
            << std::endl;
  return all_hard_pass ? 0 : 1;
}
