#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "fishdip/errors.hpp"
#include "fishdip/param_store.hpp"

namespace fishdip {

// Callbacks that let the selection machinery run against anything with a
// flat parameter vector — the full seq2seq model in production, hand-rolled
// toy models in tests.
//   LossFn: current loss of one example, no side effects on parameters.
//   GradFn: writes the loss gradient of one example into `grad` (overwrite).
using LossFn = std::function<double(int example_id)>;
using GradFn = std::function<void(int example_id, std::span<double> grad)>;

// Per-coordinate importance: mean of squared per-example loss gradients.
struct FisherScores {
  std::vector<double> scores;  // length |θ|, every entry >= 0
  int n_samples_used = 0;
};

// Exact number of active coordinates for a top-k% mask: ceil(k/100 * n).
// k is read as a decimal at nano-percent resolution and the ceiling is
// taken in integer arithmetic, so an exactly-integer product never rounds
// up (e.g. k=0.1, n=1000 -> 1, where naive doubles would give 2).
std::size_t mask_cardinality(double k_percent, std::size_t n_params);

// Immutable bitset over flat parameter indices; built once per
// recalibration and replaced wholesale.
class SparsityMask {
 public:
  SparsityMask() = default;
  // Bits listed in `active_indices` are set; everything else is frozen.
  SparsityMask(std::size_t n_params, std::span<const std::size_t> active_indices,
               double k_percent);
  static SparsityMask all_active(std::size_t n_params);

  bool test(std::size_t i) const {
    return (words_[i >> 6] >> (i & 63)) & 1u;
  }
  std::size_t size() const { return n_bits_; }
  std::size_t popcount() const;
  double k_percent() const { return k_percent_; }

  // |A ∩ B| / |A ∪ B|; 1.0 when both masks are empty. contract_error on
  // length mismatch.
  double jaccard(const SparsityMask& other) const;

  // Packed 64-bit words, little-endian bit order within each word.
  std::span<const std::uint64_t> words() const { return words_; }
  static SparsityMask from_words(std::size_t n_bits, std::vector<std::uint64_t> words,
                                 double k_percent);

  bool operator==(const SparsityMask&) const = default;

 private:
  std::size_t n_bits_ = 0;
  double k_percent_ = 100.0;
  std::vector<std::uint64_t> words_;
};

// Mean of squared per-example gradients over `example_ids` (Fisher-style
// importance). Examples are processed in ascending id order regardless of
// the order given, so any selection strategy that picks the same set yields
// bit-identical scores. contract_error when the id list is empty.
FisherScores empirical_fisher(std::span<const int> example_ids, std::size_t n_params,
                              const GradFn& grad_fn);

// Ids of the n largest losses, sorted by descending loss then ascending id;
// all ids when n >= population. contract_error on empty input or n <= 0.
std::vector<int> select_regressing(std::span<const std::pair<int, double>> losses, int n);

// Evaluate the current loss of every example (no parameter updates), keep
// the n most regressing, and score only those.
FisherScores dynamic_fisher(std::span<const int> example_ids, int n, std::size_t n_params,
                            const LossFn& loss_fn, const GradFn& grad_fn);

// Activate exactly mask_cardinality(k, |θ|) coordinates with the largest
// scores, globally over the whole flat vector; ties go to the lower flat
// index. contract_error unless 0 < k <= 100.
SparsityMask build_mask(const FisherScores& scores, double k_percent);

// Adam state over the flat parameter vector.
struct OptimizerState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  long long step_count = 0;
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  OptimizerState() = default;
  OptimizerState(std::size_t n_params, double lr_in);
};

// One Adam step from store.grad. Moment vectors update everywhere from the
// raw gradient; the parameter delta is applied only where the mask is
// active, so frozen coordinates stay bit-identical. Ends by zeroing
// store.grad. contract_error on any length mismatch.
void masked_update(ParamStore& store, const SparsityMask& mask, OptimizerState& opt);

}  // namespace fishdip
