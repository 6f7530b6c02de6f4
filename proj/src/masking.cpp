#include "fishdip/masking.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

namespace fishdip {

// ---------------------------------------------------------------------------
// mask_cardinality
// ---------------------------------------------------------------------------

std::size_t mask_cardinality(double k_percent, std::size_t n_params) {
  if (!(k_percent > 0.0) || k_percent > 100.0)
    throw contract_error("k_percent must lie in (0, 100], got " + std::to_string(k_percent));
  if (n_params == 0) throw contract_error("mask over an empty parameter vector");

  // k arrives as decimal text (config files, command lines), so interpret it
  // as a decimal at nano-percent resolution and ceil-divide in integers.
  // Naive double arithmetic rounds exactly-integer products upward: with
  // k=0.1, n=1000 the expression k*n/100 evaluates to 1.0000000000000002 and
  // would inflate the count to 2.
  const auto nano_k =
      std::max<long long>(1, std::llround(k_percent * 1e9));  // k as nano-percent
  const __int128 num = static_cast<__int128>(nano_k) * static_cast<__int128>(n_params);
  const __int128 den = static_cast<__int128>(100) * 1000000000LL;
  return static_cast<std::size_t>((num + den - 1) / den);
}

// ---------------------------------------------------------------------------
// SparsityMask
// ---------------------------------------------------------------------------

SparsityMask::SparsityMask(std::size_t n_params, std::span<const std::size_t> active_indices,
                           double k_percent)
    : n_bits_(n_params), k_percent_(k_percent), words_((n_params + 63) / 64, 0) {
  for (const std::size_t i : active_indices) {
    if (i >= n_params)
      throw contract_error("mask index " + std::to_string(i) + " out of range");
    words_[i >> 6] |= std::uint64_t{1} << (i & 63);
  }
}

SparsityMask SparsityMask::all_active(std::size_t n_params) {
  SparsityMask m;
  m.n_bits_ = n_params;
  m.k_percent_ = 100.0;
  m.words_.assign((n_params + 63) / 64, ~std::uint64_t{0});
  if (n_params % 64 != 0 && !m.words_.empty())
    m.words_.back() = (std::uint64_t{1} << (n_params % 64)) - 1;
  return m;
}

std::size_t SparsityMask::popcount() const {
  std::size_t total = 0;
  for (const std::uint64_t w : words_) total += static_cast<std::size_t>(std::popcount(w));
  return total;
}

double SparsityMask::jaccard(const SparsityMask& other) const {
  if (n_bits_ != other.n_bits_)
    throw contract_error("jaccard over masks of different lengths");
  std::size_t inter = 0, uni = 0;
  for (std::size_t w = 0; w < words_.size(); ++w) {
    inter += static_cast<std::size_t>(std::popcount(words_[w] & other.words_[w]));
    uni += static_cast<std::size_t>(std::popcount(words_[w] | other.words_[w]));
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

SparsityMask SparsityMask::from_words(std::size_t n_bits, std::vector<std::uint64_t> words,
                                      double k_percent) {
  if (words.size() != (n_bits + 63) / 64)
    throw contract_error("packed mask has the wrong word count");
  if (n_bits % 64 != 0 && !words.empty() &&
      (words.back() >> (n_bits % 64)) != 0)
    throw contract_error("packed mask has bits set beyond its length");
  SparsityMask m;
  m.n_bits_ = n_bits;
  m.k_percent_ = k_percent;
  m.words_ = std::move(words);
  return m;
}

// ---------------------------------------------------------------------------
// Scores and selection
// ---------------------------------------------------------------------------

FisherScores empirical_fisher(std::span<const int> example_ids, std::size_t n_params,
                              const GradFn& grad_fn) {
  if (example_ids.empty())
    throw contract_error("importance scores need at least one example");
  std::vector<int> ids(example_ids.begin(), example_ids.end());
  std::sort(ids.begin(), ids.end());

  FisherScores f;
  f.scores.assign(n_params, 0.0);
  f.n_samples_used = static_cast<int>(ids.size());
  std::vector<double> grad(n_params, 0.0);
  for (const int id : ids) {
    grad_fn(id, grad);
    for (std::size_t j = 0; j < n_params; ++j) f.scores[j] += grad[j] * grad[j];
  }
  const double inv_n = 1.0 / static_cast<double>(ids.size());
  for (double& s : f.scores) s *= inv_n;
  return f;
}

std::vector<int> select_regressing(std::span<const std::pair<int, double>> losses, int n) {
  if (losses.empty()) throw contract_error("selection over an empty loss list");
  if (n <= 0) throw contract_error("selection size must be positive");
  std::vector<std::pair<int, double>> ranked(losses.begin(), losses.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  const std::size_t keep = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(n));
  std::vector<int> ids;
  ids.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) ids.push_back(ranked[i].first);
  return ids;
}

FisherScores dynamic_fisher(std::span<const int> example_ids, int n, std::size_t n_params,
                            const LossFn& loss_fn, const GradFn& grad_fn) {
  if (example_ids.empty()) throw contract_error("scoring over an empty example set");
  std::vector<std::pair<int, double>> losses;
  losses.reserve(example_ids.size());
  for (const int id : example_ids) losses.emplace_back(id, loss_fn(id));
  const std::vector<int> selected = select_regressing(losses, n);
  return empirical_fisher(selected, n_params, grad_fn);
}

SparsityMask build_mask(const FisherScores& scores, double k_percent) {
  const std::size_t n = scores.scores.size();
  const std::size_t c = mask_cardinality(k_percent, n);  // validates k and n

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto better = [&](std::size_t a, std::size_t b) {
    if (scores.scores[a] != scores.scores[b]) return scores.scores[a] > scores.scores[b];
    return a < b;
  };
  if (c < n) std::nth_element(order.begin(), order.begin() + (c - 1), order.end(), better);
  return SparsityMask(n, std::span<const std::size_t>(order.data(), c), k_percent);
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

OptimizerState::OptimizerState(std::size_t n_params, double lr_in)
    : first_moment(n_params, 0.0), second_moment(n_params, 0.0), lr(lr_in) {}

void masked_update(ParamStore& store, const SparsityMask& mask, OptimizerState& opt) {
  const std::size_t n = store.size();
  if (mask.size() != n) throw contract_error("mask length does not match the parameter store");
  if (opt.first_moment.size() != n || opt.second_moment.size() != n)
    throw contract_error("optimizer state length does not match the parameter store");

  opt.step_count += 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = store.grad[i];
    opt.first_moment[i] = opt.beta1 * opt.first_moment[i] + (1.0 - opt.beta1) * g;
    opt.second_moment[i] = opt.beta2 * opt.second_moment[i] + (1.0 - opt.beta2) * g * g;
    if (mask.test(i)) {
      const double mhat = opt.first_moment[i] / bc1;
      const double vhat = opt.second_moment[i] / bc2;
      store.data[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
  }
  store.zero_grad();
}

}  // namespace fishdip
