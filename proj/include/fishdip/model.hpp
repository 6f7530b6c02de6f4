#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fishdip/autodiff.hpp"
#include "fishdip/errors.hpp"
#include "fishdip/param_store.hpp"

namespace fishdip {

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 64;
  int n_heads = 2;
  int n_enc_layers = 2;
  int n_dec_layers = 2;
  int max_len = 128;
  std::uint64_t seed = 0;

  // config_error unless d_model % n_heads == 0, all dimensions positive, and
  // vocab_size covers at least the reserved ids.
  void validate() const;

  // Closed-form total parameter count:
  //   V*d  (tied embedding)
  // + n_enc * (12 d^2 + 13 d)   (self-attention + feed-forward + 2 norms)
  // + n_dec * (16 d^2 + 19 d)   (adds cross-attention + third norm)
  // + 4 d                       (final norms of both stacks)
  long long param_count() const;

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Closed token vocabulary. Ids 0..3 are PAD/BOS/EOS/UNK, ids 4..7 the
// structure tokens "[", "]", "|", "=", followed by the corpus tokens in
// sorted order.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumReserved = 8;  // 4 control ids + 4 structure tokens

  Vocab();  // reserved entries only

  // Dedup, sort, and append every token not already present. Tokens equal to
  // a reserved surface form keep the reserved id.
  static Vocab build(std::span<const std::string> corpus_tokens);

  int id(const std::string& token) const;         // kUnk when absent
  const std::string& token(int id) const;         // contract_error when out of range
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }

  std::vector<int> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> tokens_of(std::span<const int> ids) const;

  friend void to_json(nlohmann::json& j, const Vocab& v);
  friend void from_json(const nlohmann::json& j, Vocab& v);

 private:
  std::vector<std::string> id_to_token_;
  std::map<std::string, int> token_to_id_;
};

// Pre-LN transformer encoder-decoder over a flat ParamStore, built on the
// tape autodiff engine. Parameters are initialized uniform(-0.08, 0.08)
// from the config seed; positions are fixed sinusoids; the output
// projection is tied to the embedding.
class Seq2SeqModel {
 public:
  explicit Seq2SeqModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }

  // Sum of per-token negative log-likelihoods of target_ids under teacher
  // forcing (decoder sees BOS + target, predicts target + EOS). PAD target
  // positions are excluded. length_error when a sequence exceeds max_len.
  double example_loss(std::span<const int> input_ids, std::span<const int> target_ids);

  // Same forward pass, then backpropagates into store().grad (accumulating).
  double example_loss_backward(std::span<const int> input_ids,
                               std::span<const int> target_ids);

  // Teacher-forced decoder logits, one row per decoder position (prefix
  // BOS + target), vocab_size columns. Row t is the distribution for the
  // t-th emitted token.
  std::vector<std::vector<double>> forward_logits(std::span<const int> input_ids,
                                                  std::span<const int> target_ids);

  // Argmax decoding from BOS until EOS or max_out emitted tokens; ties go to
  // the lowest token id. Returns emitted ids without BOS/EOS.
  std::vector<int> greedy_decode(std::span<const int> input_ids, int max_out);

 private:
  struct Forward {
    Tape tape;
    TensorId logits = -1;  // [tgt_len, vocab]
    TensorId loss = -1;    // scalar; -1 when loss not requested
  };

  TensorId seg(Tape& tape, const std::string& name, std::vector<int> shape) const;
  TensorId embed(Tape& tape, std::span<const int> ids) const;
  TensorId attention(Tape& tape, TensorId q_in, TensorId kv_in, const std::string& prefix,
                     bool causal) const;
  TensorId ffn(Tape& tape, TensorId x, const std::string& prefix) const;
  TensorId layer_norm_named(Tape& tape, TensorId x, const std::string& prefix) const;
  TensorId encode_stack(Tape& tape, std::span<const int> input_ids) const;
  // Decoder over memory; returns logits [|prefix|, vocab].
  TensorId decode_stack(Tape& tape, TensorId memory, std::span<const int> prefix_ids) const;

  Forward teacher_forced(std::span<const int> input_ids, std::span<const int> target_ids,
                         bool with_loss);
  void check_length(std::size_t n, const char* what) const;

  ModelConfig config_;
  ParamStore store_;
  std::vector<double> positions_;  // max_len rows * d_model sinusoid table
};

}  // namespace fishdip
