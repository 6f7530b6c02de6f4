#include "fishdip/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "fishdip/rng.hpp"

namespace fishdip {

// ---------------------------------------------------------------------------
// ModelConfig
// ---------------------------------------------------------------------------

void ModelConfig::validate() const {
  if (vocab_size < Vocab::kNumReserved)
    throw config_error("vocab_size " + std::to_string(vocab_size) + " is below the " +
                       std::to_string(Vocab::kNumReserved) + " reserved ids");
  if (d_model <= 0 || n_heads <= 0 || n_enc_layers <= 0 || n_dec_layers <= 0 || max_len <= 1)
    throw config_error("model dimensions must be positive (and max_len > 1)");
  if (d_model % n_heads != 0)
    throw config_error("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                       std::to_string(n_heads));
}

long long ModelConfig::param_count() const {
  const long long d = d_model;
  const long long v = vocab_size;
  return v * d + n_enc_layers * (12 * d * d + 13 * d) + n_dec_layers * (16 * d * d + 19 * d) +
         4 * d;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"vocab_size", c.vocab_size},     {"d_model", c.d_model},
                     {"n_heads", c.n_heads},           {"n_enc_layers", c.n_enc_layers},
                     {"n_dec_layers", c.n_dec_layers}, {"max_len", c.max_len},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.vocab_size = j.value("vocab_size", 0);  // 0 = filled in from the corpus
  c.d_model = j.value("d_model", 64);
  c.n_heads = j.value("n_heads", 2);
  c.n_enc_layers = j.value("n_enc_layers", 2);
  c.n_dec_layers = j.value("n_dec_layers", 2);
  c.max_len = j.value("max_len", 128);
  c.seed = j.value("seed", std::uint64_t{0});
}

// ---------------------------------------------------------------------------
// Vocab
// ---------------------------------------------------------------------------

namespace {
const std::vector<std::string> kReservedTokens{"<pad>", "<bos>", "<eos>", "<unk>",
                                               "[",     "]",     "|",     "="};
}

Vocab::Vocab() : id_to_token_(kReservedTokens) {
  for (std::size_t i = 0; i < id_to_token_.size(); ++i)
    token_to_id_[id_to_token_[i]] = static_cast<int>(i);
}

Vocab Vocab::build(std::span<const std::string> corpus_tokens) {
  Vocab v;
  std::set<std::string> extra(corpus_tokens.begin(), corpus_tokens.end());
  for (const auto& tok : extra) {
    if (v.token_to_id_.count(tok)) continue;
    v.token_to_id_[tok] = static_cast<int>(v.id_to_token_.size());
    v.id_to_token_.push_back(tok);
  }
  return v;
}

int Vocab::id(const std::string& token) const {
  const auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size())
    throw contract_error("token id " + std::to_string(id) + " outside vocab of " +
                         std::to_string(size()));
  return id_to_token_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(const std::string& token) const { return token_to_id_.count(token) > 0; }

std::vector<int> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& tok : tokens) ids.push_back(id(tok));
  return ids;
}

std::vector<std::string> Vocab::tokens_of(std::span<const int> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (const int i : ids) out.push_back(token(i));
  return out;
}

void to_json(nlohmann::json& j, const Vocab& v) {
  j = nlohmann::json{{"tokens", v.id_to_token_}};
}

void from_json(const nlohmann::json& j, Vocab& v) {
  const auto tokens = j.at("tokens").get<std::vector<std::string>>();
  if (tokens.size() < kReservedTokens.size() ||
      !std::equal(kReservedTokens.begin(), kReservedTokens.end(), tokens.begin()))
    throw parse_error("vocab file does not start with the reserved token block");
  v.id_to_token_ = tokens;
  v.token_to_id_.clear();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!v.token_to_id_.emplace(tokens[i], static_cast<int>(i)).second)
      throw parse_error("vocab file contains duplicate token '" + tokens[i] + "'");
  }
}

// ---------------------------------------------------------------------------
// Seq2SeqModel
// ---------------------------------------------------------------------------

namespace {

void add_attention_segments(ParamStore& store, const std::string& prefix, int d) {
  const auto dd = static_cast<std::size_t>(d) * static_cast<std::size_t>(d);
  const auto dn = static_cast<std::size_t>(d);
  for (const char* part : {"wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo"}) {
    const bool is_matrix = part[0] == 'w';
    store.add_segment(prefix + "." + part, is_matrix ? dd : dn);
  }
}

void add_norm_segments(ParamStore& store, const std::string& prefix, int d) {
  store.add_segment(prefix + ".g", static_cast<std::size_t>(d));
  store.add_segment(prefix + ".b", static_cast<std::size_t>(d));
}

void add_ffn_segments(ParamStore& store, const std::string& prefix, int d) {
  const auto dd4 = 4 * static_cast<std::size_t>(d) * static_cast<std::size_t>(d);
  store.add_segment(prefix + ".w1", dd4);
  store.add_segment(prefix + ".b1", 4 * static_cast<std::size_t>(d));
  store.add_segment(prefix + ".w2", dd4);
  store.add_segment(prefix + ".b2", static_cast<std::size_t>(d));
}

}  // namespace

Seq2SeqModel::Seq2SeqModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  const int d = config_.d_model;
  store_.add_segment("emb",
                     static_cast<std::size_t>(config_.vocab_size) * static_cast<std::size_t>(d));
  for (int i = 0; i < config_.n_enc_layers; ++i) {
    const std::string p = "enc" + std::to_string(i);
    add_norm_segments(store_, p + ".ln1", d);
    add_attention_segments(store_, p + ".attn", d);
    add_norm_segments(store_, p + ".ln2", d);
    add_ffn_segments(store_, p + ".ffn", d);
  }
  add_norm_segments(store_, "enc.ln", d);
  for (int i = 0; i < config_.n_dec_layers; ++i) {
    const std::string p = "dec" + std::to_string(i);
    add_norm_segments(store_, p + ".ln1", d);
    add_attention_segments(store_, p + ".self", d);
    add_norm_segments(store_, p + ".ln2", d);
    add_attention_segments(store_, p + ".cross", d);
    add_norm_segments(store_, p + ".ln3", d);
    add_ffn_segments(store_, p + ".ffn", d);
  }
  add_norm_segments(store_, "dec.ln", d);

  if (static_cast<long long>(store_.size()) != config_.param_count())
    throw state_error("registered segments disagree with the closed-form parameter count");

  auto eng = rng::engine(config_.seed, "init");
  std::uniform_real_distribution<double> u(-0.08, 0.08);
  for (double& w : store_.data) w = u(eng);

  positions_.assign(static_cast<std::size_t>(config_.max_len) * static_cast<std::size_t>(d),
                    0.0);
  for (int pos = 0; pos < config_.max_len; ++pos) {
    for (int i = 0; i < d / 2; ++i) {
      const double rate = std::pow(10000.0, -2.0 * i / static_cast<double>(d));
      const double angle = pos * rate;
      positions_[static_cast<std::size_t>(pos) * d + 2 * i] = std::sin(angle);
      positions_[static_cast<std::size_t>(pos) * d + 2 * i + 1] = std::cos(angle);
    }
  }
}

void Seq2SeqModel::check_length(std::size_t n, const char* what) const {
  if (n > static_cast<std::size_t>(config_.max_len))
    throw fishdip::length_error(std::string(what) + " length " + std::to_string(n) +
                                " exceeds max_len " + std::to_string(config_.max_len));
  if (n == 0) throw contract_error(std::string(what) + " is empty");
}

TensorId Seq2SeqModel::seg(Tape& tape, const std::string& name, std::vector<int> shape) const {
  const auto& s = store_.segment(name);
  return tape.param(store_, s.offset, s.length, std::move(shape));
}

TensorId Seq2SeqModel::embed(Tape& tape, std::span<const int> ids) const {
  const int d = config_.d_model;
  const TensorId table = seg(tape, "emb", {config_.vocab_size, d});
  const TensorId looked = tape.embedding_lookup(table, ids);
  const TensorId scaled =
      tape.mul(looked, tape.leaf({1}, {std::sqrt(static_cast<double>(d))}));
  std::vector<double> pos(ids.size() * static_cast<std::size_t>(d));
  std::copy(positions_.begin(), positions_.begin() + static_cast<std::ptrdiff_t>(pos.size()),
            pos.begin());
  return tape.add(scaled, tape.leaf({static_cast<int>(ids.size()), d}, std::move(pos)));
}

TensorId Seq2SeqModel::layer_norm_named(Tape& tape, TensorId x,
                                        const std::string& prefix) const {
  const int d = config_.d_model;
  return tape.layer_norm(x, seg(tape, prefix + ".g", {d}), seg(tape, prefix + ".b", {d}));
}

TensorId Seq2SeqModel::attention(Tape& tape, TensorId q_in, TensorId kv_in,
                                 const std::string& prefix, bool causal) const {
  const int d = config_.d_model;
  const int dh = d / config_.n_heads;
  auto proj = [&](TensorId x, const char* w, const char* b) {
    return tape.add(tape.matmul(x, seg(tape, prefix + "." + w, {d, d})),
                    seg(tape, prefix + "." + b, {d}));
  };
  const TensorId q = proj(q_in, "wq", "bq");
  const TensorId k = proj(kv_in, "wk", "bk");
  const TensorId v = proj(kv_in, "wv", "bv");
  const int tq = tape.at(q).rows();
  const int tk = tape.at(k).rows();

  TensorId mask = -1;
  if (causal) {
    std::vector<double> m(static_cast<std::size_t>(tq) * static_cast<std::size_t>(tk), 0.0);
    for (int i = 0; i < tq; ++i)
      for (int j = i + 1; j < tk; ++j)
        m[static_cast<std::size_t>(i) * tk + j] = -1e9;
    mask = tape.leaf({tq, tk}, std::move(m));
  }
  const TensorId inv_sqrt = tape.leaf({1}, {1.0 / std::sqrt(static_cast<double>(dh))});

  std::vector<TensorId> heads;
  for (int h = 0; h < config_.n_heads; ++h) {
    const TensorId qh = tape.slice(q, 1, h * dh, (h + 1) * dh);
    const TensorId kh = tape.slice(k, 1, h * dh, (h + 1) * dh);
    const TensorId vh = tape.slice(v, 1, h * dh, (h + 1) * dh);
    TensorId scores = tape.mul(tape.matmul(qh, tape.transpose(kh)), inv_sqrt);
    if (causal) scores = tape.add(scores, mask);
    heads.push_back(tape.matmul(tape.softmax(scores), vh));
  }
  const TensorId ctx = tape.concat_cols(heads);
  return tape.add(tape.matmul(ctx, seg(tape, prefix + ".wo", {d, d})),
                  seg(tape, prefix + ".bo", {d}));
}

TensorId Seq2SeqModel::ffn(Tape& tape, TensorId x, const std::string& prefix) const {
  const int d = config_.d_model;
  const TensorId h = tape.relu(tape.add(tape.matmul(x, seg(tape, prefix + ".w1", {d, 4 * d})),
                                        seg(tape, prefix + ".b1", {4 * d})));
  return tape.add(tape.matmul(h, seg(tape, prefix + ".w2", {4 * d, d})),
                  seg(tape, prefix + ".b2", {d}));
}

TensorId Seq2SeqModel::encode_stack(Tape& tape, std::span<const int> input_ids) const {
  TensorId x = embed(tape, input_ids);
  for (int i = 0; i < config_.n_enc_layers; ++i) {
    const std::string p = "enc" + std::to_string(i);
    const TensorId n1 = layer_norm_named(tape, x, p + ".ln1");
    x = tape.add(x, attention(tape, n1, n1, p + ".attn", /*causal=*/false));
    x = tape.add(x, ffn(tape, layer_norm_named(tape, x, p + ".ln2"), p + ".ffn"));
  }
  return layer_norm_named(tape, x, "enc.ln");
}

TensorId Seq2SeqModel::decode_stack(Tape& tape, TensorId memory,
                                    std::span<const int> prefix_ids) const {
  TensorId x = embed(tape, prefix_ids);
  for (int i = 0; i < config_.n_dec_layers; ++i) {
    const std::string p = "dec" + std::to_string(i);
    const TensorId n1 = layer_norm_named(tape, x, p + ".ln1");
    x = tape.add(x, attention(tape, n1, n1, p + ".self", /*causal=*/true));
    const TensorId n2 = layer_norm_named(tape, x, p + ".ln2");
    x = tape.add(x, attention(tape, n2, memory, p + ".cross", /*causal=*/false));
    x = tape.add(x, ffn(tape, layer_norm_named(tape, x, p + ".ln3"), p + ".ffn"));
  }
  const TensorId out = layer_norm_named(tape, x, "dec.ln");
  // Tied output projection: logits = out * emb^T.
  const TensorId table = seg(tape, "emb", {config_.vocab_size, config_.d_model});
  return tape.matmul(out, tape.transpose(table));
}

Seq2SeqModel::Forward Seq2SeqModel::teacher_forced(std::span<const int> input_ids,
                                                   std::span<const int> target_ids,
                                                   bool with_loss) {
  check_length(input_ids.size(), "input");
  check_length(target_ids.size() + 1, "target");
  Forward f;
  const TensorId memory = encode_stack(f.tape, input_ids);
  std::vector<int> prefix;
  prefix.reserve(target_ids.size() + 1);
  prefix.push_back(Vocab::kBos);
  prefix.insert(prefix.end(), target_ids.begin(), target_ids.end());
  f.logits = decode_stack(f.tape, memory, prefix);
  if (with_loss) {
    std::vector<int> labels(target_ids.begin(), target_ids.end());
    labels.push_back(Vocab::kEos);
    for (int& t : labels) {
      if (t == Vocab::kPad) t = -1;  // excluded from the loss
    }
    f.loss = f.tape.cross_entropy_with_logits(f.logits, labels, /*ignore_index=*/-1);
  }
  return f;
}

double Seq2SeqModel::example_loss(std::span<const int> input_ids,
                                  std::span<const int> target_ids) {
  Forward f = teacher_forced(input_ids, target_ids, /*with_loss=*/true);
  return f.tape.at(f.loss).values[0];
}

double Seq2SeqModel::example_loss_backward(std::span<const int> input_ids,
                                           std::span<const int> target_ids) {
  Forward f = teacher_forced(input_ids, target_ids, /*with_loss=*/true);
  const double loss = f.tape.at(f.loss).values[0];
  f.tape.backward(f.loss, store_);
  return loss;
}

std::vector<std::vector<double>> Seq2SeqModel::forward_logits(
    std::span<const int> input_ids, std::span<const int> target_ids) {
  Forward f = teacher_forced(input_ids, target_ids, /*with_loss=*/false);
  const Tensor& logits = f.tape.at(f.logits);
  const int rows = logits.rows();
  const int cols = logits.cols();
  std::vector<std::vector<double>> out(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r)
    out[static_cast<std::size_t>(r)].assign(
        logits.values.begin() + static_cast<std::ptrdiff_t>(r) * cols,
        logits.values.begin() + static_cast<std::ptrdiff_t>(r + 1) * cols);
  return out;
}

std::vector<int> Seq2SeqModel::greedy_decode(std::span<const int> input_ids, int max_out) {
  check_length(input_ids.size(), "input");
  if (max_out < 0) throw contract_error("max_out must be nonnegative");

  // Run the encoder once and reuse its values as a leaf in each step's tape.
  std::vector<double> memory_values;
  int memory_rows = 0;
  {
    Tape tape;
    const TensorId memory = encode_stack(tape, input_ids);
    memory_values = tape.at(memory).values;
    memory_rows = tape.at(memory).rows();
  }

  std::vector<int> out;
  std::vector<int> prefix{Vocab::kBos};
  while (static_cast<int>(out.size()) < max_out &&
         static_cast<int>(prefix.size()) < config_.max_len) {
    Tape tape;
    const TensorId memory =
        tape.leaf({memory_rows, config_.d_model}, std::vector<double>(memory_values));
    const TensorId lg = decode_stack(tape, memory, prefix);
    const Tensor& t = tape.at(lg);
    const int cols = t.cols();
    const double* row = t.values.data() + static_cast<std::size_t>(t.rows() - 1) * cols;
    int best = 0;
    for (int j = 1; j < cols; ++j) {
      if (row[j] > row[best]) best = j;  // strict: ties keep the lowest id
    }
    if (best == Vocab::kEos) break;
    out.push_back(best);
    prefix.push_back(best);
  }
  return out;
}

}  // namespace fishdip
