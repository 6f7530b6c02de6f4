#include "fishdip/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "fishdip/rng.hpp"

namespace fishdip {

namespace {

// ---------------------------------------------------------------------------
// Template parsing: "{placeholder}" spans may contain spaces (dialogue slot
// names), so templates are scanned at the string level before tokenizing
// the literal stretches.
// ---------------------------------------------------------------------------

struct Piece {
  bool is_slot = false;
  std::string slot;                      // placeholder name when is_slot
  std::vector<std::string> tokens;       // literal tokens otherwise
};

std::vector<Piece> parse_template(const std::string& tmpl) {
  std::vector<Piece> out;
  std::string literal;
  auto flush = [&] {
    if (literal.empty()) return;
    Piece p;
    p.tokens = whitespace_tokenize(literal);
    if (!p.tokens.empty()) out.push_back(std::move(p));
    literal.clear();
  };
  for (std::size_t i = 0; i < tmpl.size();) {
    const char c = tmpl[i];
    if (c == '{') {
      if (i > 0 && !std::isspace(static_cast<unsigned char>(tmpl[i - 1])))
        throw config_error("placeholder must start a token in template: " + tmpl);
      const std::size_t close = tmpl.find('}', i);
      if (close == std::string::npos)
        throw config_error("unterminated placeholder in template: " + tmpl);
      std::string name = tmpl.substr(i + 1, close - i - 1);
      if (name.empty() || name.find('{') != std::string::npos)
        throw config_error("bad placeholder name in template: " + tmpl);
      if (close + 1 < tmpl.size() &&
          !std::isspace(static_cast<unsigned char>(tmpl[close + 1])))
        throw config_error("placeholder must end a token in template: " + tmpl);
      flush();
      Piece p;
      p.is_slot = true;
      p.slot = std::move(name);
      out.push_back(std::move(p));
      i = close + 1;
    } else if (c == '}') {
      throw config_error("stray '}' in template: " + tmpl);
    } else {
      literal += c;
      ++i;
    }
  }
  flush();
  if (out.empty()) throw config_error("template is empty: '" + tmpl + "'");
  return out;
}

std::vector<std::string> slot_names_in(const std::vector<Piece>& pieces) {
  std::vector<std::string> names;
  for (const auto& p : pieces)
    if (p.is_slot) names.push_back(p.slot);
  return names;
}

void check_surface_tokens(const std::vector<std::string>& tokens, const std::string& what) {
  if (tokens.empty()) throw config_error(what + " is empty");
  for (const auto& t : tokens)
    if (is_special_token(t))
      throw config_error(what + " contains the structure token '" + t + "'");
}

// ---------------------------------------------------------------------------
// Per-task generation. Each example derives its own engine from
// (spec.seed, example index) so content is order-independent.
// ---------------------------------------------------------------------------

template <typename T>
const T& pick(std::mt19937_64& eng, const std::vector<T>& options) {
  std::uniform_int_distribution<std::size_t> d(0, options.size() - 1);
  return options[d(eng)];
}

struct FilledSlot {
  Span span;
  std::string slot;
};

// Lays out a template, filling each placeholder via `fill` (which returns
// the surface tokens for a slot name).
template <typename FillFn>
std::pair<std::vector<std::string>, std::vector<FilledSlot>> realize(
    const std::vector<Piece>& pieces, const FillFn& fill) {
  std::vector<std::string> tokens;
  std::vector<FilledSlot> slots;
  for (const auto& p : pieces) {
    if (!p.is_slot) {
      tokens.insert(tokens.end(), p.tokens.begin(), p.tokens.end());
      continue;
    }
    const std::vector<std::string> surface = fill(p.slot);
    FilledSlot fs;
    fs.span.start = static_cast<int>(tokens.size());
    tokens.insert(tokens.end(), surface.begin(), surface.end());
    fs.span.end = static_cast<int>(tokens.size());
    fs.slot = p.slot;
    slots.push_back(std::move(fs));
  }
  return {std::move(tokens), std::move(slots)};
}

std::vector<std::string> lexicon_surface(const GenSpec& spec, std::mt19937_64& eng,
                                         const std::string& type) {
  return whitespace_tokenize(pick(eng, spec.lexicons.at(type)));
}

AugmentedExample gen_ner_like(const GenSpec& spec,
                              const std::vector<std::vector<Piece>>& templates,
                              std::mt19937_64& eng) {
  const auto& pieces = pick(eng, templates);
  bool need_distinct = spec.task == Task::joint_er;
  std::vector<std::string> tokens;
  std::vector<FilledSlot> filled;
  for (int attempt = 0;; ++attempt) {
    std::tie(tokens, filled) =
        realize(pieces, [&](const std::string& s) { return lexicon_surface(spec, eng, s); });
    if (!need_distinct) break;
    // Joint decoding resolves relation tails by surface text, so every
    // entity in a sentence must read differently.
    std::set<std::vector<std::string>> seen;
    bool ok = true;
    for (const auto& f : filled) {
      std::vector<std::string> surf(tokens.begin() + f.span.start, tokens.begin() + f.span.end);
      ok = seen.insert(std::move(surf)).second && ok;
    }
    if (ok) break;
    if (attempt >= 100)
      throw config_error("lexicons too small to draw distinct entity surfaces");
  }

  std::vector<EntitySpan> entities;
  for (const auto& f : filled)
    entities.push_back({f.span.start, f.span.end, f.slot});

  AugmentedExample ex;
  ex.input_tokens = tokens;
  if (spec.task == Task::ner) {
    for (const auto& e : entities) ex.labels.emplace_back(e);
    ex.augmented_target = encode_ner(tokens, entities);
    return ex;
  }

  // joint_er: add a relation for each signature-compatible ordered pair,
  // each with an independent coin flip.
  std::vector<RelationLabel> relations;
  std::bernoulli_distribution coin(0.5);
  for (std::size_t a = 0; a < entities.size(); ++a) {
    for (std::size_t b = 0; b < entities.size(); ++b) {
      if (a == b) continue;
      for (const auto& sig : spec.relation_types) {
        if (sig.head == entities[a].type && sig.tail == entities[b].type && coin(eng))
          relations.push_back({entities[a], entities[b], sig.name});
      }
    }
  }
  for (const auto& e : entities) ex.labels.emplace_back(e);
  for (const auto& r : relations) ex.labels.emplace_back(r);
  ex.augmented_target = encode_joint_er(tokens, entities, relations);
  return ex;
}

AugmentedExample gen_re(const GenSpec& spec, const std::vector<std::vector<Piece>>& templates,
                        std::mt19937_64& eng) {
  const RelationSig& sig = pick(eng, spec.relation_types);
  const auto& pieces = pick(eng, templates);
  for (int attempt = 0;; ++attempt) {
    auto [tokens, filled] = realize(pieces, [&](const std::string& s) {
      return lexicon_surface(spec, eng, s == "head" ? sig.head : sig.tail);
    });
    Span head{}, tail{};
    for (const auto& f : filled) (f.slot == "head" ? head : tail) = f.span;
    const std::vector<std::string> hs(tokens.begin() + head.start, tokens.begin() + head.end);
    const std::vector<std::string> ts(tokens.begin() + tail.start, tokens.begin() + tail.end);
    if (hs != ts) {
      AugmentedExample ex;
      ex.input_tokens = tokens;
      const ReInstance inst{head, tail, sig.name};
      ex.labels.emplace_back(inst);
      ex.augmented_target = encode_relation(ex.input_tokens, inst);
      return ex;
    }
    if (attempt >= 100)
      throw config_error("lexicons too small to draw distinct head/tail surfaces");
  }
}

AugmentedExample gen_srl(const GenSpec& spec, const std::vector<std::vector<Piece>>& templates,
                         std::mt19937_64& eng) {
  const auto& pieces = pick(eng, templates);
  auto [tokens, filled] =
      realize(pieces, [&](const std::string& s) { return lexicon_surface(spec, eng, s); });

  Span predicate{};
  std::vector<SrlArg> args;
  for (const auto& f : filled) {
    if (f.slot == kPredicateRole)
      predicate = f.span;
    else
      args.push_back({f.span.start, f.span.end, f.slot});
  }

  AugmentedExample ex;
  ex.input_tokens = tokens;
  for (const auto& a : args) ex.labels.emplace_back(a);
  ex.labels.emplace_back(SrlArg{predicate.start, predicate.end, kPredicateRole});
  ex.augmented_target = encode_srl(tokens, predicate, args).second;
  return ex;
}

// One dialogue: 2-3 turns, each turn a template whose slots fill the belief
// state the first time they appear and re-read it afterwards. Emits one
// example per turn with the state accumulated so far.
void gen_dialogue(const GenSpec& spec, const TaskSchema& schema,
                  const std::vector<std::vector<Piece>>& templates, std::mt19937_64& eng,
                  std::vector<AugmentedExample>& out) {
  std::uniform_int_distribution<int> n_turns_dist(2, 3);
  const int n_turns = n_turns_dist(eng);
  BeliefState state;
  for (const auto& s : spec.slots) state.slots[s.name] = kNotGiven;

  std::vector<std::string> words;
  for (int t = 0; t < n_turns; ++t) {
    const auto& pieces = pick(eng, templates);
    for (const auto& p : pieces) {
      if (!p.is_slot) {
        words.insert(words.end(), p.tokens.begin(), p.tokens.end());
        continue;
      }
      std::string& value = state.slots.at(p.slot);
      if (value == kNotGiven) {
        const auto it = std::find_if(spec.slots.begin(), spec.slots.end(),
                                     [&](const SlotSpec& s) { return s.name == p.slot; });
        value = pick(eng, it->values);
      }
      const auto value_tokens = whitespace_tokenize(value);
      words.insert(words.end(), value_tokens.begin(), value_tokens.end());
    }
    AugmentedExample ex;
    ex.input_tokens = words;
    ex.labels.emplace_back(state);
    ex.augmented_target = encode_dst({}, state, schema);
    out.push_back(std::move(ex));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// GenSpec
// ---------------------------------------------------------------------------

TaskSchema GenSpec::schema() const {
  TaskSchema s;
  s.task = task;
  switch (task) {
    case Task::ner:
      for (const auto& [type, lex] : lexicons) s.entity_types.insert(type);
      break;
    case Task::re:
      for (const auto& sig : relation_types) s.relation_types.insert(sig.name);
      break;
    case Task::joint_er:
      for (const auto& [type, lex] : lexicons) s.entity_types.insert(type);
      for (const auto& sig : relation_types) s.relation_types.insert(sig.name);
      break;
    case Task::dst:
      for (const auto& slot : slots) s.slot_names.push_back(slot.name);
      std::sort(s.slot_names.begin(), s.slot_names.end());
      break;
    case Task::srl:
      for (const auto& [role, lex] : lexicons)
        if (role != kPredicateRole) s.role_labels.insert(role);
      break;
  }
  return s;
}

void GenSpec::validate() const {
  if (n_sentences <= 0) throw config_error("n_sentences must be positive");
  if (templates.empty()) throw config_error("spec has no templates");
  try {
    schema().validate();
  } catch (const label_error& e) {
    throw config_error(e.what());
  }

  for (const auto& [type, lex] : lexicons) {
    if (lex.empty()) throw config_error("lexicon for '" + type + "' is empty");
    for (const auto& surface : lex)
      check_surface_tokens(whitespace_tokenize(surface), "lexicon entry '" + surface + "'");
  }

  std::set<std::string> slot_name_set;
  if (task == Task::dst) {
    if (slots.empty()) throw config_error("dialogue spec has no slots");
    std::set<std::string> name_words;
    for (const auto& s : slots) {
      slot_name_set.insert(s.name);
      for (const auto& w : whitespace_tokenize(s.name)) name_words.insert(w);
    }
    if (slot_name_set.size() != slots.size())
      throw config_error("duplicate slot names in spec");
    for (const auto& s : slots) {
      if (s.values.empty()) throw config_error("slot '" + s.name + "' has no values");
      for (const auto& v : s.values) {
        const auto toks = whitespace_tokenize(v);
        check_surface_tokens(toks, "slot value '" + v + "'");
        if (v.find(',') != std::string::npos)
          throw config_error("slot value '" + v + "' contains a comma");
        for (const auto& w : toks)
          if (name_words.count(w))
            throw config_error("slot value '" + v +
                               "' shares the token '" + w +
                               "' with a slot name, which makes decoding ambiguous");
      }
    }
  }

  for (const auto& sig : relation_types) {
    if ((task == Task::re || task == Task::joint_er) &&
        (!lexicons.count(sig.head) || !lexicons.count(sig.tail)))
      throw config_error("relation '" + sig.name + "' references an unknown entity type");
  }
  if (task == Task::re && relation_types.empty())
    throw config_error("relation spec has no relation types");
  if (task == Task::srl && !lexicons.count(kPredicateRole))
    throw config_error("predicate lexicon 'V' is missing");

  for (const auto& tmpl : templates) {
    const auto pieces = parse_template(tmpl);
    for (const auto& p : pieces)
      if (!p.is_slot) check_surface_tokens(p.tokens, "template '" + tmpl + "'");
    const auto names = slot_names_in(pieces);
    switch (task) {
      case Task::ner:
      case Task::joint_er:
      case Task::srl:
        for (const auto& n : names)
          if (!lexicons.count(n))
            throw config_error("template placeholder '" + n + "' has no lexicon");
        if (task == Task::srl &&
            std::count(names.begin(), names.end(), kPredicateRole) != 1)
          throw config_error("template needs exactly one {V} placeholder: " + tmpl);
        break;
      case Task::re: {
        const auto heads = std::count(names.begin(), names.end(), "head");
        const auto tails = std::count(names.begin(), names.end(), "tail");
        if (heads != 1 || tails != 1 ||
            static_cast<std::size_t>(heads + tails) != names.size())
          throw config_error("template needs exactly {head} and {tail}: " + tmpl);
        break;
      }
      case Task::dst:
        for (const auto& n : names)
          if (!slot_name_set.count(n))
            throw config_error("template placeholder '" + n + "' is not a slot");
        break;
    }
  }
}

void to_json(nlohmann::json& j, const GenSpec& spec) {
  j = nlohmann::json{{"task", task_name(spec.task)},
                     {"n_sentences", spec.n_sentences},
                     {"seed", spec.seed},
                     {"lexicons", spec.lexicons},
                     {"templates", spec.templates}};
  j["relation_types"] = nlohmann::json::array();
  for (const auto& sig : spec.relation_types)
    j["relation_types"].push_back(
        {{"name", sig.name}, {"head", sig.head}, {"tail", sig.tail}});
  j["slots"] = nlohmann::json::array();
  for (const auto& s : spec.slots)
    j["slots"].push_back({{"name", s.name}, {"values", s.values}});
}

void from_json(const nlohmann::json& j, GenSpec& spec) {
  spec.task = task_from_name(j.at("task").get<std::string>());
  spec.n_sentences = j.at("n_sentences").get<int>();
  spec.seed = j.value("seed", std::uint64_t{0});
  spec.lexicons =
      j.value("lexicons", std::map<std::string, std::vector<std::string>>{});
  spec.templates = j.at("templates").get<std::vector<std::string>>();
  spec.relation_types.clear();
  for (const auto& sig : j.value("relation_types", nlohmann::json::array()))
    spec.relation_types.push_back({sig.at("name").get<std::string>(),
                                   sig.at("head").get<std::string>(),
                                   sig.at("tail").get<std::string>()});
  spec.slots.clear();
  for (const auto& s : j.value("slots", nlohmann::json::array()))
    spec.slots.push_back(
        {s.at("name").get<std::string>(), s.at("values").get<std::vector<std::string>>()});
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

std::vector<AugmentedExample> generate(const GenSpec& spec) {
  spec.validate();
  std::vector<std::vector<Piece>> templates;
  templates.reserve(spec.templates.size());
  for (const auto& t : spec.templates) templates.push_back(parse_template(t));
  const TaskSchema schema = spec.schema();

  std::vector<AugmentedExample> out;
  for (int i = 0; i < spec.n_sentences; ++i) {
    auto eng = rng::engine(spec.seed, static_cast<std::uint64_t>(i));
    switch (spec.task) {
      case Task::ner:
      case Task::joint_er:
        out.push_back(gen_ner_like(spec, templates, eng));
        break;
      case Task::re:
        out.push_back(gen_re(spec, templates, eng));
        break;
      case Task::srl:
        out.push_back(gen_srl(spec, templates, eng));
        break;
      case Task::dst:
        gen_dialogue(spec, schema, templates, eng, out);
        break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

std::vector<std::string> label_types_of(const AugmentedExample& ex) {
  std::vector<std::string> types;
  for (const auto& label : ex.labels) {
    if (const auto* e = std::get_if<EntitySpan>(&label)) {
      types.push_back(e->type);
    } else if (const auto* r = std::get_if<RelationLabel>(&label)) {
      types.push_back(r->type);
    } else if (const auto* a = std::get_if<SrlArg>(&label)) {
      if (a->role != kPredicateRole) types.push_back(a->role);
    } else if (const auto* b = std::get_if<BeliefState>(&label)) {
      for (const auto& [slot, value] : b->slots)
        if (value != kNotGiven) types.push_back(slot);
    } else if (const auto* ri = std::get_if<ReInstance>(&label)) {
      types.push_back(ri->type);
    }
  }
  std::sort(types.begin(), types.end());
  types.erase(std::unique(types.begin(), types.end()), types.end());
  return types;
}

Split subsample(std::span<const AugmentedExample> full, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw contract_error("fraction must lie in (0, 1], got " + std::to_string(fraction));
  if (full.empty()) throw contract_error("subsample over an empty corpus");

  const auto n = static_cast<long long>(full.size());
  std::vector<int> ids(full.size());
  std::iota(ids.begin(), ids.end(), 0);
  auto eng = rng::engine(seed, "split");
  std::shuffle(ids.begin(), ids.end(), eng);

  const auto n_test = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n)));
  const auto n_dev = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
  if (n_test + n_dev >= full.size())
    throw contract_error("corpus too small to carve dev/test splits");

  Split split;
  split.fraction = fraction;
  split.seed = seed;
  split.test_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.dev_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test),
                       ids.begin() + static_cast<std::ptrdiff_t>(n_test + n_dev));
  std::vector<int> pool(ids.begin() + static_cast<std::ptrdiff_t>(n_test + n_dev), ids.end());

  const std::size_t n_train = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool.size()))));
  std::vector<bool> in_train(pool.size(), false);
  std::fill(in_train.begin(), in_train.begin() + static_cast<std::ptrdiff_t>(n_train), true);

  // Coverage pass: every label type that occurs anywhere in the corpus
  // should appear in train whenever some pool example carries it and a
  // redundant train member can make room.
  std::map<std::string, int> counts;
  for (std::size_t p = 0; p < pool.size(); ++p)
    if (in_train[p])
      for (const auto& t : label_types_of(full[static_cast<std::size_t>(pool[p])]))
        ++counts[t];
  std::set<std::string> all_types;
  for (const auto& ex : full)
    for (const auto& t : label_types_of(ex)) all_types.insert(t);

  for (const auto& missing : all_types) {
    if (counts[missing] > 0) continue;
    std::size_t donor = pool.size();
    for (std::size_t p = 0; p < pool.size(); ++p) {
      if (in_train[p]) continue;
      const auto types = label_types_of(full[static_cast<std::size_t>(pool[p])]);
      if (std::find(types.begin(), types.end(), missing) != types.end()) {
        donor = p;
        break;
      }
    }
    if (donor == pool.size()) continue;  // the pool never carries this type
    const auto donor_types = label_types_of(full[static_cast<std::size_t>(pool[donor])]);

    std::size_t victim = pool.size();
    for (std::size_t p = pool.size(); p-- > 0;) {
      if (!in_train[p]) continue;
      bool removable = true;
      for (const auto& t : label_types_of(full[static_cast<std::size_t>(pool[p])])) {
        const bool replenished =
            std::find(donor_types.begin(), donor_types.end(), t) != donor_types.end();
        if (counts[t] <= 1 && !replenished) {
          removable = false;
          break;
        }
      }
      if (removable) {
        victim = p;
        break;
      }
    }
    if (victim == pool.size()) continue;  // budget too tight to swap safely

    in_train[victim] = false;
    in_train[donor] = true;
    for (const auto& t : label_types_of(full[static_cast<std::size_t>(pool[victim])]))
      --counts[t];
    for (const auto& t : donor_types) ++counts[t];
  }

  for (std::size_t p = 0; p < pool.size(); ++p)
    if (in_train[p]) split.train_ids.push_back(pool[p]);

  for (const int id : split.train_ids)
    split.train.push_back(full[static_cast<std::size_t>(id)]);
  for (const int id : split.dev_ids) split.dev.push_back(full[static_cast<std::size_t>(id)]);
  for (const int id : split.test_ids)
    split.test.push_back(full[static_cast<std::size_t>(id)]);
  return split;
}

// ---------------------------------------------------------------------------
// Episodes
// ---------------------------------------------------------------------------

namespace {

std::string relation_type_of(const AugmentedExample& ex) {
  const auto insts = re_instances_of(ex.labels);
  if (!insts.empty()) return insts.front().type;
  const auto rels = relations_of(ex.labels);
  if (!rels.empty()) return rels.front().type;
  throw contract_error("episode pool example carries no relation label");
}

}  // namespace

Episode sample_episode(std::span<const AugmentedExample> pool, int n_way, int k_shot,
                       int n_query, std::uint64_t seed) {
  if (n_way <= 0 || k_shot <= 0 || n_query <= 0)
    throw contract_error("episode shape must be positive");
  std::map<std::string, std::vector<int>> by_type;
  for (std::size_t i = 0; i < pool.size(); ++i)
    by_type[relation_type_of(pool[i])].push_back(static_cast<int>(i));

  std::vector<std::string> eligible;
  for (const auto& [type, members] : by_type)
    if (members.size() >= static_cast<std::size_t>(k_shot + n_query))
      eligible.push_back(type);
  if (eligible.size() < static_cast<std::size_t>(n_way))
    throw contract_error("pool has " + std::to_string(eligible.size()) +
                         " eligible relation types, need " + std::to_string(n_way));

  auto eng = rng::engine(seed, "episode");
  std::shuffle(eligible.begin(), eligible.end(), eng);
  eligible.resize(static_cast<std::size_t>(n_way));

  Episode ep;
  for (const auto& type : eligible) {
    std::vector<int> members = by_type.at(type);
    std::shuffle(members.begin(), members.end(), eng);
    for (int i = 0; i < k_shot; ++i) ep.support_ids.push_back(members[static_cast<std::size_t>(i)]);
    for (int i = 0; i < n_query; ++i)
      ep.query_ids.push_back(members[static_cast<std::size_t>(k_shot + i)]);
  }
  return ep;
}

// ---------------------------------------------------------------------------
// Column-format ingestion
// ---------------------------------------------------------------------------

ColumnCorpus load_column_format(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "' for reading");

  ColumnCorpus corpus;
  corpus.schema.task = Task::ner;

  std::vector<std::string> tokens;
  std::vector<EntitySpan> spans;
  bool open = false;  // a span is currently being extended
  auto flush_sentence = [&] {
    if (tokens.empty()) return;
    AugmentedExample ex;
    ex.input_tokens = tokens;
    for (const auto& s : spans) ex.labels.emplace_back(s);
    ex.augmented_target.clear();  // filled after the schema is complete
    corpus.examples.push_back(std::move(ex));
    tokens.clear();
    spans.clear();
    open = false;
  };

  std::string line;
  for (long long line_no = 1; std::getline(in, line); ++line_no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush_sentence();
      continue;
    }
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size() ||
        line.find('\t', tab + 1) != std::string::npos)
      throw parse_error("line " + std::to_string(line_no) +
                        ": expected 'token<TAB>tag', got '" + line + "'");
    const std::string token = line.substr(0, tab);
    const std::string tag = line.substr(tab + 1);

    std::string type;
    if (tag == "O") {
      open = false;
    } else if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') {
      type = tag.substr(2);
      std::transform(type.begin(), type.end(), type.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      const bool continues = tag[0] == 'I' && open && !spans.empty() &&
                             spans.back().type == type &&
                             spans.back().end == static_cast<int>(tokens.size());
      if (continues) {
        spans.back().end += 1;
      } else {
        // B- tag, or a dangling I- repaired to a span start.
        spans.push_back({static_cast<int>(tokens.size()),
                         static_cast<int>(tokens.size()) + 1, type});
        open = true;
      }
    } else {
      throw parse_error("line " + std::to_string(line_no) + ": tag '" + tag +
                        "' is not O, B-<type>, or I-<type>");
    }
    tokens.push_back(token);
    if (!type.empty()) corpus.schema.entity_types.insert(type);
  }
  flush_sentence();

  corpus.schema.validate();
  for (auto& ex : corpus.examples)
    ex.augmented_target = encode_ner(ex.input_tokens, entities_of(ex.labels));
  return corpus;
}

// ---------------------------------------------------------------------------
// Corpus directory IO
// ---------------------------------------------------------------------------

void save_corpus(const std::string& dir, const TaskSchema& schema,
                 std::span<const AugmentedExample> examples) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw io_error("cannot create directory '" + dir + "': " + ec.message());

  {
    std::ofstream out(dir + "/schema.json", std::ios::trunc);
    if (!out) throw io_error("cannot write '" + dir + "/schema.json'");
    out << nlohmann::json(schema).dump(2) << '\n';
  }
  std::ofstream out(dir + "/full.jsonl", std::ios::trunc);
  if (!out) throw io_error("cannot write '" + dir + "/full.jsonl'");
  for (const auto& ex : examples) out << nlohmann::json(ex).dump() << '\n';
  if (!out) throw io_error("short write to '" + dir + "/full.jsonl'");
}

Corpus load_corpus(const std::string& dir) {
  Corpus corpus;
  {
    std::ifstream in(dir + "/schema.json");
    if (!in) throw io_error("cannot open '" + dir + "/schema.json'");
    try {
      corpus.schema = nlohmann::json::parse(in).get<TaskSchema>();
    } catch (const nlohmann::json::exception& e) {
      throw parse_error("'" + dir + "/schema.json': " + e.what());
    }
  }
  corpus.schema.validate();

  std::ifstream in(dir + "/full.jsonl");
  if (!in) throw io_error("cannot open '" + dir + "/full.jsonl'");
  std::string line;
  for (long long line_no = 1; std::getline(in, line); ++line_no) {
    if (line.empty()) continue;
    try {
      corpus.examples.push_back(nlohmann::json::parse(line).get<AugmentedExample>());
    } catch (const nlohmann::json::exception& e) {
      throw parse_error("'" + dir + "/full.jsonl' line " + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  return corpus;
}

}  // namespace fishdip
