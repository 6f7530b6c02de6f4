// Augmented-text codec tests: byte-exact golden encodings, decode
// round-trips over seeded random instances, tolerant-decode behavior on
// noisy strings, and fuzz totality.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "fishdip/augcodec.hpp"
#include "fishdip/rng.hpp"
#include "json.hpp"

using namespace fishdip;

namespace {

struct Golden {
  TaskSchema schema;
  AugmentedExample ex;
  std::string marked_input;  // srl only
};

Golden load_golden(const std::string& name) {
  const std::string path = std::string(FISHDIP_REPO_DIR) + "/data/golden/" + name + ".json";
  std::ifstream in(path);
  REQUIRE_MESSAGE(in.good(), "missing golden file ", path);
  nlohmann::json j;
  in >> j;
  Golden g;
  g.schema = j.at("schema").get<TaskSchema>();
  g.ex = j.get<AugmentedExample>();
  g.marked_input = j.value("marked_input", std::string{});
  return g;
}

std::string join_tokens(const std::vector<std::string>& toks) {
  std::string s;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) s += ' ';
    s += toks[i];
  }
  return s;
}

// Re-encode a golden example according to its task.
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

// Structural validity of decode output against a schema (fuzz oracle).
void require_schema_valid(const std::vector<StructuredLabel>& labels, const TaskSchema& schema,
                          int n_input_tokens) {
  std::vector<std::pair<int, int>> spans;
  int belief_count = 0, re_count = 0;
  for (const auto& l : labels) {
    if (const auto* e = std::get_if<EntitySpan>(&l)) {
      REQUIRE(e->start >= 0);
      REQUIRE(e->start < e->end);
      REQUIRE(e->end <= n_input_tokens);
      REQUIRE(schema.entity_types.count(e->type) == 1);
      spans.emplace_back(e->start, e->end);
    } else if (const auto* a = std::get_if<SrlArg>(&l)) {
      REQUIRE(a->start >= 0);
      REQUIRE(a->start < a->end);
      REQUIRE(a->end <= n_input_tokens);
      REQUIRE(schema.role_labels.count(a->role) == 1);
      spans.emplace_back(a->start, a->end);
    } else if (const auto* b = std::get_if<BeliefState>(&l)) {
      ++belief_count;
      REQUIRE(b->slots.size() == schema.slot_names.size());
      for (const auto& slot : schema.slot_names) {
        REQUIRE(b->slots.count(slot) == 1);
        REQUIRE(!b->slots.at(slot).empty());
      }
    } else if (const auto* r = std::get_if<ReInstance>(&l)) {
      ++re_count;
      REQUIRE(schema.relation_types.count(r->type) == 1);
      for (const Span& s : {r->head, r->tail}) {
        REQUIRE(s.start >= 0);
        REQUIRE(s.start < s.end);
        REQUIRE(s.end <= n_input_tokens);
      }
    } else if (const auto* rel = std::get_if<RelationLabel>(&l)) {
      REQUIRE(schema.relation_types.count(rel->type) == 1);
    }
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i) REQUIRE(spans[i - 1].second <= spans[i].first);
  REQUIRE(belief_count <= 1);
  REQUIRE(re_count <= 1);
}

const std::vector<std::string> kGoldenNames{"ner", "re", "joint_er", "dst", "srl"};

}  // namespace

TEST_CASE("golden encodings reproduce the stored strings byte for byte") {
  for (const auto& name : kGoldenNames) {
    CAPTURE(name);
    const Golden g = load_golden(name);
    CHECK_NOTHROW(g.schema.validate());
    CHECK(reencode(g) == g.ex.augmented_target);
    // Encoding is a pure function: a second call is identical.
    CHECK(reencode(g) == g.ex.augmented_target);
  }
}

TEST_CASE("golden srl marked input brackets the predicate") {
  const Golden g = load_golden("srl");
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
  const auto [marked, target] = encode_srl(g.ex.input_tokens, pred, args);
  CHECK(marked == g.marked_input);
  CHECK(target == g.ex.augmented_target);
  // model_input_tokens yields the same marking.
  CHECK(join_tokens(model_input_tokens(g.ex, Task::srl)) == g.marked_input);
}

TEST_CASE("golden targets decode back to the stored labels") {
  // Note the relation golden names its head mention before the tail even
  // though the tail precedes it in the sentence; per-mention grounding
  // recovers both spans regardless of order.
  for (const auto& name : kGoldenNames) {
    CAPTURE(name);
    const Golden g = load_golden(name);
    std::vector<StructuredLabel> expected = g.ex.labels;
    if (g.schema.task == Task::srl) {
      expected.clear();
      for (const auto& a : srl_args_of(g.ex.labels, false)) expected.emplace_back(a);
    }
    CHECK(decode(g.ex.augmented_target, g.ex.input_tokens, g.schema) == expected);
  }
}

TEST_CASE("self relations ground head and tail to the same span") {
  TaskSchema schema;
  schema.task = Task::re;
  schema.relation_types = {"self"};
  const std::vector<std::string> toks{"X"};
  const auto out = decode("relationship between [ X ] and [ X ] = self", toks, schema);
  const std::vector<StructuredLabel> expected{ReInstance{{0, 1}, {0, 1}, "self"}};
  CHECK(out == expected);
}

TEST_CASE("encoding minimal and empty label sets") {
  const Golden ner = load_golden("ner");

  SUBCASE("no entities reproduces the plain sentence") {
    CHECK(encode_ner(ner.ex.input_tokens, {}) == join_tokens(ner.ex.input_tokens));
  }
  SUBCASE("single-token sentence, single entity") {
    const std::vector<std::string> toks{"Paris"};
    const std::vector<EntitySpan> ents{{0, 1, "location"}};
    CHECK(encode_ner(toks, ents) == "[ Paris | location ]");
  }
  SUBCASE("self relation on one token") {
    const std::vector<std::string> toks{"X"};
    CHECK(encode_relation(toks, ReInstance{{0, 1}, {0, 1}, "self"}) ==
          "relationship between [ X ] and [ X ] = self");
  }
  SUBCASE("joint encoding without relations equals the entity encoding") {
    const auto ents = entities_of(load_golden("joint_er").ex.labels);
    const auto toks = load_golden("joint_er").ex.input_tokens;
    CHECK(encode_joint_er(toks, ents, {}) == encode_ner(toks, ents));
  }
  SUBCASE("empty belief state lists every slot as not given") {
    const Golden dst = load_golden("dst");
    CHECK(encode_dst({}, BeliefState{}, dst.schema) ==
          "[ belief ] hotel area not given, hotel book day not given, hotel book people not "
          "given, hotel book stay not given, hotel internet not given, hotel name not given, "
          "hotel parking not given, hotel price range not given, hotel stars not given, hotel "
          "type not given [ belief ]");
  }
  SUBCASE("srl with no arguments reproduces the plain sentence") {
    const Golden srl = load_golden("srl");
    const auto [marked, target] = encode_srl(srl.ex.input_tokens, Span{16, 17}, {});
    CHECK(marked == srl.marked_input);
    CHECK(target == join_tokens(srl.ex.input_tokens));
  }
}

TEST_CASE("encoder contract violations raise label errors") {
  const std::vector<std::string> toks{"a", "b", "c"};
  SUBCASE("overlapping entity spans") {
    const std::vector<EntitySpan> ents{{0, 2, "t"}, {1, 3, "t"}};
    CHECK_THROWS_AS((void)encode_ner(toks, ents), label_error);
  }
  SUBCASE("span out of bounds") {
    const std::vector<EntitySpan> ents{{0, 4, "t"}};
    CHECK_THROWS_AS((void)encode_ner(toks, ents), label_error);
    CHECK_THROWS_AS((void)encode_relation(toks, ReInstance{{0, 1}, {2, 4}, "r"}), label_error);
  }
  SUBCASE("empty or reserved-character type strings") {
    CHECK_THROWS_AS((void)encode_ner(toks, std::vector<EntitySpan>{{0, 1, ""}}), label_error);
    CHECK_THROWS_AS((void)encode_ner(toks, std::vector<EntitySpan>{{0, 1, "x | y"}}),
                    label_error);
  }
  SUBCASE("relation referencing an unknown entity") {
    const std::vector<EntitySpan> ents{{0, 1, "t"}};
    const std::vector<RelationLabel> rels{{{0, 1, "t"}, {1, 2, "t"}, "r"}};
    CHECK_THROWS_AS((void)encode_joint_er(toks, ents, rels), label_error);
  }
  SUBCASE("belief state with a slot outside the schema") {
    TaskSchema schema;
    schema.task = Task::dst;
    schema.slot_names = {"area"};
    BeliefState st;
    st.slots["zone"] = "north";
    CHECK_THROWS_AS((void)encode_dst({}, st, schema), label_error);
  }
  SUBCASE("slot value containing a comma") {
    TaskSchema schema;
    schema.task = Task::dst;
    schema.slot_names = {"area"};
    BeliefState st;
    st.slots["area"] = "north,east";
    CHECK_THROWS_AS((void)encode_dst({}, st, schema), label_error);
  }
  SUBCASE("srl argument overlapping the predicate") {
    const std::vector<SrlArg> args{{0, 2, "A0"}};
    CHECK_THROWS_AS((void)encode_srl(toks, Span{1, 2}, args), label_error);
  }
  SUBCASE("schema validation rejects uppercase entity types") {
    TaskSchema schema;
    schema.task = Task::ner;
    schema.entity_types = {"Location"};
    CHECK_THROWS_AS(schema.validate(), label_error);
  }
}

TEST_CASE("decode filters, grounds, and tolerates noise") {
  TaskSchema schema;
  schema.task = Task::ner;
  schema.entity_types = {"location"};
  const std::vector<std::string> paris{"Paris"};
  const std::vector<std::string> sentence{"Paris", "is", "nice"};

  SUBCASE("types outside the schema are discarded") {
    CHECK(decode("[ Paris | planet ]", paris, schema).empty());
  }
  SUBCASE("a misspelled span token still grounds through alignment") {
    const auto out = decode("[ Pariss | location ] is nice", sentence, schema);
    const std::vector<StructuredLabel> expected{EntitySpan{0, 1, "location"}};
    CHECK(out == expected);
  }
  SUBCASE("an unterminated group closes at end of string") {
    const auto out = decode("[ Paris | location", paris, schema);
    const std::vector<StructuredLabel> expected{EntitySpan{0, 1, "location"}};
    CHECK(out == expected);
  }
  SUBCASE("a second opening bracket closes the running group") {
    const auto out = decode("[ Paris [ is | location ]", sentence, schema);
    // First group has no annotation and is dropped; second carries the type.
    const std::vector<StructuredLabel> expected{EntitySpan{1, 2, "location"}};
    CHECK(out == expected);
  }
  SUBCASE("stray separators outside groups carry no structure") {
    CHECK(decode("Paris ] is | = nice", sentence, schema).empty());
  }
  SUBCASE("empty generated string yields no span labels") {
    CHECK(decode("", sentence, schema).empty());
  }
  SUBCASE("groups with no surface tokens are dropped") {
    CHECK(decode("[ | location ] Paris", paris, schema).empty());
  }
  SUBCASE("spans whose tokens all align to gaps are dropped") {
    CHECK(decode("[ Zanzibar | location ] Paris is nice", sentence, schema).empty());
  }
  SUBCASE("dst decode of arbitrary text returns a complete default state") {
    const Golden dst = load_golden("dst");
    const auto out = decode("complete nonsense", {}, dst.schema);
    REQUIRE(out.size() == 1);
    const auto& b = std::get<BeliefState>(out[0]);
    REQUIRE(b.slots.size() == dst.schema.slot_names.size());
    for (const auto& [slot, value] : b.slots) {
      CAPTURE(slot);
      CHECK(value == kNotGiven);
    }
  }
}

TEST_CASE("ner encode/decode round-trips on seeded random instances") {
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
    CAPTURE(iter);
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
    const std::string target = encode_ner(toks, ents);
    const std::vector<StructuredLabel> expected(ents.begin(), ents.end());
    REQUIRE(decode(target, toks, schema) == expected);
  }
}

TEST_CASE("srl encode/decode round-trips on seeded random frames") {
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
    CAPTURE(iter);
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
    REQUIRE(decode(target, toks, schema) == expected);
    // The marked input itself carries an untyped group and decodes to nothing.
    REQUIRE(decode(marked, toks, schema).empty());
  }
}

TEST_CASE("joint encode/decode round-trips on seeded random instances") {
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
    CAPTURE(iter);
    // Distinct surface tokens so decoded tail strings resolve uniquely.
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
    for (const auto& r : rels) expected.emplace_back(r);
    REQUIRE(decode(target, toks, schema) == expected);
  }
}

TEST_CASE("relation encode/decode round-trips when the head precedes the tail") {
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
    CAPTURE(iter);
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
    const std::string target = encode_relation(toks, inst);
    const std::vector<StructuredLabel> expected{inst};
    REQUIRE(decode(target, toks, schema) == expected);
  }
}

TEST_CASE("dst encode/decode round-trips, including prefix-sharing slot names") {
  auto eng = rng::engine(7, "augcodec-rt-dst");
  TaskSchema schema;
  schema.task = Task::dst;
  schema.slot_names = {"svc area", "svc area code", "svc name", "zone"};
  std::vector<std::string> values;
  for (int i = 0; i < 50; ++i) values.push_back("v" + std::to_string(i));

  std::uniform_int_distribution<std::size_t> val_d(0, values.size() - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int iter = 0; iter < 1000; ++iter) {
    CAPTURE(iter);
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
    const std::string target = encode_dst({}, state, schema);
    const std::vector<StructuredLabel> expected{state};
    REQUIRE(decode(target, {}, schema) == expected);
  }
}

TEST_CASE("decode is total, deterministic, and schema-valid on token soup") {
  auto eng = rng::engine(11, "augcodec-fuzz");
  std::vector<TaskSchema> schemas;
  for (const auto& name : kGoldenNames) schemas.push_back(load_golden(name).schema);
  const std::vector<std::string> input{"w1", "w2", "Paris", "x", "north"};
  const std::vector<std::string> alphabet{"[",     "]",     "|",    "=",     ",",
                                          "belief", "hotel", "area", "north", "w1",
                                          "w2",    "Paris", "x,",   "not",   "given"};
  std::uniform_int_distribution<int> len_d(0, 25);
  std::uniform_int_distribution<std::size_t> tok_d(0, alphabet.size() - 1);
  for (int iter = 0; iter < 10000; ++iter) {
    CAPTURE(iter);
    const int n = len_d(eng);
    std::string s;
    for (int i = 0; i < n; ++i) {
      if (i) s += ' ';
      s += alphabet[tok_d(eng)];
    }
    const auto& schema = schemas[static_cast<std::size_t>(iter) % schemas.size()];
    std::vector<StructuredLabel> out1, out2;
    REQUIRE_NOTHROW(out1 = decode(s, input, schema));
    REQUIRE_NOTHROW(out2 = decode(s, input, schema));
    REQUIRE(out1 == out2);
    require_schema_valid(out1, schema, static_cast<int>(input.size()));
  }
}

TEST_CASE("display text joins tokens and reattaches commas") {
  const std::vector<std::string> a{"Orange", ",", "Ohio"};
  CHECK(display_text(a) == "Orange, Ohio");
  const std::vector<std::string> b{"a", ",", "b", ",", "c"};
  CHECK(display_text(b) == "a, b, c");
  CHECK(display_text({}) == "");
}

TEST_CASE("whitespace tokenizer splits on runs of blanks") {
  CHECK(whitespace_tokenize("  a\tb\nc  ") == std::vector<std::string>{"a", "b", "c"});
  CHECK(whitespace_tokenize("").empty());
  CHECK(whitespace_tokenize("one").size() == 1);
}

TEST_CASE("task names and special tokens") {
  for (Task t : {Task::ner, Task::re, Task::joint_er, Task::dst, Task::srl}) {
    CHECK(task_from_name(task_name(t)) == t);
  }
  CHECK_THROWS_AS((void)task_from_name("bogus"), config_error);
  for (const auto& s : kSpecialTokens) CHECK(is_special_token(s));
  CHECK(!is_special_token("w"));
  CHECK(!is_special_token("[x]"));
}

TEST_CASE("json serialization round-trips golden examples and schemas") {
  for (const auto& name : kGoldenNames) {
    CAPTURE(name);
    const Golden g = load_golden(name);
    const nlohmann::json js = g.schema;
    CHECK(js.get<TaskSchema>().entity_types == g.schema.entity_types);
    CHECK(js.get<TaskSchema>().slot_names == g.schema.slot_names);
    CHECK(js.get<TaskSchema>().role_labels == g.schema.role_labels);
    CHECK(js.get<TaskSchema>().relation_types == g.schema.relation_types);
    CHECK(js.get<TaskSchema>().task == g.schema.task);
    const nlohmann::json je = g.ex;
    CHECK(je.get<AugmentedExample>() == g.ex);
  }
}

TEST_CASE("model input tokens are unmarked except for srl") {
  const Golden ner = load_golden("ner");
  CHECK(model_input_tokens(ner.ex, Task::ner) == ner.ex.input_tokens);
  const Golden dst = load_golden("dst");
  CHECK(model_input_tokens(dst.ex, Task::dst) == dst.ex.input_tokens);
}
