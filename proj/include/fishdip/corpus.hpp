#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fishdip/augcodec.hpp"
#include "fishdip/errors.hpp"

namespace fishdip {

// Directed relation signature: instances point from a head entity of type
// `head` to a tail entity of type `tail`.
struct RelationSig {
  std::string name;
  std::string head;
  std::string tail;
  bool operator==(const RelationSig&) const = default;
};

// Dialogue slot with its value lexicon.
struct SlotSpec {
  std::string name;
  std::vector<std::string> values;
  bool operator==(const SlotSpec&) const = default;
};

// Recipe for a synthetic corpus. Templates are sentence strings whose
// {placeholders} are filled from lexicons:
//   ner / joint_er : {entity-type}
//   re             : exactly one {head} and one {tail}; their entity types
//                    come from the sampled relation signature
//   srl            : one {V} predicate slot plus {role} slots
//   dst            : turn templates with {slot name} placeholders;
//                    n_sentences counts dialogues, and each dialogue emits
//                    one example per turn with the accumulated belief state
struct GenSpec {
  Task task = Task::ner;
  int n_sentences = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::vector<std::string>> lexicons;  // type/role -> surfaces
  std::vector<RelationSig> relation_types;
  std::vector<SlotSpec> slots;  // dst only
  std::vector<std::string> templates;

  // config_error on unknown placeholder types, missing lexicons, structure
  // tokens inside surfaces, comma-bearing slot values, or slot values whose
  // tokens collide with slot-name tokens (which would make decoding
  // ambiguous).
  void validate() const;

  // Schema implied by the spec: entity/relation/role types and the
  // alphabetical slot order.
  TaskSchema schema() const;
};

void to_json(nlohmann::json& j, const GenSpec& spec);
void from_json(const nlohmann::json& j, GenSpec& spec);

// Deterministic per seed; every example is generated from its own derived
// seed, so corpus content is independent of generation order.
std::vector<AugmentedExample> generate(const GenSpec& spec);

// Fixed-fraction low-resource split. Dev and test are carved from the
// shuffled corpus first (10% / 20%, independent of `fraction`), and train
// draws max(1, round(fraction * pool)) from the remaining 70%, followed by
// a coverage pass that swaps in examples so every label type present in the
// corpus appears in train whenever the budget allows.
struct Split {
  std::vector<AugmentedExample> train, dev, test;
  std::vector<int> train_ids, dev_ids, test_ids;  // indices into the full corpus
  double fraction = 1.0;
  std::uint64_t seed = 0;
};

Split subsample(std::span<const AugmentedExample> full, double fraction, std::uint64_t seed);

// Label types an example contributes to coverage accounting: entity types,
// relation types, SRL roles (predicate excluded), filled dialogue slots.
std::vector<std::string> label_types_of(const AugmentedExample& ex);

// N-way K-shot episode over relation-labeled examples. Returns indices into
// the pool; support and query are disjoint. contract_error when fewer than
// n_way types have k_shot + n_query examples.
struct Episode {
  std::vector<int> support_ids;
  std::vector<int> query_ids;
};

Episode sample_episode(std::span<const AugmentedExample> pool, int n_way, int k_shot,
                       int n_query, std::uint64_t seed);

// CoNLL-style "token TAB tag" files with blank-line sentence breaks and BIO
// tags. A dangling I- tag opens a new span (standard repair). parse_error
// messages carry 1-based line numbers.
struct ColumnCorpus {
  TaskSchema schema;
  std::vector<AugmentedExample> examples;
};

ColumnCorpus load_column_format(const std::string& path);

// Corpus directory layout: schema.json plus full.jsonl (one example per
// line).
void save_corpus(const std::string& dir, const TaskSchema& schema,
                 std::span<const AugmentedExample> examples);

struct Corpus {
  TaskSchema schema;
  std::vector<AugmentedExample> examples;
};

Corpus load_corpus(const std::string& dir);

}  // namespace fishdip
