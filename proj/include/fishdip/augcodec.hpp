#pragma once

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "fishdip/errors.hpp"

namespace fishdip {

enum class Task { ner, re, joint_er, dst, srl };

const char* task_name(Task task);
Task task_from_name(std::string_view name);

// Structure tokens used by the augmented text format. They are reserved:
// surface text, type names and slot values must never contain them.
inline const std::vector<std::string> kSpecialTokens{"[", "]", "|", "="};
bool is_special_token(std::string_view tok);

// Token spans are half-open [start, end) over the example's input tokens.
struct Span {
  int start = 0;
  int end = 0;
  auto operator<=>(const Span&) const = default;
};

struct EntitySpan {
  int start = 0;
  int end = 0;
  std::string type;
  auto operator<=>(const EntitySpan&) const = default;
};

struct RelationLabel {
  EntitySpan head;
  EntitySpan tail;
  std::string type;
  auto operator<=>(const RelationLabel&) const = default;
};

struct SrlArg {
  int start = 0;
  int end = 0;
  std::string role;  // predicate itself is stored with role kPredicateRole
  auto operator<=>(const SrlArg&) const = default;
};

inline constexpr const char* kPredicateRole = "V";

// Complete assignment: every schema slot maps to a value, "not given" when
// the dialogue has not constrained it.
struct BeliefState {
  std::map<std::string, std::string> slots;
  bool operator==(const BeliefState&) const = default;
};

inline constexpr const char* kNotGiven = "not given";

// Single head/tail pair classification (spans untyped).
struct ReInstance {
  Span head;
  Span tail;
  std::string type;
  auto operator<=>(const ReInstance&) const = default;
};

using StructuredLabel = std::variant<EntitySpan, RelationLabel, SrlArg, BeliefState, ReInstance>;

struct TaskSchema {
  Task task = Task::ner;
  std::set<std::string> entity_types;
  std::set<std::string> relation_types;
  std::vector<std::string> slot_names;  // rendering order for belief states
  std::set<std::string> role_labels;    // case-preserved (e.g. "AM-LOC")

  // label_error when type strings are empty, contain structure tokens, or
  // (for entity/relation/slot names) contain uppercase letters.
  void validate() const;
};

struct AugmentedExample {
  std::vector<std::string> input_tokens;
  std::vector<StructuredLabel> labels;
  std::string augmented_target;
  bool operator==(const AugmentedExample&) const = default;
};

// ---- label list helpers ----
std::vector<EntitySpan> entities_of(std::span<const StructuredLabel> labels);
std::vector<RelationLabel> relations_of(std::span<const StructuredLabel> labels);
std::vector<SrlArg> srl_args_of(std::span<const StructuredLabel> labels, bool include_predicate);
std::optional<BeliefState> belief_of(std::span<const StructuredLabel> labels);
std::vector<ReInstance> re_instances_of(std::span<const StructuredLabel> labels);

std::vector<std::string> whitespace_tokenize(std::string_view text);

// Join tokens with single spaces, then collapse " ," to "," (display form
// used for relation tail strings).
std::string display_text(std::span<const std::string> tokens);

// What the model actually reads: raw tokens, except srl marks the predicate
// with [ ] brackets.
std::vector<std::string> model_input_tokens(const AugmentedExample& ex, Task task);

// ---- encoding (structure -> augmented text) ----
// All encoders emit single spaces between every token and separator.
std::string encode_ner(std::span<const std::string> tokens,
                       std::span<const EntitySpan> entities);
std::string encode_relation(std::span<const std::string> tokens, const ReInstance& inst);
std::string encode_joint_er(std::span<const std::string> tokens,
                            std::span<const EntitySpan> entities,
                            std::span<const RelationLabel> relations);
std::string encode_dst(std::span<const std::string> dialogue_turns, const BeliefState& state,
                       const TaskSchema& schema);
// Returns {marked input sentence, target}; the input brackets the predicate,
// the target brackets the arguments and leaves the predicate plain.
std::pair<std::string, std::string> encode_srl(std::span<const std::string> tokens,
                                               const Span& predicate,
                                               std::span<const SrlArg> args);

// ---- decoding (generated text -> structure) ----
// Total and deterministic on arbitrary input: tolerant bracket parsing,
// special-token stripping, Needleman-Wunsch grounding of spans onto
// input_tokens, schema filtering, overlap resolution (earlier start wins).
std::vector<StructuredLabel> decode(const std::string& generated,
                                    std::span<const std::string> input_tokens,
                                    const TaskSchema& schema);

// ---- json ----
void to_json(nlohmann::json& j, const TaskSchema& schema);
void from_json(const nlohmann::json& j, TaskSchema& schema);
void to_json(nlohmann::json& j, const StructuredLabel& label);
void from_json(const nlohmann::json& j, StructuredLabel& label);
void to_json(nlohmann::json& j, const AugmentedExample& ex);
void from_json(const nlohmann::json& j, AugmentedExample& ex);

}  // namespace fishdip
