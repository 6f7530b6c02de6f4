#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fishdip/augcodec.hpp"
#include "fishdip/errors.hpp"

namespace fishdip {

// Micro-averaged precision/recall/F1 counts. Aggregate across examples by
// summing counts (operator+=), then read the derived ratios; every 0/0 is
// defined as 0.
struct PRF {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;

  double precision() const;
  double recall() const;
  double f1() const;

  PRF& operator+=(const PRF& other);
  bool operator==(const PRF&) const = default;
};

// strict: head span, tail span, both entity types, and relation type must
// all match. relaxed: entity types are ignored (spans + relation type only).
enum class RelationMatch { strict, relaxed };

// Single-example counts. Predictions and gold are treated as sets:
// duplicates are removed before counting, so an item emitted twice is
// neither double-rewarded nor double-penalized.
PRF entity_prf(std::span<const EntitySpan> pred, std::span<const EntitySpan> gold);
PRF relation_prf(std::span<const RelationLabel> pred, std::span<const RelationLabel> gold,
                 RelationMatch mode);
PRF srl_prf(std::span<const SrlArg> pred, std::span<const SrlArg> gold);

// Single-label type classification for relation-classification examples:
// a present prediction is TP when equal to gold, otherwise FP+FN; an absent
// prediction is FN only.
PRF re_prf(const std::optional<std::string>& pred_type, const std::string& gold_type);

// Fraction of turns whose entire slot->value map matches exactly
// ("not given" slots included). Empty input yields 0.
// contract_error when list lengths differ.
double joint_accuracy(std::span<const BeliefState> pred, std::span<const BeliefState> gold);

struct MetricReport {
  Task task = Task::ner;
  std::string metric;  // "entity_f1" | "relation_f1" | "srl_f1" | "re_f1" | "joint_accuracy"
  double value = 0.0;
  PRF counts;          // all zero for joint_accuracy
  long long n_examples = 0;
  bool operator==(const MetricReport&) const = default;
};

void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

// Corpus-level evaluation of decoded label lists against gold label lists,
// by task: ner -> entity_f1; joint_er -> entity_f1 + relation_f1;
// srl -> srl_f1 (predicate excluded on both sides); dst -> joint_accuracy;
// re -> re_f1 over predicted types.
// contract_error when lengths differ, a dst example lacks a belief state,
// or an re gold example lacks its instance.
std::vector<MetricReport> evaluate(Task task,
                                   std::span<const std::vector<StructuredLabel>> pred,
                                   std::span<const std::vector<StructuredLabel>> gold,
                                   RelationMatch mode = RelationMatch::strict);

}  // namespace fishdip
