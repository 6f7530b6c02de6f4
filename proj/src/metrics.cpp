#include "fishdip/metrics.hpp"

#include <algorithm>
#include <tuple>

namespace fishdip {

namespace {

double ratio(long long num, long long den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// Set counts over any ordered item type: dedup both sides, count the
// intersection as TP, the set differences as FP / FN.
template <typename T>
PRF set_counts(std::vector<T> pred, std::vector<T> gold) {
  std::sort(pred.begin(), pred.end());
  pred.erase(std::unique(pred.begin(), pred.end()), pred.end());
  std::sort(gold.begin(), gold.end());
  gold.erase(std::unique(gold.begin(), gold.end()), gold.end());
  std::vector<T> common;
  std::set_intersection(pred.begin(), pred.end(), gold.begin(), gold.end(),
                        std::back_inserter(common));
  PRF prf;
  prf.tp = static_cast<long long>(common.size());
  prf.fp = static_cast<long long>(pred.size() - common.size());
  prf.fn = static_cast<long long>(gold.size() - common.size());
  return prf;
}

using RelaxedKey = std::tuple<int, int, int, int, std::string>;

RelaxedKey relaxed_key(const RelationLabel& r) {
  return {r.head.start, r.head.end, r.tail.start, r.tail.end, r.type};
}

}  // namespace

double PRF::precision() const { return ratio(tp, tp + fp); }
double PRF::recall() const { return ratio(tp, tp + fn); }

double PRF::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

PRF& PRF::operator+=(const PRF& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  return *this;
}

PRF entity_prf(std::span<const EntitySpan> pred, std::span<const EntitySpan> gold) {
  return set_counts(std::vector<EntitySpan>(pred.begin(), pred.end()),
                    std::vector<EntitySpan>(gold.begin(), gold.end()));
}

PRF relation_prf(std::span<const RelationLabel> pred, std::span<const RelationLabel> gold,
                 RelationMatch mode) {
  if (mode == RelationMatch::strict) {
    return set_counts(std::vector<RelationLabel>(pred.begin(), pred.end()),
                      std::vector<RelationLabel>(gold.begin(), gold.end()));
  }
  std::vector<RelaxedKey> p, g;
  for (const auto& r : pred) p.push_back(relaxed_key(r));
  for (const auto& r : gold) g.push_back(relaxed_key(r));
  return set_counts(std::move(p), std::move(g));
}

PRF srl_prf(std::span<const SrlArg> pred, std::span<const SrlArg> gold) {
  return set_counts(std::vector<SrlArg>(pred.begin(), pred.end()),
                    std::vector<SrlArg>(gold.begin(), gold.end()));
}

PRF re_prf(const std::optional<std::string>& pred_type, const std::string& gold_type) {
  PRF prf;
  if (!pred_type.has_value()) {
    prf.fn = 1;
  } else if (*pred_type == gold_type) {
    prf.tp = 1;
  } else {
    prf.fp = 1;
    prf.fn = 1;
  }
  return prf;
}

double joint_accuracy(std::span<const BeliefState> pred, std::span<const BeliefState> gold) {
  if (pred.size() != gold.size())
    throw contract_error("joint_accuracy: " + std::to_string(pred.size()) +
                         " predictions vs " + std::to_string(gold.size()) + " gold states");
  if (gold.empty()) return 0.0;
  long long hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (pred[i] == gold[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

void to_json(nlohmann::json& j, const MetricReport& r) {
  j = nlohmann::json{{"task", task_name(r.task)}, {"metric", r.metric},
                     {"value", r.value},          {"tp", r.counts.tp},
                     {"fp", r.counts.fp},         {"fn", r.counts.fn},
                     {"n_examples", r.n_examples}};
}

void from_json(const nlohmann::json& j, MetricReport& r) {
  r.task = task_from_name(j.at("task").get<std::string>());
  r.metric = j.at("metric").get<std::string>();
  r.value = j.at("value").get<double>();
  r.counts.tp = j.at("tp").get<long long>();
  r.counts.fp = j.at("fp").get<long long>();
  r.counts.fn = j.at("fn").get<long long>();
  r.n_examples = j.at("n_examples").get<long long>();
}

std::vector<MetricReport> evaluate(Task task,
                                   std::span<const std::vector<StructuredLabel>> pred,
                                   std::span<const std::vector<StructuredLabel>> gold,
                                   RelationMatch mode) {
  if (pred.size() != gold.size())
    throw contract_error("evaluate: " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(gold.size()) + " gold examples");
  const long long n = static_cast<long long>(gold.size());
  auto report = [&](const char* metric, const PRF& counts) {
    return MetricReport{task, metric, counts.f1(), counts, n};
  };

  switch (task) {
    case Task::ner: {
      PRF prf;
      for (std::size_t i = 0; i < gold.size(); ++i)
        prf += entity_prf(entities_of(pred[i]), entities_of(gold[i]));
      return {report("entity_f1", prf)};
    }
    case Task::joint_er: {
      PRF ent, rel;
      for (std::size_t i = 0; i < gold.size(); ++i) {
        ent += entity_prf(entities_of(pred[i]), entities_of(gold[i]));
        rel += relation_prf(relations_of(pred[i]), relations_of(gold[i]), mode);
      }
      return {report("entity_f1", ent), report("relation_f1", rel)};
    }
    case Task::srl: {
      PRF prf;
      for (std::size_t i = 0; i < gold.size(); ++i)
        prf += srl_prf(srl_args_of(pred[i], false), srl_args_of(gold[i], false));
      return {report("srl_f1", prf)};
    }
    case Task::dst: {
      std::vector<BeliefState> p, g;
      for (std::size_t i = 0; i < gold.size(); ++i) {
        const auto gb = belief_of(gold[i]);
        if (!gb.has_value())
          throw contract_error("evaluate: dst gold example " + std::to_string(i) +
                               " has no belief state");
        g.push_back(*gb);
        p.push_back(belief_of(pred[i]).value_or(BeliefState{}));
      }
      MetricReport r{task, "joint_accuracy", joint_accuracy(p, g), PRF{}, n};
      return {r};
    }
    case Task::re: {
      PRF prf;
      for (std::size_t i = 0; i < gold.size(); ++i) {
        const auto gi = re_instances_of(gold[i]);
        if (gi.empty())
          throw contract_error("evaluate: re gold example " + std::to_string(i) +
                               " has no relation instance");
        const auto pi = re_instances_of(pred[i]);
        std::optional<std::string> pred_type;
        if (!pi.empty()) pred_type = pi.front().type;
        prf += re_prf(pred_type, gi.front().type);
      }
      return {report("re_f1", prf)};
    }
  }
  return {};
}

}  // namespace fishdip
