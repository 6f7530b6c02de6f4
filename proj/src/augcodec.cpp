#include "fishdip/augcodec.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <tuple>

#include "fishdip/align.hpp"

namespace fishdip {

namespace {

std::string join(std::span<const std::string> tokens, const char* sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

std::string collapse_comma_space(std::string s) {
  std::string::size_type pos = 0;
  while ((pos = s.find(" ,", pos)) != std::string::npos) s.erase(pos, 1);
  return s;
}

bool contains_special_char(std::string_view s) {
  return s.find_first_of("[]|=") != std::string_view::npos;
}

// Type/value strings must be canonical: nonempty, free of structure
// characters, single-space separated.
void check_text_field(const std::string& s, const char* what, bool lowercase_required) {
  if (s.empty()) throw label_error(std::string(what) + " is empty");
  if (contains_special_char(s))
    throw label_error(std::string(what) + " '" + s + "' contains a structure character");
  const auto toks = whitespace_tokenize(s);
  if (toks.empty() || join(toks) != s)
    throw label_error(std::string(what) + " '" + s + "' is not single-space normalized");
  if (lowercase_required) {
    for (char c : s) {
      if (std::isupper(static_cast<unsigned char>(c)))
        throw label_error(std::string(what) + " '" + s + "' must be lowercase");
    }
  }
}

void check_span(int start, int end, std::size_t n_tokens, const char* what) {
  if (start < 0 || end > static_cast<int>(n_tokens) || start >= end)
    throw label_error(std::string(what) + " span [" + std::to_string(start) + "," +
                      std::to_string(end) + ") invalid for " + std::to_string(n_tokens) +
                      " tokens");
}

std::vector<EntitySpan> sorted_checked_entities(std::span<const std::string> tokens,
                                                std::span<const EntitySpan> entities,
                                                const char* what) {
  std::vector<EntitySpan> sorted(entities.begin(), entities.end());
  std::sort(sorted.begin(), sorted.end());
  for (const auto& e : sorted) {
    check_span(e.start, e.end, tokens.size(), what);
    check_text_field(e.type, "entity type", false);
  }
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i - 1].end > sorted[i].start)
      throw label_error(std::string(what) + ": overlapping spans [" +
                        std::to_string(sorted[i - 1].start) + "," +
                        std::to_string(sorted[i - 1].end) + ") and [" +
                        std::to_string(sorted[i].start) + "," + std::to_string(sorted[i].end) +
                        ")");
  }
  return sorted;
}

}  // namespace

const char* task_name(Task task) {
  switch (task) {
    case Task::ner: return "ner";
    case Task::re: return "re";
    case Task::joint_er: return "joint_er";
    case Task::dst: return "dst";
    case Task::srl: return "srl";
  }
  return "?";
}

Task task_from_name(std::string_view name) {
  if (name == "ner") return Task::ner;
  if (name == "re") return Task::re;
  if (name == "joint_er") return Task::joint_er;
  if (name == "dst") return Task::dst;
  if (name == "srl") return Task::srl;
  throw config_error("unknown task '" + std::string(name) + "'");
}

bool is_special_token(std::string_view tok) {
  return tok == "[" || tok == "]" || tok == "|" || tok == "=";
}

void TaskSchema::validate() const {
  for (const auto& t : entity_types) check_text_field(t, "entity type", true);
  for (const auto& t : relation_types) check_text_field(t, "relation type", true);
  for (const auto& s : slot_names) check_text_field(s, "slot name", true);
  // Role labels keep their conventional case (e.g. "AM-LOC").
  for (const auto& r : role_labels) check_text_field(r, "role label", false);
  std::set<std::string> slot_set(slot_names.begin(), slot_names.end());
  if (slot_set.size() != slot_names.size()) throw label_error("duplicate slot names");
}

std::vector<EntitySpan> entities_of(std::span<const StructuredLabel> labels) {
  std::vector<EntitySpan> out;
  for (const auto& l : labels)
    if (const auto* e = std::get_if<EntitySpan>(&l)) out.push_back(*e);
  return out;
}

std::vector<RelationLabel> relations_of(std::span<const StructuredLabel> labels) {
  std::vector<RelationLabel> out;
  for (const auto& l : labels)
    if (const auto* r = std::get_if<RelationLabel>(&l)) out.push_back(*r);
  return out;
}

std::vector<SrlArg> srl_args_of(std::span<const StructuredLabel> labels,
                                bool include_predicate) {
  std::vector<SrlArg> out;
  for (const auto& l : labels) {
    if (const auto* a = std::get_if<SrlArg>(&l)) {
      if (include_predicate || a->role != kPredicateRole) out.push_back(*a);
    }
  }
  return out;
}

std::optional<BeliefState> belief_of(std::span<const StructuredLabel> labels) {
  for (const auto& l : labels)
    if (const auto* b = std::get_if<BeliefState>(&l)) return *b;
  return std::nullopt;
}

std::vector<ReInstance> re_instances_of(std::span<const StructuredLabel> labels) {
  std::vector<ReInstance> out;
  for (const auto& l : labels)
    if (const auto* r = std::get_if<ReInstance>(&l)) out.push_back(*r);
  return out;
}

std::vector<std::string> whitespace_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string display_text(std::span<const std::string> tokens) {
  return collapse_comma_space(join(tokens));
}

std::vector<std::string> model_input_tokens(const AugmentedExample& ex, Task task) {
  if (task != Task::srl) return ex.input_tokens;
  const auto args = srl_args_of(ex.labels, true);
  const SrlArg* pred = nullptr;
  for (const auto& a : args)
    if (a.role == kPredicateRole) pred = &a;
  if (pred == nullptr) return ex.input_tokens;
  std::vector<std::string> out;
  for (int i = 0; i < static_cast<int>(ex.input_tokens.size()); ++i) {
    if (i == pred->start) out.push_back("[");
    out.push_back(ex.input_tokens[i]);
    if (i + 1 == pred->end) out.push_back("]");
  }
  return out;
}

// ---------------------------------------------------------------------------
// encoding
// ---------------------------------------------------------------------------

std::string encode_ner(std::span<const std::string> tokens,
                       std::span<const EntitySpan> entities) {
  const auto sorted = sorted_checked_entities(tokens, entities, "entity");
  std::vector<std::string> parts;
  std::size_t next = 0;
  int i = 0;
  const int n = static_cast<int>(tokens.size());
  while (i < n) {
    if (next < sorted.size() && sorted[next].start == i) {
      const auto& e = sorted[next];
      parts.push_back("[");
      for (int k = e.start; k < e.end; ++k) parts.push_back(tokens[k]);
      parts.push_back("|");
      parts.push_back(e.type);
      parts.push_back("]");
      i = e.end;
      ++next;
    } else {
      parts.push_back(tokens[i]);
      ++i;
    }
  }
  return join(parts);
}

std::string encode_relation(std::span<const std::string> tokens, const ReInstance& inst) {
  check_span(inst.head.start, inst.head.end, tokens.size(), "head");
  check_span(inst.tail.start, inst.tail.end, tokens.size(), "tail");
  check_text_field(inst.type, "relation type", false);
  std::vector<std::string> parts{"relationship", "between", "["};
  for (int k = inst.head.start; k < inst.head.end; ++k) parts.push_back(tokens[k]);
  parts.push_back("]");
  parts.push_back("and");
  parts.push_back("[");
  for (int k = inst.tail.start; k < inst.tail.end; ++k) parts.push_back(tokens[k]);
  parts.push_back("]");
  parts.push_back("=");
  parts.push_back(inst.type);
  return join(parts);
}

std::string encode_joint_er(std::span<const std::string> tokens,
                            std::span<const EntitySpan> entities,
                            std::span<const RelationLabel> relations) {
  const auto sorted = sorted_checked_entities(tokens, entities, "entity");
  // Relations hang off their head entity, ordered by tail start.
  std::vector<std::vector<RelationLabel>> by_head(sorted.size());
  for (const auto& r : relations) {
    check_text_field(r.type, "relation type", false);
    const auto head_it = std::find(sorted.begin(), sorted.end(), r.head);
    if (head_it == sorted.end())
      throw label_error("relation head is not one of the entities");
    if (std::find(sorted.begin(), sorted.end(), r.tail) == sorted.end())
      throw label_error("relation tail is not one of the entities");
    by_head[head_it - sorted.begin()].push_back(r);
  }
  for (auto& rs : by_head) {
    std::sort(rs.begin(), rs.end(), [](const RelationLabel& a, const RelationLabel& b) {
      return std::tie(a.tail.start, a.tail.end, a.type) <
             std::tie(b.tail.start, b.tail.end, b.type);
    });
  }

  std::vector<std::string> parts;
  std::size_t next = 0;
  int i = 0;
  const int n = static_cast<int>(tokens.size());
  while (i < n) {
    if (next < sorted.size() && sorted[next].start == i) {
      const auto& e = sorted[next];
      parts.push_back("[");
      for (int k = e.start; k < e.end; ++k) parts.push_back(tokens[k]);
      parts.push_back("|");
      parts.push_back(e.type);
      for (const auto& r : by_head[next]) {
        parts.push_back("|");
        parts.push_back(r.type);
        parts.push_back("=");
        std::span<const std::string> tail_tokens(tokens.data() + r.tail.start,
                                                 static_cast<std::size_t>(r.tail.end - r.tail.start));
        parts.push_back(display_text(tail_tokens));
      }
      parts.push_back("]");
      i = e.end;
      ++next;
    } else {
      parts.push_back(tokens[i]);
      ++i;
    }
  }
  return join(parts);
}

std::string encode_dst(std::span<const std::string> dialogue_turns, const BeliefState& state,
                       const TaskSchema& schema) {
  (void)dialogue_turns;  // target depends only on the state
  if (schema.slot_names.empty()) throw label_error("dst schema has no slots");
  for (const auto& [slot, value] : state.slots) {
    if (std::find(schema.slot_names.begin(), schema.slot_names.end(), slot) ==
        schema.slot_names.end())
      throw label_error("belief state has unknown slot '" + slot + "'");
    check_text_field(value, "slot value", false);
    if (value.find(',') != std::string::npos)
      throw label_error("slot value '" + value + "' contains a comma");
  }
  std::string body;
  for (std::size_t i = 0; i < schema.slot_names.size(); ++i) {
    const auto& slot = schema.slot_names[i];
    const auto it = state.slots.find(slot);
    if (i) body += ", ";
    body += slot + " " + (it == state.slots.end() ? kNotGiven : it->second);
  }
  return "[ belief ] " + body + " [ belief ]";
}

std::pair<std::string, std::string> encode_srl(std::span<const std::string> tokens,
                                               const Span& predicate,
                                               std::span<const SrlArg> args) {
  check_span(predicate.start, predicate.end, tokens.size(), "predicate");
  std::vector<SrlArg> sorted(args.begin(), args.end());
  std::sort(sorted.begin(), sorted.end());
  for (const auto& a : sorted) {
    check_span(a.start, a.end, tokens.size(), "argument");
    check_text_field(a.role, "role label", false);
    if (a.start < predicate.end && predicate.start < a.end)
      throw label_error("argument overlaps the predicate");
  }
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i - 1].end > sorted[i].start) throw label_error("overlapping arguments");
  }

  std::vector<std::string> marked;
  for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
    if (i == predicate.start) marked.push_back("[");
    marked.push_back(tokens[i]);
    if (i + 1 == predicate.end) marked.push_back("]");
  }

  std::vector<std::string> parts;
  std::size_t next = 0;
  int i = 0;
  const int n = static_cast<int>(tokens.size());
  while (i < n) {
    if (next < sorted.size() && sorted[next].start == i) {
      const auto& a = sorted[next];
      parts.push_back("[");
      for (int k = a.start; k < a.end; ++k) parts.push_back(tokens[k]);
      parts.push_back("|");
      parts.push_back(a.role);
      parts.push_back("]");
      i = a.end;
      ++next;
    } else {
      parts.push_back(tokens[i]);
      ++i;
    }
  }
  return {join(marked), join(parts)};
}

// ---------------------------------------------------------------------------
// decoding
// ---------------------------------------------------------------------------

namespace {

struct ParsedGroup {
  int content_begin = 0;
  int content_end = -1;                            // cleaned indices
  std::vector<std::vector<std::string>> segments;  // annotation, split on "|"
};

struct ParsedOutput {
  std::vector<std::string> cleaned;  // surface tokens only (specials and
                                     // annotations stripped)
  std::vector<ParsedGroup> groups;
  std::vector<std::string> relation_type_tokens;  // re only: after top-level '='
};

// Tolerant single-pass structure parse. Never throws: unbalanced "[" closes
// at end of string, a "[" inside a group closes the previous group, stray
// "]" / "|" / "=" outside any group carry no structure and are stripped.
ParsedOutput parse_structure(const std::vector<std::string>& tokens, bool re_mode) {
  ParsedOutput out;
  bool open = false;
  bool in_annot = false;
  bool after_eq = false;
  ParsedGroup cur;

  auto open_group = [&] {
    cur = ParsedGroup{};
    cur.content_begin = static_cast<int>(out.cleaned.size());
    open = true;
    in_annot = false;
  };
  auto close_group = [&] {
    if (cur.content_end < 0) cur.content_end = static_cast<int>(out.cleaned.size());
    out.groups.push_back(std::move(cur));
    open = false;
    in_annot = false;
  };

  for (const auto& tok : tokens) {
    if (tok == "[") {
      if (open) close_group();
      open_group();
    } else if (tok == "]") {
      if (open) close_group();
    } else if (tok == "|") {
      if (open) {
        if (!in_annot) {
          in_annot = true;
          cur.content_end = static_cast<int>(out.cleaned.size());
        }
        cur.segments.emplace_back();
      }
    } else if (tok == "=") {
      if (open && in_annot) {
        cur.segments.back().push_back(tok);
      } else if (!open && re_mode && !after_eq) {
        after_eq = true;
      }
      // otherwise: stray separator, stripped
    } else {
      if (open && in_annot) {
        cur.segments.back().push_back(tok);
      } else if (open) {
        out.cleaned.push_back(tok);
      } else if (re_mode && after_eq) {
        out.relation_type_tokens.push_back(tok);
      } else {
        out.cleaned.push_back(tok);
      }
    }
  }
  if (open) close_group();
  return out;
}

// Cleaned index -> input index (kGapIndex when unaligned), via
// Needleman-Wunsch with normalized-edit token similarity so close
// misspellings still ground.
std::vector<int> ground_tokens(const std::vector<std::string>& cleaned,
                               std::span<const std::string> input_tokens) {
  AlignScoring scoring;
  scoring.mode = SimilarityMode::normalized_edit;
  std::vector<std::string> input(input_tokens.begin(), input_tokens.end());
  const Alignment al = needleman_wunsch(cleaned, input, scoring);
  std::vector<int> to_input(cleaned.size(), kGapIndex);
  for (const auto& [ci, ii] : al.pairs) {
    if (ci != kGapIndex && ii != kGapIndex) to_input[ci] = ii;
  }
  return to_input;
}

struct GroundedGroup {
  int start = 0;
  int end = 0;
  std::string type;
  const ParsedGroup* group = nullptr;
};

// Shared span pipeline: ground each typed group onto the input, drop groups
// that align entirely to gaps, then resolve overlaps keeping the
// earlier-starting (first-emitted) span.
std::vector<GroundedGroup> grounded_groups(const ParsedOutput& parsed,
                                           std::span<const std::string> input_tokens,
                                           const std::set<std::string>& allowed_types) {
  const auto to_input = ground_tokens(parsed.cleaned, input_tokens);
  std::vector<GroundedGroup> kept;
  for (const auto& g : parsed.groups) {
    if (g.content_begin >= g.content_end) continue;
    if (g.segments.empty()) continue;
    const std::string type = join(g.segments[0]);
    if (type.empty() || allowed_types.count(type) == 0) continue;
    int lo = std::numeric_limits<int>::max(), hi = -1;
    for (int ci = g.content_begin; ci < g.content_end; ++ci) {
      if (to_input[ci] == kGapIndex) continue;
      lo = std::min(lo, to_input[ci]);
      hi = std::max(hi, to_input[ci]);
    }
    if (hi < 0) continue;  // every token aligned to a gap
    const GroundedGroup cand{lo, hi + 1, type, &g};
    const bool overlaps = std::any_of(kept.begin(), kept.end(), [&](const GroundedGroup& k) {
      return cand.start < k.end && k.start < cand.end;
    });
    if (!overlaps) kept.push_back(cand);
  }
  return kept;
}

std::vector<StructuredLabel> decode_ner_like(const ParsedOutput& parsed,
                                             std::span<const std::string> input_tokens,
                                             const TaskSchema& schema) {
  const auto& allowed =
      schema.task == Task::srl ? schema.role_labels : schema.entity_types;
  const auto kept = grounded_groups(parsed, input_tokens, allowed);
  std::vector<StructuredLabel> out;
  for (const auto& k : kept) {
    if (schema.task == Task::srl) {
      out.emplace_back(SrlArg{k.start, k.end, k.type});
    } else {
      out.emplace_back(EntitySpan{k.start, k.end, k.type});
    }
  }
  return out;
}

std::vector<StructuredLabel> decode_joint(const ParsedOutput& parsed,
                                          std::span<const std::string> input_tokens,
                                          const TaskSchema& schema) {
  const auto kept = grounded_groups(parsed, input_tokens, schema.entity_types);
  std::vector<StructuredLabel> out;
  for (const auto& k : kept) out.emplace_back(EntitySpan{k.start, k.end, k.type});

  auto surface = [&](const GroundedGroup& g) {
    std::span<const std::string> toks(input_tokens.data() + g.start,
                                      static_cast<std::size_t>(g.end - g.start));
    return display_text(toks);
  };

  std::vector<RelationLabel> rels;
  for (const auto& head : kept) {
    for (std::size_t si = 1; si < head.group->segments.size(); ++si) {
      const auto& seg = head.group->segments[si];
      const auto eq = std::find(seg.begin(), seg.end(), "=");
      if (eq == seg.begin() || eq == seg.end()) continue;
      const std::string rtype = join({seg.begin(), eq});
      if (schema.relation_types.count(rtype) == 0) continue;
      const std::string tail_text =
          collapse_comma_space(join({eq + 1, seg.end()}));
      if (tail_text.empty()) continue;
      // Resolve the tail among decoded entities: nearest following match
      // wins, else nearest preceding (possibly the head itself).
      const GroundedGroup* tail = nullptr;
      for (const auto& cand : kept) {
        if (surface(cand) != tail_text) continue;
        if (cand.start > head.start) {
          if (tail == nullptr || tail->start <= head.start || cand.start < tail->start)
            tail = &cand;
        } else if (tail == nullptr || (tail->start <= head.start && cand.start > tail->start)) {
          tail = &cand;
        }
      }
      if (tail == nullptr) continue;
      rels.push_back(RelationLabel{{head.start, head.end, head.type},
                                   {tail->start, tail->end, tail->type},
                                   rtype});
    }
  }
  std::sort(rels.begin(), rels.end());
  rels.erase(std::unique(rels.begin(), rels.end()), rels.end());
  for (auto& r : rels) out.emplace_back(std::move(r));
  return out;
}

std::vector<StructuredLabel> decode_re(const ParsedOutput& parsed,
                                       std::span<const std::string> input_tokens,
                                       const TaskSchema& schema) {
  const std::string rtype = join(parsed.relation_type_tokens);
  if (parsed.groups.size() < 2 || schema.relation_types.count(rtype) == 0) return {};
  // Each mention grounds through its own alignment: the scaffold words
  // around the groups are not input text, and the two mentions may appear
  // in either order in the sentence, so one monotone alignment of the whole
  // cleaned sequence cannot place both reliably.
  auto ground = [&](const ParsedGroup& g) -> std::optional<Span> {
    if (g.content_begin >= g.content_end) return std::nullopt;
    const std::vector<std::string> content(parsed.cleaned.begin() + g.content_begin,
                                           parsed.cleaned.begin() + g.content_end);
    const auto to_input = ground_tokens(content, input_tokens);
    int lo = std::numeric_limits<int>::max(), hi = -1;
    for (const int idx : to_input) {
      if (idx == kGapIndex) continue;
      lo = std::min(lo, idx);
      hi = std::max(hi, idx);
    }
    if (hi < 0) return std::nullopt;
    return Span{lo, hi + 1};
  };
  const auto head = ground(parsed.groups[0]);
  const auto tail = ground(parsed.groups[1]);
  if (!head || !tail) return {};
  return {ReInstance{*head, *tail, rtype}};
}

std::vector<StructuredLabel> decode_dst(const ParsedOutput& parsed, const TaskSchema& schema) {
  // Assignment region: cleaned tokens between the first two "belief" marker
  // groups; tolerant fallbacks when markers are missing or unbalanced.
  int begin = 0, end = static_cast<int>(parsed.cleaned.size());
  const ParsedGroup* first = nullptr;
  for (const auto& g : parsed.groups) {
    const bool is_marker = g.content_end - g.content_begin == 1 &&
                           parsed.cleaned[g.content_begin] == "belief";
    if (!is_marker) continue;
    if (first == nullptr) {
      first = &g;
      begin = g.content_end;
    } else {
      end = g.content_begin;
      break;
    }
  }

  // Split the region into comma-terminated chunks.
  std::vector<std::vector<std::string>> chunks(1);
  for (int i = begin; i < end; ++i) {
    std::string tok = parsed.cleaned[i];
    bool closes = false;
    if (tok == ",") {
      closes = true;
      tok.clear();
    } else if (tok.size() > 1 && tok.back() == ',') {
      closes = true;
      tok.pop_back();
    }
    if (!tok.empty()) chunks.back().push_back(tok);
    if (closes) chunks.emplace_back();
  }

  BeliefState state;
  for (const auto& slot : schema.slot_names) state.slots[slot] = kNotGiven;

  std::vector<std::vector<std::string>> slot_tokens;
  slot_tokens.reserve(schema.slot_names.size());
  for (const auto& slot : schema.slot_names) slot_tokens.push_back(whitespace_tokenize(slot));

  for (const auto& chunk : chunks) {
    std::size_t best = schema.slot_names.size();
    std::size_t best_len = 0;
    for (std::size_t s = 0; s < slot_tokens.size(); ++s) {
      const auto& st = slot_tokens[s];
      if (st.size() <= best_len || st.size() >= chunk.size()) continue;  // need a value too
      if (std::equal(st.begin(), st.end(), chunk.begin())) {
        best = s;
        best_len = st.size();
      }
    }
    if (best == schema.slot_names.size()) continue;
    state.slots[schema.slot_names[best]] =
        join({chunk.begin() + static_cast<std::ptrdiff_t>(best_len), chunk.end()});
  }
  return {StructuredLabel{state}};
}

}  // namespace

std::vector<StructuredLabel> decode(const std::string& generated,
                                    std::span<const std::string> input_tokens,
                                    const TaskSchema& schema) {
  const auto tokens = whitespace_tokenize(generated);
  const ParsedOutput parsed = parse_structure(tokens, schema.task == Task::re);
  switch (schema.task) {
    case Task::ner:
    case Task::srl:
      return decode_ner_like(parsed, input_tokens, schema);
    case Task::joint_er:
      return decode_joint(parsed, input_tokens, schema);
    case Task::re:
      return decode_re(parsed, input_tokens, schema);
    case Task::dst:
      return decode_dst(parsed, schema);
  }
  return {};
}

// ---------------------------------------------------------------------------
// json
// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const TaskSchema& schema) {
  j = nlohmann::json{{"task", task_name(schema.task)},
                     {"entity_types", schema.entity_types},
                     {"relation_types", schema.relation_types},
                     {"slot_names", schema.slot_names},
                     {"role_labels", schema.role_labels}};
}

void from_json(const nlohmann::json& j, TaskSchema& schema) {
  schema.task = task_from_name(j.at("task").get<std::string>());
  schema.entity_types = j.value("entity_types", std::set<std::string>{});
  schema.relation_types = j.value("relation_types", std::set<std::string>{});
  schema.slot_names = j.value("slot_names", std::vector<std::string>{});
  schema.role_labels = j.value("role_labels", std::set<std::string>{});
}

void to_json(nlohmann::json& j, const StructuredLabel& label) {
  std::visit(
      [&j](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, EntitySpan>) {
          j = {{"kind", "entity"}, {"start", v.start}, {"end", v.end}, {"type", v.type}};
        } else if constexpr (std::is_same_v<T, RelationLabel>) {
          j = {{"kind", "relation"},
               {"head", {{"start", v.head.start}, {"end", v.head.end}, {"type", v.head.type}}},
               {"tail", {{"start", v.tail.start}, {"end", v.tail.end}, {"type", v.tail.type}}},
               {"type", v.type}};
        } else if constexpr (std::is_same_v<T, SrlArg>) {
          j = {{"kind", "srl_arg"}, {"start", v.start}, {"end", v.end}, {"role", v.role}};
        } else if constexpr (std::is_same_v<T, BeliefState>) {
          j = {{"kind", "belief"}, {"slots", v.slots}};
        } else {
          j = {{"kind", "re"},
               {"head_start", v.head.start},
               {"head_end", v.head.end},
               {"tail_start", v.tail.start},
               {"tail_end", v.tail.end},
               {"type", v.type}};
        }
      },
      label);
}

void from_json(const nlohmann::json& j, StructuredLabel& label) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "entity") {
    label = EntitySpan{j.at("start").get<int>(), j.at("end").get<int>(),
                       j.at("type").get<std::string>()};
  } else if (kind == "relation") {
    const auto& h = j.at("head");
    const auto& t = j.at("tail");
    label = RelationLabel{
        {h.at("start").get<int>(), h.at("end").get<int>(), h.at("type").get<std::string>()},
        {t.at("start").get<int>(), t.at("end").get<int>(), t.at("type").get<std::string>()},
        j.at("type").get<std::string>()};
  } else if (kind == "srl_arg") {
    label = SrlArg{j.at("start").get<int>(), j.at("end").get<int>(),
                   j.at("role").get<std::string>()};
  } else if (kind == "belief") {
    BeliefState b;
    b.slots = j.at("slots").get<std::map<std::string, std::string>>();
    label = std::move(b);
  } else if (kind == "re") {
    label = ReInstance{{j.at("head_start").get<int>(), j.at("head_end").get<int>()},
                       {j.at("tail_start").get<int>(), j.at("tail_end").get<int>()},
                       j.at("type").get<std::string>()};
  } else {
    throw parse_error("unknown label kind '" + kind + "'");
  }
}

void to_json(nlohmann::json& j, const AugmentedExample& ex) {
  j = nlohmann::json{{"input_tokens", ex.input_tokens},
                     {"labels", ex.labels},
                     {"augmented_target", ex.augmented_target}};
}

void from_json(const nlohmann::json& j, AugmentedExample& ex) {
  ex.input_tokens = j.at("input_tokens").get<std::vector<std::string>>();
  ex.labels = j.at("labels").get<std::vector<StructuredLabel>>();
  ex.augmented_target = j.at("augmented_target").get<std::string>();
}

}  // namespace fishdip
