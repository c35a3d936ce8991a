#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "robustjudge/errors.hpp"
#include "robustjudge/textutil.hpp"

namespace robustjudge {

using json = nlohmann::ordered_json;

// ============================================================
// Task taxonomy
// ============================================================

enum class TaskId { T1, T2, T3, T4, T5, T6, T7, T8 };
enum class TaskCategory { Text, Code, Knowledge };

inline constexpr std::array<TaskId, 8> kAllTasks = {
    TaskId::T1, TaskId::T2, TaskId::T3, TaskId::T4,
    TaskId::T5, TaskId::T6, TaskId::T7, TaskId::T8};

inline TaskCategory category_of(TaskId t) {
  switch (t) {
    case TaskId::T1:
    case TaskId::T2:
      return TaskCategory::Text;
    case TaskId::T3:
    case TaskId::T4:
    case TaskId::T5:
      return TaskCategory::Code;
    default:
      return TaskCategory::Knowledge;
  }
}

inline const char* to_string(TaskId t) {
  switch (t) {
    case TaskId::T1: return "T1";
    case TaskId::T2: return "T2";
    case TaskId::T3: return "T3";
    case TaskId::T4: return "T4";
    case TaskId::T5: return "T5";
    case TaskId::T6: return "T6";
    case TaskId::T7: return "T7";
    case TaskId::T8: return "T8";
  }
  return "?";
}

inline const char* to_string(TaskCategory c) {
  switch (c) {
    case TaskCategory::Text: return "Text";
    case TaskCategory::Code: return "Code";
    case TaskCategory::Knowledge: return "Knowledge";
  }
  return "?";
}

inline TaskId task_id_from_string(const std::string& s) {
  for (TaskId t : kAllTasks)
    if (s == to_string(t)) return t;
  throw SchemaError("unknown task id: " + s);
}

inline TaskCategory category_from_string(const std::string& s) {
  if (s == "Text") return TaskCategory::Text;
  if (s == "Code") return TaskCategory::Code;
  if (s == "Knowledge") return TaskCategory::Knowledge;
  throw SchemaError("unknown category: " + s);
}

// Human task names, used when a prompt component describes the task.
inline const char* task_label(TaskId t) {
  switch (t) {
    case TaskId::T1: return "text translation";
    case TaskId::T2: return "text summarization";
    case TaskId::T3: return "code translation";
    case TaskId::T4: return "code summarization";
    case TaskId::T5: return "code generation";
    case TaskId::T6: return "logical reasoning";
    case TaskId::T7: return "mathematical problem solving";
    case TaskId::T8: return "professional knowledge recall";
  }
  return "?";
}

// Benchmark sizes of the reference corpus per task.
inline std::size_t expected_sample_count(TaskId t) {
  switch (t) {
    case TaskId::T1: return 30;
    case TaskId::T2: return 20;
    case TaskId::T3: return 30;
    case TaskId::T4: return 30;
    case TaskId::T5: return 30;
    case TaskId::T6: return 56;
    case TaskId::T7: return 98;
    case TaskId::T8: return 134;
  }
  return 0;
}

// ============================================================
// Task records
// ============================================================

struct TaskRecord {
  TaskId task_id = TaskId::T1;
  TaskCategory category = TaskCategory::Text;
  std::string instance_id;
  std::string source_prompt;       // instruction given to the generator
  std::string reference_response;  // gold reference r_ref
  std::string clean_response;      // high-quality candidate r, attack target
  std::optional<std::string> language_pair;  // T1 only, e.g. "zh-en"
  std::map<std::string, std::string> metadata;

  bool operator==(const TaskRecord&) const = default;
};

// Validates one parsed JSON object against the record schema. Category may be
// omitted (derived from task_id); when present it must agree with Table-style
// fixed mapping. Metadata values may be strings, numbers, or bools; anything
// nested is rejected.
inline TaskRecord validate_task_record(const json& j) {
  if (!j.is_object()) throw SchemaError("task record must be an object");

  auto need_string = [&](const char* key) -> std::string {
    if (!j.contains(key))
      throw SchemaError(std::string("missing field: ") + key);
    if (!j.at(key).is_string())
      throw SchemaError(std::string("field must be a string: ") + key);
    return j.at(key).get<std::string>();
  };

  TaskRecord rec;
  rec.task_id = task_id_from_string(need_string("task_id"));
  rec.category = category_of(rec.task_id);
  if (j.contains("category")) {
    const TaskCategory given =
        category_from_string(j.at("category").get<std::string>());
    if (given != rec.category)
      throw CategoryMismatch(std::string(to_string(rec.task_id)) +
                             " is not category " + to_string(given));
  }

  rec.instance_id = need_string("instance_id");
  rec.source_prompt = need_string("source_prompt");
  rec.reference_response = need_string("reference_response");
  rec.clean_response = need_string("clean_response");

  for (const char* key :
       {"instance_id", "source_prompt", "reference_response", "clean_response"})
    if (j.at(key).get<std::string>().empty())
      throw EmptyFieldError(std::string("empty field: ") + key);

  if (j.contains("language_pair") && !j.at("language_pair").is_null()) {
    if (!j.at("language_pair").is_string())
      throw SchemaError("language_pair must be a string");
    rec.language_pair = j.at("language_pair").get<std::string>();
    if (rec.language_pair->empty())
      throw EmptyFieldError("empty field: language_pair");
  }
  if (rec.task_id == TaskId::T1 && !rec.language_pair)
    throw SchemaError("T1 records require language_pair");

  if (j.contains("metadata")) {
    if (!j.at("metadata").is_object())
      throw SchemaError("metadata must be an object");
    for (const auto& [k, v] : j.at("metadata").items()) {
      if (v.is_string())
        rec.metadata[k] = v.get<std::string>();
      else if (v.is_number_integer())
        rec.metadata[k] = std::to_string(v.get<long long>());
      else if (v.is_number())
        rec.metadata[k] = json(v).dump();
      else if (v.is_boolean())
        rec.metadata[k] = v.get<bool>() ? "true" : "false";
      else
        throw SchemaError("metadata values must be scalar: " + k);
    }
  }
  return rec;
}

inline json task_record_to_json(const TaskRecord& rec) {
  json j;
  j["task_id"] = to_string(rec.task_id);
  j["category"] = to_string(rec.category);
  j["instance_id"] = rec.instance_id;
  j["source_prompt"] = rec.source_prompt;
  j["reference_response"] = rec.reference_response;
  j["clean_response"] = rec.clean_response;
  if (rec.language_pair) j["language_pair"] = *rec.language_pair;
  if (!rec.metadata.empty()) {
    json m = json::object();
    for (const auto& [k, v] : rec.metadata) m[k] = v;
    j["metadata"] = m;
  }
  return j;
}

// ============================================================
// Attack identities
// ============================================================

enum class AttackKind {
  H1,  // naive claim append
  H2,  // escape-sequence prefix before the claim
  H3,  // context-ignoring directive
  H4,  // fake completion block
  H5,  // fake reasoning block
  H6,  // combined H2+H3+H4
  H7,  // empty response
  H8,  // long gibberish suffix
  O1,  // score-feedback rewrite loop with a quality penalty
  O2,  // iterative refinement keeping the best candidate
  O3,  // tree search over refinements
  O4,  // static cheating template, response-independent
  O7,  // greedy phrase-suffix search
};

inline constexpr std::array<AttackKind, 13> kAllAttacks = {
    AttackKind::H1, AttackKind::H2, AttackKind::H3, AttackKind::H4,
    AttackKind::H5, AttackKind::H6, AttackKind::H7, AttackKind::H8,
    AttackKind::O1, AttackKind::O2, AttackKind::O3, AttackKind::O4,
    AttackKind::O7};

inline const char* to_string(AttackKind k) {
  switch (k) {
    case AttackKind::H1: return "H1";
    case AttackKind::H2: return "H2";
    case AttackKind::H3: return "H3";
    case AttackKind::H4: return "H4";
    case AttackKind::H5: return "H5";
    case AttackKind::H6: return "H6";
    case AttackKind::H7: return "H7";
    case AttackKind::H8: return "H8";
    case AttackKind::O1: return "O1";
    case AttackKind::O2: return "O2";
    case AttackKind::O3: return "O3";
    case AttackKind::O4: return "O4";
    case AttackKind::O7: return "O7";
  }
  return "?";
}

inline const char* attack_label(AttackKind k) {
  switch (k) {
    case AttackKind::H1: return "naive";
    case AttackKind::H2: return "escape";
    case AttackKind::H3: return "context-ignoring";
    case AttackKind::H4: return "fake-completion";
    case AttackKind::H5: return "fake-reasoning";
    case AttackKind::H6: return "combined";
    case AttackKind::H7: return "empty";
    case AttackKind::H8: return "long-suffix";
    case AttackKind::O1: return "adveval";
    case AttackKind::O2: return "pair";
    case AttackKind::O3: return "tap";
    case AttackKind::O4: return "cheating";
    case AttackKind::O7: return "greedy-suffix";
  }
  return "?";
}

inline AttackKind attack_kind_from_string(const std::string& s) {
  for (AttackKind k : kAllAttacks)
    if (s == to_string(k) || s == attack_label(k)) return k;
  throw BadParams("unknown attack kind: " + s);
}

inline bool is_heuristic(AttackKind k) {
  switch (k) {
    case AttackKind::H1:
    case AttackKind::H2:
    case AttackKind::H3:
    case AttackKind::H4:
    case AttackKind::H5:
    case AttackKind::H6:
    case AttackKind::H7:
    case AttackKind::H8:
      return true;
    default:
      return false;
  }
}

// Attack identity with per-kind parameters. Parameters are kept as strings so
// identities serialize stably; validate() parses and range-checks them.
struct AttackId {
  AttackKind kind = AttackKind::H1;
  std::map<std::string, std::string> params;

  bool operator==(const AttackId&) const = default;
};

namespace detail {

inline long parse_long(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw BadParams("param " + key + " must be an integer, got: " + value);
  }
}

inline double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw BadParams("param " + key + " must be a number, got: " + value);
  }
}

}  // namespace detail

// Defaults for optimization-loop budgets; every value can be overridden
// through AttackId::params.
inline constexpr int kDefaultRefineBudget = 5;   // O1, O2
inline constexpr int kDefaultTapBranching = 2;   // O3
inline constexpr int kDefaultTapDepth = 2;       // O3
inline constexpr int kDefaultTapWidth = 2;       // O3
inline constexpr int kDefaultGreedyRounds = 3;   // O7
inline constexpr double kDefaultAdvevalLambda = 0.5;  // O1

// Throws BadParams on unknown keys or out-of-range values.
inline void validate(const AttackId& id) {
  auto allow = [&](std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : id.params) {
      bool known = false;
      for (const char* a : keys)
        if (k == a) known = true;
      if (!known)
        throw BadParams(std::string("attack ") + to_string(id.kind) +
                        " does not take param " + k);
    }
  };
  auto positive_long = [&](const char* key, bool required) {
    auto it = id.params.find(key);
    if (it == id.params.end()) {
      if (required)
        throw BadParams(std::string("attack ") + to_string(id.kind) +
                        " requires param " + key);
      return;
    }
    if (detail::parse_long(key, it->second) <= 0)
      throw BadParams(std::string("param ") + key + " must be positive");
  };

  switch (id.kind) {
    case AttackKind::H8:
      allow({"suffix_length"});
      positive_long("suffix_length", true);
      break;
    case AttackKind::O1:
      allow({"budget", "lambda"});
      positive_long("budget", false);
      if (auto it = id.params.find("lambda"); it != id.params.end())
        if (detail::parse_double("lambda", it->second) < 0.0)
          throw BadParams("param lambda must be non-negative");
      break;
    case AttackKind::O2:
      allow({"budget"});
      positive_long("budget", false);
      break;
    case AttackKind::O3:
      allow({"branching", "depth", "width"});
      positive_long("branching", false);
      positive_long("depth", false);
      positive_long("width", false);
      break;
    case AttackKind::O7:
      allow({"rounds"});
      positive_long("rounds", false);
      break;
    default:
      allow({});
      break;
  }
}

inline long attack_param_long(const AttackId& id, const std::string& key,
                              long fallback) {
  auto it = id.params.find(key);
  return it == id.params.end() ? fallback
                               : detail::parse_long(key, it->second);
}

inline double attack_param_double(const AttackId& id, const std::string& key,
                                  double fallback) {
  auto it = id.params.find(key);
  return it == id.params.end() ? fallback
                               : detail::parse_double(key, it->second);
}

// ============================================================
// Defense identities
// ============================================================

enum class DefenseKind {
  Ppl,            // detection: perplexity threshold
  WindowPpl,      // detection: max windowed perplexity threshold
  NaiveLlm,       // detection: yes/no screening model
  Retokenize,     // prevention: seeded token-run splitting
  Delimiters,     // prevention: fence the response as data
  Sandwich,       // prevention: reinforcement after the response
  Instructional,  // prevention: warning in the system text
};

inline constexpr std::array<DefenseKind, 7> kAllDefenses = {
    DefenseKind::Ppl,        DefenseKind::WindowPpl, DefenseKind::NaiveLlm,
    DefenseKind::Retokenize, DefenseKind::Delimiters, DefenseKind::Sandwich,
    DefenseKind::Instructional};

inline const char* to_string(DefenseKind k) {
  switch (k) {
    case DefenseKind::Ppl: return "ppl";
    case DefenseKind::WindowPpl: return "winppl";
    case DefenseKind::NaiveLlm: return "naive-llm";
    case DefenseKind::Retokenize: return "retok";
    case DefenseKind::Delimiters: return "delim";
    case DefenseKind::Sandwich: return "sandwich";
    case DefenseKind::Instructional: return "instruct";
  }
  return "?";
}

inline DefenseKind defense_kind_from_string(const std::string& s) {
  for (DefenseKind k : kAllDefenses)
    if (s == to_string(k)) return k;
  throw BadParams("unknown defense kind: " + s);
}

inline bool is_detection(DefenseKind k) {
  return k == DefenseKind::Ppl || k == DefenseKind::WindowPpl ||
         k == DefenseKind::NaiveLlm;
}

struct DefenseId {
  DefenseKind kind = DefenseKind::Ppl;
  std::map<std::string, std::string> params;

  bool operator==(const DefenseId&) const = default;
};

inline void validate(const DefenseId& id) {
  auto check_positive = [&](const char* key) {
    auto it = id.params.find(key);
    if (it != id.params.end() &&
        detail::parse_double(key, it->second) <= 0.0)
      throw BadParams(std::string("param ") + key + " must be positive");
  };
  auto check_rate = [&](const char* key) {
    auto it = id.params.find(key);
    if (it != id.params.end()) {
      const double v = detail::parse_double(key, it->second);
      if (v < 0.0 || v > 1.0)
        throw BadParams(std::string("param ") + key + " must be in [0,1]");
    }
  };
  switch (id.kind) {
    case DefenseKind::Ppl:
      check_positive("threshold");
      break;
    case DefenseKind::WindowPpl:
      check_positive("threshold");
      check_positive("window");
      break;
    case DefenseKind::Retokenize:
      check_rate("drop_rate");
      break;
    default:
      break;
  }
}

inline double defense_param_double(const DefenseId& id, const std::string& key,
                                   double fallback) {
  auto it = id.params.find(key);
  return it == id.params.end() ? fallback
                               : detail::parse_double(key, it->second);
}

inline long defense_param_long(const DefenseId& id, const std::string& key,
                               long fallback) {
  auto it = id.params.find(key);
  return it == id.params.end() ? fallback
                               : detail::parse_long(key, it->second);
}

// ============================================================
// Protocols, scores, trial outcomes
// ============================================================

enum class Protocol { Pointwise, Pairwise };

inline const char* to_string(Protocol p) {
  return p == Protocol::Pointwise ? "pointwise" : "pairwise";
}

inline Protocol protocol_from_string(const std::string& s) {
  if (s == "pointwise") return Protocol::Pointwise;
  if (s == "pairwise") return Protocol::Pairwise;
  throw BadParams("unknown protocol: " + s);
}

// Which of the two candidate arguments a pairwise verdict selected, after any
// presentation-order remapping. A is the first argument (the campaign places
// the reference there).
enum class PairwiseChoice { A, B };

inline const char* to_string(PairwiseChoice c) {
  return c == PairwiseChoice::A ? "A" : "B";
}

inline constexpr int kScoreMin = 1;
inline constexpr int kScoreMax = 10;

struct ScorePair {
  int before = kScoreMin;  // clean response score
  int after = kScoreMin;   // attacked response score

  bool operator==(const ScorePair&) const = default;
};

struct QualityPair {
  double before = 0.0;
  double after = 0.0;

  bool operator==(const QualityPair&) const = default;
};

// Full record of one (task instance, attack, defense, judge, protocol) cell.
// Raw judge texts ride along so reports can be audited without re-querying.
struct TrialOutcome {
  std::string instance_id;
  std::string task;       // task id string
  std::string judge;      // judge endpoint name
  std::string template_name;
  Protocol protocol = Protocol::Pointwise;
  AttackId attack;
  std::optional<DefenseId> defense;

  std::optional<ScorePair> scores;   // pointwise only
  QualityPair quality;
  std::string quality_method;

  std::optional<PairwiseChoice> pairwise_plus;   // pairwise, original order
  std::optional<PairwiseChoice> pairwise_minus;  // pairwise, swapped order
  double isdr = 0.0;                 // pointwise instance-level value

  bool valid = true;
  std::optional<std::string> failure_reason;
  bool blocked = false;              // a detection defense stopped the attack

  std::string raw_before;
  std::string raw_after;
  std::string raw_plus;
  std::string raw_minus;

  bool operator==(const TrialOutcome&) const = default;
};

// Structural invariants; throws SchemaError when violated.
inline void validate_trial(const TrialOutcome& t) {
  if (t.protocol == Protocol::Pointwise) {
    if (!t.valid) {
      if (!t.failure_reason || t.failure_reason->empty())
        throw SchemaError("invalid trial lacks failure_reason");
    } else if (!t.scores) {
      throw SchemaError("valid pointwise trial lacks scores");
    }
    if (t.pairwise_plus || t.pairwise_minus)
      throw SchemaError("pointwise trial carries pairwise verdicts");
  } else {
    if (t.scores) throw SchemaError("pairwise trial carries scores");
    if (!t.valid && (!t.failure_reason || t.failure_reason->empty()))
      throw SchemaError("invalid trial lacks failure_reason");
  }
  if (t.scores) {
    for (int s : {t.scores->before, t.scores->after})
      if (s < kScoreMin || s > kScoreMax)
        throw SchemaError("score out of range: " + std::to_string(s));
  }
  for (double q : {t.quality.before, t.quality.after})
    if (q < 0.0 || q > 1.0)
      throw SchemaError("quality out of range");
}

// ============================================================
// Canonical serialization
// ============================================================
// Field order is fixed; numbers use shortest round-trip decimal form; maps
// are emitted in sorted key order. Equal outcomes serialize identically and
// distinct outcomes differ, so the line itself works as a fingerprint.

inline json attack_to_json(const AttackId& a) {
  json j;
  j["kind"] = to_string(a.kind);
  json p = json::object();
  for (const auto& [k, v] : a.params) p[k] = v;  // std::map iterates sorted
  j["params"] = p;
  return j;
}

inline AttackId attack_from_json(const json& j) {
  AttackId a;
  a.kind = attack_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("params"))
    for (const auto& [k, v] : j.at("params").items())
      a.params[k] = v.get<std::string>();
  return a;
}

inline json defense_to_json(const DefenseId& d) {
  json j;
  j["kind"] = to_string(d.kind);
  json p = json::object();
  for (const auto& [k, v] : d.params) p[k] = v;
  j["params"] = p;
  return j;
}

inline DefenseId defense_from_json(const json& j) {
  DefenseId d;
  d.kind = defense_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("params"))
    for (const auto& [k, v] : j.at("params").items())
      d.params[k] = v.get<std::string>();
  return d;
}

inline json trial_to_json(const TrialOutcome& t) {
  json j;
  j["instance_id"] = t.instance_id;
  j["task"] = t.task;
  j["judge"] = t.judge;
  j["template"] = t.template_name;
  j["protocol"] = to_string(t.protocol);
  j["attack"] = attack_to_json(t.attack);
  j["defense"] = t.defense ? defense_to_json(*t.defense) : json(nullptr);
  j["score_before"] = t.scores ? json(t.scores->before) : json(nullptr);
  j["score_after"] = t.scores ? json(t.scores->after) : json(nullptr);
  j["quality_before"] = t.quality.before;
  j["quality_after"] = t.quality.after;
  j["quality_method"] = t.quality_method;
  j["pairwise_plus"] =
      t.pairwise_plus ? json(to_string(*t.pairwise_plus)) : json(nullptr);
  j["pairwise_minus"] =
      t.pairwise_minus ? json(to_string(*t.pairwise_minus)) : json(nullptr);
  j["isdr"] = t.isdr;
  j["valid"] = t.valid;
  j["failure_reason"] = t.failure_reason ? json(*t.failure_reason) : json(nullptr);
  j["blocked"] = t.blocked;
  j["raw_before"] = t.raw_before;
  j["raw_after"] = t.raw_after;
  j["raw_plus"] = t.raw_plus;
  j["raw_minus"] = t.raw_minus;
  return j;
}

inline std::string canonical_serialize(const TrialOutcome& t) {
  return trial_to_json(t).dump();
}

inline PairwiseChoice pairwise_choice_from_string(const std::string& s) {
  if (s == "A") return PairwiseChoice::A;
  if (s == "B") return PairwiseChoice::B;
  throw SchemaError("unknown pairwise choice: " + s);
}

inline TrialOutcome trial_from_json(const json& j) {
  TrialOutcome t;
  t.instance_id = j.at("instance_id").get<std::string>();
  t.task = j.at("task").get<std::string>();
  t.judge = j.at("judge").get<std::string>();
  t.template_name = j.at("template").get<std::string>();
  t.protocol = protocol_from_string(j.at("protocol").get<std::string>());
  t.attack = attack_from_json(j.at("attack"));
  if (!j.at("defense").is_null()) t.defense = defense_from_json(j.at("defense"));
  if (!j.at("score_before").is_null())
    t.scores = ScorePair{j.at("score_before").get<int>(),
                         j.at("score_after").get<int>()};
  t.quality.before = j.at("quality_before").get<double>();
  t.quality.after = j.at("quality_after").get<double>();
  t.quality_method = j.at("quality_method").get<std::string>();
  if (!j.at("pairwise_plus").is_null())
    t.pairwise_plus =
        pairwise_choice_from_string(j.at("pairwise_plus").get<std::string>());
  if (!j.at("pairwise_minus").is_null())
    t.pairwise_minus =
        pairwise_choice_from_string(j.at("pairwise_minus").get<std::string>());
  t.isdr = j.at("isdr").get<double>();
  t.valid = j.at("valid").get<bool>();
  if (!j.at("failure_reason").is_null())
    t.failure_reason = j.at("failure_reason").get<std::string>();
  t.blocked = j.at("blocked").get<bool>();
  t.raw_before = j.at("raw_before").get<std::string>();
  t.raw_after = j.at("raw_after").get<std::string>();
  t.raw_plus = j.at("raw_plus").get<std::string>();
  t.raw_minus = j.at("raw_minus").get<std::string>();
  return t;
}

inline TrialOutcome parse_trial(const std::string& line) {
  return trial_from_json(json::parse(line));
}

}  // namespace robustjudge
