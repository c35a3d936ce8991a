#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "robustjudge/domain.hpp"
#include "robustjudge/gateway.hpp"

namespace robustjudge {

// ============================================================
// Slots and component library
// ============================================================
// Six functional slots of a judge prompt. Assembly order is fixed: RS, EI,
// IAG, EC, ER into the system text, RF appended last.

enum class Slot { RS, EI, IAG, EC, ER, RF };

inline constexpr std::array<Slot, 6> kSlotOrder = {
    Slot::RS, Slot::EI, Slot::IAG, Slot::EC, Slot::ER, Slot::RF};

inline const char* to_string(Slot s) {
  switch (s) {
    case Slot::RS: return "RS";
    case Slot::EI: return "EI";
    case Slot::IAG: return "IAG";
    case Slot::EC: return "EC";
    case Slot::ER: return "ER";
    case Slot::RF: return "RF";
  }
  return "?";
}

inline Slot slot_from_string(const std::string& s) {
  for (Slot sl : kSlotOrder)
    if (s == to_string(sl)) return sl;
  throw BadParams("unknown slot: " + s);
}

inline constexpr const char* kAbsentVariant = "absent";

// One realization of a slot. Components that read the same under both
// protocols carry one shared text; EI and RF phrase scoring vs. selection
// differently and carry both.
struct SlotVariant {
  std::string id;
  std::optional<std::string> pointwise_text;
  std::optional<std::string> pairwise_text;

  bool absent() const { return !pointwise_text && !pairwise_text; }

  static SlotVariant absent_variant() { return {kAbsentVariant, {}, {}}; }
  static SlotVariant same(std::string id, std::string text) {
    return {std::move(id), text, text};
  }
  static SlotVariant split(std::string id, std::string pointwise,
                           std::string pairwise) {
    return {std::move(id), std::move(pointwise), std::move(pairwise)};
  }
};

class ComponentLibrary {
 public:
  const std::vector<SlotVariant>& variants(Slot s) const {
    return slots_[static_cast<std::size_t>(s)];
  }

  const SlotVariant& find(Slot s, const std::string& id) const {
    for (const SlotVariant& v : variants(s))
      if (v.id == id) return v;
    throw UnknownVariant(std::string("slot ") + to_string(s) +
                         " has no variant " + id);
  }

  std::size_t index_of(Slot s, const std::string& id) const {
    const auto& vs = variants(s);
    for (std::size_t i = 0; i < vs.size(); ++i)
      if (vs[i].id == id) return i;
    throw UnknownVariant(std::string("slot ") + to_string(s) +
                         " has no variant " + id);
  }

  void set_variants(Slot s, std::vector<SlotVariant> vs) {
    if (s == Slot::EI)
      for (const SlotVariant& v : vs)
        if (v.absent())
          throw ConfigError("EI does not admit an absent variant");
    slots_[static_cast<std::size_t>(s)] = std::move(vs);
  }

  // Default pool: the union of slot realizations across the built-in
  // templates, plus ABSENT everywhere except EI.
  static ComponentLibrary defaults() {
    ComponentLibrary lib;
    lib.set_variants(Slot::RS, {
        SlotVariant::absent_variant(),
        SlotVariant::same("impartial-judge",
            "You are an impartial judge of response quality."),
        SlotVariant::same("expert-evaluator",
            "You are an expert evaluator. You need to perform a translation "
            "task ({##SOURCE_LAN##} to {##TARGET_LAN##})."),
        SlotVariant::same("expert-evaluator-generic",
            "You are an expert evaluator performing a {##TASK##} task."),
        SlotVariant::same("critical-reviewer",
            "You are a critical reviewer who rigorously assesses the quality "
            "of AI-generated responses."),
        SlotVariant::same("fair-assessment",
            "You are a fair assessment assistant for judging the outputs of "
            "AI models."),
    });
    lib.set_variants(Slot::EI, {
        SlotVariant::split("evaluate-quality",
            "You aim to evaluate the quality of the response for a given "
            "instruction. Assign the response an integer score from 1 to 10.",
            "You aim to evaluate the quality of the responses for a given "
            "instruction. Your goal is to select the best response for the "
            "given instruction. Select Response A or Response B for the "
            "given instruction. Two different AI chatbots, respectively, "
            "generate the two outputs."),
        SlotVariant::split("score-simple",
            "Rate the following response on a scale from 1 to 10.",
            "Compare the two responses below and choose the better one. "
            "Answer with A or B."),
        SlotVariant::split("answer-the-task",
            "Evaluate how well the response fulfills the instruction and "
            "give it a score between 1 and 10.",
            "Given the instruction and two responses, decide which response "
            "fulfills the instruction better: Response A or Response B."),
    });
    lib.set_variants(Slot::IAG, {
        SlotVariant::absent_variant(),
        SlotVariant::same("answer-first",
            "Begin your evaluation by generating your own response to the "
            "prompt. You must provide your response before judging any "
            "responses. When evaluating the assistants' responses, compare "
            "both assistants' responses with your response. You must "
            "identify and correct any errors or inaccuracies."),
    });
    lib.set_variants(Slot::EC, {
        SlotVariant::absent_variant(),
        SlotVariant::same("helpfulness-relevance",
            "Please consider the helpfulness, relevance, accuracy, and "
            "level of detail of their responses."),
        SlotVariant::same("accuracy-fluency",
            "Judge the work on accuracy, fluency, completeness, and "
            "creativity."),
    });
    lib.set_variants(Slot::ER, {
        SlotVariant::absent_variant(),
        SlotVariant::split("explain-before",
            "Please provide your explanation before providing your rating.",
            "Please provide your explanation before providing your "
            "preference."),
        SlotVariant::same("explain-after",
            "After your judgment, briefly explain your reasoning."),
    });
    lib.set_variants(Slot::RF, {
        SlotVariant::absent_variant(),
        SlotVariant::split("bracket-format",
            "Output your final rating strictly in this format: "
            "\"Rating: [[X]]\" where X is an integer from 1 to 10.",
            "Output your final verdict strictly in this format: "
            "\"[[A]]\" if Response A is better, \"[[B]]\" if Response B "
            "is better."),
        SlotVariant::split("plain-format",
            "End your reply with a single line \"Score: X\".",
            "End your reply with a single line naming the better response: "
            "A or B."),
    });
    return lib;
  }

  static ComponentLibrary from_json(const json& j) {
    ComponentLibrary lib;
    for (Slot s : kSlotOrder) {
      if (!j.contains(to_string(s)))
        throw ConfigError(std::string("component library lacks slot ") +
                          to_string(s));
      std::vector<SlotVariant> vs;
      for (const auto& je : j.at(to_string(s))) {
        SlotVariant v;
        v.id = je.at("id").get<std::string>();
        if (je.contains("pointwise"))
          v.pointwise_text = je.at("pointwise").get<std::string>();
        if (je.contains("pairwise"))
          v.pairwise_text = je.at("pairwise").get<std::string>();
        if (je.contains("text")) {
          v.pointwise_text = je.at("text").get<std::string>();
          v.pairwise_text = v.pointwise_text;
        }
        vs.push_back(std::move(v));
      }
      if (vs.empty())
        throw ConfigError(std::string("slot has no variants: ") + to_string(s));
      lib.set_variants(s, std::move(vs));
    }
    return lib;
  }

  static ComponentLibrary from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open component library: " + path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("bad component library " + path + ": " + e.what());
    }
    return from_json(j);
  }

  json to_json() const {
    json j;
    for (Slot s : kSlotOrder) {
      json arr = json::array();
      for (const SlotVariant& v : variants(s)) {
        json jv;
        jv["id"] = v.id;
        if (v.pointwise_text && v.pairwise_text &&
            *v.pointwise_text == *v.pairwise_text) {
          jv["text"] = *v.pointwise_text;
        } else {
          if (v.pointwise_text) jv["pointwise"] = *v.pointwise_text;
          if (v.pairwise_text) jv["pairwise"] = *v.pairwise_text;
        }
        arr.push_back(jv);
      }
      j[to_string(s)] = arr;
    }
    return j;
  }

 private:
  std::array<std::vector<SlotVariant>, 6> slots_;
};

// ============================================================
// Prompt configurations and assembly
// ============================================================

struct PromptConfig {
  std::array<std::string, 6> assignment;  // variant id per slot, kSlotOrder
  Protocol protocol = Protocol::Pairwise;

  const std::string& at(Slot s) const {
    return assignment[static_cast<std::size_t>(s)];
  }
  std::string& at(Slot s) { return assignment[static_cast<std::size_t>(s)]; }

  bool operator==(const PromptConfig&) const = default;
};

inline std::string config_key(const PromptConfig& c) {
  std::string key;
  for (Slot s : kSlotOrder) {
    key += to_string(s);
    key += '=';
    key += c.at(s);
    key += '|';
  }
  key += to_string(c.protocol);
  return key;
}

inline json config_to_json(const PromptConfig& c) {
  json j;
  for (Slot s : kSlotOrder) j[to_string(s)] = c.at(s);
  j["protocol"] = to_string(c.protocol);
  return j;
}

inline PromptConfig config_from_json(const json& j) {
  PromptConfig c;
  for (Slot s : kSlotOrder) c.at(s) = j.at(to_string(s)).get<std::string>();
  if (j.contains("protocol"))
    c.protocol = protocol_from_string(j.at("protocol").get<std::string>());
  return c;
}

// true = slot contributes text (not ABSENT)
inline std::array<bool, 6> inclusion_pattern(const PromptConfig& c,
                                             const ComponentLibrary& lib) {
  std::array<bool, 6> inc{};
  for (Slot s : kSlotOrder)
    inc[static_cast<std::size_t>(s)] = !lib.find(s, c.at(s)).absent();
  return inc;
}

inline constexpr const char* kPointwiseUserSkeleton =
    "### Instruction: {##SOURCE##}\n### Response: {##RESPONSE##}";
inline constexpr const char* kPairwiseUserSkeleton =
    "### Instruction: {##SOURCE##}\n### Response A: {##A##}\n"
    "### Response B: {##B##}";

inline PromptText assemble_prompt(const PromptConfig& config,
                                  const ComponentLibrary& lib) {
  std::vector<std::string> blocks;
  auto add = [&](Slot s) {
    const SlotVariant& v = lib.find(s, config.at(s));
    if (v.absent()) return;
    const std::optional<std::string>& primary =
        config.protocol == Protocol::Pointwise ? v.pointwise_text
                                               : v.pairwise_text;
    const std::optional<std::string>& other =
        config.protocol == Protocol::Pointwise ? v.pairwise_text
                                               : v.pointwise_text;
    blocks.push_back(primary ? *primary : *other);
  };
  for (Slot s : {Slot::RS, Slot::EI, Slot::IAG, Slot::EC, Slot::ER}) add(s);
  add(Slot::RF);

  PromptText out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i) out.system_text += "\n\n";
    out.system_text += blocks[i];
  }
  out.user_template = config.protocol == Protocol::Pointwise
                          ? kPointwiseUserSkeleton
                          : kPairwiseUserSkeleton;
  return out;
}

// Named configurations. Inclusion patterns per slot match the published
// comparison of nine judge templates; "optimized" is the tuned pairwise
// template whose assembled text carries the expert-evaluator framing.
inline const std::map<std::string, PromptConfig>& builtin_templates() {
  static const std::map<std::string, PromptConfig> table = [] {
    std::map<std::string, PromptConfig> m;
    auto mk = [](std::array<std::string, 6> a) {
      PromptConfig c;
      c.assignment = std::move(a);
      c.protocol = Protocol::Pairwise;
      return c;
    };
    m["vanilla"] = mk({"impartial-judge", "score-simple", "absent", "absent",
                       "absent", "bracket-format"});
    m["arena-hard"] = mk({"impartial-judge", "evaluate-quality", "answer-first",
                          "helpfulness-relevance", "explain-before",
                          "bracket-format"});
    m["google-vertex"] = mk({"fair-assessment", "evaluate-quality", "absent",
                             "helpfulness-relevance", "explain-after",
                             "plain-format"});
    m["pandalm"] = mk({"absent", "answer-the-task", "absent", "absent",
                       "absent", "absent"});
    m["prometheus2"] = mk({"critical-reviewer", "answer-the-task", "absent",
                           "absent", "absent", "bracket-format"});
    m["judgelm"] = mk({"fair-assessment", "evaluate-quality", "absent",
                       "accuracy-fluency", "absent", "plain-format"});
    m["auto-j"] = mk({"absent", "answer-the-task", "absent", "absent",
                      "absent", "plain-format"});
    m["skywork"] = mk({"impartial-judge", "evaluate-quality", "absent",
                       "accuracy-fluency", "absent", "bracket-format"});
    m["chateval"] = mk({"absent", "score-simple", "absent",
                        "helpfulness-relevance", "absent", "plain-format"});
    m["optimized"] = mk({"expert-evaluator", "evaluate-quality", "answer-first",
                         "helpfulness-relevance", "explain-before", "absent"});
    return m;
  }();
  return table;
}

inline PromptConfig named_template(const std::string& name, Protocol protocol) {
  const auto& table = builtin_templates();
  auto it = table.find(name);
  if (it == table.end()) throw MissingTemplate("unknown template: " + name);
  PromptConfig c = it->second;
  c.protocol = protocol;
  return c;
}

// ============================================================
// Optimization
// ============================================================

using EvalFunction = std::function<double(const PromptConfig&)>;

struct EvalRecord {
  PromptConfig config;
  double value = 0.0;
};

// Raised when the eval closure fails mid-search; carries the evaluations
// finished before the failure.
class EvalFunctionError : public Error {
 public:
  EvalFunctionError(const std::string& what, std::vector<EvalRecord> partial)
      : Error(what), partial_trace(std::move(partial)) {}
  std::vector<EvalRecord> partial_trace;
};

// Memoizes by config key and logs every underlying evaluation.
class CachedEval {
 public:
  explicit CachedEval(EvalFunction fn) : fn_(std::move(fn)) {}

  double operator()(const PromptConfig& c) {
    const std::string key = config_key(c);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const double v = fn_(c);
    cache_[key] = v;
    trace_.push_back({c, v});
    return v;
  }

  const std::vector<EvalRecord>& trace() const { return trace_; }
  std::size_t evaluations() const { return trace_.size(); }

 private:
  EvalFunction fn_;
  std::map<std::string, double> cache_;
  std::vector<EvalRecord> trace_;
};

struct AscentResult {
  PromptConfig best;
  double best_value = 0.0;
  std::vector<EvalRecord> trace;
  int sweeps = 0;
  bool converged = false;
};

// Coordinate ascent over the six slots in fixed order. Per slot every
// library variant is scored with the others held fixed; the strict-improve
// rule keeps the current assignment on ties and otherwise picks the lowest
// variant index among the best. Stops after a sweep that changes nothing, or
// after max_iter sweeps.
inline AscentResult coordinate_ascent(const ComponentLibrary& lib,
                                      const PromptConfig& init,
                                      const EvalFunction& eval, int max_iter) {
  if (max_iter < 1) throw BadParams("max_iter must be >= 1");
  for (Slot s : kSlotOrder) lib.find(s, init.at(s));  // validate up front

  CachedEval cached(eval);
  AscentResult res;
  try {
    PromptConfig cur = init;
    double cur_val = cached(cur);
    for (int sweep = 0; sweep < max_iter; ++sweep) {
      bool changed = false;
      for (Slot s : kSlotOrder) {
        std::string best_id = cur.at(s);
        double best_val = cur_val;
        for (const SlotVariant& v : lib.variants(s)) {
          if (v.id == cur.at(s)) continue;
          PromptConfig cand = cur;
          cand.at(s) = v.id;
          const double val = cached(cand);
          if (val > best_val) {
            best_val = val;
            best_id = v.id;
          }
        }
        if (best_id != cur.at(s)) {
          cur.at(s) = best_id;
          cur_val = best_val;
          changed = true;
        }
      }
      ++res.sweeps;
      if (!changed) {
        res.converged = true;
        break;
      }
    }
    res.best = cur;
    res.best_value = cur_val;
    res.trace = cached.trace();
    return res;
  } catch (const Error& e) {
    throw EvalFunctionError(e.what(), cached.trace());
  }
}

struct SearchResult {
  PromptConfig best;
  double best_value = 0.0;
  std::size_t evaluated = 0;
};

inline constexpr std::size_t kExhaustiveCap = 10000;

// True argmax by enumeration in lexicographic variant-index order (last slot
// fastest); the first maximum wins, which makes ties lexicographic.
inline SearchResult exhaustive_search(const ComponentLibrary& lib,
                                      Protocol protocol,
                                      const EvalFunction& eval,
                                      std::size_t cap = kExhaustiveCap) {
  std::size_t space = 1;
  for (Slot s : kSlotOrder) {
    const std::size_t n = lib.variants(s).size();
    if (n == 0) throw ConfigError(std::string("slot has no variants: ") +
                                  to_string(s));
    if (space > cap / n + 1) space = cap + 1;  // overflow clamp
    else space *= n;
    if (space > cap)
      throw CapExceeded("search space exceeds cap of " + std::to_string(cap));
  }

  CachedEval cached(eval);
  std::array<std::size_t, 6> idx{};
  SearchResult res;
  bool first = true;
  while (true) {
    PromptConfig c;
    c.protocol = protocol;
    for (std::size_t i = 0; i < 6; ++i)
      c.assignment[i] = lib.variants(kSlotOrder[i])[idx[i]].id;
    const double v = cached(c);
    ++res.evaluated;
    if (first || v > res.best_value) {
      res.best = c;
      res.best_value = v;
      first = false;
    }
    // odometer, last slot fastest
    int pos = 5;
    while (pos >= 0) {
      if (++idx[pos] < lib.variants(kSlotOrder[pos]).size()) break;
      idx[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  return res;
}

inline void write_eval_trace(const std::string& path,
                             const std::vector<EvalRecord>& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace file: " + path);
  for (const EvalRecord& r : trace) {
    json j;
    j["config"] = config_to_json(r.config);
    j["value"] = r.value;
    out << j.dump() << "\n";
  }
}

}  // namespace robustjudge
