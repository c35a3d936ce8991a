#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <httplib.h>

#include "robustjudge/domain.hpp"
#include "robustjudge/textutil.hpp"

namespace robustjudge {

// ============================================================
// Quality scores
// ============================================================

enum class QualityMethod {
  SemanticScorer,
  LexicalF1,
  CodeSim,
  ExactMatch,
  RuleCheck,
  FallbackZero,
};

inline const char* to_string(QualityMethod m) {
  switch (m) {
    case QualityMethod::SemanticScorer: return "semantic";
    case QualityMethod::LexicalF1: return "lexical-f1";
    case QualityMethod::CodeSim: return "code-sim";
    case QualityMethod::ExactMatch: return "exact-match";
    case QualityMethod::RuleCheck: return "rule-check";
    case QualityMethod::FallbackZero: return "fallback-zero";
  }
  return "?";
}

struct QualityScore {
  double value = 0.0;  // in [0,1]
  QualityMethod method = QualityMethod::FallbackZero;
  std::map<std::string, std::string> details;
};

// ============================================================
// Lexical F1
// ============================================================
// Distinct-token F1 over lowercase alphanumeric runs. Set semantics keeps
// the scorer monotone: deleting tokens shared with ref never raises it.

inline std::set<std::string> lexical_token_set(const std::string& text) {
  std::set<std::string> out;
  std::string cur;
  for (char c : text) {
    if (is_ascii_alnum(c)) {
      cur.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.insert(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.insert(cur);
  return out;
}

inline double lexical_f1(const std::string& x, const std::string& ref) {
  const std::set<std::string> xs = lexical_token_set(x);
  const std::set<std::string> rs = lexical_token_set(ref);
  if (xs.empty() || rs.empty()) return 0.0;
  std::size_t overlap = 0;
  for (const std::string& t : xs)
    if (rs.count(t)) ++overlap;
  if (overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / static_cast<double>(xs.size());
  const double r = static_cast<double>(overlap) / static_cast<double>(rs.size());
  return 2.0 * p * r / (p + r);
}

// ============================================================
// Code similarity
// ============================================================

enum class CodeLanguage { Cpp, Python, Go, Java, C, CSharp };

inline CodeLanguage code_language_from_string(const std::string& s) {
  const std::string v = to_lower(trim(s));
  if (v == "cpp" || v == "c++" || v == "cxx") return CodeLanguage::Cpp;
  if (v == "python" || v == "py") return CodeLanguage::Python;
  if (v == "go" || v == "golang") return CodeLanguage::Go;
  if (v == "java") return CodeLanguage::Java;
  if (v == "c") return CodeLanguage::C;
  if (v == "csharp" || v == "c#" || v == "cs") return CodeLanguage::CSharp;
  throw UnsupportedLanguage("unsupported code language: " + s);
}

namespace detail {

inline const std::set<std::string>& builtin_keywords(CodeLanguage lang) {
  static const std::set<std::string> cpp = {
      "alignas", "auto", "bool", "break", "case", "catch", "char", "class",
      "const", "constexpr", "continue", "default", "delete", "do", "double",
      "else", "enum", "explicit", "extern", "false", "float", "for", "friend",
      "goto", "if", "inline", "int", "long", "namespace", "new", "noexcept",
      "nullptr", "operator", "private", "protected", "public", "return",
      "short", "signed", "sizeof", "static", "struct", "switch", "template",
      "this", "throw", "true", "try", "typedef", "typename", "union",
      "unsigned", "using", "virtual", "void", "volatile", "while"};
  static const std::set<std::string> python = {
      "and",   "as",     "assert", "async", "await",  "break",  "class",
      "continue", "def", "del",    "elif",  "else",   "except", "finally",
      "for",   "from",   "global", "if",    "import", "in",     "is",
      "lambda", "nonlocal", "not",  "or",    "pass",   "raise",  "return",
      "try",   "while",  "with",   "yield", "None",   "True",   "False"};
  static const std::set<std::string> go = {
      "break", "case", "chan", "const", "continue", "default", "defer",
      "else", "fallthrough", "for", "func", "go", "goto", "if", "import",
      "interface", "map", "package", "range", "return", "select", "struct",
      "switch", "type", "var"};
  static const std::set<std::string> java = {
      "abstract", "boolean", "break", "byte", "case", "catch", "char",
      "class", "continue", "default", "do", "double", "else", "enum",
      "extends", "final", "finally", "float", "for", "if", "implements",
      "import", "instanceof", "int", "interface", "long", "new", "package",
      "private", "protected", "public", "return", "short", "static", "super",
      "switch", "synchronized", "this", "throw", "throws", "try", "void",
      "while", "true", "false", "null"};
  static const std::set<std::string> c = {
      "auto", "break", "case", "char", "const", "continue", "default", "do",
      "double", "else", "enum", "extern", "float", "for", "goto", "if",
      "int", "long", "register", "return", "short", "signed", "sizeof",
      "static", "struct", "switch", "typedef", "union", "unsigned", "void",
      "volatile", "while"};
  static const std::set<std::string> csharp = {
      "abstract", "as", "base", "bool", "break", "case", "catch", "char",
      "class", "const", "continue", "decimal", "default", "do", "double",
      "else", "enum", "false", "finally", "float", "for", "foreach", "if",
      "in", "int", "interface", "internal", "is", "lock", "long",
      "namespace", "new", "null", "object", "out", "override", "private",
      "protected", "public", "readonly", "ref", "return", "sealed", "short",
      "static", "string", "struct", "switch", "this", "throw", "true", "try",
      "typeof", "using", "var", "virtual", "void", "while"};
  switch (lang) {
    case CodeLanguage::Cpp: return cpp;
    case CodeLanguage::Python: return python;
    case CodeLanguage::Go: return go;
    case CodeLanguage::Java: return java;
    case CodeLanguage::C: return c;
    case CodeLanguage::CSharp: return csharp;
  }
  return cpp;
}

}  // namespace detail

// One keyword per line; overrides the built-in table for that language.
inline std::set<std::string> load_keyword_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open keyword table: " + path);
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (!t.empty()) out.insert(t);
  }
  return out;
}

enum class CodeTokenClass { Keyword, Identifier, Number, Operator, StringLit };

struct CodeToken {
  std::string text;
  CodeTokenClass cls = CodeTokenClass::Identifier;
};

inline std::vector<CodeToken> tokenize_code(const std::string& code,
                                            const std::set<std::string>& keywords) {
  static const std::set<std::string> two_char_ops = {
      "==", "!=", "<=", ">=", "&&", "||", "->", "++", "--",
      "<<", ">>", "+=", "-=", "*=", "/=", "::", "**", "//"};
  std::vector<CodeToken> out;
  std::size_t i = 0;
  const std::size_t n = code.size();
  while (i < n) {
    const char c = code[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '"' || c == '\'') {
      std::size_t j = i + 1;
      while (j < n && code[j] != c) {
        if (code[j] == '\\' && j + 1 < n) ++j;
        ++j;
      }
      if (j < n) ++j;
      out.push_back({code.substr(i, j - i), CodeTokenClass::StringLit});
      i = j;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < n && (is_ascii_alnum(code[j]) || code[j] == '_')) ++j;
      std::string word = code.substr(i, j - i);
      const CodeTokenClass cls = keywords.count(word)
                                     ? CodeTokenClass::Keyword
                                     : CodeTokenClass::Identifier;
      out.push_back({std::move(word), cls});
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < n && (std::isdigit(static_cast<unsigned char>(code[j])) ||
                       code[j] == '.'))
        ++j;
      out.push_back({code.substr(i, j - i), CodeTokenClass::Number});
      i = j;
      continue;
    }
    if (i + 1 < n && two_char_ops.count(code.substr(i, 2))) {
      out.push_back({code.substr(i, 2), CodeTokenClass::Operator});
      i += 2;
      continue;
    }
    out.push_back({std::string(1, c), CodeTokenClass::Operator});
    ++i;
  }
  return out;
}

struct CodeSimWeights {
  double ngram = 0.4;
  double weighted_ngram = 0.3;
  double class_sequence = 0.3;
  double keyword_weight = 5.0;  // token weight in the weighted component
};

namespace detail {

// Modified n-gram precision geometric mean with brevity penalty, over
// n = 1..min(4, shorter length). Weights clip against reference counts.
inline double weighted_bleu(const std::vector<std::string>& x,
                            const std::vector<std::string>& ref,
                            const std::function<double(const std::string&)>& wt) {
  if (x.empty() || ref.empty()) return 0.0;
  const std::size_t max_n =
      std::min<std::size_t>(4, std::min(x.size(), ref.size()));
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    std::map<std::string, std::pair<double, int>> ref_counts;  // weight, count
    for (std::size_t i = 0; i + n <= ref.size(); ++i) {
      std::string g;
      double w = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        g += ref[i + k];
        g += '\x1f';
        w += wt(ref[i + k]);
      }
      auto& e = ref_counts[g];
      e.first = w;
      e.second += 1;
    }
    double matched = 0.0, total = 0.0;
    std::map<std::string, int> used;
    for (std::size_t i = 0; i + n <= x.size(); ++i) {
      std::string g;
      double w = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        g += x[i + k];
        g += '\x1f';
        w += wt(x[i + k]);
      }
      total += w;
      auto it = ref_counts.find(g);
      if (it != ref_counts.end() && used[g] < it->second.second) {
        matched += w;
        used[g] += 1;
      }
    }
    if (total == 0.0 || matched == 0.0) return 0.0;
    log_sum += std::log(matched / total);
  }
  double bleu = std::exp(log_sum / static_cast<double>(max_n));
  if (x.size() < ref.size())
    bleu *= std::exp(1.0 - static_cast<double>(ref.size()) /
                               static_cast<double>(x.size()));
  return bleu;
}

}  // namespace detail

inline double code_similarity(const std::string& x, const std::string& ref,
                              CodeLanguage lang,
                              const CodeSimWeights& weights = {},
                              const std::set<std::string>* keyword_override =
                                  nullptr) {
  const std::set<std::string>& kw =
      keyword_override ? *keyword_override : detail::builtin_keywords(lang);
  const std::vector<CodeToken> xt = tokenize_code(x, kw);
  const std::vector<CodeToken> rt = tokenize_code(ref, kw);
  if (xt.empty() || rt.empty()) return 0.0;

  std::vector<std::string> x_texts, r_texts, x_classes, r_classes;
  for (const CodeToken& t : xt) {
    x_texts.push_back(t.text);
    x_classes.push_back(std::string(1, "KINOS"[static_cast<int>(t.cls)]));
  }
  for (const CodeToken& t : rt) {
    r_texts.push_back(t.text);
    r_classes.push_back(std::string(1, "KINOS"[static_cast<int>(t.cls)]));
  }

  auto unit = [](const std::string&) { return 1.0; };
  auto keyword_up = [&](const std::string& tok) {
    return kw.count(tok) ? weights.keyword_weight : 1.0;
  };

  const double ngram = detail::weighted_bleu(x_texts, r_texts, unit);
  const double weighted = detail::weighted_bleu(x_texts, r_texts, keyword_up);
  const double classes = detail::weighted_bleu(x_classes, r_classes, unit);

  const double v = weights.ngram * ngram + weights.weighted_ngram * weighted +
                   weights.class_sequence * classes;
  return std::min(1.0, std::max(0.0, v));
}

// ============================================================
// Exact-match answers
// ============================================================
// Extraction order: last boxed{...} expression, then the tail after the last
// "answer" marker, then the last standalone number or option letter.

namespace detail {

inline std::optional<std::string> last_boxed(const std::string& text) {
  static const std::string marker = "\\boxed{";
  std::size_t pos = std::string::npos;
  std::size_t search = 0;
  while (true) {
    const std::size_t hit = text.find(marker, search);
    if (hit == std::string::npos) break;
    pos = hit;
    search = hit + marker.size();
  }
  if (pos == std::string::npos) return std::nullopt;
  std::size_t i = pos + marker.size();
  int depth = 1;
  std::string content;
  while (i < text.size() && depth > 0) {
    if (text[i] == '{') ++depth;
    if (text[i] == '}') {
      --depth;
      if (depth == 0) break;
    }
    content.push_back(text[i]);
    ++i;
  }
  return content;
}

inline std::optional<std::string> first_number_or_option(
    const std::string& text, bool last_wins, bool lowercase_options = false) {
  static const std::regex number(
      R"((?:^|[^0-9A-Za-z.\-])(-?\d+(?:\.\d+)?)(?=$|[^0-9.]|\.(?![0-9])))");
  // Lowercase letters only match in short "answer is ..." tails; over whole
  // texts the article "a" would false-positive.
  static const std::regex option_upper(
      R"((?:^|[^A-Za-z0-9])\(?([A-E])\)?(?=$|[^A-Za-z0-9]))");
  static const std::regex option_any(
      R"((?:^|[^A-Za-z0-9])\(?([A-Ea-e])\)?(?=$|[^A-Za-z0-9]))");
  const std::regex& option = lowercase_options ? option_any : option_upper;
  std::optional<std::string> best;
  std::size_t best_pos = last_wins ? 0 : std::string::npos;
  for (const std::regex* re : {&number, &option}) {
    for (std::sregex_iterator it(text.begin(), text.end(), *re), end;
         it != end; ++it) {
      const std::size_t pos =
          static_cast<std::size_t>(it->position(1));
      if (!best || (last_wins ? pos >= best_pos : pos < best_pos)) {
        best = (*it)[1].str();
        best_pos = pos;
      }
    }
  }
  return best;
}

inline std::string canonical_answer(std::string s) {
  s = trim(s);
  while (!s.empty() && (s.back() == '.' || s.back() == '!')) {
    s.pop_back();
    s = trim(s);
  }
  if (s.size() >= 2 && s.front() == '(' && s.back() == ')')
    s = trim(s.substr(1, s.size() - 2));
  return to_lower(s);
}

inline std::optional<double> as_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace detail

inline std::optional<std::string> extract_answer(const std::string& x) {
  if (auto boxed = detail::last_boxed(x)) return trim(*boxed);

  static const std::regex marker(
      R"((?:[Aa]nswer|ANSWER)\s*(?:is|:|=)?\s*)");
  std::optional<std::size_t> tail_at;
  for (std::sregex_iterator it(x.begin(), x.end(), marker), end; it != end;
       ++it)
    tail_at = static_cast<std::size_t>(it->position(0)) + it->length(0);
  if (tail_at) {
    std::string tail = x.substr(*tail_at);
    const std::size_t eol = tail.find('\n');
    if (eol != std::string::npos) tail = tail.substr(0, eol);
    if (auto lead = detail::first_number_or_option(tail, /*last_wins=*/false,
                                                   /*lowercase_options=*/true))
      return *lead;
    const std::string t = trim(tail);
    if (!t.empty()) return t;
  }

  return detail::first_number_or_option(x, /*last_wins=*/true);
}

inline int exact_match_answer(const std::string& x, const std::string& gold) {
  const std::optional<std::string> extracted = extract_answer(x);
  if (!extracted) return 0;
  const std::string ce = detail::canonical_answer(*extracted);
  const std::string cg = detail::canonical_answer(gold);
  if (ce == cg) return 1;
  const auto ne = detail::as_number(ce);
  const auto ng = detail::as_number(cg);
  if (ne && ng && *ne == *ng) return 1;
  return 0;
}

// ============================================================
// Rule checkers
// ============================================================

using RuleChecker = std::function<bool(const TaskRecord&, const std::string&)>;

class RuleCheckerRegistry {
 public:
  void add(const std::string& id, RuleChecker fn) {
    checkers_[id] = std::move(fn);
  }
  bool has(const std::string& id) const { return checkers_.count(id) > 0; }
  bool empty() const { return checkers_.empty(); }

  int check(const std::string& id, const TaskRecord& task,
            const std::string& x) const {
    auto it = checkers_.find(id);
    if (it == checkers_.end())
      throw ConfigError("no rule checker registered: " + id);
    return it->second(task, x) ? 1 : 0;
  }

 private:
  std::map<std::string, RuleChecker> checkers_;
};

// ============================================================
// Remote semantic scorer
// ============================================================

struct SemanticScorerEndpoint {
  std::string base_url;  // http://host:port[/path], path defaults to /score
  int timeout_s = 30;
};

inline double semantic_score_remote(const SemanticScorerEndpoint& ep,
                                    const std::string& x,
                                    const std::string& ref) {
  std::string scheme_host = ep.base_url;
  std::string path = "/score";
  const std::size_t scheme = scheme_host.find("://");
  if (scheme != std::string::npos) {
    const std::size_t slash = scheme_host.find('/', scheme + 3);
    if (slash != std::string::npos) {
      path = scheme_host.substr(slash);
      scheme_host = scheme_host.substr(0, slash);
    }
  }
  httplib::Client cli(scheme_host);
  cli.set_connection_timeout(ep.timeout_s, 0);
  cli.set_read_timeout(ep.timeout_s, 0);

  json body;
  body["candidate"] = x;
  body["reference"] = ref;
  httplib::Result res = cli.Post(path, body.dump(), "application/json");
  if (!res)
    throw TransportError("semantic scorer unreachable: " +
                         httplib::to_string(res.error()));
  if (res->status != 200)
    throw ProviderError("semantic scorer HTTP " + std::to_string(res->status));
  try {
    const json j = json::parse(res->body);
    const double score = j.at("score").get<double>();
    return std::min(1.0, std::max(0.0, score));
  } catch (const json::exception& e) {
    throw ProviderError(std::string("semantic scorer bad body: ") + e.what());
  }
}

// ============================================================
// Dispatch
// ============================================================

struct QualityConfig {
  std::optional<SemanticScorerEndpoint> semantic;
  CodeSimWeights code_weights;
  RuleCheckerRegistry rules;  // T6 checkers by id
  std::map<std::string, std::set<std::string>> keyword_overrides;  // by lang name
};

// Never throws: every failure path lands on FallbackZero (or the lexical
// downgrade for Text) with the reason recorded in details.
class QualityEvaluator {
 public:
  QualityEvaluator() = default;
  explicit QualityEvaluator(QualityConfig cfg) : cfg_(std::move(cfg)) {}

  QualityScore evaluate(const TaskRecord& task, const std::string& x) const {
    switch (task.category) {
      case TaskCategory::Text:
        return eval_text(task, x);
      case TaskCategory::Code:
        return eval_code(task, x);
      case TaskCategory::Knowledge:
        return eval_knowledge(task, x);
    }
    return fallback("unknown category");
  }

  const QualityConfig& config() const { return cfg_; }

 private:
  static QualityScore fallback(const std::string& why) {
    QualityScore q;
    q.value = 0.0;
    q.method = QualityMethod::FallbackZero;
    q.details["reason"] = why;
    return q;
  }

  QualityScore eval_text(const TaskRecord& task, const std::string& x) const {
    if (cfg_.semantic) {
      try {
        QualityScore q;
        q.value = semantic_score_remote(*cfg_.semantic, x,
                                        task.reference_response);
        q.method = QualityMethod::SemanticScorer;
        return q;
      } catch (const Error& e) {
        QualityScore q;
        q.value = lexical_f1(x, task.reference_response);
        q.method = QualityMethod::LexicalF1;
        q.details["downgrade"] = e.what();
        return q;
      }
    }
    QualityScore q;
    q.value = lexical_f1(x, task.reference_response);
    q.method = QualityMethod::LexicalF1;
    return q;
  }

  QualityScore eval_code(const TaskRecord& task, const std::string& x) const {
    std::string lang_name = "python";
    if (auto it = task.metadata.find("language"); it != task.metadata.end())
      lang_name = it->second;
    try {
      const CodeLanguage lang = code_language_from_string(lang_name);
      const std::set<std::string>* kw = nullptr;
      if (auto it = cfg_.keyword_overrides.find(to_lower(lang_name));
          it != cfg_.keyword_overrides.end())
        kw = &it->second;
      QualityScore q;
      q.value = code_similarity(x, task.reference_response, lang,
                                cfg_.code_weights, kw);
      q.method = QualityMethod::CodeSim;
      q.details["language"] = lang_name;
      return q;
    } catch (const Error& e) {
      return fallback(e.what());
    }
  }

  QualityScore eval_knowledge(const TaskRecord& task,
                              const std::string& x) const {
    if (task.task_id == TaskId::T6) {
      std::string checker_id;
      if (auto it = task.metadata.find("checker"); it != task.metadata.end())
        checker_id = it->second;
      if (checker_id.empty() || !cfg_.rules.has(checker_id))
        return fallback(checker_id.empty()
                            ? "no rule checker configured"
                            : "rule checker not registered: " + checker_id);
      try {
        QualityScore q;
        q.value = cfg_.rules.check(checker_id, task, x);
        q.method = QualityMethod::RuleCheck;
        q.details["checker"] = checker_id;
        return q;
      } catch (const Error& e) {
        return fallback(e.what());
      }
    }
    std::string gold;
    if (auto it = task.metadata.find("answer"); it != task.metadata.end())
      gold = it->second;
    else
      gold = trim(task.reference_response);
    QualityScore q;
    q.value = exact_match_answer(x, gold);
    q.method = QualityMethod::ExactMatch;
    return q;
  }

  QualityConfig cfg_;
};

}  // namespace robustjudge
