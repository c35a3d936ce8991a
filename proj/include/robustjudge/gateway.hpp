#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <httplib.h>

#include "robustjudge/domain.hpp"
#include "robustjudge/hash.hpp"

namespace robustjudge {

// ============================================================
// Endpoints and messages
// ============================================================

struct RetryPolicy {
  int max_attempts = 3;       // >= 1
  int backoff_base_ms = 100;  // doubles per attempt
};

struct ModelEndpoint {
  std::string name;         // label used in reports
  std::string base_url;     // http(s)://host[:port][/prefix] or scripted:<path>
  std::string model_name;
  std::string api_key_env;  // env var holding the bearer token, may be empty
  int max_parallel = 4;
  int timeout_s = 60;
  RetryPolicy retry;
  double temperature = 0.0;
  bool want_logprobs = false;
};

enum class Role { System, User, Assistant };

inline const char* to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "?";
}

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  bool logprobs = false;
};

// Wire body with fixed field names. This exact string is also the cache-key
// preimage, so the rendering must stay stable.
inline std::string chat_request_body(const ChatRequest& req) {
  json j;
  j["model"] = req.model;
  json msgs = json::array();
  for (const ChatMessage& m : req.messages) {
    json jm;
    jm["role"] = to_string(m.role);
    jm["content"] = m.content;
    msgs.push_back(jm);
  }
  j["messages"] = msgs;
  j["temperature"] = req.temperature;
  if (req.logprobs) j["logprobs"] = true;
  return j.dump();
}

inline std::string chat_request_hash(const ChatRequest& req) {
  return sha256_hex(chat_request_body(req));
}

// ============================================================
// Verdicts and parsers
// ============================================================

struct Unparsed {
  bool operator==(const Unparsed&) const = default;
};
struct Score {
  int value = 0;
  bool operator==(const Score&) const = default;
};
struct Preference {
  PairwiseChoice choice = PairwiseChoice::A;  // slot label, not identity
  bool operator==(const Preference&) const = default;
};
using ParsedVerdict = std::variant<Unparsed, Score, Preference>;

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;
};

struct JudgeVerdict {
  std::string raw_text;
  ParsedVerdict parsed = Unparsed{};
  std::optional<std::vector<TokenLogprob>> token_logprobs;
};

inline bool is_unparsed(const ParsedVerdict& v) {
  return std::holds_alternative<Unparsed>(v);
}
inline std::optional<int> score_of(const ParsedVerdict& v) {
  if (const Score* s = std::get_if<Score>(&v)) return s->value;
  return std::nullopt;
}
inline std::optional<PairwiseChoice> preference_of(const ParsedVerdict& v) {
  if (const Preference* p = std::get_if<Preference>(&v)) return p->choice;
  return std::nullopt;
}

// Rating grammar, priority ordered; within one rule the LAST match wins.
// Integers outside [1,10] never clamp: the rule's result is discarded and the
// next rule gets a chance, verbose judges often restate the scale.
//   1. [[N]]
//   2. "rating"/"score" word followed by an integer
//   3. N/10
//   4. last standalone integer
inline ParsedVerdict parse_pointwise(const std::string& raw) {
  static const std::regex bracket(R"(\[\[\s*(\d{1,3})\s*\]\])");
  static const std::regex labeled(
      R"((?:[Rr]ating|[Ss]core|RATING|SCORE)[^0-9\-]{0,20}(\d{1,3})(?=$|\.(?![0-9])|[^0-9.]))");
  static const std::regex out_of_ten(R"((\d{1,3})\s*/\s*10(?![0-9]))");
  static const std::regex bare(
      R"((?:^|[^0-9A-Za-z.\-])(\d{1,3})(?=$|\.(?![0-9])|[^0-9.]))");

  for (const std::regex* re : {&bracket, &labeled, &out_of_ten, &bare}) {
    std::optional<int> last;
    for (std::sregex_iterator it(raw.begin(), raw.end(), *re), end;
         it != end; ++it) {
      const int v = std::stoi((*it)[1].str());
      if (v >= kScoreMin && v <= kScoreMax) last = v;
    }
    if (last) return Score{*last};
  }
  return Unparsed{};
}

// Preference grammar, priority ordered, last occurrence within a rule:
//   1. [[A]] / [[B]]
//   2. final standalone A / B token
//   3. "Response A" / "Response B"
inline ParsedVerdict parse_pairwise(const std::string& raw) {
  static const std::regex bracket(R"(\[\[\s*([AB])\s*\]\])");
  static const std::regex standalone(R"((?:^|[^A-Za-z0-9])([AB])(?=[^A-Za-z0-9]|$))");
  static const std::regex response_word(R"([Rr]esponse\s+([AB]))");

  for (const std::regex* re : {&bracket, &standalone, &response_word}) {
    std::optional<char> last;
    for (std::sregex_iterator it(raw.begin(), raw.end(), *re), end;
         it != end; ++it)
      last = (*it)[1].str()[0];
    if (last)
      return Preference{*last == 'A' ? PairwiseChoice::A : PairwiseChoice::B};
  }
  return Unparsed{};
}

// ============================================================
// Prompt text + rendering
// ============================================================
// Placeholder spelling: {##NAME##}. Substitution is literal and single-pass,
// so braces inside task text or responses survive untouched.

inline constexpr const char* kPhSource = "{##SOURCE##}";
inline constexpr const char* kPhResponse = "{##RESPONSE##}";
inline constexpr const char* kPhA = "{##A##}";
inline constexpr const char* kPhB = "{##B##}";
inline constexpr const char* kPhSourceLan = "{##SOURCE_LAN##}";
inline constexpr const char* kPhTargetLan = "{##TARGET_LAN##}";
inline constexpr const char* kPhTask = "{##TASK##}";

struct PromptText {
  std::string system_text;    // may carry language/task placeholders
  std::string user_template;  // must carry the response placeholder(s)
};

namespace detail {

inline std::pair<std::string, std::string> split_language_pair(
    const std::optional<std::string>& pair) {
  if (!pair) return {"", ""};
  const std::size_t dash = pair->find('-');
  if (dash == std::string::npos) return {*pair, *pair};
  return {pair->substr(0, dash), pair->substr(dash + 1)};
}

inline std::string fill_task_fields(std::string text, const TaskRecord& task) {
  const auto [src_lan, tgt_lan] = split_language_pair(task.language_pair);
  text = replace_all(std::move(text), kPhSourceLan, src_lan);
  text = replace_all(std::move(text), kPhTargetLan, tgt_lan);
  text = replace_all(std::move(text), kPhTask, task_label(task.task_id));
  text = replace_all(std::move(text), kPhSource, task.source_prompt);
  return text;
}

}  // namespace detail

inline std::vector<ChatMessage> render_pointwise(const PromptText& tmpl,
                                                 const TaskRecord& task,
                                                 const std::string& response) {
  if (tmpl.user_template.find(kPhResponse) == std::string::npos)
    throw MissingPlaceholder("pointwise template lacks " +
                             std::string(kPhResponse));
  std::string user = detail::fill_task_fields(tmpl.user_template, task);
  user = replace_all(std::move(user), kPhResponse, response);
  return {{Role::System, detail::fill_task_fields(tmpl.system_text, task)},
          {Role::User, std::move(user)}};
}

inline std::vector<ChatMessage> render_pairwise(const PromptText& tmpl,
                                                const TaskRecord& task,
                                                const std::string& response_a,
                                                const std::string& response_b) {
  for (const char* ph : {kPhA, kPhB})
    if (tmpl.user_template.find(ph) == std::string::npos)
      throw MissingPlaceholder("pairwise template lacks " + std::string(ph));
  std::string user = detail::fill_task_fields(tmpl.user_template, task);
  user = replace_all(std::move(user), kPhA, response_a);
  user = replace_all(std::move(user), kPhB, response_b);
  return {{Role::System, detail::fill_task_fields(tmpl.system_text, task)},
          {Role::User, std::move(user)}};
}

// ============================================================
// Transports
// ============================================================
// A transport returns the raw response body for a chat request. The gateway
// extracts the assistant text; the cache stores bodies keyed by request hash.

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string send(const ModelEndpoint& ep, const ChatRequest& req) = 0;
};

// Deterministic double. Resolution order: exact request-hash entry, then
// first matching contains-rule, then the default reply.
class ScriptedTransport : public ChatTransport {
 public:
  struct Rule {
    std::string contains;  // matched against the concatenated message contents
    std::string reply;
  };

  ScriptedTransport() = default;

  explicit ScriptedTransport(
      std::function<std::string(const ChatRequest&)> replier)
      : replier_(std::move(replier)) {}

  static ScriptedTransport from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open fixture file: " + path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("bad fixture file " + path + ": " + e.what());
    }
    ScriptedTransport t;
    if (j.contains("default")) t.default_reply_ = j.at("default").get<std::string>();
    if (j.contains("rules"))
      for (const auto& r : j.at("rules"))
        t.rules_.push_back({r.at("contains").get<std::string>(),
                            r.at("reply").get<std::string>()});
    if (j.contains("exact"))
      for (const auto& [k, v] : j.at("exact").items())
        t.exact_[k] = v.get<std::string>();
    return t;
  }

  void set_default(std::string reply) { default_reply_ = std::move(reply); }
  void add_rule(std::string contains, std::string reply) {
    rules_.push_back({std::move(contains), std::move(reply)});
  }
  void add_exact(std::string request_hash, std::string reply) {
    exact_[std::move(request_hash)] = std::move(reply);
  }

  std::string send(const ModelEndpoint&, const ChatRequest& req) override {
    calls_.fetch_add(1);
    std::string reply;
    if (replier_) {
      reply = replier_(req);
    } else {
      if (auto it = exact_.find(chat_request_hash(req)); it != exact_.end()) {
        reply = it->second;
      } else {
        std::string all;
        for (const ChatMessage& m : req.messages) {
          all += m.content;
          all += '\n';
        }
        bool matched = false;
        for (const Rule& r : rules_)
          if (all.find(r.contains) != std::string::npos) {
            reply = r.reply;
            matched = true;
            break;
          }
        if (!matched) {
          if (!default_reply_)
            throw TransportError("scripted transport has no reply for request");
          reply = *default_reply_;
        }
      }
    }
    json body;
    body["choices"] = json::array();
    json choice;
    choice["message"]["role"] = "assistant";
    choice["message"]["content"] = reply;
    body["choices"].push_back(choice);
    return body.dump();
  }

  std::uint64_t calls() const { return calls_.load(); }

 private:
  std::function<std::string(const ChatRequest&)> replier_;
  std::optional<std::string> default_reply_;
  std::vector<Rule> rules_;
  std::map<std::string, std::string> exact_;
  std::atomic<std::uint64_t> calls_{0};
};

// POST {base_url}/chat/completions with bearer auth from api_key_env.
// 401/403 fail immediately; 429 and 5xx retry with exponential backoff.
class HttpTransport : public ChatTransport {
 public:
  std::string send(const ModelEndpoint& ep, const ChatRequest& req) override {
    std::string scheme_host = ep.base_url;
    std::string prefix;
    const std::size_t scheme = scheme_host.find("://");
    if (scheme != std::string::npos) {
      const std::size_t slash = scheme_host.find('/', scheme + 3);
      if (slash != std::string::npos) {
        prefix = scheme_host.substr(slash);
        scheme_host = scheme_host.substr(0, slash);
      }
    }
    if (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    httplib::Client cli(scheme_host);
    cli.set_connection_timeout(ep.timeout_s, 0);
    cli.set_read_timeout(ep.timeout_s, 0);
    httplib::Headers headers;
    if (!ep.api_key_env.empty()) {
      const char* key = std::getenv(ep.api_key_env.c_str());
      if (key == nullptr || *key == '\0')
        throw AuthError("env var not set: " + ep.api_key_env);
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    const std::string body = chat_request_body(req);
    std::string last_error;
    bool rate_limited = false;
    const int attempts = std::max(1, ep.retry.max_attempts);
    for (int attempt = 0; attempt < attempts; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(
            ep.retry.backoff_base_ms * (1 << (attempt - 1))));
      httplib::Result res =
          cli.Post(prefix + "/chat/completions", headers, body,
                   "application/json");
      if (!res) {
        last_error = "transport failure: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 401 || res->status == 403)
        throw AuthError("endpoint rejected credentials, HTTP " +
                        std::to_string(res->status));
      if (res->status == 429) {
        rate_limited = true;
        last_error = "HTTP 429";
        continue;
      }
      if (res->status >= 500) {
        rate_limited = false;
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200)
        throw TransportError("unexpected HTTP " + std::to_string(res->status));
      return res->body;
    }
    if (rate_limited) throw RateLimited("rate limited after retries");
    throw TransportError(last_error.empty() ? "request failed" : last_error);
  }
};

// ============================================================
// Gateway: cache + concurrency cap + body parsing
// ============================================================

inline std::optional<std::filesystem::path> default_cache_dir() {
  const char* dir = std::getenv("ROBUSTJUDGE_CACHE");
  if (dir == nullptr || *dir == '\0') return std::nullopt;
  return std::filesystem::path(dir);
}

class JudgeGateway {
 public:
  explicit JudgeGateway(std::shared_ptr<ChatTransport> transport,
                        std::optional<std::filesystem::path> cache_dir =
                            default_cache_dir())
      : transport_(std::move(transport)), cache_dir_(std::move(cache_dir)) {
    if (cache_dir_) std::filesystem::create_directories(*cache_dir_);
  }

  JudgeVerdict invoke(const ModelEndpoint& ep,
                      const std::vector<ChatMessage>& messages) {
    ChatRequest req{ep.model_name, messages, ep.temperature, ep.want_logprobs};
    const std::string key = chat_request_hash(req);

    std::string body;
    if (auto cached = cache_load(key)) {
      body = *cached;
    } else {
      Gate gate(limiter_for(ep));
      body = transport_->send(ep, req);
      wire_calls_.fetch_add(1);
      cache_store(key, body);
    }
    return parse_body(body);
  }

  std::uint64_t wire_calls() const { return wire_calls_.load(); }

 private:
  // Counting gate, bounds in-flight requests per endpoint name.
  struct Limiter {
    std::mutex m;
    std::condition_variable cv;
    int in_flight = 0;
    int cap = 1;
  };
  struct Gate {
    explicit Gate(Limiter& l) : l_(l) {
      std::unique_lock<std::mutex> lk(l_.m);
      l_.cv.wait(lk, [&] { return l_.in_flight < l_.cap; });
      ++l_.in_flight;
    }
    ~Gate() {
      {
        std::lock_guard<std::mutex> lk(l_.m);
        --l_.in_flight;
      }
      l_.cv.notify_one();
    }
    Limiter& l_;
  };

  Limiter& limiter_for(const ModelEndpoint& ep) {
    std::lock_guard<std::mutex> lk(limiters_mutex_);
    auto& l = limiters_[ep.name.empty() ? ep.base_url : ep.name];
    if (!l) l = std::make_unique<Limiter>();
    l->cap = std::max(1, ep.max_parallel);
    return *l;
  }

  std::optional<std::string> cache_load(const std::string& key) {
    if (!cache_dir_) return std::nullopt;
    std::lock_guard<std::mutex> lk(cache_mutex_);
    std::ifstream in(*cache_dir_ / (key + ".json"), std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void cache_store(const std::string& key, const std::string& body) {
    if (!cache_dir_) return;
    std::lock_guard<std::mutex> lk(cache_mutex_);
    const std::filesystem::path final_path = *cache_dir_ / (key + ".json");
    const std::filesystem::path tmp_path = *cache_dir_ / (key + ".tmp");
    {
      std::ofstream out(tmp_path, std::ios::binary);
      out << body;
    }
    std::filesystem::rename(tmp_path, final_path);
  }

  static JudgeVerdict parse_body(const std::string& body) {
    JudgeVerdict v;
    json j;
    try {
      j = json::parse(body);
    } catch (const json::parse_error& e) {
      throw TransportError(std::string("malformed response body: ") + e.what());
    }
    try {
      const json& choice = j.at("choices").at(0);
      v.raw_text = choice.at("message").at("content").get<std::string>();
      if (choice.contains("logprobs") && choice.at("logprobs").is_object() &&
          choice.at("logprobs").contains("content")) {
        std::vector<TokenLogprob> lps;
        for (const auto& t : choice.at("logprobs").at("content"))
          lps.push_back({t.at("token").get<std::string>(),
                         t.at("logprob").get<double>()});
        v.token_logprobs = std::move(lps);
      }
    } catch (const json::exception& e) {
      throw TransportError(std::string("response body missing fields: ") +
                           e.what());
    }
    return v;
  }

  std::shared_ptr<ChatTransport> transport_;
  std::optional<std::filesystem::path> cache_dir_;
  std::mutex cache_mutex_;
  std::mutex limiters_mutex_;
  std::map<std::string, std::unique_ptr<Limiter>> limiters_;
  std::atomic<std::uint64_t> wire_calls_{0};
};

// ============================================================
// Both-order pairwise evaluation
// ============================================================

struct BothOrders {
  // Identity-level verdicts: A = first argument r_a, B = second argument r_b,
  // regardless of presentation order. nullopt = that half failed.
  std::optional<PairwiseChoice> plus;   // order (r_a, r_b)
  std::optional<PairwiseChoice> minus;  // order (r_b, r_a), re-mapped
  std::string raw_plus;
  std::string raw_minus;
  std::optional<std::string> plus_error;
  std::optional<std::string> minus_error;
};

// Transport errors on one order are recorded on that half; the other half is
// still produced. Unparsed verdicts leave the half empty with no error text.
inline BothOrders judge_pairwise_both_orders(JudgeGateway& gw,
                                             const ModelEndpoint& ep,
                                             const PromptText& tmpl,
                                             const TaskRecord& task,
                                             const std::string& r_a,
                                             const std::string& r_b) {
  BothOrders out;
  auto run_order = [&](bool swapped, std::optional<PairwiseChoice>& verdict,
                       std::string& raw, std::optional<std::string>& error) {
    try {
      const auto messages =
          swapped ? render_pairwise(tmpl, task, r_b, r_a)
                  : render_pairwise(tmpl, task, r_a, r_b);
      JudgeVerdict v = gw.invoke(ep, messages);
      v.parsed = parse_pairwise(v.raw_text);
      raw = v.raw_text;
      if (auto slot = preference_of(v.parsed)) {
        // Map slot label back to argument identity.
        const bool picked_first = (*slot == PairwiseChoice::A);
        verdict = (picked_first != swapped) ? PairwiseChoice::A
                                            : PairwiseChoice::B;
      }
    } catch (const Error& e) {
      error = e.what();
    }
  };
  run_order(false, out.plus, out.raw_plus, out.plus_error);
  run_order(true, out.minus, out.raw_minus, out.minus_error);
  return out;
}

}  // namespace robustjudge
