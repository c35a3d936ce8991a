#pragma once

#include <stdexcept>
#include <string>

namespace robustjudge {

// Base for everything thrown by the harness. Catch sites that want to keep a
// campaign alive catch this and record the cell as failed.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define ROBUSTJUDGE_DEFINE_ERROR(Name)                       \
  class Name : public Error {                                \
   public:                                                   \
    explicit Name(const std::string& what) : Error(what) {}  \
  }

// dataset / record validation
ROBUSTJUDGE_DEFINE_ERROR(SchemaError);        // missing or mistyped field
ROBUSTJUDGE_DEFINE_ERROR(CategoryMismatch);   // task id disagrees with category
ROBUSTJUDGE_DEFINE_ERROR(EmptyFieldError);    // required field present but empty
ROBUSTJUDGE_DEFINE_ERROR(SampleTooLarge);     // requested more records than exist
ROBUSTJUDGE_DEFINE_ERROR(IoError);            // unreadable file, bad path

// prompts / templates
ROBUSTJUDGE_DEFINE_ERROR(MissingTemplate);    // unknown template name
ROBUSTJUDGE_DEFINE_ERROR(MissingPlaceholder); // template lacks a required slot
ROBUSTJUDGE_DEFINE_ERROR(UnknownVariant);     // variant id not in component library

// wire
ROBUSTJUDGE_DEFINE_ERROR(TransportError);     // connect/timeout/5xx after retries
ROBUSTJUDGE_DEFINE_ERROR(RateLimited);        // 429 after retries
ROBUSTJUDGE_DEFINE_ERROR(AuthError);          // 401/403, no retry
ROBUSTJUDGE_DEFINE_ERROR(ProviderError);      // scorer service returned garbage

// configuration / parameters
ROBUSTJUDGE_DEFINE_ERROR(BadParams);          // attack/defense params out of range
ROBUSTJUDGE_DEFINE_ERROR(ConfigError);        // campaign config invalid
ROBUSTJUDGE_DEFINE_ERROR(CapExceeded);        // search space larger than the cap
ROBUSTJUDGE_DEFINE_ERROR(UnsupportedLanguage);

#undef ROBUSTJUDGE_DEFINE_ERROR

}  // namespace robustjudge
