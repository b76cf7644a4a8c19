#pragma once

#include <chrono>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "provdet/common.hpp"

namespace provdet {

enum class GenStatus { Success, EmptyOrIncomplete, Fail };

std::string_view to_string(GenStatus status);
std::optional<GenStatus> parse_gen_status(std::string_view s);

// ---- Prompts ----------------------------------------------------------------------

// Throws ValidationError on an empty docstring.
std::string build_generation_prompt(std::string_view docstring, Language language);
// Throws ValidationError on an empty docstring or signature.
std::string build_signature_prompt(std::string_view docstring, std::string_view signature);

// Java declaration text up to the body's opening brace, whitespace collapsed.
// Empty when the code does not lex or has no brace.
std::string java_signature(std::string_view code);

// ---- Post-processing ---------------------------------------------------------------

struct PostprocessConfig {
  // ECMAScript regexes, matched case-insensitively against whole trimmed
  // lines outside code fences. Leading patterns strip lines before the code,
  // trailing patterns strip lines after it.
  std::vector<std::string> leading_patterns = {
      R"(^here('s| is) (the|an?|my) (implementation|code|function|solution)\b.*)",
      R"(^(sure|certainly|of course)\b.*)",
      R"(^below is\b.*)",
  };
  std::vector<std::string> trailing_patterns = {
      R"(^(this|the above) (function|code|implementation|method)\b.*)",
      R"(^note( that)?\b.*)",
      R"(^example usage\b.*)",
      R"(^you can (use|call|test)\b.*)",
      R"(^in this (function|code|implementation)\b.*)",
  };
  // Lower-case phrases that mark a skeleton implementation.
  std::vector<std::string> placeholder_phrases = {
      "replace with your implementation", "your implementation here", "your code here",
      "implement this", "implementation goes here", "todo"};
};

struct Postprocessed {
  std::optional<std::string> code;
  GenStatus status = GenStatus::Fail;
};

// Total. Extracts the longest fenced block, or else the text left after
// declarative-line removal when it contains a function definition line.
// Fail: no fence and no definition line (code absent).
// EmptyOrIncomplete: no function found in the code, an empty or stub-only
// body, or a placeholder comment.
// `language` selects the definition syntax; when absent both are tried.
Postprocessed postprocess_response(std::string_view raw, std::optional<Language> language = std::nullopt,
                                   const PostprocessConfig& config = {});

// ---- Transport ----------------------------------------------------------------------

struct EndpointConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-3.5-turbo";
  std::optional<double> temperature;  // provider default when unset
  std::optional<int> max_tokens;
  std::string api_key_env = "OPENAI_API_KEY";
  std::size_t max_retries = 5;
  std::chrono::milliseconds initial_backoff{1000};
  double backoff_multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30000};
  double requests_per_second = 1.0;  // 0 disables rate limiting
  std::size_t parallelism = 1;
  std::chrono::seconds timeout{120};
};

struct HttpReply {
  int status = 0;  // 0: connection-level failure
  std::string body;
  std::string error;
  std::optional<double> retry_after_seconds;
};

class Transport {
 public:
  virtual ~Transport() = default;
  // Must be safe to call from several threads at once.
  virtual HttpReply post_json(const std::string& body) = 0;
};

// cpp-httplib client against config.base_url + config.path with a bearer token.
std::unique_ptr<Transport> make_http_transport(const EndpointConfig& config, std::string api_key);

// Reads the key from the environment variable named in the config.
// Throws ValidationError if it is unset or empty.
std::string api_key_from_env(const EndpointConfig& config);

// 401 and 403 abort the whole batch.
class AuthError : public Error {
 public:
  using Error::Error;
};

// ---- Generation -------------------------------------------------------------------

struct GenerationRequest {
  std::string record_id;
  std::string prompt;
  std::optional<Language> language;
};

struct GenerationOutcome {
  std::string record_id;
  std::string raw_response;
  std::optional<std::string> extracted_code;
  GenStatus status = GenStatus::Fail;
  // Set when no model answer was obtained (retries exhausted, HTTP error,
  // malformed reply, missing fixture entry); status is then Fail.
  std::optional<std::string> transport_error;
  std::size_t attempts = 0;
};

std::string chat_request_body(const GenerationRequest& request, const EndpointConfig& config);
// Extracts choices[0].message.content. Throws ParseError.
std::string chat_response_content(std::string_view body);

// One outcome per request, in request order. Retries connection failures,
// 408, 429 and 5xx with exponential backoff (Retry-After honoured when
// longer); other HTTP errors fail the request; 401/403 throw AuthError.
std::vector<GenerationOutcome> generate_batch(std::span<const GenerationRequest> requests,
                                              const EndpointConfig& config, Transport& transport,
                                              const PostprocessConfig& post = {});

// Canned responses keyed by record id; JSON object {"id": "response", ...}.
std::map<std::string, std::string> load_fixture(std::istream& in);
std::vector<GenerationOutcome> generate_offline(std::span<const GenerationRequest> requests,
                                                const std::map<std::string, std::string>& fixture,
                                                const PostprocessConfig& post = {});

// JSONL {"id", "status", "code", "raw"} plus "transport_error" when set.
std::string outcome_to_json_line(const GenerationOutcome& outcome);
std::vector<GenerationOutcome> read_outcomes(std::istream& in);

}  // namespace provdet
