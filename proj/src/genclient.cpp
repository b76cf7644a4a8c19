#include "provdet/genclient.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <istream>
#include <mutex>
#include <regex>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "provdet/lexer.hpp"
#include "provdet/structure.hpp"

namespace provdet {

using nlohmann::json;

std::string_view to_string(GenStatus status) {
  switch (status) {
    case GenStatus::Success: return "success";
    case GenStatus::EmptyOrIncomplete: return "empty_or_incomplete";
    case GenStatus::Fail: return "fail";
  }
  return "fail";
}

std::optional<GenStatus> parse_gen_status(std::string_view s) {
  if (s == "success") return GenStatus::Success;
  if (s == "empty_or_incomplete") return GenStatus::EmptyOrIncomplete;
  if (s == "fail") return GenStatus::Fail;
  return std::nullopt;
}

// ---- Prompts ----------------------------------------------------------------------

std::string build_generation_prompt(std::string_view docstring, Language language) {
  if (docstring.empty()) throw ValidationError("generation prompt: empty docstring");
  std::string out =
      "I want you to act as a software developer. I will provide you with some requirements "
      "about a function, and it will be your job to implement the function in ";
  out += language == Language::Python ? "Python" : "Java";
  out += ". Do not write explanations, just reply with the code. My request is: implement a "
         "function according to the following requirements: the function description is ";
  out += docstring;
  return out;
}

std::string build_signature_prompt(std::string_view docstring, std::string_view signature) {
  if (docstring.empty()) throw ValidationError("signature prompt: empty docstring");
  if (signature.empty()) throw ValidationError("signature prompt: empty signature");
  std::string out = "Here is a function signature and its description.\nFunction description: ";
  out += docstring;
  out += "\nFunction signature: ";
  out += signature;
  out += "\nPlease generate the complete function implementation in Java. Do not write "
         "explanations, just output the code.";
  return out;
}

// ---- Post-processing ---------------------------------------------------------------

namespace {

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

std::string trim_copy(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

bool is_fence(const std::string& line) { return trim_copy(line).rfind("```", 0) == 0; }

// Drops leading blank lines and all trailing whitespace.
std::string tidy(const std::vector<std::string>& lines, std::size_t lo, std::size_t hi) {
  while (lo < hi && trim_copy(lines[lo]).empty()) ++lo;
  std::string out;
  for (std::size_t i = lo; i < hi; ++i) {
    if (i > lo) out += '\n';
    out += lines[i];
  }
  const auto end = out.find_last_not_of(" \t\r\n");
  out.erase(end == std::string::npos ? 0 : end + 1);
  return out;
}

bool python_def_line(const std::vector<Token>& t) {
  std::size_t i = 0;
  if (i < t.size() && t[i].text == "async") ++i;
  return i + 2 < t.size() && t[i].text == "def" && t[i + 1].kind == TokenKind::Identifier &&
         t[i + 2].text == "(";
}

bool java_def_line(const std::vector<Token>& t) {
  static const std::vector<std::string> kControl = {"if", "for", "while", "switch", "catch",
                                                    "return", "new", "else", "do", "try", "throw"};
  if (t.empty() || t.back().text == ";") return false;
  if (std::find(kControl.begin(), kControl.end(), t.front().text) != kControl.end()) return false;
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    if (t[i].kind == TokenKind::Identifier && t[i + 1].text == "(") {
      const Token& prev = t[i - 1];
      const bool type_like = prev.kind == TokenKind::Identifier || prev.kind == TokenKind::Keyword ||
                             prev.text == ">" || prev.text == ">>" || prev.text == "]";
      return type_like && prev.text != "new" && prev.text != "return";
    }
    if (t[i].text == "=" || t[i].text == "(") return false;
  }
  return false;
}

std::vector<Token> code_tokens(std::string_view text, Language lang) {
  std::vector<Token> out;
  for (auto& t : lex(text, lang)) {
    if (t.is_code()) out.push_back(std::move(t));
  }
  return out;
}

bool is_definition_line(const std::string& line, std::optional<Language> lang) {
  const auto check = [&](Language l) {
    try {
      const auto toks = code_tokens(line, l);
      return l == Language::Python ? python_def_line(toks) : java_def_line(toks);
    } catch (const ParseError&) {
      return false;
    }
  };
  if (lang) return check(*lang);
  return check(Language::Python) || check(Language::Java);
}

bool matches_any(const std::string& line, const std::vector<std::regex>& patterns) {
  const std::string t = trim_copy(line);
  return std::any_of(patterns.begin(), patterns.end(),
                     [&](const std::regex& re) { return std::regex_match(t, re); });
}

std::vector<std::regex> compile(const std::vector<std::string>& patterns) {
  std::vector<std::regex> out;
  for (const auto& p : patterns) {
    out.emplace_back(p, std::regex::ECMAScript | std::regex::icase);
  }
  return out;
}

std::optional<FunctionShape> shape_of(const std::string& code, std::optional<Language> lang) {
  const auto attempt = [&](Language l) -> std::optional<FunctionShape> {
    try {
      return find_function(lex(code, l), l);
    } catch (const ParseError&) {
      return std::nullopt;
    }
  };
  if (lang) return attempt(*lang);
  if (auto s = attempt(Language::Python)) return s;
  return attempt(Language::Java);
}

bool is_stub(std::vector<std::string> stmt) {
  std::erase(stmt, ";");
  if (stmt.empty()) return true;
  const std::string& head = stmt.front();
  if (stmt.size() == 1) return head == "pass" || head == "..." || head == "return";
  if (head == "return" && stmt.size() == 2) return stmt[1] == "None" || stmt[1] == "null";
  if (head == "raise") return stmt[1] == "NotImplementedError";
  if (head == "throw" && stmt.size() >= 3 && stmt[1] == "new") {
    return stmt[2] == "UnsupportedOperationException";
  }
  return false;
}

bool contains_phrase(const std::string& text, const std::vector<std::string>& phrases) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  const auto word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  for (const auto& p : phrases) {
    std::size_t pos = 0;
    while ((pos = lower.find(p, pos)) != std::string::npos) {
      const std::size_t end = pos + p.size();
      if ((pos == 0 || !word(lower[pos - 1])) && (end >= lower.size() || !word(lower[end]))) return true;
      pos = end;
    }
  }
  return false;
}

// Placeholder phrases count only inside comments, as seen by each candidate
// lexer. Text that no lexer accepts is searched whole.
bool has_placeholder(const std::string& code, std::optional<Language> lang,
                     const std::vector<std::string>& phrases) {
  std::string comments;
  bool lexed = false;
  for (const Language l : {Language::Python, Language::Java}) {
    if (lang && *lang != l) continue;
    try {
      for (const auto& t : lex(code, l)) {
        if (t.kind == TokenKind::Comment) comments += t.text + "\n";
      }
      lexed = true;
    } catch (const ParseError&) {
    }
  }
  return contains_phrase(lexed ? comments : code, phrases);
}

}  // namespace

Postprocessed postprocess_response(std::string_view raw, std::optional<Language> language,
                                   const PostprocessConfig& config) {
  const auto lines = split_lines(raw);
  Postprocessed out;

  // Fenced blocks: an opening fence (optionally tagged) up to the next fence
  // or the end of the text.
  std::optional<std::string> best;
  bool any_fence = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!is_fence(lines[i])) continue;
    any_fence = true;
    std::size_t j = i + 1;
    while (j < lines.size() && !is_fence(lines[j])) ++j;
    std::string block = tidy(lines, i + 1, j);
    if (!best || block.size() > best->size()) best = std::move(block);
    i = j;
  }

  if (!any_fence) {
    const auto lead = compile(config.leading_patterns);
    const auto trail = compile(config.trailing_patterns);
    std::size_t lo = 0, hi = lines.size();
    while (lo < hi && (trim_copy(lines[lo]).empty() || matches_any(lines[lo], lead))) ++lo;
    while (hi > lo && (trim_copy(lines[hi - 1]).empty() || matches_any(lines[hi - 1], trail))) --hi;
    const bool has_def = std::any_of(lines.begin() + static_cast<std::ptrdiff_t>(lo),
                                     lines.begin() + static_cast<std::ptrdiff_t>(hi),
                                     [&](const std::string& l) { return is_definition_line(l, language); });
    if (!has_def) return out;
    best = tidy(lines, lo, hi);
  }

  out.code = *best;
  const auto shape = shape_of(*best, language);
  const bool stub_only =
      shape && std::all_of(shape->statements.begin(), shape->statements.end(),
                           [](const auto& s) { return is_stub(s); });
  if (best->empty() || !shape || !shape->has_body || stub_only ||
      has_placeholder(*best, language, config.placeholder_phrases)) {
    out.status = GenStatus::EmptyOrIncomplete;
  } else {
    out.status = GenStatus::Success;
  }
  return out;
}

// ---- Transport ----------------------------------------------------------------------

namespace {

class HttpTransport final : public Transport {
 public:
  HttpTransport(const EndpointConfig& config, std::string api_key)
      : base_url_(config.base_url), path_(config.path), api_key_(std::move(api_key)),
        timeout_(config.timeout) {}

  HttpReply post_json(const std::string& body) override {
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    HttpReply reply;
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      reply.error = httplib::to_string(res.error());
      return reply;
    }
    reply.status = res->status;
    reply.body = res->body;
    if (res->has_header("Retry-After")) {
      try {
        reply.retry_after_seconds = std::stod(res->get_header_value("Retry-After"));
      } catch (const std::exception&) {
      }
    }
    return reply;
  }

 private:
  std::string base_url_;
  std::string path_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

// Spaces request starts at least 1/rate apart across all workers.
class RateLimiter {
 public:
  explicit RateLimiter(double per_second)
      : interval_(per_second > 0 ? std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                       std::chrono::duration<double>(1.0 / per_second))
                                 : std::chrono::steady_clock::duration::zero()) {}

  void acquire() {
    if (interval_ == std::chrono::steady_clock::duration::zero()) return;
    std::chrono::steady_clock::time_point slot;
    {
      std::lock_guard lock(mu_);
      const auto now = std::chrono::steady_clock::now();
      slot = std::max(now, next_);
      next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
  }

 private:
  std::chrono::steady_clock::duration interval_;
  std::mutex mu_;
  std::chrono::steady_clock::time_point next_{};
};

bool retryable(const HttpReply& r) {
  return r.status == 0 || r.status == 408 || r.status == 429 || r.status >= 500;
}

std::string describe(const HttpReply& r) {
  if (r.status == 0) return "connection failed: " + r.error;
  std::string body = r.body.substr(0, 200);
  return "HTTP " + std::to_string(r.status) + (body.empty() ? "" : ": " + body);
}

void finish(GenerationOutcome& o, std::optional<Language> lang, const PostprocessConfig& post) {
  const auto p = postprocess_response(o.raw_response, lang, post);
  o.extracted_code = p.code;
  o.status = p.status;
}

}  // namespace

std::unique_ptr<Transport> make_http_transport(const EndpointConfig& config, std::string api_key) {
  return std::make_unique<HttpTransport>(config, std::move(api_key));
}

std::string api_key_from_env(const EndpointConfig& config) {
  const char* v = std::getenv(config.api_key_env.c_str());
  if (v == nullptr || *v == '\0') {
    throw ValidationError("environment variable " + config.api_key_env + " is not set");
  }
  return v;
}

std::string chat_request_body(const GenerationRequest& request, const EndpointConfig& config) {
  nlohmann::ordered_json body;
  body["model"] = config.model;
  body["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", request.prompt}}});
  if (config.temperature) body["temperature"] = *config.temperature;
  if (config.max_tokens) body["max_tokens"] = *config.max_tokens;
  return body.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string chat_response_content(std::string_view body) {
  try {
    const auto j = json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string() : content.get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed chat completion response: ") + e.what());
  }
}

std::vector<GenerationOutcome> generate_batch(std::span<const GenerationRequest> requests,
                                              const EndpointConfig& config, Transport& transport,
                                              const PostprocessConfig& post) {
  std::vector<GenerationOutcome> outcomes(requests.size());
  RateLimiter limiter(config.requests_per_second);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr auth_failure;
  std::mutex auth_mu;

  const auto run_one = [&](std::size_t idx) {
    const auto& req = requests[idx];
    auto& out = outcomes[idx];
    out.record_id = req.record_id;
    const std::string body = chat_request_body(req, config);
    auto backoff = std::chrono::duration<double, std::milli>(config.initial_backoff);
    for (std::size_t attempt = 0;; ++attempt) {
      if (abort) return;
      limiter.acquire();
      ++out.attempts;
      const HttpReply reply = transport.post_json(body);
      if (reply.status == 401 || reply.status == 403) {
        throw AuthError("endpoint rejected the credentials (" + describe(reply) + ")");
      }
      if (reply.status >= 200 && reply.status < 300) {
        try {
          out.raw_response = chat_response_content(reply.body);
        } catch (const ParseError& e) {
          out.transport_error = e.what();
          out.status = GenStatus::Fail;
          return;
        }
        finish(out, req.language, post);
        return;
      }
      if (!retryable(reply) || attempt >= config.max_retries) {
        out.transport_error = describe(reply);
        if (retryable(reply)) *out.transport_error += " (retries exhausted)";
        out.status = GenStatus::Fail;
        return;
      }
      auto wait = std::min(backoff, std::chrono::duration<double, std::milli>(config.max_backoff));
      if (reply.retry_after_seconds) {
        wait = std::max(wait, std::chrono::duration<double, std::milli>(*reply.retry_after_seconds * 1000.0));
      }
      std::this_thread::sleep_for(wait);
      backoff *= config.backoff_multiplier;
    }
  };

  const auto worker = [&] {
    for (std::size_t idx; !abort && (idx = next.fetch_add(1)) < requests.size();) {
      try {
        run_one(idx);
      } catch (...) {
        std::lock_guard lock(auth_mu);
        if (!auth_failure) auth_failure = std::current_exception();
        abort = true;
      }
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(config.parallelism, 1, std::max<std::size_t>(1, requests.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (auth_failure) std::rethrow_exception(auth_failure);
  return outcomes;
}

std::map<std::string, std::string> load_fixture(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("fixture is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("fixture must be a JSON object of id -> response");
  std::map<std::string, std::string> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_string()) throw ParseError("fixture entry \"" + it.key() + "\" is not a string");
    out.emplace(it.key(), it.value().get<std::string>());
  }
  return out;
}

std::string java_signature(std::string_view code) {
  std::vector<Token> tokens;
  try {
    tokens = lex(code, Language::Java);
  } catch (const LexError&) {
    return {};
  }
  std::string out;
  for (const auto& t : tokens) {
    if (!t.is_code()) continue;
    if (t.text == "{") return out;
    const bool tight = t.text == "(" || t.text == ")" || t.text == "," || t.text == "." ||
                       t.text == "[" || t.text == "]" || t.text == "<" || t.text == ">";
    const char last = out.empty() ? ' ' : out.back();
    const bool glued = last == ' ' || last == '(' || last == '.' || last == '[' || last == '<' ||
                       last == '@';
    if (!tight && !glued) out += ' ';
    out += t.text;
    if (t.text == ",") out += ' ';
  }
  return {};
}

std::vector<GenerationOutcome> generate_offline(std::span<const GenerationRequest> requests,
                                                const std::map<std::string, std::string>& fixture,
                                                const PostprocessConfig& post) {
  std::vector<GenerationOutcome> out;
  out.reserve(requests.size());
  for (const auto& req : requests) {
    GenerationOutcome o;
    o.record_id = req.record_id;
    const auto it = fixture.find(req.record_id);
    if (it == fixture.end()) {
      o.transport_error = "no fixture response";
      o.status = GenStatus::Fail;
    } else {
      o.attempts = 1;
      o.raw_response = it->second;
      finish(o, req.language, post);
    }
    out.push_back(std::move(o));
  }
  return out;
}

std::string outcome_to_json_line(const GenerationOutcome& o) {
  nlohmann::ordered_json j;
  j["id"] = o.record_id;
  j["status"] = std::string(to_string(o.status));
  j["code"] = o.extracted_code ? nlohmann::ordered_json(*o.extracted_code) : nlohmann::ordered_json(nullptr);
  j["raw"] = o.raw_response;
  if (o.transport_error) j["transport_error"] = *o.transport_error;
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::vector<GenerationOutcome> read_outcomes(std::istream& in) {
  std::vector<GenerationOutcome> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(text);
      GenerationOutcome o;
      o.record_id = j.at("id").get<std::string>();
      const auto st = parse_gen_status(j.at("status").get<std::string>());
      if (!st) throw ParseError("unknown status", line);
      o.status = *st;
      if (j.contains("code") && !j["code"].is_null()) o.extracted_code = j["code"].get<std::string>();
      o.raw_response = j.value("raw", std::string());
      if (j.contains("transport_error")) o.transport_error = j["transport_error"].get<std::string>();
      out.push_back(std::move(o));
    } catch (const json::exception& e) {
      throw ParseError("outcomes line " + std::to_string(line) + ": " + e.what(), line);
    } catch (const ParseError& e) {
      throw ParseError("outcomes line " + std::to_string(line) + ": " + e.what(), line);
    }
  }
  return out;
}

}  // namespace provdet
