#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "ordprobe/openai_backend.hpp"

#include <cmath>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ordprobe/error.hpp"

namespace ordprobe {
namespace {

using json = nlohmann::json;

[[noreturn]] void bad_response(const std::string& what) {
  throw BackendError("malformed completions response: " + what, false, 1);
}

}  // namespace

namespace wire {

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) n += (c & 0xC0) != 0x80;
  return n;
}

std::string scoring_request(std::string_view model, std::string_view context,
                            std::span<const std::string> continuations) {
  json j;
  j["model"] = model;
  j["prompt"] = json::array();
  for (const auto& c : continuations) {
    j["prompt"].push_back(std::string(context) + c);
  }
  j["max_tokens"] = 1;
  j["temperature"] = 0.0;
  j["echo"] = true;
  j["logprobs"] = 1;
  return j.dump();
}

namespace {

std::vector<double> parse_scoring_json(
    std::string_view body, std::string_view context,
    std::span<const std::string> continuations) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    bad_response(e.what());
  }
  if (!j.contains("choices") || !j["choices"].is_array()) {
    bad_response("missing 'choices'");
  }
  const auto& choices = j["choices"];
  if (choices.size() != continuations.size()) {
    bad_response("expected " + std::to_string(continuations.size()) +
                 " choices, got " + std::to_string(choices.size()));
  }

  const std::size_t context_chars = utf8_length(context);
  std::vector<double> scores(continuations.size(), 0.0);
  std::vector<bool> seen(continuations.size(), false);
  for (std::size_t c = 0; c < choices.size(); ++c) {
    const auto& choice = choices[c];
    const std::size_t index = choice.value("index", c);
    if (index >= continuations.size() || seen[index]) {
      bad_response("bad choice index " + std::to_string(index));
    }
    seen[index] = true;
    if (!choice.contains("logprobs") || !choice["logprobs"].is_object()) {
      bad_response("choice lacks 'logprobs'");
    }
    const auto& lp = choice["logprobs"];
    const auto& tokens = lp.at("tokens");
    const auto& logprobs = lp.at("token_logprobs");
    const auto& offsets = lp.at("text_offset");
    if (tokens.size() != logprobs.size() || tokens.size() != offsets.size()) {
      bad_response("logprobs arrays differ in length");
    }
    const std::size_t end_chars =
        context_chars + utf8_length(continuations[index]);
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      const auto begin = offsets[t].get<std::size_t>();
      const auto end = begin + utf8_length(tokens[t].get<std::string>());
      // Tokens overlapping [context_chars, end_chars) belong to the label.
      if (begin >= end_chars || end <= context_chars) continue;
      if (logprobs[t].is_null()) bad_response("null logprob inside continuation");
      total += logprobs[t].get<double>();
      ++counted;
    }
    if (counted == 0) bad_response("no tokens cover the continuation");
    scores[index] = total;
  }
  return scores;
}

}  // namespace

std::vector<double> parse_scoring_response(
    std::string_view body, std::string_view context,
    std::span<const std::string> continuations) {
  try {
    return parse_scoring_json(body, context, continuations);
  } catch (const json::exception& e) {
    bad_response(e.what());
  }
}

std::string generation_request(std::string_view model, std::string_view context,
                               const GenParams& params,
                               std::string_view ngram_block_field) {
  json j;
  j["model"] = model;
  j["prompt"] = context;
  j["max_tokens"] = params.max_new_tokens;
  j["temperature"] = params.temperature;
  if (!params.stop_sequences.empty()) j["stop"] = params.stop_sequences;
  if (params.seed) j["seed"] = *params.seed;
  if (params.block_ngram > 0 && !ngram_block_field.empty()) {
    j[std::string(ngram_block_field)] = params.block_ngram;
  }
  return j.dump();
}

Generation parse_generation_response(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    bad_response(e.what());
  }
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    bad_response("missing 'choices'");
  }
  const auto& choice = j["choices"][0];
  if (!choice.contains("text") || !choice["text"].is_string()) {
    bad_response("choice lacks 'text'");
  }
  Generation g;
  g.text = choice["text"].get<std::string>();
  const auto usage = j.find("usage");
  if (usage != j.end() && usage->is_object() &&
      usage->contains("completion_tokens") &&
      (*usage)["completion_tokens"].is_number_unsigned()) {
    g.tokens = (*usage)["completion_tokens"].get<std::size_t>();
  }
  return g;
}

}  // namespace wire

OpenAICompletionsBackend::OpenAICompletionsBackend(OpenAIConfig config)
    : config_(std::move(config)) {
  const auto scheme = config_.base_url.find("://");
  if (scheme == std::string::npos) {
    throw Error(ErrorKind::config, "endpoint '" + config_.base_url +
                                       "' must start with http:// or https://");
  }
  const auto slash = config_.base_url.find('/', scheme + 3);
  host_ = config_.base_url.substr(0, slash);
  path_ = slash == std::string::npos ? "" : config_.base_url.substr(slash);
  while (!path_.empty() && path_.back() == '/') path_.pop_back();
  path_ += "/completions";
  if (config_.model.empty()) {
    throw Error(ErrorKind::config, "openai backend needs a model name");
  }
  if (config_.context_window == 0 || !(config_.chars_per_token > 0.0) ||
      config_.max_attempts < 1) {
    throw Error(ErrorKind::config, "invalid openai backend limits");
  }
}

BackendInfo OpenAICompletionsBackend::info() const {
  return BackendInfo{config_.model, config_.context_window};
}

std::size_t OpenAICompletionsBackend::estimate_tokens(std::string_view text) const {
  return static_cast<std::size_t>(std::ceil(
      static_cast<double>(wire::utf8_length(text)) / config_.chars_per_token));
}

std::string OpenAICompletionsBackend::post(const std::string& body) {
  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }
  std::string last_error;
  auto backoff = config_.initial_backoff;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    httplib::Client client(host_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    ++requests_;
    auto res = client.Post(path_, headers, body, "application/json");
    if (res && res->status >= 200 && res->status < 300) return res->body;
    if (res && res->status >= 400 && res->status < 500) {
      throw BackendError("HTTP " + std::to_string(res->status) + " from " +
                             host_ + path_ + ": " + res->body.substr(0, 500),
                         false, attempt);
    }
    last_error = res ? "HTTP " + std::to_string(res->status)
                     : httplib::to_string(res.error());
    if (attempt < config_.max_attempts) {
      spdlog::warn("request to {} failed ({}), retry {}/{}", host_ + path_,
                   last_error, attempt, config_.max_attempts - 1);
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw BackendError("request to " + host_ + path_ + " failed after " +
                         std::to_string(config_.max_attempts) +
                         " attempts: " + last_error,
                     true, config_.max_attempts);
}

LabelQueryResult OpenAICompletionsBackend::label_distribution(
    std::string_view context, std::span<const std::string> continuations) {
  if (continuations.empty()) {
    throw Error(ErrorKind::config, "label_distribution needs continuations");
  }
  std::size_t longest = 0;
  for (const auto& c : continuations) longest = std::max(longest, estimate_tokens(c));
  const auto needed = estimate_tokens(context) + longest;
  if (needed > config_.context_window) {
    throw Error(ErrorKind::context_overflow,
                "prompt needs ~" + std::to_string(needed) + " tokens, window is " +
                    std::to_string(config_.context_window));
  }
  const auto body = post(wire::scoring_request(config_.model, context, continuations));
  return make_label_result(wire::parse_scoring_response(body, context, continuations));
}

Generation OpenAICompletionsBackend::generate(std::string_view context,
                                              const GenParams& params) {
  params.validate();
  const auto needed = estimate_tokens(context) + params.max_new_tokens;
  if (needed > config_.context_window) {
    throw Error(ErrorKind::context_overflow,
                "generation needs ~" + std::to_string(needed) +
                    " tokens, window is " + std::to_string(config_.context_window));
  }
  const auto body = post(wire::generation_request(config_.model, context, params,
                                                  config_.ngram_block_field));
  return wire::parse_generation_response(body);
}

}  // namespace ordprobe
