#include "ordprobe/cache.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "ordprobe/error.hpp"

namespace ordprobe {
namespace {

using json = nlohmann::json;

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(),
                 nullptr) != 1) {
    throw Error(ErrorKind::io, "SHA-256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

CachingBackend::CachingBackend(std::shared_ptr<LanguageModel> inner,
                               BackendInfo info, std::filesystem::path dir,
                               CacheMode mode)
    : inner_(std::move(inner)), info_(std::move(info)), dir_(std::move(dir)), mode_(mode) {
  if (mode_ == CacheMode::record) {
    if (!inner_) throw Error(ErrorKind::config, "record mode needs a backend");
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) {
      throw Error(ErrorKind::io,
                  "cannot create cache dir '" + dir_.string() + "': " + ec.message());
    }
  } else if (!std::filesystem::is_directory(dir_)) {
    throw Error(ErrorKind::fixture_incomplete,
                "fixture incomplete: replay cache '" + dir_.string() +
                    "' does not exist");
  }
}

std::string CachingBackend::label_request(
    std::string_view model_id, std::string_view context,
    std::span<const std::string> continuations) {
  json j;
  j["op"] = "label_distribution";
  j["model_id"] = model_id;
  j["context"] = context;
  j["continuations"] = json::array();
  for (const auto& c : continuations) j["continuations"].push_back(c);
  return j.dump();
}

std::string CachingBackend::generation_request(std::string_view model_id,
                                               std::string_view context,
                                               const GenParams& params) {
  json j;
  j["op"] = "generate";
  j["model_id"] = model_id;
  j["context"] = context;
  j["temperature"] = params.temperature;
  j["max_new_tokens"] = params.max_new_tokens;
  j["block_ngram"] = params.block_ngram;
  j["stop_sequences"] = params.stop_sequences;
  j["seed"] = params.seed ? json(*params.seed) : json(nullptr);
  return j.dump();
}

std::optional<std::string> CachingBackend::load(const std::string& key,
                                                const std::string& request) {
  const auto path = dir_ / (key + ".json");
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    const auto entry = json::parse(buffer.str());
    if (entry.at("request").dump() != request) {
      throw std::runtime_error("request does not match key");
    }
    return entry.at("response").dump();
  } catch (const std::exception& e) {
    ++corrupt_;
    spdlog::warn("ignoring corrupt cache entry {}: {}", path.string(), e.what());
    return std::nullopt;
  }
}

void CachingBackend::store(const std::string& key, const std::string& request,
                           const std::string& response) {
  json entry;
  entry["request"] = json::parse(request);
  entry["response"] = json::parse(response);
  entry["model_id"] = info_.model_id;
  entry["timestamp"] = utc_timestamp();

  const auto final_path = dir_ / (key + ".json");
  const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
  const auto tmp_path =
      dir_ / (".tmp-" + key + "-" + std::to_string(tid) + "-" +
              std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    out << entry.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::io, "cannot write " + tmp_path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp_path, final_path, ec);
  if (ec) {
    std::filesystem::remove(tmp_path, ec);
    throw Error(ErrorKind::io, "cannot install cache entry " + final_path.string());
  }
}

LanguageModel& CachingBackend::backend(const std::string& request) {
  if (mode_ == CacheMode::replay) {
    throw Error(ErrorKind::fixture_incomplete,
                "fixture incomplete: no cache entry for " + sha256_hex(request) +
                    " (" + request.substr(0, 120) + "...)");
  }
  ++backend_calls_;
  return *inner_;
}

LabelQueryResult CachingBackend::label_distribution(
    std::string_view context, std::span<const std::string> continuations) {
  const auto request = label_request(info_.model_id, context, continuations);
  const auto key = sha256_hex(request);
  if (auto hit = load(key, request)) {
    const auto j = json::parse(*hit);
    if (j.contains("scores") && j.contains("normalized") &&
        j["scores"].size() == continuations.size()) {
      ++hits_;
      return LabelQueryResult{j["scores"].get<std::vector<double>>(),
                              j["normalized"].get<std::vector<double>>()};
    }
    ++corrupt_;
    spdlog::warn("ignoring malformed cache response {}", key);
  }
  ++misses_;
  auto result = backend(request).label_distribution(context, continuations);
  json response;
  response["scores"] = result.scores;
  response["normalized"] = result.normalized;
  store(key, request, response.dump());
  return result;
}

Generation CachingBackend::generate(std::string_view context,
                                    const GenParams& params) {
  const auto request = generation_request(info_.model_id, context, params);
  const auto key = sha256_hex(request);
  if (auto hit = load(key, request)) {
    const auto j = json::parse(*hit);
    if (j.contains("text") && j["text"].is_string()) {
      ++hits_;
      return Generation{j["text"].get<std::string>(), j.value("tokens", std::size_t{0})};
    }
    ++corrupt_;
    spdlog::warn("ignoring malformed cache response {}", key);
  }
  ++misses_;
  auto result = backend(request).generate(context, params);
  json response;
  response["text"] = result.text;
  response["tokens"] = result.tokens;
  store(key, request, response.dump());
  return result;
}

CachingBackend::Stats CachingBackend::stats() const {
  return Stats{hits_.load(), misses_.load(), backend_calls_.load(), corrupt_.load()};
}

}  // namespace ordprobe
