#include "ordprobe/mock_backend.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <numbers>
#include <set>
#include <unordered_set>

#include "ordprobe/error.hpp"
#include "ordprobe/rng.hpp"

namespace ordprobe {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\n' || c == '\t' || c == '\r';
}

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '\'' || u >= 0x80) {
      current.push_back(static_cast<char>(std::tolower(u)));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::size_t overlap(const std::vector<std::string>& text_words,
                    const std::unordered_set<std::string>& keywords) {
  std::size_t n = 0;
  for (const auto& w : text_words) n += keywords.count(w);
  return n;
}

std::unordered_set<std::string> keyword_set(const std::vector<std::string>& list) {
  std::unordered_set<std::string> out;
  for (const auto& k : list) {
    for (auto& w : words(k)) out.insert(std::move(w));
  }
  return out;
}

}  // namespace

std::vector<std::string> mock_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    while (i < text.size() && is_space(text[i])) ++i;
    while (i < text.size() && !is_space(text[i])) ++i;
    out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

MockBackend::MockBackend(MockConfig config) : config_(std::move(config)) {
  if (config_.context_window == 0) {
    throw Error(ErrorKind::config, "mock context_window must be > 0");
  }
  if (config_.sample_template) config_.sample_template->validate();
}

BackendInfo MockBackend::info() const {
  return BackendInfo{config_.model_id, config_.context_window};
}

std::vector<double> MockBackend::raw_scores(
    std::string_view context, std::span<const std::string> continuations) const {
  const std::string label_prefix =
      config_.sample_template ? config_.sample_template->label_prefix : "";

  // Demonstration labels in order of appearance.
  struct Demo {
    std::size_t pos;
    std::size_t end;
    std::size_t label;
  };
  std::vector<Demo> demos;
  for (std::size_t v = 0; v < continuations.size(); ++v) {
    const std::string marker = label_prefix + continuations[v];
    for (auto p = context.find(marker); p != std::string_view::npos;
         p = context.find(marker, p + 1)) {
      demos.push_back(Demo{p, p + marker.size(), v});
    }
  }
  std::sort(demos.begin(), demos.end(),
            [](const Demo& a, const Demo& b) { return a.pos < b.pos; });
  std::size_t split = 0;
  for (const auto& d : demos) split = std::max(split, d.end);

  const auto query_words = words(context.substr(split));
  const auto demo_words = words(context.substr(0, split));
  const std::uint64_t context_hash = fnv1a64(context);

  std::vector<double> raw(continuations.size(), 0.0);
  for (std::size_t v = 0; v < continuations.size(); ++v) {
    if (v < config_.keywords.size()) {
      const auto keys = keyword_set(config_.keywords[v]);
      raw[v] += config_.keyword_weight * static_cast<double>(overlap(query_words, keys));
      raw[v] += config_.context_keyword_weight *
                static_cast<double>(overlap(demo_words, keys));
    }
    const std::uint64_t h =
        splitmix64(context_hash ^ derive_seed(config_.seed, "label_noise", v));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    raw[v] += config_.noise * (2.0 * u - 1.0);
  }
  double weight = 1.0;
  for (auto it = demos.rbegin(); it != demos.rend(); ++it) {
    raw[it->label] += config_.recency_bias * weight;
    weight *= config_.recency_decay;
  }
  return raw;
}

LabelQueryResult MockBackend::label_distribution(
    std::string_view context, std::span<const std::string> continuations) {
  if (continuations.empty()) {
    throw Error(ErrorKind::config, "label_distribution needs continuations");
  }
  std::size_t longest = 0;
  for (const auto& c : continuations) {
    longest = std::max(longest, mock_tokenize(c).size());
  }
  const std::size_t needed = mock_tokenize(context).size() + longest;
  if (needed > config_.context_window) {
    throw Error(ErrorKind::context_overflow,
                "prompt needs " + std::to_string(needed) + " tokens, window is " +
                    std::to_string(config_.context_window));
  }

  const auto raw = raw_scores(context, continuations);
  const double peak = *std::max_element(raw.begin(), raw.end());
  double total = 0.0;
  for (double r : raw) total += std::exp(r - peak);
  const double log_z = peak + std::log(total) + std::numbers::ln2;
  std::vector<double> scores(raw.size());
  for (std::size_t v = 0; v < raw.size(); ++v) scores[v] = raw[v] - log_z;
  return make_label_result(std::move(scores));
}

Generation MockBackend::generate(std::string_view context,
                                 const GenParams& params) {
  params.validate();
  const std::size_t context_tokens = mock_tokenize(context).size();
  if (context_tokens + params.max_new_tokens > config_.context_window) {
    throw Error(ErrorKind::context_overflow,
                "generation context of " + std::to_string(context_tokens) +
                    " tokens leaves no room for " +
                    std::to_string(params.max_new_tokens) + " new tokens");
  }

  std::uint64_t seed = fnv1a64(context);
  seed = splitmix64(seed ^ std::bit_cast<std::uint64_t>(params.temperature));
  seed = splitmix64(seed ^ derive_seed(config_.seed, "generate",
                                       params.seed.value_or(0)));
  Rng rng(seed);

  std::string raw;
  if (config_.sample_template && !config_.corpus.empty()) {
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < config_.samples_per_generation; ++i) {
      const auto& x = config_.corpus[rng.below(config_.corpus.size())];
      parts.push_back(linearize(x, true, *config_.sample_template));
    }
    raw = concat(parts, *config_.sample_template);
  }
  raw += config_.trailing_text;

  std::size_t longest_stop = 0;
  for (const auto& s : params.stop_sequences) longest_stop = std::max(longest_stop, s.size());

  Generation out;
  std::vector<std::string> emitted;
  std::set<std::vector<std::string>> ngrams;
  const std::size_t n = params.block_ngram;
  for (auto& token : mock_tokenize(raw)) {
    if (out.tokens == params.max_new_tokens) break;
    if (n > 0 && emitted.size() + 1 >= n) {
      std::vector<std::string> gram(emitted.end() - static_cast<long>(n - 1),
                                    emitted.end());
      gram.push_back(token);
      if (!ngrams.insert(std::move(gram)).second) break;
    }
    const std::size_t scan_from =
        out.text.size() >= longest_stop ? out.text.size() - longest_stop + 1 : 0;
    out.text += token;
    emitted.push_back(std::move(token));
    ++out.tokens;

    std::size_t cut = std::string::npos;
    for (const auto& s : params.stop_sequences) {
      if (s.empty()) continue;
      cut = std::min(cut, out.text.find(s, scan_from));
    }
    if (cut != std::string::npos) {
      out.text.resize(cut);
      break;
    }
  }
  return out;
}

}  // namespace ordprobe
