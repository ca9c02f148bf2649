#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ordprobe/backend.hpp"
#include "ordprobe/dataset.hpp"

namespace ordprobe::testing {

// Removes its directory on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("ordprobe-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline LabeledExample ex(std::string id, std::string text, LabelId label,
                         std::optional<std::string> text_b = std::nullopt) {
  return LabeledExample{std::move(id), std::move(text), std::move(text_b), label};
}

// Binary dataset with `n` examples alternating labels.
inline Dataset binary_dataset(std::size_t n) {
  Dataset d;
  d.name = "toy";
  d.label_names = {"negative", "positive"};
  for (std::size_t i = 0; i < n; ++i) {
    d.examples.push_back(ex("ex-" + std::to_string(i), "sentence number " + std::to_string(i),
                            i % 2));
  }
  return d;
}

// Backend returning fixed scores per continuation count, counting calls.
class FixedBackend : public LanguageModel {
 public:
  explicit FixedBackend(std::vector<double> scores) : scores_(std::move(scores)) {}

  BackendInfo info() const override { return {"fixed", 4096}; }
  LabelQueryResult label_distribution(std::string_view,
                                      std::span<const std::string>) override {
    ++calls;
    return make_label_result(scores_);
  }
  Generation generate(std::string_view, const GenParams&) override {
    ++calls;
    return {text, 1};
  }

  std::vector<double> scores_;
  std::string text;
  std::atomic<int> calls{0};
};

}  // namespace ordprobe::testing

#include "ordprobe/rng.hpp"
#include "ordprobe/template.hpp"

namespace ordprobe::testing {

// Random sample that can round-trip through `tpl`: words over a mixed
// alphabet, no leading/trailing space, no template marker inside.
inline LabeledExample random_sample(Rng& rng, const PromptTemplate& tpl) {
  static const std::vector<std::string> pieces = {
      "a", "b", "film", "great", "Review", "type", "x1", "9", ",", ".", "!", "'s",
      "\xc3\xa9t\xc3\xa9", "\xe2\x80\x94", ":", "(", ")", "-", "It", "was", "Sentiment"};
  auto sentence = [&] {
    std::string s;
    const auto words = 1 + rng.below(12);
    for (std::uint64_t w = 0; w < words; ++w) {
      if (w) s += rng.below(10) == 0 ? "  " : " ";
      s += pieces[rng.below(pieces.size())];
    }
    return s;
  };
  for (;;) {
    LabeledExample x;
    x.id = "r";
    x.text_a = sentence();
    if (tpl.pair_task()) x.text_b = sentence();
    x.label = rng.below(tpl.verbalizer.size());
    if (!collides(x, tpl)) return x;
  }
}

}  // namespace ordprobe::testing
