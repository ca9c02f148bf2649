#include "ordprobe/backend.hpp"

#include <algorithm>
#include <cmath>

#include "ordprobe/error.hpp"

namespace ordprobe {

void GenParams::validate() const {
  if (!(temperature > 0.0)) {
    throw Error(ErrorKind::config, "temperature must be > 0");
  }
  if (max_new_tokens == 0) {
    throw Error(ErrorKind::config, "max_new_tokens must be >= 1");
  }
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> out(scores.size());
  if (scores.empty()) return out;
  const double peak = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (std::size_t v = 0; v < scores.size(); ++v) {
    out[v] = std::exp(scores[v] - peak);
    total += out[v];
  }
  for (auto& p : out) p /= total;
  return out;
}

LabelQueryResult make_label_result(std::vector<double> scores) {
  for (double s : scores) {
    if (std::isnan(s)) throw Error(ErrorKind::backend, "NaN label score");
  }
  LabelQueryResult r;
  r.normalized = softmax(scores);
  r.scores = std::move(scores);
  return r;
}

}  // namespace ordprobe
