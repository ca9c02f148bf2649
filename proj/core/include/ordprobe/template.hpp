#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ordprobe/dataset.hpp"

namespace ordprobe {

/// Turns labelled samples into prompt text and back.
///
/// A single-sentence sample renders as
///
///     input_prefix + text_a + label_prefix [+ label_lead + verbalizer[label]]
///
/// and a pair sample inserts `hypothesis_prefix + text_b` before the label
/// prefix. Rendered samples are joined with `sample_separator`. The unlabeled
/// form stops right after `label_prefix`, so the label continuation a model is
/// asked to score is `label_lead + verbalizer[v]`.
///
/// `input_prefix` may be empty (e.g. "{sentence} It was {label}"); a sample
/// then starts at the beginning of the text or after `sample_separator`.
struct PromptTemplate {
  std::string id;
  std::string input_prefix;
  std::optional<std::string> hypothesis_prefix;
  std::string label_prefix;
  std::string label_lead = " ";
  /// Surface string per label id.
  std::vector<std::string> verbalizer;
  /// Dataset label names the verbalizer entries stand for (same length as
  /// `verbalizer`); used by bind_template to align with a dataset.
  std::vector<std::string> label_keys;
  std::string sample_separator = "\n\n";
  /// Terminates a label during extraction (a newline always does too).
  std::string end_of_sample_marker = "\n";

  bool pair_task() const noexcept { return hypothesis_prefix.has_value(); }

  /// Text that opens a sample during extraction.
  const std::string& start_marker() const noexcept {
    return input_prefix.empty() ? sample_separator : input_prefix;
  }

  std::string continuation(LabelId label) const;
  std::vector<std::string> continuations() const;

  /// Throws Error(config) on empty label prefix, duplicate verbalizers, or an
  /// empty input prefix without a separator.
  void validate() const;
};

/// T(x, y) when `with_label`, otherwise T(x).
std::string linearize(const LabeledExample& x, bool with_label,
                      const PromptTemplate& tpl);

/// Joins rendered samples with the template's separator.
std::string concat(std::span<const std::string> parts,
                   const PromptTemplate& tpl);

struct ExtractedSample {
  std::string text_a;
  std::optional<std::string> text_b;
  std::string label;

  bool operator==(const ExtractedSample&) const = default;
};

struct Extraction {
  std::vector<ExtractedSample> samples;
  /// Segments that opened but never reached a (non-empty) label.
  std::size_t incomplete = 0;
};

/// T^-1: every complete sample in `generated`, left to right. A sample is
/// complete once its label is terminated by the end-of-sample marker, a
/// newline, the next sample start, or the end of the text. One leading and one
/// trailing space are trimmed from every field.
Extraction extract_detailed(std::string_view generated,
                            const PromptTemplate& tpl);
std::vector<ExtractedSample> extract(std::string_view generated,
                                     const PromptTemplate& tpl);

/// True when the example's text contains a template marker and therefore
/// could not round-trip through linearize/extract.
bool collides(const LabeledExample& x, const PromptTemplate& tpl);

struct CompatibilityReport {
  Dataset dataset;
  std::vector<std::string> rejected_ids;
};

/// Drops (with a warning) examples that collide with the template markers.
CompatibilityReport filter_compatible(const Dataset& d,
                                      const PromptTemplate& tpl);

/// Aligns the verbalizer with the dataset's label order. Matching is by label
/// key; datasets whose labels are "0".."k-1" bind positionally; templates with
/// no verbalizer use the dataset label names verbatim.
PromptTemplate bind_template(const PromptTemplate& tpl, const Dataset& d);

/// Shipped templates: per-dataset presets and the four SST-2 variants.
const std::vector<PromptTemplate>& preset_templates();
const PromptTemplate& preset_template(std::string_view id);

/// Template declarations as JSON; see docs/config.md.
PromptTemplate parse_template(std::string_view json_text);
std::vector<PromptTemplate> parse_templates(std::string_view json_text);
std::string template_to_json(const PromptTemplate& tpl);

}  // namespace ordprobe
