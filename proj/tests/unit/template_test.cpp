#include <gtest/gtest.h>

#include "ordprobe/error.hpp"
#include "ordprobe/template.hpp"
#include "support.hpp"

namespace ordprobe {
namespace {

using testing::ex;

TEST(Linearize, InlineSentimentTemplate) {
  const auto& tpl = preset_template("sst2_inline");
  EXPECT_EQ(linearize(ex("1", "the greatest musicians", 1), true, tpl),
            "Review: the greatest musicians. Sentiment: positive");
  const auto unlabeled = linearize(ex("1", "the greatest musicians", 1), false, tpl);
  EXPECT_EQ(unlabeled, "Review: the greatest musicians. Sentiment:");
}

TEST(Linearize, NewlineTemplateEndsAtLabelPrefix) {
  const auto& tpl = preset_template("sst2");
  EXPECT_EQ(linearize(ex("1", "contains no wit", 0), true, tpl),
            "Review: contains no wit\nSentiment: negative");
  const auto t = linearize(ex("1", "contains no wit", 0), false, tpl);
  EXPECT_TRUE(t.ends_with("Sentiment:"));
  EXPECT_EQ(t + tpl.continuation(0), linearize(ex("1", "contains no wit", 0), true, tpl));
}

TEST(Linearize, PairTemplateHasThreeLines) {
  const auto& tpl = preset_template("rte");
  const auto t = linearize(ex("1", "No Weapons of Mass Destruction Found in Iraq Yet.", 1,
                              "Weapons of Mass Destruction Found in Iraq."),
                           true, tpl);
  EXPECT_EQ(t,
            "premise: No Weapons of Mass Destruction Found in Iraq Yet.\n"
            "hypothesis: Weapons of Mass Destruction Found in Iraq.\nprediction: False");
  EXPECT_THROW(linearize(ex("1", "premise only", 0), true, tpl), Error);
}

TEST(Concat, JoinsWithSeparator) {
  const auto& tpl = preset_template("sst2_inline");
  const std::vector<std::string> parts = {
      linearize(ex("1", "the greatest musicians", 1), true, tpl),
      linearize(ex("2", "redundant concept", 0), true, tpl)};
  EXPECT_EQ(concat(parts, tpl),
            "Review: the greatest musicians. Sentiment: positive. Review: redundant concept. "
            "Sentiment: negative");
  const std::vector<std::string> reversed = {parts[1], parts[0]};
  EXPECT_NE(concat(reversed, tpl), concat(parts, tpl));
  EXPECT_EQ(concat(std::span(parts).first(1), tpl), parts[0]);
}

TEST(Extract, RoundTripSingleSample) {
  const auto& tpl = preset_template("sst2");
  const auto got = extract(linearize(ex("1", "a fine film", 1), true, tpl), tpl);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].text_a, "a fine film");
  EXPECT_EQ(got[0].label, "positive");
}

TEST(Extract, TrailingHalfSegmentIsDropped) {
  const auto& tpl = preset_template("sst2");
  const std::vector<std::string> parts = {
      linearize(ex("1", "one", 1), true, tpl), linearize(ex("2", "two", 0), true, tpl),
      linearize(ex("3", "three", 1), true, tpl)};
  const auto text = concat(parts, tpl);
  const auto cut = text.substr(0, text.rfind("three") + 3);
  const auto got = extract_detailed(cut, tpl);
  ASSERT_EQ(got.samples.size(), 2u);
  EXPECT_EQ(got.samples[1].text_a, "two");
  EXPECT_EQ(got.incomplete, 1u);
}

TEST(Extract, GarbageGivesNothing) {
  EXPECT_TRUE(extract("garbage with no prefixes", preset_template("sst2")).empty());
  EXPECT_TRUE(extract("", preset_template("generic")).empty());
}

TEST(Extract, EmptyLabelIsIncomplete) {
  const auto& tpl = preset_template("sst2");
  const auto got = extract_detailed("Review: x\nSentiment:\n\nReview: y\nSentiment: negative", tpl);
  ASSERT_EQ(got.samples.size(), 1u);
  EXPECT_EQ(got.samples[0].text_a, "y");
  EXPECT_EQ(got.incomplete, 1u);
}

TEST(Extract, SentenceNeverContainsLabelPrefix) {
  const auto& tpl = preset_template("sst2");
  const auto got = extract("Review: a\nSentiment:\nSentiment: positive", tpl);
  for (const auto& s : got) EXPECT_EQ(s.text_a.find("Sentiment:"), std::string::npos);
}

TEST(Extract, LeadingTextBeforeFirstPrefixIsIgnored) {
  const auto& tpl = preset_template("sst2");
  const auto got = extract("so anyway\n\nReview: fine work\nSentiment: positive\n", tpl);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].text_a, "fine work");
}

TEST(Extract, TemplateWithoutInputPrefix) {
  const auto& tpl = preset_template("sst2_t4");
  const std::vector<std::string> parts = {linearize(ex("1", "a gem", 1), true, tpl),
                                          linearize(ex("2", "a dud", 0), true, tpl)};
  EXPECT_EQ(concat(parts, tpl), "a gem It was good\na dud It was bad");
  const auto got = extract(concat(parts, tpl), tpl);
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[1].text_a, "a dud");
  EXPECT_EQ(got[1].label, "bad");
}

TEST(RoundTrip, EveryPresetOnRandomSamples) {
  Rng rng(123);
  for (const auto& tpl : preset_templates()) {
    if (tpl.verbalizer.empty()) continue;
    for (int i = 0; i < 50; ++i) {
      const auto x = testing::random_sample(rng, tpl);
      const auto got = extract(linearize(x, true, tpl), tpl);
      ASSERT_EQ(got.size(), 1u) << tpl.id << ": " << x.text_a;
      EXPECT_EQ(got[0].text_a, x.text_a) << tpl.id;
      EXPECT_EQ(got[0].text_b, x.text_b) << tpl.id;
      EXPECT_EQ(got[0].label, tpl.verbalizer[x.label]) << tpl.id;
    }
  }
}

TEST(Collides, DetectsMarkers) {
  const auto& tpl = preset_template("sst2");
  EXPECT_TRUE(collides(ex("1", "a\nSentiment: b", 0), tpl));
  EXPECT_TRUE(collides(ex("1", "see Review: here", 0), tpl));
  EXPECT_FALSE(collides(ex("1", "Review without colon", 0), tpl));
}

TEST(FilterCompatible, DropsCollidingExamples) {
  auto d = testing::binary_dataset(4);
  d.examples[2].text_a = "bad\nSentiment: positive";
  const auto report = filter_compatible(d, preset_template("sst2"));
  EXPECT_EQ(report.dataset.size(), 3u);
  EXPECT_EQ(report.rejected_ids, (std::vector<std::string>{"ex-2"}));
}

TEST(BindTemplate, ByKeyPositionAndLabelNames) {
  Dataset d;
  d.label_names = {"positive", "negative"};
  auto bound = bind_template(preset_template("sst2_t3"), d);
  EXPECT_EQ(bound.verbalizer, (std::vector<std::string>{"good", "bad"}));

  d.label_names = {"0", "1"};
  bound = bind_template(preset_template("sst2"), d);
  EXPECT_EQ(bound.verbalizer, (std::vector<std::string>{"negative", "positive"}));

  d.label_names = {"sports", "world"};
  bound = bind_template(preset_template("generic"), d);
  EXPECT_EQ(bound.verbalizer, d.label_names);

  d.label_names = {"cat", "dog"};
  EXPECT_THROW(bind_template(preset_template("sst2"), d), Error);
}

TEST(TemplateConfig, ParseAndSerialize) {
  const auto tpl = parse_template(R"({
    "id": "custom", "input_prefix": "Q: ", "label_prefix": "\nA:",
    "verbalizer": ["no", "yes"], "label_keys": ["0", "1"], "sample_separator": "\n\n"
  })");
  EXPECT_EQ(tpl.id, "custom");
  EXPECT_EQ(tpl.continuation(1), " yes");
  const auto again = parse_template(template_to_json(tpl));
  EXPECT_EQ(again.verbalizer, tpl.verbalizer);
  EXPECT_EQ(again.label_prefix, tpl.label_prefix);
  EXPECT_EQ(parse_templates("{\"templates\": [" + template_to_json(tpl) + "]}").size(), 1u);
  EXPECT_THROW(parse_template(R"({"id": "x", "input_prefix": "a", "label_prefix": "",
                                  "verbalizer": ["p", "q"]})"),
               Error);
  EXPECT_THROW(parse_template(R"({"id": "x", "input_prefix": "a", "label_prefix": "b",
                                  "verbalizer": ["p", "p"]})"),
               Error);
}

TEST(Presets, ShipsTableTemplatesAndCapitalisationVariants) {
  for (const char* id : {"sst2", "sst5", "mr", "cr", "mpqa", "subj", "trec", "agnews", "dbpedia",
                         "cb", "rte", "sst2_t1", "sst2_t2", "sst2_t3", "sst2_t4", "generic",
                         "generic_caps"}) {
    EXPECT_NO_THROW(preset_template(id)) << id;
  }
  EXPECT_EQ(preset_template("dbpedia").verbalizer.size(), 14u);
  EXPECT_THROW(preset_template("nope"), Error);
}

}  // namespace
}  // namespace ordprobe
