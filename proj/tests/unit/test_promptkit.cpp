#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "phonosem/io.hpp"
#include "phonosem/promptkit.hpp"

using namespace phonosem;
using namespace phonosem::promptkit;

namespace {

const std::string fixtures = PHONOSEM_FIXTURE_DIR;

std::string golden(const std::string& name) { return io::read_file(fixtures + "/prompts/" + name); }

const semdim::SemanticDimension& dim(std::string_view id) { return semdim::DimensionRegistry::defaults().at(id); }

LexiconEntry whizz() {
  return entry_from_json(nlohmann::json::parse(R"({"word":"whizz","ipa":"w ɪ z","audio":"audio/whizz.wav",
      "language":"en","meaning":"to move quickly with a humming sound"})"));
}

}  // namespace

class AbGolden : public ::testing::TestWithParam<std::tuple<InputType, FeatureOrder>> {};

TEST_P(AbGolden, MatchesHandBuiltPrompt) {
  auto [t, o] = GetParam();
  auto spec = build_ab_prompt(whizz(), dim("fast-slow"), t, o);
  const auto name = std::string(to_string(t)) + "_" + std::string(to_string(o)) + ".txt";
  EXPECT_EQ(spec.render(), golden(name));
  EXPECT_EQ(spec.audio_parts(), needs_audio(t) ? 1u : 0u);
  EXPECT_EQ(spec.n_options, 2);
}

INSTANTIATE_TEST_SUITE_P(AllForms, AbGolden,
                         ::testing::Combine(::testing::ValuesIn(all_input_types),
                                            ::testing::Values(FeatureOrder::normal, FeatureOrder::reversed)),
                         [](const auto& info) {
                           return std::string(to_string(std::get<0>(info.param))) + "_" +
                                  std::string(to_string(std::get<1>(info.param)));
                         });

TEST(AbPrompt, BoomWithAudio) {
  LexiconEntry boom;
  boom.id = "boom";
  boom.word = "boom";
  boom.ipa = "b u m";
  boom.audio = "boom.wav";
  auto spec = build_ab_prompt(boom, dim("exciting-calming"), InputType::ipa_plus_audio, FeatureOrder::normal);
  EXPECT_EQ(spec.render(), golden("table3_boom.txt"));
  ASSERT_EQ(spec.parts.size(), 3u);
  EXPECT_EQ(spec.parts[1], (PromptPart{PromptPart::Kind::audio, "boom.wav"}));
}

TEST(AbPrompt, ReversalSwapsOptionsOnly) {
  auto n = build_ab_prompt(whizz(), dim("fast-slow"), InputType::original, FeatureOrder::normal).render();
  auto r = build_ab_prompt(whizz(), dim("fast-slow"), InputType::original, FeatureOrder::reversed).render();
  EXPECT_NE(n, r);
  EXPECT_NE(r.find("1: slow\n2: fast"), std::string::npos);
  EXPECT_NE(r.find("slow vs. fast"), std::string::npos);
}

TEST(AbPrompt, MissingForms) {
  LexiconEntry e;
  e.id = "x";
  e.word = "x";
  try {
    build_ab_prompt(e, dim("fast-slow"), InputType::ipa, FeatureOrder::normal);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::missing_form);
    EXPECT_EQ(err.details()["form"], "ipa");
  }
  e.ipa = "x";
  EXPECT_THROW(build_ab_prompt(e, dim("fast-slow"), InputType::audio, FeatureOrder::normal), Error);
  EXPECT_THROW(build_ab_prompt(e, dim("fast-slow"), InputType::ipa_plus_audio, FeatureOrder::normal), Error);
  EXPECT_NO_THROW(build_ab_prompt(e, dim("fast-slow"), InputType::ipa, FeatureOrder::normal));
}

TEST(AbPrompt, SubstitutedValuesAreNotRescanned) {
  LexiconEntry e;
  e.id = "odd";
  e.word = "{feature1}";
  auto s = build_ab_prompt(e, dim("fast-slow"), InputType::original, FeatureOrder::normal).render();
  EXPECT_NE(s.find("[WORD]\n{feature1}\n"), std::string::npos);
}

TEST(AbPrompt, TemplateMustHaveOneWordSlot) {
  PromptTemplates t;
  t.original = "{word} {word} {feature1} {feature2}";
  EXPECT_THROW(build_ab_prompt(whizz(), dim("fast-slow"), InputType::original, FeatureOrder::normal, t), Error);
  t.original = "Pick for {word}: {feature1} or {feature2}";
  EXPECT_EQ(build_ab_prompt(whizz(), dim("fast-slow"), InputType::original, FeatureOrder::normal, t).render(),
            "Pick for whizz: fast or slow");
}

TEST(AnnotationPrompt, EnglishAndJapanese) {
  EXPECT_EQ(build_annotation_prompt(whizz(), dim("exciting-calming"), "en").render(), golden("annotation_en.txt"));
  LexiconEntry kira;
  kira.id = "kirakira";
  kira.word = "きらきら";
  kira.meaning = "光り輝くさま";
  auto spec = build_annotation_prompt(kira, dim("exciting-calming"), "ja");
  EXPECT_EQ(spec.render(), golden("annotation_ja.txt"));
  EXPECT_EQ(spec.n_options, 3);
  EXPECT_EQ(spec.prompt_id, "annotation|kirakira|exciting-calming");
}

TEST(AnnotationPrompt, MissingMeaning) {
  LexiconEntry e;
  e.id = "x";
  e.word = "x";
  try {
    build_annotation_prompt(e, dim("fast-slow"), "en");
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::missing_meaning);
  }
}

TEST(Templates, ShippedFilesMatchBuiltIns) {
  auto t = PromptTemplates::load_dir(std::string(PHONOSEM_SOURCE_DIR) + "/data/templates");
  EXPECT_EQ(t.original, templates::original);
  EXPECT_EQ(t.ipa, templates::ipa);
  EXPECT_EQ(t.audio, templates::audio);
  EXPECT_EQ(t.ipa_plus_audio, templates::ipa_plus_audio);
  EXPECT_EQ(t.annotation, templates::annotation);
}

TEST(PromptJson, RoundTrip) {
  auto spec = build_ab_prompt(whizz(), dim("fast-slow"), InputType::ipa_plus_audio, FeatureOrder::reversed);
  auto back = prompt_from_json(nlohmann::json::parse(to_json(spec).dump()));
  EXPECT_EQ(back.prompt_id, "ab|whizz|fast-slow|ipa_plus_audio|reversed");
  EXPECT_EQ(back.parts, spec.parts);
  EXPECT_EQ(back.feature_order, FeatureOrder::reversed);
  EXPECT_EQ(back.language, "en");
  EXPECT_EQ(back.group, "natural");
}

TEST(LexiconEntry, PseudoWordRecord) {
  auto e = entry_from_json(
      nlohmann::json::parse(R"({"id":"cw00127","symbols":["l","ɑ","m","ow"],"romanized":"lah-mo"})"));
  EXPECT_EQ(e.word, "lah-mo");
  EXPECT_EQ(e.ipa, "l ɑ m ow");
  EXPECT_EQ(e.group, "constructed");
  EXPECT_TRUE(e.language.empty());
}

TEST(Response, StrictParsing) {
  EXPECT_EQ(parse_response("1", 2).choice, 1);
  EXPECT_EQ(parse_response(" 2\n", 2).choice, 2);
  EXPECT_FALSE(parse_response("3", 2).valid());
  EXPECT_EQ(parse_response("3", 3).choice, 3);
  EXPECT_FALSE(parse_response("0", 2).valid());
  EXPECT_FALSE(parse_response("1.", 2).valid());
  EXPECT_FALSE(parse_response("Answer: 1", 2).valid());
  EXPECT_FALSE(parse_response("", 2).valid());
  EXPECT_FALSE(parse_response("-1", 2).valid());
}

TEST(Response, ResolveUndoesReversal) {
  const auto& d = dim("fast-slow");
  auto one = parse_response("1", 2);
  EXPECT_EQ(label_of(resolve_choice(one, FeatureOrder::normal), d), "fast");
  EXPECT_EQ(label_of(resolve_choice(one, FeatureOrder::reversed), d), "slow");
  auto two = parse_response("2", 2);
  EXPECT_EQ(label_of(resolve_choice(two, FeatureOrder::reversed), d), "fast");
  EXPECT_EQ(label_of(resolve_choice(parse_response("3", 3), FeatureOrder::normal), d), "neither");
  EXPECT_EQ(label_of(resolve_choice(parse_response("x", 2), FeatureOrder::normal), d), "invalid");
}

TEST(Response, ReversedPromptAnsweredByFeatureNameResolvesConsistently) {
  // a model that always picks "fast" gives the same label under both orders
  const auto& d = dim("fast-slow");
  for (auto o : {FeatureOrder::normal, FeatureOrder::reversed}) {
    auto spec = build_ab_prompt(whizz(), d, InputType::original, o);
    const auto text = spec.render();
    const std::string choice = text.find("1: fast") != std::string::npos ? "1" : "2";
    EXPECT_EQ(label_of(resolve_choice(parse_response(choice, 2), o), d), "fast");
  }
}
