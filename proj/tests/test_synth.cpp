#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "linkgap/corpus.hpp"
#include "linkgap/synth.hpp"
#include "linkgap/util.hpp"

using namespace linkgap;

namespace {

SynthConfig small(std::uint64_t seed) {
  SynthConfig c;
  c.documents = 25;
  c.seed = seed;
  return c;
}

std::vector<nlohmann::json> parse_lines(const std::string& text) {
  std::vector<nlohmann::json> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(nlohmann::json::parse(line));
  return out;
}

}  // namespace

TEST_CASE("generator is deterministic per seed") {
  const auto a = generate_synthetic_corpus(small(3));
  CHECK(a == generate_synthetic_corpus(small(3)));
  CHECK(a != generate_synthetic_corpus(small(4)));
  CHECK(parse_lines(a).size() == 25);
}

TEST_CASE("documents respect the placement rules") {
  const auto cfg = small(11);
  IngestConfig icfg;
  for (const auto& line : parse_lines(generate_synthetic_corpus(cfg))) {
    std::vector<std::string> raw = line.at("article_text").get<std::vector<std::string>>();
    CHECK(raw.size() >= cfg.min_sentences);
    CHECK(raw.size() <= cfg.max_sentences);
    const auto doc = build_document(line.at("article_id").get<std::string>(), raw, icfg);
    std::vector<std::size_t> positives;
    for (const auto& s : doc.sentences) {
      if (s.label == Label::WithLinks) positives.push_back(s.index);
      const bool is_short = s.word_count < cfg.min_words;
      if (is_short) {
        CHECK(s.label == Label::WithoutLinks);
        CHECK(s.word_count >= 12);
        CHECK(s.word_count <= 20);
      } else {
        CHECK(s.word_count <= cfg.max_words);
      }
    }
    REQUIRE_FALSE(positives.empty());
    CHECK(positives.front() > 0);
    CHECK(positives.back() + 1 < doc.size());
    for (std::size_t i = 1; i < positives.size(); ++i) {
      const std::size_t between = positives[i] - positives[i - 1] - 1;
      CHECK(between >= cfg.min_gap);
      CHECK(between <= cfg.max_gap);
    }
  }
}

TEST_CASE("cue distances") {
  const auto d = cue_distances({false, true, false, false, true, false});
  CHECK(d.lead == std::vector<std::size_t>{1, 0, 2, 1, 0, 0});
  CHECK(d.follow == std::vector<std::size_t>{0, 0, 1, 2, 0, 1});
  const auto none = cue_distances({false, false});
  CHECK(none.lead == std::vector<std::size_t>{0, 0});
  CHECK(none.follow == std::vector<std::size_t>{0, 0});
}

TEST_CASE("context profile lookup") {
  SynthConfig c;
  CHECK(c.context_probability(0) == c.context_cue_background);
  CHECK(c.context_probability(1) == c.context_cue[0]);
  CHECK(c.context_probability(5) == c.context_cue[4]);
  CHECK(c.context_probability(6) == c.context_cue_background);
}

TEST_CASE("configuration validation") {
  SynthConfig c;
  CHECK_NOTHROW(c.validate());
  c.min_words = 8;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = SynthConfig{};
  c.cue_trials = 5;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = SynthConfig{};
  c.min_gap = 40;
  CHECK_THROWS_AS(c.validate(), UsageError);
}
