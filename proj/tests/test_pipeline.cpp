#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "linkgap/pipeline.hpp"
#include "linkgap/synth.hpp"
#include "support.hpp"

using namespace linkgap;
using linkgap::testing::ScratchDir;

namespace {

std::string filler_sentence(std::size_t words, std::size_t offset) {
  std::string s;
  for (std::size_t i = 0; i < words; ++i) {
    const std::size_t w = (i * 7 + offset) % 25;
    s += (w < 10 ? "w0" : "w") + std::to_string(w) + " ";
  }
  return s + ".";
}

void write_document(const std::filesystem::path& path, const std::vector<std::string>& sentences) {
  nlohmann::json line = {{"article_id", "probe"}, {"article_text", sentences}};
  std::ofstream(path) << line.dump() << "\n";
}

RunConfig small_config(const std::filesystem::path& input, const std::filesystem::path& out) {
  RunConfig cfg;
  cfg.input = input.string();
  cfg.output_dir = out.string();
  cfg.set("hidden_units", "16");
  cfg.set("max_epochs", "60");
  cfg.set("split_unit", "document");
  cfg.set("resume", "false");
  return cfg;
}

// One synthetic corpus shared by the tests below.
const std::filesystem::path& synthetic_input() {
  static ScratchDir dir("pipeline-corpus");
  static const auto path = [] {
    SynthConfig sc;
    sc.documents = 120;
    sc.self_cue_positive = 0.6;
    auto p = dir / "synthetic.jsonl";
    write_synthetic_corpus(p, sc);
    return p;
  }();
  return path;
}

}  // namespace

TEST_CASE("config keys, canonical form and hashing") {
  RunConfig a;
  a.apply_text("# comment\ninput = x.jsonl\n seed = 7 \nstrategies = 0,2,7\nhard_threshold = auto\n");
  CHECK(a.master_seed == 7);
  CHECK(a.strategies.size() == 3);
  CHECK(a.hard_threshold_auto);
  RunConfig b;
  b.apply_text(a.canonical());
  CHECK(b.canonical() == a.canonical());
  CHECK(b.hash() == a.hash());
  b.set("l2", "0.001");
  CHECK(b.hash() != a.hash());
  // Execution options (jobs, resume) do not change results and stay out.
  for (const auto& key : RunConfig::keys())
    CHECK((a.canonical().find(key + " = ") != std::string::npos) == (key != "jobs" && key != "resume"));

  CHECK_THROWS_AS(a.set("no_such_key", "1"), UsageError);
  CHECK_THROWS_AS(a.set("hidden_units", "-3"), UsageError);
  CHECK_THROWS_AS(a.set("test_size", "abc"), UsageError);
  CHECK_THROWS_AS(a.set("resume", "maybe"), UsageError);
  CHECK_THROWS_AS(a.apply_text("just words"), UsageError);
}

TEST_CASE("strategy parsing") {
  CHECK(parse_strategies("default").size() == 10);
  const auto s = parse_strategies("9,0,11:2:5");
  REQUIRE(s.size() == 3);
  CHECK(s[0] == SamplingStrategy{0, 0, 0});
  CHECK(s[1] == SamplingStrategy{9, 5, 4});
  CHECK(s[2] == SamplingStrategy{11, 2, 5});
  CHECK(format_strategies(s) == "0:0:0,9:5:4,11:2:5");
  CHECK_THROWS_AS(parse_strategies("12"), UsageError);
  CHECK_THROWS_AS(parse_strategies("1,1"), UsageError);
  CHECK_THROWS_AS(parse_strategies("1:x:2"), UsageError);
}

TEST_CASE("seeds and split configuration") {
  RunConfig cfg;
  cfg.master_seed = 42;
  CHECK(cfg.strategy_seed(7) == 49);
  CHECK(cfg.split_config(7).seed == 49);
  cfg.split_unit = SplitUnit::PerDocument;
  CHECK(cfg.split_config(7).seed == 42);
}

TEST_CASE("config validation") {
  RunConfig cfg;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg.input = "a";
  cfg.corpus = "b";
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg.corpus.clear();
  CHECK_NOTHROW(cfg.validate());
  cfg.set("strategies", "0,1");
  cfg.set("ensemble_sets", "0,5");
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("unselected"), UsageError);
}

TEST_CASE("ingest summary") {
  ScratchDir out("ingest-out");
  RunConfig cfg = small_config(synthetic_input(), out.path());
  const auto s = run_ingest(cfg);
  CHECK(s.report.documents == 120);
  CHECK(s.eligible_anchors > 0);
  CHECK(s.positive_fraction > 0.0);
  CHECK(s.positive_fraction < 0.2);
  CHECK(std::filesystem::exists(out / "corpus.jsonl"));
  CHECK(std::filesystem::exists(out / "ingest.json"));
}

TEST_CASE("single strategy run has no voting block") {
  ScratchDir out("single");
  RunConfig cfg = small_config(synthetic_input(), out.path());
  cfg.set("strategies", "0");
  const auto r = run_experiment(cfg);
  CHECK(r.report.strategies.size() == 1);
  CHECK(r.report.voting.empty());
  CHECK_FALSE(r.report.strategies[0].anchor_metrics);
  CHECK_FALSE(std::filesystem::exists(out / "voting.csv"));
  CHECK(std::filesystem::exists(out / "bundle.json"));
}

TEST_CASE("two-strategy run is reproducible and resumable") {
  ScratchDir a("run-a"), b("run-b");
  RunConfig cfg = small_config(synthetic_input(), a.path());
  cfg.set("strategies", "0,2");
  const auto first = run_experiment(cfg);
  CHECK(first.report.strategies.size() == 2);
  CHECK(first.report.voting.size() == 2);
  for (const auto& row : first.report.strategies) CHECK(row.anchor_metrics);
  bool degenerate_warning = false;
  for (const auto& w : first.warnings) degenerate_warning |= w.find("never vote positive") != std::string::npos;
  CHECK(degenerate_warning);

  cfg.output_dir = b.path().string();
  run_experiment(cfg);
  for (const char* f : {"report.csv", "report.json", "lengths.csv", "voting.csv", "corpus.jsonl"})
    CHECK(read_file(a / f) == read_file(b / f));

  cfg.resume = true;
  run_experiment(cfg);
  auto manifest = nlohmann::json::parse(read_file(b / "manifest.json"));
  CHECK(manifest.at("cached").at("0") == true);
  CHECK(manifest.at("cached").at("2") == true);
  CHECK(read_file(a / "report.csv") == read_file(b / "report.csv"));

  RunConfig replay;
  replay.apply_file(b / "run.conf");
  CHECK(replay.canonical() == cfg.canonical());
}

TEST_CASE("errors carry the failing stage") {
  ScratchDir out("stage");
  RunConfig cfg = small_config(synthetic_input(), out.path());
  cfg.set("strategies", "0");
  cfg.set("min_df", "1000000");
  CHECK_THROWS_WITH_AS(run_experiment(cfg), doctest::Contains("strategy 0, stage vectorize"), DataError);

  RunConfig missing = small_config(out / "absent.jsonl", out.path());
  CHECK_THROWS_WITH_AS(run_experiment(missing), doctest::Contains("stage ingest"), DataError);
}

TEST_CASE("predict on new documents") {
  ScratchDir out("predict");
  RunConfig cfg = small_config(synthetic_input(), out.path());
  cfg.set("strategies", "0,2");
  cfg.resume = true;  // later subcases reuse the trained models
  run_experiment(cfg);

  PredictOptions opt;
  opt.bundle_dir = out.path();

  SUBCASE("planted cues rank first") {
    std::vector<std::string> sentences;
    for (std::size_t i = 0; i < 8; ++i) sentences.push_back(filler_sentence(36, i));
    sentences[4] = "previously reported proposed introduced developed previously " + filler_sentence(30, 3);
    opt.document = out / "planted.jsonl";
    write_document(opt.document, sentences);
    const auto r = run_predict(opt);
    REQUIRE(r.verdicts.size() == 8);
    CHECK(r.verdicts.front().index == 4);
    CHECK(r.verdicts.front().missing_link);
    for (std::size_t i = 1; i < r.verdicts.size(); ++i)
      CHECK(r.verdicts[i - 1].probability >= r.verdicts[i].probability);
    auto doc = nlohmann::json::parse(verdicts_json(r));
    CHECK(doc.size() == 8);
    CHECK(doc.at(0).at("per_strategy").contains("2"));
  }

  SUBCASE("cited sentences are never flagged") {
    std::vector<std::string> sentences;
    for (std::size_t i = 0; i < 5; ++i) sentences.push_back(filler_sentence(35, i) + " see @xcite .");
    opt.document = out / "cited.jsonl";
    write_document(opt.document, sentences);
    const auto r = run_predict(opt);
    CHECK(r.verdicts.size() == 5);
    for (const auto& v : r.verdicts) CHECK_FALSE(v.missing_link);
  }

  SUBCASE("no eligible anchors") {
    opt.document = out / "short.jsonl";
    write_document(opt.document, {"too short .", "also short ."});
    const auto r = run_predict(opt);
    CHECK(r.verdicts.empty());
    REQUIRE(r.notices.size() == 1);
    CHECK(r.notices[0].find("no eligible") != std::string::npos);
  }

  SUBCASE("unknown strategy") {
    opt.document = out / "short.jsonl";
    write_document(opt.document, {"too short ."});
    opt.strategy_ids = {5};
    CHECK_THROWS_AS(run_predict(opt), UsageError);
  }

  SUBCASE("missing bundle") {
    opt.bundle_dir = out / "nowhere";
    opt.document = out / "short.jsonl";
    CHECK_THROWS_AS(run_predict(opt), DataError);
  }
}
