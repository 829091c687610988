#pragma once

// End-to-end orchestration: ingest, per-strategy training and evaluation,
// ensemble voting, persistence, and prediction on new documents.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "linkgap/classifier.hpp"
#include "linkgap/corpus.hpp"
#include "linkgap/ensemble.hpp"
#include "linkgap/evaluation.hpp"
#include "linkgap/sampler.hpp"
#include "linkgap/vectorizer.hpp"

namespace linkgap {

inline constexpr const char* kOutputDirEnv = "LINKGAP_OUTPUT_DIR";

struct RunConfig {
  std::string input;   // raw jsonlines articles
  std::string corpus;  // or a labeled corpus written by `ingest`
  std::string output_dir = "linkgap-out";
  std::uint64_t master_seed = 42;

  IngestConfig ingest;
  std::string mask_map;  // token map file for custom masking
  bool filter_context = false;

  std::vector<SamplingStrategy> strategies = default_strategies();
  std::size_t negative_stride = 1;
  double test_size = 0.33;
  SplitUnit split_unit = SplitUnit::PerSample;

  VectorizerParams vectorizer;
  MLPHyperparams mlp;

  double soft_threshold = 0.5;
  double hard_threshold = 3.0;
  bool hard_threshold_auto = false;
  HardRule hard_rule = HardRule::ProbabilitySum;
  std::vector<std::vector<int>> ensemble_sets;  // empty: derived growing sets
  Averaging averaging = Averaging::Weighted;

  unsigned jobs = 1;
  bool resume = true;

  // Diagnostics sink; not part of the configuration.
  std::ostream* log = nullptr;

  // Applies one `key = value` setting. Throws UsageError on unknown keys or
  // unparsable values.
  void set(std::string_view key, std::string_view value);
  void apply_text(std::string_view text);
  void apply_file(const std::filesystem::path& path);

  // Canonical key=value listing (sorted keys); replaying it through
  // apply_text reproduces this configuration.
  std::string canonical() const;
  std::string hash() const;

  // seed_j = master_seed + strategy_id
  std::uint64_t strategy_seed(int strategy_id) const;
  SplitConfig split_config(int strategy_id) const;

  void validate() const;

  static const std::vector<std::string>& keys();
};

std::vector<SamplingStrategy> parse_strategies(std::string_view text);
std::string format_strategies(const std::vector<SamplingStrategy>& strategies);

struct IngestSummary {
  IngestReport report;
  std::size_t eligible_anchors = 0;
  std::size_t positive_anchors = 0;
  double positive_fraction = 0.0;
};

IngestSummary summarize(const Corpus& corpus, const IngestReport& report, int min_words);

// Loads the configured input (raw jsonlines or labeled corpus).
IngestResult load_input(const RunConfig& cfg);

// Ingest and write corpus.jsonl + ingest.json into the output directory.
IngestSummary run_ingest(const RunConfig& cfg);

struct ExperimentResult {
  Report report;
  std::filesystem::path output_dir;
  std::vector<std::string> warnings;
};

ExperimentResult run_experiment(const RunConfig& cfg);

/// Evaluation anchors shared by all strategies: the anchors of the (0,0)
/// strategy's test split.
std::vector<AnchorRef> evaluation_anchors(const Corpus& corpus, const RunConfig& cfg);

struct PredictOptions {
  std::filesystem::path bundle_dir;
  std::filesystem::path document;
  std::vector<int> strategy_ids;  // empty: every strategy in the bundle
  VoteMode mode = VoteMode::Soft;
};

struct SentenceVerdict {
  std::string doc_id;
  std::size_t index = 0;
  double probability = 0.0;  // mean positive-class probability
  Label observed = Label::WithoutLinks;
  Label decision = Label::WithoutLinks;
  bool missing_link = false;
  StrategyProbabilities per_strategy;
};

struct PredictResult {
  std::vector<SentenceVerdict> verdicts;  // sorted by probability, descending
  std::vector<std::string> notices;
};

PredictResult run_predict(const PredictOptions& opt);
std::string verdicts_json(const PredictResult& result);

}  // namespace linkgap
