#pragma once

// Per-sentence alignment of strategy estimators and threshold voting.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "linkgap/classifier.hpp"
#include "linkgap/corpus.hpp"
#include "linkgap/sampler.hpp"
#include "linkgap/vectorizer.hpp"

namespace linkgap {

enum class VoteMode { Soft, Hard };

// ProbabilitySum: positive iff the sum of positive-class probabilities
// exceeds the threshold. MajorityCount: positive iff the number of
// estimators with p > 0.5 exceeds the threshold.
enum class HardRule { ProbabilitySum, MajorityCount };

std::string_view to_string(VoteMode mode);
VoteMode parse_vote_mode(std::string_view text);
std::string_view to_string(HardRule rule);
HardRule parse_hard_rule(std::string_view text);

struct EnsembleConfig {
  std::vector<int> strategy_ids;
  VoteMode mode = VoteMode::Soft;
  double soft_threshold = 0.5;
  double hard_threshold = 3.0;
  bool hard_threshold_auto = false;  // use E / 2 instead of hard_threshold
  HardRule hard_rule = HardRule::ProbabilitySum;

  void validate() const;
  double effective_hard_threshold() const;
  // True when hard voting can never return Positive (threshold >= E).
  bool hard_vote_degenerate() const;
};

using StrategyProbabilities = std::map<int, double>;

// Ties resolve to WithoutLinks.
Label vote(const StrategyProbabilities& probabilities, const EnsembleConfig& cfg);

/// Growing estimator sets: the three highest ids first, then one more id at a
/// time in descending order. For ids 0..9: {7,8,9}, {6,...,9}, ..., {0,...,9}.
std::vector<std::vector<int>> build_strategy_sets(std::span<const int> ids);
std::vector<std::vector<int>> build_strategy_sets();

struct StrategyEstimator {
  SamplingStrategy strategy;
  const Vocabulary* vocabulary = nullptr;
  const MLPModel* model = nullptr;
};

struct AnchorRef {
  std::size_t doc = 0;  // position in the corpus
  std::size_t index = 0;
};

struct AnchorPrediction {
  std::string doc_id;
  std::size_t index = 0;
  Label truth = Label::WithoutLinks;
  StrategyProbabilities probabilities;
  std::optional<Label> decision;
};

/// For every anchor, builds each strategy's inference window (neighbours taken
/// as-is), vectorizes it with that strategy's vocabulary and records the
/// model's positive-class probability.
std::vector<AnchorPrediction> align_anchor_views(const Corpus& corpus, std::span<const AnchorRef> anchors,
                                                 std::span<const StrategyEstimator> estimators);

double mean_probability(const StrategyProbabilities& probabilities, std::span<const int> ids);

}  // namespace linkgap
