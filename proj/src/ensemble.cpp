#include "linkgap/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "linkgap/util.hpp"

namespace linkgap {

std::string_view to_string(VoteMode mode) { return mode == VoteMode::Soft ? "soft" : "hard"; }

VoteMode parse_vote_mode(std::string_view text) {
  if (text == "soft") return VoteMode::Soft;
  if (text == "hard") return VoteMode::Hard;
  throw UsageError("unknown voting mode '" + std::string(text) + "' (soft|hard)");
}

std::string_view to_string(HardRule rule) { return rule == HardRule::ProbabilitySum ? "sum" : "majority"; }

HardRule parse_hard_rule(std::string_view text) {
  if (text == "sum") return HardRule::ProbabilitySum;
  if (text == "majority") return HardRule::MajorityCount;
  throw UsageError("unknown hard voting rule '" + std::string(text) + "' (sum|majority)");
}

void EnsembleConfig::validate() const {
  if (strategy_ids.empty()) throw UsageError("ensemble needs at least one strategy");
  std::set<int> seen(strategy_ids.begin(), strategy_ids.end());
  if (seen.size() != strategy_ids.size()) throw UsageError("ensemble strategy ids must be distinct");
  if (!std::isfinite(soft_threshold) || !std::isfinite(hard_threshold))
    throw UsageError("voting thresholds must be finite");
}

double EnsembleConfig::effective_hard_threshold() const {
  return hard_threshold_auto ? static_cast<double>(strategy_ids.size()) / 2.0 : hard_threshold;
}

bool EnsembleConfig::hard_vote_degenerate() const {
  return effective_hard_threshold() >= static_cast<double>(strategy_ids.size());
}

Label vote(const StrategyProbabilities& probabilities, const EnsembleConfig& cfg) {
  double sum = 0.0;
  std::size_t positive_votes = 0;
  for (int id : cfg.strategy_ids) {
    auto it = probabilities.find(id);
    if (it == probabilities.end())
      throw InvariantError("no probability for strategy " + std::to_string(id));
    sum += it->second;
    if (it->second > 0.5) ++positive_votes;
  }
  bool positive = false;
  if (cfg.mode == VoteMode::Soft) {
    positive = sum / static_cast<double>(cfg.strategy_ids.size()) > cfg.soft_threshold;
  } else if (cfg.hard_rule == HardRule::ProbabilitySum) {
    positive = sum > cfg.effective_hard_threshold();
  } else {
    positive = static_cast<double>(positive_votes) > cfg.effective_hard_threshold();
  }
  return positive ? Label::WithLinks : Label::WithoutLinks;
}

std::vector<std::vector<int>> build_strategy_sets(std::span<const int> ids) {
  std::vector<int> sorted(ids.begin(), ids.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<std::vector<int>> out;
  if (sorted.size() < 2) return out;
  const std::size_t seed_size = std::min<std::size_t>(3, sorted.size());
  for (std::size_t size = seed_size; size <= sorted.size(); ++size)
    out.emplace_back(sorted.end() - static_cast<std::ptrdiff_t>(size), sorted.end());
  return out;
}

std::vector<std::vector<int>> build_strategy_sets() {
  std::vector<int> ids;
  for (const auto& s : default_strategies()) ids.push_back(s.id);
  return build_strategy_sets(ids);
}

std::vector<AnchorPrediction> align_anchor_views(const Corpus& corpus, std::span<const AnchorRef> anchors,
                                                 std::span<const StrategyEstimator> estimators) {
  for (const auto& e : estimators)
    if (!e.vocabulary || !e.model)
      throw UsageError("missing model or vocabulary for strategy " + std::to_string(e.strategy.id));

  std::vector<AnchorPrediction> out;
  out.reserve(anchors.size());
  for (const auto& a : anchors) {
    if (a.doc >= corpus.size() || a.index >= corpus[a.doc].size())
      throw InvariantError("evaluation anchor outside the corpus");
    const Document& doc = corpus[a.doc];
    AnchorPrediction p;
    p.doc_id = doc.doc_id;
    p.index = a.index;
    p.truth = doc.sentences[a.index].label;
    for (const auto& e : estimators) {
      auto tokens = inference_tokens(doc, a.index, e.strategy);
      p.probabilities[e.strategy.id] = e.model->predict_proba(e.vocabulary->vectorize(tokens))[1];
    }
    out.push_back(std::move(p));
  }
  return out;
}

double mean_probability(const StrategyProbabilities& probabilities, std::span<const int> ids) {
  if (ids.empty()) return 0.0;
  double s = 0.0;
  for (int id : ids) s += probabilities.at(id);
  return s / static_cast<double>(ids.size());
}

}  // namespace linkgap
