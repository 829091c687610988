#pragma once

// Confusion matrices, per-class and averaged precision/recall/F1, and the
// experiment report files.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "linkgap/corpus.hpp"
#include "linkgap/ensemble.hpp"
#include "linkgap/sampler.hpp"

namespace linkgap {

// Positive = WithLinks.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const Label> y_true, std::span<const Label> y_pred);

enum class Averaging { Weighted, Macro };

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct Metrics {
  ClassMetrics positive;
  ClassMetrics negative;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Averaging averaging = Averaging::Weighted;
  std::vector<std::string> warnings;  // undefined (0/0) ratios reported as 0
};

Metrics metrics(const ConfusionMatrix& cm, Averaging averaging = Averaging::Weighted);

struct StrategyRow {
  SamplingStrategy strategy;
  Metrics metrics;                       // on the strategy's own test samples
  std::optional<Metrics> anchor_metrics; // on the shared evaluation anchors
  std::size_t positives = 0;             // constructed, before balancing
  std::size_t negatives = 0;
  std::size_t train = 0;
  std::size_t test = 0;
};

struct VotingRow {
  VoteMode mode = VoteMode::Soft;
  std::vector<int> strategy_ids;
  double threshold = 0.0;
  Metrics metrics;
};

struct LengthBin {
  int strategy_id = 0;
  Label label = Label::WithoutLinks;
  std::size_t length = 0;  // words
  std::size_t count = 0;
};

struct AnchorRow {
  AnchorPrediction prediction;
  Label soft = Label::WithoutLinks;
  Label hard = Label::WithoutLinks;
};

struct Report {
  std::vector<StrategyRow> strategies;
  std::vector<VotingRow> voting;
  std::vector<LengthBin> lengths;
  std::vector<int> anchor_columns;  // strategy ids exported per anchor
  std::vector<AnchorRow> anchors;
};

inline constexpr int kReportVersion = 1;

std::string report_csv(const Report& report);
std::string report_json(const Report& report);
std::string lengths_csv(const Report& report);
std::string voting_csv(const Report& report);

// Writes report.csv, report.json, lengths.csv and (when anchors are present)
// voting.csv into dir.
void emit_report(const Report& report, const std::filesystem::path& dir);

}  // namespace linkgap
