#pragma once

// Context-window sample construction, class balancing and train/test split.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "linkgap/corpus.hpp"

namespace linkgap {

inline constexpr std::string_view kDocStart = "<docstart>";
inline constexpr std::string_view kDocEnd = "<docend>";

/// A window recipe: `before` sentences preceding the anchor and `after`
/// sentences following it, in document order.
struct SamplingStrategy {
  int id = 0;
  std::size_t before = 0;
  std::size_t after = 0;

  std::size_t width() const { return before + 1 + after; }
  bool operator==(const SamplingStrategy&) const = default;
};

// Ids 0..9 with windows [i-n, i+m] read inclusively.
std::vector<SamplingStrategy> default_strategies();

struct Window {
  std::size_t first = 0;  // inclusive
  std::size_t last = 0;   // inclusive

  std::size_t size() const { return last - first + 1; }
  bool contains(std::size_t i) const { return first <= i && i <= last; }
  bool operator==(const Window&) const = default;
};

struct Sample {
  int strategy_id = 0;
  std::string doc_id;
  std::size_t anchor = 0;
  Label label = Label::WithoutLinks;
  Window window;
  bool clipped_start = false;
  bool clipped_end = false;
  std::vector<std::string> tokens;  // empty until materialized
};

struct SamplerOptions {
  std::size_t negative_stride = 1;
  bool with_tokens = true;
};

// Window [i-n, i+m] clipped to the document.
Window anchor_window(const Document& doc, std::size_t anchor, const SamplingStrategy& s);

// Concatenated window tokens with <docstart>/<docend> marks where clipped.
void materialize(Sample& sample, const Document& doc);

// Window tokens for any anchor regardless of neighbour labels (inference).
std::vector<std::string> inference_tokens(const Document& doc, std::size_t anchor,
                                          const SamplingStrategy& s);

std::vector<Sample> positive_samples(const Document& doc, const SamplingStrategy& s,
                                     std::span<const std::size_t> anchors,
                                     const SamplerOptions& opt = {});

/// Sliding windows of width k over maximal runs of WithoutLinks sentences.
/// A window is kept only if it contains an eligible anchor; the first
/// eligible sentence becomes the sample's anchor.
std::vector<Sample> negative_samples(const Document& doc, const SamplingStrategy& s,
                                     std::span<const std::size_t> anchors,
                                     const SamplerOptions& opt = {});

std::vector<Sample> undersample(std::vector<Sample> samples, std::uint64_t seed);

enum class SplitUnit { PerSample, PerDocument };

std::string_view to_string(SplitUnit unit);
SplitUnit parse_split_unit(std::string_view text);

struct SplitConfig {
  double test_size = 0.33;
  std::uint64_t seed = 0;
  SplitUnit unit = SplitUnit::PerSample;

  void validate() const;
};

struct ClassCounts {
  std::size_t positive = 0;
  std::size_t negative = 0;
};

ClassCounts count_classes(std::span<const Sample> samples);

struct TrainTestSplit {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

TrainTestSplit split_train_test(std::vector<Sample> samples, const SplitConfig& cfg);

// Word count of a materialized sample, boundary marks excluded.
std::size_t sample_word_count(const Sample& sample);

void write_samples(std::ostream& out, std::span<const Sample> samples);

}  // namespace linkgap
