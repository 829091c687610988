#pragma once

// Seeded synthetic article generator with a known context signal.
//
// Sentences are drawn from a small filler vocabulary. Each sentence also
// receives Binomial(cue_trials, p) words from each cue source:
//   self cue:      p = self_cue_positive for WithLinks sentences (which also
//                  carry one or two citation markers), self_cue_negative
//                  otherwise;
//   lead context:  p = context_cue[d-1] for a WithoutLinks sentence d
//                  sentences (1-based) before the next WithLinks sentence;
//   follow context: the same profile, d sentences after the previous one.
// Both context sources draw from one context vocabulary. Beyond the profile
// (or with no WithLinks sentence on that side) they use
// context_cue_background. WithLinks sentences carry no context cues and are
// never the first or last sentence of a document. Cue words replace filler,
// so word counts do not depend on cues.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace linkgap {

struct SynthConfig {
  std::size_t documents = 800;
  std::size_t min_sentences = 60;
  std::size_t max_sentences = 90;
  std::size_t min_words = 32;  // long sentences, eligible at the default filter
  std::size_t max_words = 44;
  double short_sentence_rate = 0.05;  // WithoutLinks only, 12..20 words
  std::size_t min_gap = 20;           // WithoutLinks sentences between two WithLinks
  std::size_t max_gap = 36;
  std::size_t filler_vocabulary = 25;
  std::size_t cue_trials = 3;
  double self_cue_positive = 0.2;
  double self_cue_negative = 0.03;
  std::vector<double> context_cue = {0.9, 0.5, 0.3, 0.2, 0.1};
  double context_cue_background = 0.02;
  double math_rate = 0.1;
  std::uint64_t seed = 7;

  void validate() const;
  // Lead or follow context probability for a WithoutLinks sentence at this
  // distance from a WithLinks sentence (0: no WithLinks sentence on that side).
  double context_probability(std::size_t distance) const;
};

const std::vector<std::string>& synth_self_cues();
const std::vector<std::string>& synth_context_cues();

// Per-sentence distances to the next (lead) and previous (follow) WithLinks
// sentence; 0 where there is none on that side or the sentence is WithLinks.
struct CueDistances {
  std::vector<std::size_t> lead;
  std::vector<std::size_t> follow;
};
CueDistances cue_distances(const std::vector<bool>& with_links);

// One json object per line: {"article_id": ..., "article_text": [...]}.
std::string generate_synthetic_corpus(const SynthConfig& cfg);
void write_synthetic_corpus(const std::filesystem::path& path, const SynthConfig& cfg);

}  // namespace linkgap
