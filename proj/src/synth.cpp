#include "linkgap/synth.hpp"

#include <algorithm>
#include <cstdio>

#include "json.hpp"
#include "linkgap/util.hpp"

namespace linkgap {

void SynthConfig::validate() const {
  if (documents == 0) throw UsageError("synthetic corpus needs at least one document");
  if (min_sentences < 3 || max_sentences < min_sentences) throw UsageError("invalid sentence count range");
  if (min_words < 12 || max_words < min_words) throw UsageError("invalid word count range");
  if (min_gap < 1 || max_gap < min_gap) throw UsageError("invalid gap range");
  if (filler_vocabulary == 0) throw UsageError("filler vocabulary must be non-empty");
  if (3 * cue_trials + 1 > 12) throw UsageError("cue_trials leaves no room in short sentences");
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(short_sentence_rate) || !prob(self_cue_positive) || !prob(self_cue_negative) ||
      !prob(context_cue_background) || !prob(math_rate))
    throw UsageError("synthetic probabilities must lie in [0, 1]");
  for (double p : context_cue)
    if (!prob(p)) throw UsageError("context cue probabilities must lie in [0, 1]");
}

double SynthConfig::context_probability(std::size_t distance) const {
  if (distance >= 1 && distance <= context_cue.size()) return context_cue[distance - 1];
  return context_cue_background;
}

CueDistances cue_distances(const std::vector<bool>& with_links) {
  const std::size_t len = with_links.size();
  CueDistances d{std::vector<std::size_t>(len, 0), std::vector<std::size_t>(len, 0)};
  std::size_t last = 0;
  bool seen = false;
  for (std::size_t i = 0; i < len; ++i) {
    if (with_links[i]) {
      last = i;
      seen = true;
    } else if (seen) {
      d.follow[i] = i - last;
    }
  }
  seen = false;
  for (std::size_t i = len; i-- > 0;) {
    if (with_links[i]) {
      last = i;
      seen = true;
    } else if (seen) {
      d.lead[i] = last - i;
    }
  }
  return d;
}

const std::vector<std::string>& synth_self_cues() {
  static const std::vector<std::string> cues = {"previously", "reported", "proposed", "introduced", "developed"};
  return cues;
}

const std::vector<std::string>& synth_context_cues() {
  static const std::vector<std::string> cues = {"recently", "similarly", "studies", "earlier", "consistent"};
  return cues;
}

namespace {

std::string filler(Rng& rng, std::size_t vocab) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "w%02llu", static_cast<unsigned long long>(rng.below(vocab)));
  return buf;
}

std::size_t in_range(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

std::size_t binomial(Rng& rng, std::size_t trials, double p) {
  std::size_t k = 0;
  for (std::size_t t = 0; t < trials; ++t) k += rng.bernoulli(p) ? 1 : 0;
  return k;
}

void place(Rng& rng, std::vector<std::string>& words, const std::vector<std::size_t>& slots, std::size_t& next,
           std::size_t count, const std::vector<std::string>& cues) {
  for (std::size_t i = 0; i < count; ++i) words[slots[next++]] = cues[rng.below(cues.size())];
}

std::string make_sentence(Rng& rng, const SynthConfig& cfg, bool positive, bool is_short, double p_self,
                          double p_lead, double p_follow) {
  const std::size_t n_words = is_short ? in_range(rng, 12, 20) : in_range(rng, cfg.min_words, cfg.max_words);
  std::vector<std::string> words;
  words.reserve(n_words + 4);
  for (std::size_t i = 0; i < n_words; ++i) words.push_back(filler(rng, cfg.filler_vocabulary));

  // Cue words replace filler so the word count distribution is unchanged.
  std::vector<std::size_t> slots(n_words);
  for (std::size_t i = 0; i < n_words; ++i) slots[i] = i;
  rng.shuffle(slots);
  std::size_t next_slot = 0;
  place(rng, words, slots, next_slot, binomial(rng, cfg.cue_trials, p_self), synth_self_cues());
  place(rng, words, slots, next_slot, binomial(rng, cfg.cue_trials, p_lead), synth_context_cues());
  place(rng, words, slots, next_slot, binomial(rng, cfg.cue_trials, p_follow), synth_context_cues());
  if (rng.bernoulli(cfg.math_rate)) words[slots[next_slot++]] = "@xmath" + std::to_string(rng.below(100));

  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < words.size(); ++i) {
    tokens.push_back(words[i]);
    if (i + 1 < words.size() && rng.bernoulli(0.06)) tokens.emplace_back(",");
  }
  if (positive) {
    const std::size_t markers = rng.bernoulli(0.3) ? 2 : 1;
    for (std::size_t k = 0; k < markers; ++k) {
      auto pos = static_cast<std::ptrdiff_t>(1 + rng.below(tokens.size()));
      tokens.insert(tokens.begin() + pos, "@xcite");
    }
  }
  tokens.emplace_back(".");
  return join(tokens, " ");
}

}  // namespace

std::string generate_synthetic_corpus(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::string out;
  for (std::size_t d = 0; d < cfg.documents; ++d) {
    const std::size_t len = in_range(rng, cfg.min_sentences, cfg.max_sentences);
    std::vector<bool> positive(len, false);
    for (std::size_t p = in_range(rng, 1, cfg.min_gap); p + 1 < len; p += 1 + in_range(rng, cfg.min_gap, cfg.max_gap))
      positive[p] = true;
    const CueDistances dist = cue_distances(positive);

    std::vector<std::string> sentences;
    sentences.reserve(len);
    for (std::size_t i = 0; i < len; ++i) {
      const bool pos = positive[i];
      const bool is_short = !pos && rng.bernoulli(cfg.short_sentence_rate);
      const double p_self = pos ? cfg.self_cue_positive : cfg.self_cue_negative;
      const double p_lead = pos ? 0.0 : cfg.context_probability(dist.lead[i]);
      const double p_follow = pos ? 0.0 : cfg.context_probability(dist.follow[i]);
      sentences.push_back(make_sentence(rng, cfg, pos, is_short, p_self, p_lead, p_follow));
    }
    char id[32];
    std::snprintf(id, sizeof id, "synth-%05zu", d);
    nlohmann::json line = {{"article_id", id}, {"article_text", sentences}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

void write_synthetic_corpus(const std::filesystem::path& path, const SynthConfig& cfg) {
  write_file_atomic(path, generate_synthetic_corpus(cfg));
}

}  // namespace linkgap
