#include "linkgap/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "json.hpp"
#include "linkgap/util.hpp"

namespace linkgap {

std::vector<SamplingStrategy> default_strategies() {
  return {{0, 0, 0}, {1, 0, 2}, {2, 1, 1}, {3, 1, 2}, {4, 2, 2},
          {5, 3, 2}, {6, 3, 3}, {7, 4, 3}, {8, 4, 4}, {9, 5, 4}};
}

Window anchor_window(const Document& doc, std::size_t anchor, const SamplingStrategy& s) {
  if (anchor >= doc.size()) throw InvariantError("anchor outside document " + doc.doc_id);
  Window w;
  w.first = anchor >= s.before ? anchor - s.before : 0;
  w.last = std::min(doc.size() - 1, anchor + s.after);
  return w;
}

namespace {

std::vector<std::string> window_tokens(const Document& doc, Window w, bool start_mark, bool end_mark) {
  std::size_t total = start_mark + end_mark;
  for (std::size_t i = w.first; i <= w.last; ++i) total += doc.sentences[i].tokens.size();
  std::vector<std::string> out;
  out.reserve(total);
  if (start_mark) out.emplace_back(kDocStart);
  for (std::size_t i = w.first; i <= w.last; ++i) {
    const auto& t = doc.sentences[i].tokens;
    out.insert(out.end(), t.begin(), t.end());
  }
  if (end_mark) out.emplace_back(kDocEnd);
  return out;
}

}  // namespace

void materialize(Sample& sample, const Document& doc) {
  sample.tokens = window_tokens(doc, sample.window, sample.clipped_start, sample.clipped_end);
}

std::vector<std::string> inference_tokens(const Document& doc, std::size_t anchor,
                                          const SamplingStrategy& s) {
  Window w = anchor_window(doc, anchor, s);
  return window_tokens(doc, w, anchor < s.before, anchor + s.after > doc.size() - 1);
}

std::vector<Sample> positive_samples(const Document& doc, const SamplingStrategy& s,
                                     std::span<const std::size_t> anchors, const SamplerOptions& opt) {
  std::vector<Sample> out;
  for (std::size_t i : anchors) {
    if (i >= doc.size() || doc.sentences[i].label != Label::WithLinks) continue;
    Sample smp;
    smp.strategy_id = s.id;
    smp.doc_id = doc.doc_id;
    smp.anchor = i;
    smp.label = Label::WithLinks;
    smp.window = anchor_window(doc, i, s);
    smp.clipped_start = i < s.before;
    smp.clipped_end = i + s.after > doc.size() - 1;
    if (opt.with_tokens) materialize(smp, doc);
    out.push_back(std::move(smp));
  }
  return out;
}

std::vector<Sample> negative_samples(const Document& doc, const SamplingStrategy& s,
                                     std::span<const std::size_t> anchors, const SamplerOptions& opt) {
  if (opt.negative_stride == 0) throw UsageError("negative stride must be positive");
  std::vector<char> eligible(doc.size(), 0);
  for (std::size_t i : anchors)
    if (i < doc.size()) eligible[i] = 1;

  const std::size_t k = s.width();
  std::vector<Sample> out;
  std::size_t i = 0;
  while (i < doc.size()) {
    if (doc.sentences[i].label != Label::WithoutLinks) {
      ++i;
      continue;
    }
    std::size_t run_end = i;
    while (run_end < doc.size() && doc.sentences[run_end].label == Label::WithoutLinks) ++run_end;
    // run is [i, run_end)
    for (std::size_t start = i; start + k <= run_end; start += opt.negative_stride) {
      std::size_t last = start + k - 1;
      auto first_eligible = std::find(eligible.begin() + static_cast<std::ptrdiff_t>(start),
                                      eligible.begin() + static_cast<std::ptrdiff_t>(last + 1), 1);
      if (first_eligible == eligible.begin() + static_cast<std::ptrdiff_t>(last + 1)) continue;
      Sample smp;
      smp.strategy_id = s.id;
      smp.doc_id = doc.doc_id;
      smp.anchor = static_cast<std::size_t>(first_eligible - eligible.begin());
      smp.label = Label::WithoutLinks;
      smp.window = {start, last};
      if (opt.with_tokens) materialize(smp, doc);
      out.push_back(std::move(smp));
    }
    i = run_end;
  }
  return out;
}

ClassCounts count_classes(std::span<const Sample> samples) {
  ClassCounts c;
  for (const auto& s : samples) (s.label == Label::WithLinks ? c.positive : c.negative)++;
  return c;
}

std::vector<Sample> undersample(std::vector<Sample> samples, std::uint64_t seed) {
  ClassCounts c = count_classes(samples);
  if (c.positive == 0 || c.negative == 0)
    throw DataError("cannot balance degenerate class distribution (" + std::to_string(c.positive) +
                    " positive, " + std::to_string(c.negative) + " negative)");
  if (c.positive == c.negative) return samples;

  const Label majority = c.positive > c.negative ? Label::WithLinks : Label::WithoutLinks;
  const std::size_t keep = std::min(c.positive, c.negative);
  std::vector<std::size_t> majority_idx;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].label == majority) majority_idx.push_back(i);

  Rng rng(seed);
  rng.shuffle(majority_idx);
  std::vector<char> keep_flag(samples.size(), 1);
  for (std::size_t j = keep; j < majority_idx.size(); ++j) keep_flag[majority_idx[j]] = 0;

  std::vector<Sample> out;
  out.reserve(2 * keep);
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (keep_flag[i]) out.push_back(std::move(samples[i]));
  return out;
}

std::string_view to_string(SplitUnit unit) {
  return unit == SplitUnit::PerDocument ? "document" : "sample";
}

SplitUnit parse_split_unit(std::string_view text) {
  if (text == "sample") return SplitUnit::PerSample;
  if (text == "document") return SplitUnit::PerDocument;
  throw UsageError("unknown split unit '" + std::string(text) + "' (sample|document)");
}

void SplitConfig::validate() const {
  if (!(test_size > 0.0 && test_size < 1.0)) throw UsageError("test_size must lie in (0, 1)");
}

TrainTestSplit split_train_test(std::vector<Sample> samples, const SplitConfig& cfg) {
  cfg.validate();
  if (samples.size() < 2) throw DataError("need at least 2 samples to split");
  Rng rng(cfg.seed);
  TrainTestSplit out;

  if (cfg.unit == SplitUnit::PerSample) {
    const auto n_test = static_cast<std::size_t>(std::lround(cfg.test_size * static_cast<double>(samples.size())));
    if (n_test == 0 || n_test >= samples.size())
      throw DataError("test_size " + format_fixed(cfg.test_size, 4) + " leaves an empty side for " +
                      std::to_string(samples.size()) + " samples");
    rng.shuffle(samples);
    out.test.assign(std::make_move_iterator(samples.begin()),
                    std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(n_test)));
    out.train.assign(std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(n_test)),
                     std::make_move_iterator(samples.end()));
    return out;
  }

  std::vector<std::string> docs;
  for (const auto& s : samples) docs.push_back(s.doc_id);
  std::sort(docs.begin(), docs.end());
  docs.erase(std::unique(docs.begin(), docs.end()), docs.end());
  const auto n_test_docs = static_cast<std::size_t>(std::lround(cfg.test_size * static_cast<double>(docs.size())));
  if (n_test_docs == 0 || n_test_docs >= docs.size())
    throw DataError("test_size " + format_fixed(cfg.test_size, 4) + " leaves an empty side for " +
                    std::to_string(docs.size()) + " documents");
  rng.shuffle(docs);
  std::sort(docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(n_test_docs));
  auto in_test = [&](const std::string& id) {
    return std::binary_search(docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(n_test_docs), id);
  };
  for (auto& s : samples) (in_test(s.doc_id) ? out.test : out.train).push_back(std::move(s));
  return out;
}

std::size_t sample_word_count(const Sample& sample) {
  std::size_t marks = sample.clipped_start + sample.clipped_end;
  return count_words(sample.tokens) - std::min(marks, count_words(sample.tokens));
}

void write_samples(std::ostream& out, std::span<const Sample> samples) {
  for (const auto& s : samples) {
    nlohmann::json rec = {{"strategy_id", s.strategy_id},
                          {"doc_id", s.doc_id},
                          {"anchor", s.anchor},
                          {"label", to_string(s.label)},
                          {"window", {s.window.first, s.window.last}},
                          {"tokens", s.tokens}};
    out << rec.dump() << '\n';
  }
}

}  // namespace linkgap
