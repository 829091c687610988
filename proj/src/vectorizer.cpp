#include "linkgap/vectorizer.hpp"

#include <algorithm>

#include "json.hpp"
#include "linkgap/util.hpp"

namespace linkgap {

using nlohmann::json;

inline constexpr int kVocabularyVersion = 1;

void VectorizerParams::validate() const {
  if (ngram_low < 1 || ngram_high < ngram_low) throw UsageError("invalid n-gram range");
  if (!(max_df > 0.0 && max_df <= 1.0)) throw UsageError("max_df must lie in (0, 1]");
}

namespace {

template <typename Fn>
void for_each_ngram(std::span<const std::string> tokens, std::size_t low, std::size_t high, Fn&& fn) {
  std::string gram;
  for (std::size_t n = low; n <= high; ++n) {
    if (tokens.size() < n) break;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      gram = tokens[i];
      for (std::size_t j = 1; j < n; ++j) {
        gram += ' ';
        gram += tokens[i + j];
      }
      fn(gram);
    }
  }
}

}  // namespace

std::vector<std::string> extract_ngrams(std::span<const std::string> tokens, std::size_t low,
                                        std::size_t high) {
  std::vector<std::string> out;
  for_each_ngram(tokens, low, high, [&](const std::string& g) { out.push_back(g); });
  return out;
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> train_samples,
                             const VectorizerParams& params) {
  params.validate();
  if (train_samples.empty()) throw DataError("cannot build a vocabulary from zero samples");

  std::unordered_map<std::string, std::size_t> df;
  std::vector<std::string> grams;
  for (const auto& tokens : train_samples) {
    grams = extract_ngrams(tokens, params.ngram_low, params.ngram_high);
    std::sort(grams.begin(), grams.end());
    grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
    for (auto& g : grams) ++df[std::move(g)];
  }

  const double n = static_cast<double>(train_samples.size());
  Vocabulary v;
  v.params_ = params;
  v.n_train_ = train_samples.size();
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [gram, count] : df)
    if (count >= params.min_df && static_cast<double>(count) / n <= params.max_df)
      kept.emplace_back(gram, count);
  if (kept.empty()) throw DataError("vocabulary pruned to nothing; relax min_df/max_df");
  std::sort(kept.begin(), kept.end());
  v.terms_.reserve(kept.size());
  v.df_.reserve(kept.size());
  for (auto& [gram, count] : kept) {
    v.terms_.push_back(std::move(gram));
    v.df_.push_back(count);
  }
  v.index_terms();
  return v;
}

void Vocabulary::index_terms() {
  lookup_.clear();
  lookup_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i)
    lookup_.emplace(terms_[i], static_cast<std::uint32_t>(i));
}

std::optional<std::uint32_t> Vocabulary::index_of(std::string_view term) const {
  auto it = lookup_.find(std::string(term));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

SparseVector Vocabulary::vectorize(std::span<const std::string> tokens) const {
  std::vector<std::uint32_t> hits;
  for_each_ngram(tokens, params_.ngram_low, params_.ngram_high, [&](const std::string& g) {
    if (auto it = lookup_.find(g); it != lookup_.end()) hits.push_back(it->second);
  });
  std::sort(hits.begin(), hits.end());
  SparseVector out;
  out.dimension = terms_.size();
  for (std::uint32_t h : hits) {
    if (!out.entries.empty() && out.entries.back().index == h)
      ++out.entries.back().count;
    else
      out.entries.push_back({h, 1});
  }
  return out;
}

std::string Vocabulary::to_json() const {
  json table = json::array();
  for (std::size_t i = 0; i < terms_.size(); ++i) table.push_back(json::array({terms_[i], i, df_[i]}));
  json doc = {{"format", "linkgap.vocabulary"},
              {"version", kVocabularyVersion},
              {"params",
               {{"ngram_low", params_.ngram_low},
                {"ngram_high", params_.ngram_high},
                {"min_df", params_.min_df},
                {"max_df", params_.max_df}}},
              {"n_train_samples", n_train_},
              {"terms", std::move(table)}};
  return doc.dump();
}

Vocabulary Vocabulary::from_json(std::string_view text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw DataError("vocabulary file is not valid json");
  try {
    if (doc.at("format") != "linkgap.vocabulary") throw DataError("not a vocabulary file");
    if (doc.at("version").get<int>() != kVocabularyVersion) throw DataError("unsupported vocabulary version");
    Vocabulary v;
    const auto& p = doc.at("params");
    v.params_.ngram_low = p.at("ngram_low").get<std::size_t>();
    v.params_.ngram_high = p.at("ngram_high").get<std::size_t>();
    v.params_.min_df = p.at("min_df").get<std::size_t>();
    v.params_.max_df = p.at("max_df").get<double>();
    v.params_.validate();
    v.n_train_ = doc.at("n_train_samples").get<std::size_t>();
    const auto& table = doc.at("terms");
    v.terms_.resize(table.size());
    v.df_.resize(table.size());
    std::vector<char> seen(table.size(), 0);
    for (const auto& row : table) {
      auto idx = row.at(1).get<std::size_t>();
      if (idx >= table.size() || seen[idx]) throw DataError("vocabulary indices are not a bijection");
      seen[idx] = 1;
      v.terms_[idx] = row.at(0).get<std::string>();
      v.df_[idx] = row.at(2).get<std::size_t>();
    }
    v.index_terms();
    if (v.lookup_.size() != v.terms_.size()) throw DataError("duplicate vocabulary terms");
    return v;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed vocabulary file: ") + e.what());
  }
}

void Vocabulary::save(const std::filesystem::path& path) const { write_file_atomic(path, to_json()); }

Vocabulary Vocabulary::load(const std::filesystem::path& path) { return from_json(read_file(path)); }

}  // namespace linkgap
