#pragma once

// N-gram count vectorizer with document-frequency pruning. Each training
// sample counts as one "document" for df purposes.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace linkgap {

struct VectorizerParams {
  std::size_t ngram_low = 1;
  std::size_t ngram_high = 2;
  std::size_t min_df = 3;   // absolute
  double max_df = 0.7;      // fraction of training samples

  void validate() const;
};

struct SparseEntry {
  std::uint32_t index = 0;
  std::uint32_t count = 0;
  bool operator==(const SparseEntry&) const = default;
};

struct SparseVector {
  std::size_t dimension = 0;
  std::vector<SparseEntry> entries;  // strictly increasing index, count >= 1

  bool operator==(const SparseVector&) const = default;
};

// Unigrams first, then bigrams, ... (n-grams joined by single spaces).
std::vector<std::string> extract_ngrams(std::span<const std::string> tokens, std::size_t low = 1,
                                        std::size_t high = 2);

class Vocabulary {
 public:
  static Vocabulary build(std::span<const std::vector<std::string>> train_samples,
                          const VectorizerParams& params);

  std::size_t size() const { return terms_.size(); }
  const VectorizerParams& params() const { return params_; }
  std::size_t n_train_samples() const { return n_train_; }

  std::optional<std::uint32_t> index_of(std::string_view term) const;
  const std::string& term(std::uint32_t index) const { return terms_[index]; }
  std::size_t df(std::uint32_t index) const { return df_[index]; }

  SparseVector vectorize(std::span<const std::string> tokens) const;

  std::string to_json() const;
  static Vocabulary from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  void index_terms();

  VectorizerParams params_;
  std::size_t n_train_ = 0;
  std::vector<std::string> terms_;  // lexicographic; position = feature index
  std::vector<std::size_t> df_;
  std::unordered_map<std::string, std::uint32_t> lookup_;
};

inline SparseVector vectorize(std::span<const std::string> tokens, const Vocabulary& vocab) {
  return vocab.vectorize(tokens);
}

}  // namespace linkgap
