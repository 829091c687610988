#pragma once

// Shared fixtures for the unit tests.

#include <filesystem>
#include <string>
#include <vector>

#include "linkgap/corpus.hpp"
#include "linkgap/util.hpp"

namespace linkgap::testing {

// A document whose sentence i has word_counts[i] distinct words and the given
// label. Tokens are "d<doc>s<i>w<j>" so every window is recognizable.
inline Document make_document(const std::string& id, const std::vector<bool>& with_links,
                              const std::vector<std::size_t>& word_counts = {}) {
  Document doc;
  doc.doc_id = id;
  for (std::size_t i = 0; i < with_links.size(); ++i) {
    SentenceRecord s;
    s.index = i;
    s.label = with_links[i] ? Label::WithLinks : Label::WithoutLinks;
    s.citation_count = with_links[i] ? 1 : 0;
    const std::size_t words = word_counts.empty() ? 31 : word_counts[i];
    for (std::size_t j = 0; j < words; ++j) s.tokens.push_back(id + "s" + std::to_string(i) + "w" + std::to_string(j));
    s.word_count = words;
    s.raw_text = join(s.tokens, " ");
    doc.sentences.push_back(std::move(s));
  }
  return doc;
}

inline std::vector<bool> random_labels(Rng& rng, std::size_t n, double p) {
  std::vector<bool> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = rng.bernoulli(p);
  return out;
}

// Fresh scratch directory under the system temp dir, removed on scope exit.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("linkgap-" + tag + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace linkgap::testing
