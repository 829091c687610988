#pragma once

// Corpus ingestion: jsonlines articles -> cleaned, tokenized, labeled
// sentences with citation markers stripped and entities masked.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace linkgap {

enum class Label : unsigned char { WithoutLinks = 0, WithLinks = 1 };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

struct SentenceRecord {
  std::size_t index = 0;
  std::string raw_text;             // cleaned, markers still present
  std::vector<std::string> tokens;  // markers removed, entities masked
  Label label = Label::WithoutLinks;
  std::size_t citation_count = 0;
  std::size_t word_count = 0;
};

struct Document {
  std::string doc_id;
  std::vector<SentenceRecord> sentences;
  std::string source_path;

  std::size_t size() const { return sentences.size(); }
};

using Corpus = std::vector<Document>;

enum class MaskingMode { Off, MathNormalize, Custom };

std::string_view to_string(MaskingMode mode);
MaskingMode parse_masking_mode(std::string_view text);

using TokenMap = std::map<std::string, std::string, std::less<>>;

struct IngestConfig {
  std::string sentence_field = "article_text";
  std::string id_field = "article_id";
  std::string citation_marker = "@xcite";
  std::string math_marker_pattern = "@xmath[0-9]*";
  int min_words = 30;
  MaskingMode masking_mode = MaskingMode::MathNormalize;
  TokenMap custom_map;

  // Stage-1 removal hook (journal titles, ISBNs, ...). Applied to each raw
  // sentence before cleaning; empty means no-op.
  std::function<std::string(std::string_view)> scrub;

  void validate() const;
};

struct IngestReport {
  std::size_t lines_read = 0;
  std::size_t skipped_lines = 0;
  std::size_t documents = 0;
  std::size_t sentences = 0;
  std::vector<std::string> warnings;
};

struct IngestResult {
  Corpus corpus;
  IngestReport report;
};

std::string clean_text(std::string_view raw);

std::vector<std::string> tokenize(std::string_view text);

struct LabeledTokens {
  Label label = Label::WithoutLinks;
  std::vector<std::string> tokens;
  std::size_t citation_count = 0;
};

LabeledTokens label_and_strip(std::span<const std::string> tokens, std::string_view marker);

/// Replaces entity tokens with placeholder marks. Construction validates the
/// configuration (a Custom masker needs a non-empty map).
class EntityMasker {
 public:
  EntityMasker(MaskingMode mode, std::string_view math_pattern, TokenMap custom = {});

  std::vector<std::string> apply(std::span<const std::string> tokens) const;

 private:
  MaskingMode mode_;
  std::regex math_;
  TokenMap custom_;
};

std::vector<std::string> mask_entities(std::span<const std::string> tokens, MaskingMode mode,
                                       const TokenMap& custom = {});

// Number of tokens that carry at least one letter or digit.
std::size_t count_words(std::span<const std::string> tokens);

/// Indices of sentences longer than min_words words (strict).
std::vector<std::size_t> eligible_anchors(const Document& doc, int min_words);

// Builds one labeled Document from a list of raw sentence strings.
Document build_document(std::string doc_id, std::span<const std::string> raw_sentences,
                        const IngestConfig& cfg, std::string source_path = {});

IngestResult ingest_jsonlines(const std::string& path, const IngestConfig& cfg,
                              unsigned threads = 1);

// Drops sentences with word_count <= min_words and reindexes.
Document compact_document(const Document& doc, int min_words);

// Labeled corpus serialization, one sentence record per line.
inline constexpr int kCorpusSchemaVersion = 1;
void write_corpus(std::ostream& out, const Corpus& corpus);
std::string serialize_corpus(const Corpus& corpus);
Corpus read_corpus(std::istream& in);

}  // namespace linkgap
