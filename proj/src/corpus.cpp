#include "linkgap/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "linkgap/util.hpp"

namespace linkgap {

using nlohmann::json;

std::string_view to_string(Label label) {
  return label == Label::WithLinks ? "WithLinks" : "WithoutLinks";
}

Label parse_label(std::string_view text) {
  if (text == "WithLinks") return Label::WithLinks;
  if (text == "WithoutLinks") return Label::WithoutLinks;
  throw DataError("unknown label '" + std::string(text) + "'");
}

std::string_view to_string(MaskingMode mode) {
  switch (mode) {
    case MaskingMode::Off: return "off";
    case MaskingMode::MathNormalize: return "math";
    case MaskingMode::Custom: return "custom";
  }
  return "off";
}

MaskingMode parse_masking_mode(std::string_view text) {
  if (text == "off") return MaskingMode::Off;
  if (text == "math") return MaskingMode::MathNormalize;
  if (text == "custom") return MaskingMode::Custom;
  throw UsageError("unknown masking mode '" + std::string(text) + "' (off|math|custom)");
}

void IngestConfig::validate() const {
  if (min_words < 0) throw UsageError("min_words must be >= 0");
  if (citation_marker.empty()) throw UsageError("citation_marker must be non-empty");
  if (sentence_field.empty()) throw UsageError("sentence_field must be non-empty");
  if (masking_mode == MaskingMode::Custom && custom_map.empty())
    throw UsageError("custom masking requires a token map");
}

namespace {

bool is_space_or_control(unsigned char c) {
  return c == ' ' || c < 0x20 || c == 0x7f;
}

bool is_ascii_word(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Length of the UTF-8 sequence starting at s[i], and its code point.
// Malformed bytes decode as a single byte with code point 0xFFFD.
std::size_t decode_utf8(std::string_view s, std::size_t i, char32_t& cp) {
  unsigned char c = static_cast<unsigned char>(s[i]);
  std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3 : (c >> 3) == 0x1e ? 4 : 0;
  if (len == 0 || i + len > s.size()) {
    cp = 0xFFFD;
    return 1;
  }
  if (len == 1) {
    cp = c;
    return 1;
  }
  cp = c & (0xff >> (len + 1));
  for (std::size_t k = 1; k < len; ++k) {
    unsigned char cc = static_cast<unsigned char>(s[i + k]);
    if ((cc >> 6) != 0x2) {
      cp = 0xFFFD;
      return 1;
    }
    cp = (cp << 6) | (cc & 0x3f);
  }
  return len;
}

// Non-ASCII punctuation and typographic symbols become standalone tokens.
bool is_symbol_codepoint(char32_t cp) {
  return (cp >= 0xA1 && cp <= 0xBF) || cp == 0xD7 || cp == 0xF7 || (cp >= 0x2000 && cp <= 0x206F) ||
         (cp >= 0x20A0 && cp <= 0x20CF) || (cp >= 0x2100 && cp <= 0x2BFF) ||
         (cp >= 0x3000 && cp <= 0x303F) || (cp >= 0xFE30 && cp <= 0xFE4F) ||
         (cp >= 0xFF01 && cp <= 0xFF0F);
}

void lowercase_ascii(std::string& s) {
  for (char& c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
}

}  // namespace

std::string clean_text(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char ch : raw) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (is_space_or_control(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(ch);
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      lowercase_ascii(word);
      tokens.push_back(std::move(word));
      word.clear();
    }
  };

  std::size_t i = 0;
  while (i < text.size()) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (is_space_or_control(c)) {
      flush();
      ++i;
      continue;
    }
    // Marker tokens: '@' followed by a run of ASCII word characters.
    if (c == '@' && i + 1 < text.size() && is_ascii_word(static_cast<unsigned char>(text[i + 1]))) {
      flush();
      std::size_t j = i + 1;
      while (j < text.size() && is_ascii_word(static_cast<unsigned char>(text[j]))) ++j;
      word.assign(text.substr(i, j - i));
      flush();
      i = j;
      continue;
    }
    if (c < 0x80) {
      if (is_ascii_word(c)) {
        word.push_back(static_cast<char>(c));
      } else {
        flush();
        tokens.emplace_back(1, static_cast<char>(c));
      }
      ++i;
      continue;
    }
    char32_t cp = 0;
    std::size_t len = decode_utf8(text, i, cp);
    if (is_symbol_codepoint(cp)) {
      flush();
      tokens.emplace_back(text.substr(i, len));
    } else {
      word.append(text.substr(i, len));
    }
    i += len;
  }
  flush();
  return tokens;
}

LabeledTokens label_and_strip(std::span<const std::string> tokens, std::string_view marker) {
  LabeledTokens out;
  out.tokens.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (t == marker)
      ++out.citation_count;
    else
      out.tokens.push_back(t);
  }
  out.label = out.citation_count > 0 ? Label::WithLinks : Label::WithoutLinks;
  return out;
}

EntityMasker::EntityMasker(MaskingMode mode, std::string_view math_pattern, TokenMap custom)
    : mode_(mode), custom_(std::move(custom)) {
  if (mode_ == MaskingMode::Custom && custom_.empty())
    throw UsageError("custom masking requires a token map");
  if (mode_ == MaskingMode::MathNormalize) {
    try {
      math_ = std::regex(std::string(math_pattern), std::regex::ECMAScript | std::regex::optimize);
    } catch (const std::regex_error& e) {
      throw UsageError("invalid math marker pattern '" + std::string(math_pattern) + "': " + e.what());
    }
  }
}

std::vector<std::string> EntityMasker::apply(std::span<const std::string> tokens) const {
  std::vector<std::string> out(tokens.begin(), tokens.end());
  switch (mode_) {
    case MaskingMode::Off:
      break;
    case MaskingMode::MathNormalize:
      for (auto& t : out)
        if (!t.empty() && t[0] == '@' && std::regex_match(t, math_)) t = "@xmath";
      break;
    case MaskingMode::Custom:
      for (auto& t : out)
        if (auto it = custom_.find(t); it != custom_.end()) t = it->second;
      break;
  }
  return out;
}

std::vector<std::string> mask_entities(std::span<const std::string> tokens, MaskingMode mode,
                                       const TokenMap& custom) {
  return EntityMasker(mode, "@xmath[0-9]*", custom).apply(tokens);
}

std::size_t count_words(std::span<const std::string> tokens) {
  std::size_t n = 0;
  for (const auto& t : tokens) {
    for (std::size_t i = 0; i < t.size();) {
      unsigned char c = static_cast<unsigned char>(t[i]);
      if (c < 0x80) {
        if (is_ascii_word(c) && c != '_') {
          ++n;
          break;
        }
        ++i;
        continue;
      }
      char32_t cp = 0;
      std::size_t len = decode_utf8(t, i, cp);
      if (!is_symbol_codepoint(cp)) {
        ++n;
        break;
      }
      i += len;
    }
  }
  return n;
}

std::vector<std::size_t> eligible_anchors(const Document& doc, int min_words) {
  std::vector<std::size_t> out;
  for (const auto& s : doc.sentences)
    if (static_cast<long long>(s.word_count) > min_words) out.push_back(s.index);
  return out;
}

namespace {

Document build_document_with(std::string doc_id, std::span<const std::string> raw_sentences,
                             const IngestConfig& cfg, const EntityMasker& masker,
                             const std::string& marker, std::string source_path) {
  Document doc;
  doc.doc_id = std::move(doc_id);
  doc.source_path = std::move(source_path);
  doc.sentences.reserve(raw_sentences.size());
  for (std::size_t i = 0; i < raw_sentences.size(); ++i) {
    SentenceRecord rec;
    rec.index = i;
    rec.raw_text = clean_text(cfg.scrub ? cfg.scrub(raw_sentences[i]) : raw_sentences[i]);
    auto labeled = label_and_strip(tokenize(rec.raw_text), marker);
    rec.label = labeled.label;
    rec.citation_count = labeled.citation_count;
    rec.tokens = masker.apply(labeled.tokens);
    rec.word_count = count_words(rec.tokens);
    doc.sentences.push_back(std::move(rec));
  }
  return doc;
}

std::string lowered(std::string s) {
  lowercase_ascii(s);
  return s;
}

}  // namespace

Document build_document(std::string doc_id, std::span<const std::string> raw_sentences,
                        const IngestConfig& cfg, std::string source_path) {
  cfg.validate();
  EntityMasker masker(cfg.masking_mode, cfg.math_marker_pattern, cfg.custom_map);
  return build_document_with(std::move(doc_id), raw_sentences, cfg, masker,
                             lowered(cfg.citation_marker), std::move(source_path));
}

IngestResult ingest_jsonlines(const std::string& path, const IngestConfig& cfg, unsigned threads) {
  cfg.validate();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read corpus file " + path);

  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  if (in.bad()) throw DataError("I/O error while reading " + path);

  EntityMasker masker(cfg.masking_mode, cfg.math_marker_pattern, cfg.custom_map);
  const std::string marker = lowered(cfg.citation_marker);

  struct LineResult {
    std::optional<Document> doc;
    std::string warning;
    bool blank = false;
  };
  std::vector<LineResult> results(lines.size());

  auto process = [&](std::size_t i) {
    auto& r = results[i];
    std::string_view line = trim(lines[i]);
    if (line.empty()) {
      r.blank = true;
      return;
    }
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      r.warning = "line " + std::to_string(i + 1) + ": not a json object";
      return;
    }
    auto field = obj.find(cfg.sentence_field);
    if (field == obj.end() || !field->is_array()) {
      r.warning = "line " + std::to_string(i + 1) + ": missing list field '" + cfg.sentence_field + "'";
      return;
    }
    std::vector<std::string> raw;
    raw.reserve(field->size());
    for (const auto& s : *field) {
      if (!s.is_string()) {
        r.warning = "line " + std::to_string(i + 1) + ": non-string sentence";
        return;
      }
      raw.push_back(s.get<std::string>());
    }
    std::string id = "line-" + std::to_string(i + 1);
    if (auto idf = obj.find(cfg.id_field); idf != obj.end()) {
      if (idf->is_string())
        id = idf->get<std::string>();
      else if (idf->is_number_integer())
        id = std::to_string(idf->get<long long>());
    }
    r.doc = build_document_with(std::move(id), raw, cfg, masker, marker, path);
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(lines.size() / 64 + 1)));
  if (threads == 1) {
    for (std::size_t i = 0; i < lines.size(); ++i) process(i);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < lines.size(); i += threads) process(i);
      });
  }

  IngestResult out;
  for (auto& r : results) {
    if (r.blank) continue;
    ++out.report.lines_read;
    if (!r.doc) {
      ++out.report.skipped_lines;
      out.report.warnings.push_back(std::move(r.warning));
      continue;
    }
    out.report.sentences += r.doc->sentences.size();
    out.corpus.push_back(std::move(*r.doc));
  }
  out.report.documents = out.corpus.size();
  if (out.corpus.empty()) throw DataError("empty corpus after ingest: " + path);
  return out;
}

Document compact_document(const Document& doc, int min_words) {
  Document out;
  out.doc_id = doc.doc_id;
  out.source_path = doc.source_path;
  for (const auto& s : doc.sentences) {
    if (static_cast<long long>(s.word_count) <= min_words) continue;
    SentenceRecord rec = s;
    rec.index = out.sentences.size();
    out.sentences.push_back(std::move(rec));
  }
  return out;
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& doc : corpus) {
    for (const auto& s : doc.sentences) {
      json rec = {{"v", kCorpusSchemaVersion},
                  {"doc_id", doc.doc_id},
                  {"index", s.index},
                  {"label", to_string(s.label)},
                  {"citation_count", s.citation_count},
                  {"word_count", s.word_count},
                  {"tokens", s.tokens}};
      out << rec.dump() << '\n';
    }
  }
}

std::string serialize_corpus(const Corpus& corpus) {
  std::ostringstream ss;
  write_corpus(ss, corpus);
  return ss.str();
}

Corpus read_corpus(std::istream& in) {
  Corpus corpus;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (trim(line).empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object())
      throw DataError("corpus line " + std::to_string(lineno) + ": malformed record");
    try {
      if (rec.at("v").get<int>() != kCorpusSchemaVersion)
        throw DataError("corpus line " + std::to_string(lineno) + ": unsupported schema version");
      std::string doc_id = rec.at("doc_id").get<std::string>();
      if (corpus.empty() || corpus.back().doc_id != doc_id) corpus.push_back(Document{doc_id, {}, {}});
      SentenceRecord s;
      s.index = rec.at("index").get<std::size_t>();
      if (s.index != corpus.back().sentences.size())
        throw DataError("corpus line " + std::to_string(lineno) + ": sentence index out of order");
      s.label = parse_label(rec.at("label").get<std::string>());
      s.citation_count = rec.at("citation_count").get<std::size_t>();
      s.word_count = rec.at("word_count").get<std::size_t>();
      s.tokens = rec.at("tokens").get<std::vector<std::string>>();
      corpus.back().sentences.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw DataError("corpus line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return corpus;
}

}  // namespace linkgap
