#include "linkgap/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "json.hpp"
#include "linkgap/util.hpp"

namespace linkgap {

using nlohmann::json;

namespace {

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  std::string s(trim(v));
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw UsageError("'" + std::string(key) + "' expects a non-negative integer, got '" + s + "'");
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw UsageError("'" + std::string(key) + "' is out of range: '" + s + "'");
  }
}

double parse_real(std::string_view key, std::string_view v) {
  std::string s(trim(v));
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size()) throw UsageError("'" + std::string(key) + "' expects a number, got '" + s + "'");
  return x;
}

bool parse_bool(std::string_view key, std::string_view v) {
  std::string s(trim(v));
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw UsageError("'" + std::string(key) + "' expects true/false, got '" + s + "'");
}

// Shortest round-trip decimal form.
std::string num(double v) { return json(v).dump(); }

std::string format_sets(const std::vector<std::vector<int>>& sets) {
  if (sets.empty()) return "auto";
  std::string out;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (i) out += ';';
    for (std::size_t j = 0; j < sets[i].size(); ++j) {
      if (j) out += ',';
      out += std::to_string(sets[i][j]);
    }
  }
  return out;
}

std::vector<std::vector<int>> parse_sets(std::string_view text) {
  std::vector<std::vector<int>> sets;
  if (trim(text) == "auto" || trim(text).empty()) return sets;
  for (const auto& group : split(text, ';')) {
    std::vector<int> ids;
    for (const auto& item : split(group, ','))
      ids.push_back(static_cast<int>(parse_uint("ensemble_sets", item)));
    std::sort(ids.begin(), ids.end());
    sets.push_back(std::move(ids));
  }
  return sets;
}

TokenMap load_token_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read mask map " + path);
  TokenMap map;
  for (std::string line; std::getline(in, line);) {
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto sep = t.find_first_of(" \t");
    if (sep == std::string_view::npos) throw UsageError("mask map line needs 'token replacement': " + std::string(t));
    map.emplace(std::string(t.substr(0, sep)), std::string(trim(t.substr(sep))));
  }
  return map;
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = {
      "averaging",      "batch_size",     "citation_marker", "corpus",        "ensemble_sets",
      "filter_context", "hard_rule",      "hard_threshold",  "hidden_units",  "id_field",
      "input",          "jobs",           "l2",              "learning_rate", "mask_map",
      "masking",        "math_pattern",   "max_df",          "max_epochs",    "min_df",
      "min_words",      "negative_stride", "ngram_high",     "ngram_low",     "output_dir",
      "patience",       "resume",         "seed",            "sentence_field", "soft_threshold",
      "split_unit",     "strategies",     "test_size",       "tol"};
  return k;
}

std::vector<SamplingStrategy> parse_strategies(std::string_view text) {
  auto t = trim(text);
  if (t == "default" || t.empty()) return default_strategies();
  const auto grid = default_strategies();
  std::vector<SamplingStrategy> out;
  for (const auto& item : split(t, ',')) {
    auto parts = split(trim(item), ':');
    if (parts.size() == 1) {
      auto id = static_cast<int>(parse_uint("strategies", parts[0]));
      auto it = std::find_if(grid.begin(), grid.end(), [&](const auto& s) { return s.id == id; });
      if (it == grid.end()) throw UsageError("unknown strategy id " + std::to_string(id) + " (custom: id:n:m)");
      out.push_back(*it);
    } else if (parts.size() == 3) {
      out.push_back({static_cast<int>(parse_uint("strategies", parts[0])),
                     static_cast<std::size_t>(parse_uint("strategies", parts[1])),
                     static_cast<std::size_t>(parse_uint("strategies", parts[2]))});
    } else {
      throw UsageError("bad strategy entry '" + std::string(item) + "'");
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].id == out[i - 1].id) throw UsageError("duplicate strategy id " + std::to_string(out[i].id));
  return out;
}

std::string format_strategies(const std::vector<SamplingStrategy>& strategies) {
  std::vector<std::string> parts;
  for (const auto& s : strategies)
    parts.push_back(std::to_string(s.id) + ":" + std::to_string(s.before) + ":" + std::to_string(s.after));
  return join(parts, ",");
}

void RunConfig::set(std::string_view key_in, std::string_view value_in) {
  const std::string key(trim(key_in));
  const std::string value(trim(value_in));
  auto size = [&] { return static_cast<std::size_t>(parse_uint(key, value)); };
  if (key == "input") input = value;
  else if (key == "corpus") corpus = value;
  else if (key == "output_dir") output_dir = value;
  else if (key == "seed") master_seed = parse_uint(key, value);
  else if (key == "sentence_field") ingest.sentence_field = value;
  else if (key == "id_field") ingest.id_field = value;
  else if (key == "citation_marker") ingest.citation_marker = value;
  else if (key == "math_pattern") ingest.math_marker_pattern = value;
  else if (key == "min_words") ingest.min_words = static_cast<int>(parse_uint(key, value));
  else if (key == "masking") ingest.masking_mode = parse_masking_mode(value);
  else if (key == "mask_map") {
    mask_map = value;
    ingest.custom_map = value.empty() ? TokenMap{} : load_token_map(value);
  } else if (key == "filter_context") filter_context = parse_bool(key, value);
  else if (key == "strategies") strategies = parse_strategies(value);
  else if (key == "negative_stride") negative_stride = size();
  else if (key == "test_size") test_size = parse_real(key, value);
  else if (key == "split_unit") split_unit = parse_split_unit(value);
  else if (key == "min_df") vectorizer.min_df = size();
  else if (key == "max_df") vectorizer.max_df = parse_real(key, value);
  else if (key == "ngram_low") vectorizer.ngram_low = size();
  else if (key == "ngram_high") vectorizer.ngram_high = size();
  else if (key == "hidden_units") mlp.hidden_units = size();
  else if (key == "learning_rate") mlp.learning_rate = parse_real(key, value);
  else if (key == "batch_size") mlp.batch_size = size();
  else if (key == "max_epochs") mlp.max_epochs = size();
  else if (key == "tol") mlp.tol = parse_real(key, value);
  else if (key == "patience") mlp.patience = size();
  else if (key == "l2") mlp.l2 = parse_real(key, value);
  else if (key == "soft_threshold") soft_threshold = parse_real(key, value);
  else if (key == "hard_threshold") {
    hard_threshold_auto = value == "auto";
    if (!hard_threshold_auto) hard_threshold = parse_real(key, value);
  } else if (key == "hard_rule") hard_rule = parse_hard_rule(value);
  else if (key == "ensemble_sets") ensemble_sets = parse_sets(value);
  else if (key == "averaging") {
    if (value == "weighted") averaging = Averaging::Weighted;
    else if (value == "macro") averaging = Averaging::Macro;
    else throw UsageError("averaging must be weighted or macro");
  } else if (key == "jobs") jobs = static_cast<unsigned>(std::max<std::uint64_t>(1, parse_uint(key, value)));
  else if (key == "resume") resume = parse_bool(key, value);
  else throw UsageError("unknown configuration key '" + key + "'");
}

void RunConfig::apply_text(std::string_view text) {
  std::size_t lineno = 0;
  for (const auto& raw : split(text, '\n')) {
    ++lineno;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
    set(line.substr(0, eq), line.substr(eq + 1));
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_text(ss.str());
}

std::string RunConfig::canonical() const {
  std::map<std::string, std::string> kv = {
      {"averaging", averaging == Averaging::Weighted ? "weighted" : "macro"},
      {"batch_size", std::to_string(mlp.batch_size)},
      {"citation_marker", ingest.citation_marker},
      {"corpus", corpus},
      {"ensemble_sets", format_sets(ensemble_sets)},
      {"filter_context", filter_context ? "true" : "false"},
      {"hard_rule", std::string(to_string(hard_rule))},
      {"hard_threshold", hard_threshold_auto ? "auto" : num(hard_threshold)},
      {"hidden_units", std::to_string(mlp.hidden_units)},
      {"id_field", ingest.id_field},
      {"input", input},
      {"l2", num(mlp.l2)},
      {"learning_rate", num(mlp.learning_rate)},
      {"mask_map", mask_map},
      {"masking", std::string(to_string(ingest.masking_mode))},
      {"math_pattern", ingest.math_marker_pattern},
      {"max_df", num(vectorizer.max_df)},
      {"max_epochs", std::to_string(mlp.max_epochs)},
      {"min_df", std::to_string(vectorizer.min_df)},
      {"min_words", std::to_string(ingest.min_words)},
      {"negative_stride", std::to_string(negative_stride)},
      {"ngram_high", std::to_string(vectorizer.ngram_high)},
      {"ngram_low", std::to_string(vectorizer.ngram_low)},
      {"output_dir", output_dir},
      {"patience", std::to_string(mlp.patience)},
      {"seed", std::to_string(master_seed)},
      {"sentence_field", ingest.sentence_field},
      {"soft_threshold", num(soft_threshold)},
      {"split_unit", std::string(to_string(split_unit))},
      {"strategies", format_strategies(strategies)},
      {"test_size", num(test_size)},
      {"tol", num(mlp.tol)}};
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string RunConfig::hash() const { return Fnv1a().update(canonical()).hex(); }

std::uint64_t RunConfig::strategy_seed(int strategy_id) const {
  return master_seed + static_cast<std::uint64_t>(strategy_id);
}

SplitConfig RunConfig::split_config(int strategy_id) const {
  SplitConfig sc;
  sc.test_size = test_size;
  sc.unit = split_unit;
  // Whole-document splits share one partition across strategies so the
  // ensemble evaluation anchors never appear in any estimator's training set.
  sc.seed = split_unit == SplitUnit::PerDocument ? master_seed : strategy_seed(strategy_id);
  return sc;
}

void RunConfig::validate() const {
  ingest.validate();
  if (input.empty() == corpus.empty()) throw UsageError("set exactly one of 'input' or 'corpus'");
  if (strategies.empty()) throw UsageError("no sampling strategies selected");
  if (negative_stride == 0) throw UsageError("negative_stride must be positive");
  split_config(0).validate();
  vectorizer.validate();
  mlp.validate();
  std::set<int> ids;
  for (const auto& s : strategies) ids.insert(s.id);
  for (const auto& set : ensemble_sets) {
    if (set.empty()) throw UsageError("empty ensemble set");
    for (int id : set)
      if (!ids.count(id)) throw UsageError("ensemble set references unselected strategy " + std::to_string(id));
  }
}

namespace {

std::mutex g_log_mutex;

void note(const RunConfig& cfg, const std::string& msg) {
  if (!cfg.log) return;
  std::lock_guard lock(g_log_mutex);
  *cfg.log << msg << '\n';
}

[[noreturn]] void rethrow_with_context(std::exception_ptr ep, const std::string& context) {
  try {
    std::rethrow_exception(ep);
  } catch (const UsageError& e) {
    throw UsageError(context + e.what());
  } catch (const DataError& e) {
    throw DataError(context + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError(context + e.what());
  } catch (const std::bad_alloc&) {
    throw;
  } catch (const std::exception& e) {
    throw InvariantError(context + e.what());
  }
}

template <typename Fn>
void run_parallel(std::size_t n, unsigned jobs, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  auto guarded = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) guarded(i);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < jobs; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < n; i += jobs) guarded(i);
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

IngestSummary summarize(const Corpus& corpus, const IngestReport& report, int min_words) {
  IngestSummary s;
  s.report = report;
  for (const auto& doc : corpus) {
    for (std::size_t i : eligible_anchors(doc, min_words)) {
      ++s.eligible_anchors;
      if (doc.sentences[i].label == Label::WithLinks) ++s.positive_anchors;
    }
  }
  s.positive_fraction = s.eligible_anchors
                            ? static_cast<double>(s.positive_anchors) / static_cast<double>(s.eligible_anchors)
                            : 0.0;
  return s;
}

IngestResult load_input(const RunConfig& cfg) {
  IngestResult out;
  if (!cfg.corpus.empty()) {
    std::ifstream in(cfg.corpus, std::ios::binary);
    if (!in) throw DataError("cannot read corpus " + cfg.corpus);
    out.corpus = read_corpus(in);
    if (out.corpus.empty()) throw DataError("empty corpus: " + cfg.corpus);
    out.report.documents = out.corpus.size();
    for (const auto& d : out.corpus) out.report.sentences += d.sentences.size();
    out.report.lines_read = out.report.sentences;
  } else {
    out = ingest_jsonlines(cfg.input, cfg.ingest, cfg.jobs);
  }
  // Document ids key the per-document split; make them unique.
  std::unordered_map<std::string, std::size_t> seen;
  for (auto& doc : out.corpus) {
    auto n = ++seen[doc.doc_id];
    if (n > 1) {
      out.report.warnings.push_back("duplicate document id '" + doc.doc_id + "' renamed");
      doc.doc_id += "#" + std::to_string(n);
    }
  }
  return out;
}

namespace {

json ingest_json(const IngestSummary& s) {
  return json{{"format", "linkgap.ingest"},
              {"version", 1},
              {"lines_read", s.report.lines_read},
              {"skipped_lines", s.report.skipped_lines},
              {"documents", s.report.documents},
              {"sentences", s.report.sentences},
              {"eligible_anchors", s.eligible_anchors},
              {"positive_anchors", s.positive_anchors},
              {"positive_fraction", std::round(s.positive_fraction * 1e4) / 1e4},
              {"warnings", s.report.warnings}};
}

}  // namespace

IngestSummary run_ingest(const RunConfig& cfg) {
  cfg.ingest.validate();
  if (cfg.input.empty()) throw UsageError("ingest needs an input file");
  IngestResult r = ingest_jsonlines(cfg.input, cfg.ingest, cfg.jobs);
  IngestSummary s = summarize(r.corpus, r.report, cfg.ingest.min_words);
  const std::filesystem::path dir(cfg.output_dir);
  write_file_atomic(dir / "corpus.jsonl", serialize_corpus(r.corpus));
  write_file_atomic(dir / "ingest.json", ingest_json(s).dump(2) + "\n");
  for (const auto& w : r.report.warnings) note(cfg, "warning: " + w);
  return s;
}

namespace {

struct StrategyOutcome {
  StrategyRow row;
  Vocabulary vocabulary;
  MLPModel model;
  std::vector<LengthBin> lengths;
  std::filesystem::path artifact_dir;
  bool cached = false;
  double seconds = 0.0;
};

struct CorpusIndex {
  const Corpus& corpus;
  std::vector<std::vector<std::size_t>> anchors;
  std::unordered_map<std::string, std::size_t> position;

  CorpusIndex(const Corpus& c, int min_words) : corpus(c) {
    anchors.reserve(c.size());
    for (std::size_t d = 0; d < c.size(); ++d) {
      anchors.push_back(eligible_anchors(c[d], min_words));
      position.emplace(c[d].doc_id, d);
    }
  }
  const Document& doc(const std::string& id) const { return corpus[position.at(id)]; }
};

std::size_t window_words(const Document& doc, Window w) {
  std::size_t n = 0;
  for (std::size_t i = w.first; i <= w.last; ++i) n += doc.sentences[i].word_count;
  return n;
}

std::vector<Sample> enumerate_samples(const CorpusIndex& idx, const SamplingStrategy& s, std::size_t stride) {
  SamplerOptions opt;
  opt.negative_stride = stride;
  opt.with_tokens = false;
  std::vector<Sample> all;
  for (std::size_t d = 0; d < idx.corpus.size(); ++d) {
    auto pos = positive_samples(idx.corpus[d], s, idx.anchors[d], opt);
    auto neg = negative_samples(idx.corpus[d], s, idx.anchors[d], opt);
    all.insert(all.end(), std::make_move_iterator(pos.begin()), std::make_move_iterator(pos.end()));
    all.insert(all.end(), std::make_move_iterator(neg.begin()), std::make_move_iterator(neg.end()));
  }
  return all;
}

std::string cache_key(const RunConfig& cfg, const SamplingStrategy& s, const std::string& corpus_hash) {
  std::ostringstream k;
  k << corpus_hash << '|' << s.id << ':' << s.before << ':' << s.after << '|' << cfg.negative_stride << '|'
    << cfg.ingest.min_words << '|' << num(cfg.test_size) << '|' << to_string(cfg.split_unit) << '|'
    << cfg.split_config(s.id).seed << '|' << cfg.strategy_seed(s.id) << '|' << cfg.vectorizer.ngram_low << ':'
    << cfg.vectorizer.ngram_high << ':' << cfg.vectorizer.min_df << ':' << num(cfg.vectorizer.max_df) << '|'
    << cfg.mlp.hidden_units << ':' << num(cfg.mlp.learning_rate) << ':' << cfg.mlp.batch_size << ':'
    << cfg.mlp.max_epochs << ':' << num(cfg.mlp.tol) << ':' << cfg.mlp.patience << ':' << num(cfg.mlp.l2);
  return Fnv1a().update(k.str()).hex();
}

StrategyOutcome run_strategy(const CorpusIndex& idx, const SamplingStrategy& s, const RunConfig& cfg,
                             const std::filesystem::path& out_dir, const std::string& corpus_hash) {
  const auto t0 = std::chrono::steady_clock::now();
  StrategyOutcome out;
  std::string stage = "sample";
  try {
    auto all = enumerate_samples(idx, s, cfg.negative_stride);
    std::map<std::pair<Label, std::size_t>, std::size_t> hist;
    for (const auto& smp : all) ++hist[{smp.label, window_words(idx.doc(smp.doc_id), smp.window)}];
    for (const auto& [key, count] : hist) out.lengths.push_back({s.id, key.first, key.second, count});
    const ClassCounts before = count_classes(all);
    out.row.strategy = s;
    out.row.positives = before.positive;
    out.row.negatives = before.negative;

    stage = "undersample";
    auto balanced = undersample(std::move(all), cfg.strategy_seed(s.id));
    stage = "split";
    auto split = split_train_test(std::move(balanced), cfg.split_config(s.id));
    for (auto& smp : split.train) materialize(smp, idx.doc(smp.doc_id));
    for (auto& smp : split.test) materialize(smp, idx.doc(smp.doc_id));
    out.row.train = split.train.size();
    out.row.test = split.test.size();

    stage = "vectorize";
    out.artifact_dir = out_dir / "cache" / ("s" + std::to_string(s.id) + "-" + cache_key(cfg, s, corpus_hash));
    const auto model_path = out.artifact_dir / "model.json";
    const auto vocab_path = out.artifact_dir / "vocab.json";
    out.cached = cfg.resume && std::filesystem::exists(model_path) && std::filesystem::exists(vocab_path);
    if (out.cached) {
      out.vocabulary = Vocabulary::load(vocab_path);
    } else {
      std::vector<std::vector<std::string>> train_tokens;
      train_tokens.reserve(split.train.size());
      for (const auto& smp : split.train) train_tokens.push_back(smp.tokens);
      out.vocabulary = Vocabulary::build(train_tokens, cfg.vectorizer);
    }
    std::vector<SparseVector> x_train, x_test;
    std::vector<Label> y_train, y_test;
    for (const auto& smp : split.train) {
      x_train.push_back(out.vocabulary.vectorize(smp.tokens));
      y_train.push_back(smp.label);
    }
    for (const auto& smp : split.test) {
      x_test.push_back(out.vocabulary.vectorize(smp.tokens));
      y_test.push_back(smp.label);
    }

    stage = "train";
    if (out.cached) {
      out.model = MLPModel::load(model_path);
      if (out.model.input_dim() != out.vocabulary.size())
        throw DataError("cached model does not match its vocabulary");
    } else {
      MLPHyperparams hp = cfg.mlp;
      hp.seed = cfg.strategy_seed(s.id);
      out.model = train(x_train, y_train, hp);
      out.vocabulary.save(vocab_path);
      out.model.save(model_path);
    }

    stage = "evaluate";
    std::vector<Label> y_pred;
    for (const auto& x : x_test)
      y_pred.push_back(out.model.predict_proba(x)[1] > 0.5 ? Label::WithLinks : Label::WithoutLinks);
    out.row.metrics = metrics(confusion(y_test, y_pred), cfg.averaging);
  } catch (...) {
    rethrow_with_context(std::current_exception(),
                         "strategy " + std::to_string(s.id) + ", stage " + stage + ": ");
  }
  out.seconds = seconds_since(t0);
  return out;
}

Metrics score(const std::vector<AnchorPrediction>& preds, const std::vector<Label>& decisions, Averaging avg) {
  std::vector<Label> truth;
  truth.reserve(preds.size());
  for (const auto& p : preds) truth.push_back(p.truth);
  return metrics(confusion(truth, decisions), avg);
}

json strategy_entry(const StrategyOutcome& o, const std::filesystem::path& out_dir) {
  return json{{"id", o.row.strategy.id},
              {"n", o.row.strategy.before},
              {"m", o.row.strategy.after},
              {"model", std::filesystem::relative(o.artifact_dir / "model.json", out_dir).generic_string()},
              {"vocabulary", std::filesystem::relative(o.artifact_dir / "vocab.json", out_dir).generic_string()}};
}

}  // namespace

std::vector<AnchorRef> evaluation_anchors(const Corpus& corpus, const RunConfig& cfg) {
  CorpusIndex idx(corpus, cfg.ingest.min_words);
  const SamplingStrategy single{0, 0, 0};
  auto balanced = undersample(enumerate_samples(idx, single, cfg.negative_stride), cfg.strategy_seed(0));
  auto split = split_train_test(std::move(balanced), cfg.split_config(0));
  std::vector<AnchorRef> anchors;
  anchors.reserve(split.test.size());
  for (const auto& smp : split.test) anchors.push_back({idx.position.at(smp.doc_id), smp.anchor});
  std::sort(anchors.begin(), anchors.end(),
            [](const AnchorRef& a, const AnchorRef& b) { return std::tie(a.doc, a.index) < std::tie(b.doc, b.index); });
  return anchors;
}

ExperimentResult run_experiment(const RunConfig& cfg) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.output_dir = cfg.output_dir;
  const auto& out_dir = result.output_dir;
  auto warn = [&](const std::string& w) {
    result.warnings.push_back(w);
    note(cfg, "warning: " + w);
  };

  // Ingest.
  auto t0 = std::chrono::steady_clock::now();
  IngestResult ingested;
  try {
    ingested = load_input(cfg);
  } catch (...) {
    rethrow_with_context(std::current_exception(), "stage ingest: ");
  }
  Corpus corpus = std::move(ingested.corpus);
  for (const auto& w : ingested.report.warnings) warn(w);
  if (cfg.filter_context)
    for (auto& doc : corpus) doc = compact_document(doc, cfg.ingest.min_words);
  const std::string corpus_text = serialize_corpus(corpus);
  const std::string corpus_hash = Fnv1a().update(corpus_text).hex();
  write_file_atomic(out_dir / "corpus.jsonl", corpus_text);
  IngestSummary summary = summarize(corpus, ingested.report, cfg.ingest.min_words);
  write_file_atomic(out_dir / "ingest.json", ingest_json(summary).dump(2) + "\n");
  const double ingest_seconds = seconds_since(t0);
  note(cfg, "ingested " + std::to_string(corpus.size()) + " documents, " +
                std::to_string(summary.eligible_anchors) + " eligible anchors (" +
                format_fixed(100 * summary.positive_fraction, 1) + "% with links)");
  if (cfg.split_unit == SplitUnit::PerSample && cfg.strategies.size() > 1)
    warn("per-sample split: overlapping windows can place the same sentences on both sides of the split "
         "(use split_unit = document for a leakage-free evaluation)");

  // Per-strategy pipelines.
  CorpusIndex idx(corpus, cfg.ingest.min_words);
  std::vector<StrategyOutcome> outcomes(cfg.strategies.size());
  run_parallel(cfg.strategies.size(), cfg.jobs, [&](std::size_t j) {
    outcomes[j] = run_strategy(idx, cfg.strategies[j], cfg, out_dir, corpus_hash);
    const auto& o = outcomes[j];
    note(cfg, "strategy " + std::to_string(o.row.strategy.id) + " (n=" + std::to_string(o.row.strategy.before) +
                  ", m=" + std::to_string(o.row.strategy.after) + "): F1 " + format_fixed(o.row.metrics.f1, 4) +
                  ", vocabulary " + std::to_string(o.vocabulary.size()) + ", epochs " +
                  std::to_string(o.model.info.epochs_run) + (o.cached ? " [cached]" : "") + ", " +
                  format_fixed(o.seconds, 1) + "s");
  });

  Report& report = result.report;
  for (auto& o : outcomes) {
    for (const auto& w : o.row.metrics.warnings) warn("strategy " + std::to_string(o.row.strategy.id) + ": " + w);
    report.lengths.insert(report.lengths.end(), o.lengths.begin(), o.lengths.end());
  }

  // Ensemble voting on the shared evaluation anchors.
  t0 = std::chrono::steady_clock::now();
  if (cfg.strategies.size() >= 2) {
    std::vector<AnchorRef> anchors;
    try {
      anchors = evaluation_anchors(corpus, cfg);
    } catch (...) {
      rethrow_with_context(std::current_exception(), "stage ensemble: ");
    }
    std::vector<StrategyEstimator> estimators;
    std::vector<int> ids;
    for (const auto& o : outcomes) {
      estimators.push_back({o.row.strategy, &o.vocabulary, &o.model});
      ids.push_back(o.row.strategy.id);
    }
    const auto preds = align_anchor_views(corpus, anchors, estimators);

    for (auto& o : outcomes) {
      std::vector<Label> decisions;
      for (const auto& p : preds)
        decisions.push_back(p.probabilities.at(o.row.strategy.id) > 0.5 ? Label::WithLinks : Label::WithoutLinks);
      o.row.anchor_metrics = score(preds, decisions, cfg.averaging);
    }

    auto make_config = [&](std::vector<int> set, VoteMode mode) {
      EnsembleConfig ec;
      ec.strategy_ids = std::move(set);
      ec.mode = mode;
      ec.soft_threshold = cfg.soft_threshold;
      ec.hard_threshold = cfg.hard_threshold;
      ec.hard_threshold_auto = cfg.hard_threshold_auto;
      ec.hard_rule = cfg.hard_rule;
      ec.validate();
      return ec;
    };
    const auto sets = cfg.ensemble_sets.empty() ? build_strategy_sets(ids) : cfg.ensemble_sets;
    for (VoteMode mode : {VoteMode::Soft, VoteMode::Hard}) {
      for (const auto& set : sets) {
        const EnsembleConfig ec = make_config(set, mode);
        if (mode == VoteMode::Hard && ec.hard_vote_degenerate())
          warn("hard voting over " + std::to_string(set.size()) + " estimators with threshold " +
               num(ec.effective_hard_threshold()) + " can never vote positive");
        std::vector<Label> decisions;
        for (const auto& p : preds) decisions.push_back(vote(p.probabilities, ec));
        VotingRow row;
        row.mode = mode;
        row.strategy_ids = set;
        row.threshold = mode == VoteMode::Soft ? ec.soft_threshold : ec.effective_hard_threshold();
        row.metrics = score(preds, decisions, cfg.averaging);
        report.voting.push_back(std::move(row));
      }
    }

    const EnsembleConfig soft_all = make_config(ids, VoteMode::Soft);
    const EnsembleConfig hard_all = make_config(ids, VoteMode::Hard);
    report.anchor_columns = ids;
    for (const auto& p : preds) report.anchors.push_back({p, vote(p.probabilities, soft_all), vote(p.probabilities, hard_all)});
  }
  for (auto& o : outcomes) report.strategies.push_back(o.row);
  const double ensemble_seconds = seconds_since(t0);

  emit_report(report, out_dir);

  // Bundle for `predict`, replayable config, and the run manifest.
  json bundle_strategies = json::array();
  for (const auto& o : outcomes) bundle_strategies.push_back(strategy_entry(o, out_dir));
  json bundle = {{"format", "linkgap.bundle"},
                 {"version", 1},
                 {"ingest",
                  {{"sentence_field", cfg.ingest.sentence_field},
                   {"id_field", cfg.ingest.id_field},
                   {"citation_marker", cfg.ingest.citation_marker},
                   {"math_pattern", cfg.ingest.math_marker_pattern},
                   {"min_words", cfg.ingest.min_words},
                   {"masking", to_string(cfg.ingest.masking_mode)},
                   {"custom_map", cfg.ingest.custom_map},
                   {"filter_context", cfg.filter_context}}},
                 {"ensemble",
                  {{"soft_threshold", cfg.soft_threshold},
                   {"hard_threshold", cfg.hard_threshold},
                   {"hard_threshold_auto", cfg.hard_threshold_auto},
                   {"hard_rule", to_string(cfg.hard_rule)}}},
                 {"strategies", std::move(bundle_strategies)}};
  write_file_atomic(out_dir / "bundle.json", bundle.dump(2) + "\n");
  write_file_atomic(out_dir / "run.conf", cfg.canonical());

  json seeds = json::object();
  json timings = {{"ingest", ingest_seconds}, {"ensemble", ensemble_seconds}};
  json cached = json::object();
  for (const auto& o : outcomes) {
    const auto id = std::to_string(o.row.strategy.id);
    seeds[id] = cfg.strategy_seed(o.row.strategy.id);
    timings["strategy_" + id] = o.seconds;
    cached[id] = o.cached;
  }
  timings["total"] = seconds_since(t_start);
  json manifest = {{"format", "linkgap.manifest"},
                   {"version", 1},
                   {"config_hash", cfg.hash()},
                   {"config", cfg.canonical()},
                   {"corpus_hash", corpus_hash},
                   {"master_seed", cfg.master_seed},
                   {"strategy_seeds", seeds},
                   {"cached", cached},
                   {"timings_seconds", timings},
                   {"warnings", result.warnings}};
  write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

PredictResult run_predict(const PredictOptions& opt) {
  const auto bundle_path = opt.bundle_dir / "bundle.json";
  json bundle = json::parse(read_file(bundle_path), nullptr, false);
  if (bundle.is_discarded() || !bundle.is_object() || bundle.value("format", "") != "linkgap.bundle")
    throw DataError("not a model bundle: " + bundle_path.string());

  IngestConfig icfg;
  bool filter_context = false;
  EnsembleConfig ec;
  std::vector<SamplingStrategy> strategies;
  std::vector<std::string> model_paths, vocab_paths;
  try {
    const auto& ing = bundle.at("ingest");
    icfg.sentence_field = ing.at("sentence_field").get<std::string>();
    icfg.id_field = ing.at("id_field").get<std::string>();
    icfg.citation_marker = ing.at("citation_marker").get<std::string>();
    icfg.math_marker_pattern = ing.at("math_pattern").get<std::string>();
    icfg.min_words = ing.at("min_words").get<int>();
    icfg.masking_mode = parse_masking_mode(ing.at("masking").get<std::string>());
    for (const auto& [k, v] : ing.at("custom_map").items()) icfg.custom_map.emplace(k, v.get<std::string>());
    filter_context = ing.at("filter_context").get<bool>();
    const auto& ens = bundle.at("ensemble");
    ec.soft_threshold = ens.at("soft_threshold").get<double>();
    ec.hard_threshold = ens.at("hard_threshold").get<double>();
    ec.hard_threshold_auto = ens.at("hard_threshold_auto").get<bool>();
    ec.hard_rule = parse_hard_rule(ens.at("hard_rule").get<std::string>());
    for (const auto& s : bundle.at("strategies")) {
      const int id = s.at("id").get<int>();
      if (!opt.strategy_ids.empty() &&
          std::find(opt.strategy_ids.begin(), opt.strategy_ids.end(), id) == opt.strategy_ids.end())
        continue;
      strategies.push_back({id, s.at("n").get<std::size_t>(), s.at("m").get<std::size_t>()});
      model_paths.push_back(s.at("model").get<std::string>());
      vocab_paths.push_back(s.at("vocabulary").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw DataError("malformed bundle " + bundle_path.string() + ": " + e.what());
  }
  for (int id : opt.strategy_ids)
    if (std::none_of(strategies.begin(), strategies.end(), [&](const auto& s) { return s.id == id; }))
      throw UsageError("strategy " + std::to_string(id) + " is not in the bundle");
  if (strategies.empty()) throw UsageError("no strategies selected for prediction");

  std::vector<Vocabulary> vocabs;
  std::vector<MLPModel> models;
  for (std::size_t j = 0; j < strategies.size(); ++j) {
    vocabs.push_back(Vocabulary::load(opt.bundle_dir / vocab_paths[j]));
    models.push_back(MLPModel::load(opt.bundle_dir / model_paths[j]));
    if (models.back().input_dim() != vocabs.back().size())
      throw DataError("bundle model/vocabulary mismatch for strategy " + std::to_string(strategies[j].id));
  }
  std::vector<StrategyEstimator> estimators;
  for (std::size_t j = 0; j < strategies.size(); ++j) {
    estimators.push_back({strategies[j], &vocabs[j], &models[j]});
    ec.strategy_ids.push_back(strategies[j].id);
  }
  ec.mode = opt.mode;
  ec.validate();

  Corpus corpus = ingest_jsonlines(opt.document.string(), icfg).corpus;
  PredictResult result;
  std::vector<AnchorRef> anchors;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    if (corpus[d].sentences.empty())
      throw DataError("document '" + corpus[d].doc_id + "' has no sentences");
    if (filter_context) corpus[d] = compact_document(corpus[d], icfg.min_words);
    for (std::size_t i : eligible_anchors(corpus[d], icfg.min_words)) anchors.push_back({d, i});
  }
  if (anchors.empty()) {
    result.notices.push_back("no eligible sentences (every sentence has at most " + std::to_string(icfg.min_words) +
                             " words)");
    return result;
  }
  if (ec.mode == VoteMode::Hard && ec.hard_vote_degenerate())
    result.notices.push_back("hard voting threshold " + num(ec.effective_hard_threshold()) + " with " +
                             std::to_string(ec.strategy_ids.size()) + " estimators can never vote positive");

  for (auto& p : align_anchor_views(corpus, anchors, estimators)) {
    SentenceVerdict v;
    v.doc_id = p.doc_id;
    v.index = p.index;
    v.observed = p.truth;
    v.probability = mean_probability(p.probabilities, ec.strategy_ids);
    v.decision = vote(p.probabilities, ec);
    v.missing_link = v.observed == Label::WithoutLinks && v.decision == Label::WithLinks;
    v.per_strategy = std::move(p.probabilities);
    result.verdicts.push_back(std::move(v));
  }
  std::stable_sort(result.verdicts.begin(), result.verdicts.end(),
                   [](const SentenceVerdict& a, const SentenceVerdict& b) { return a.probability > b.probability; });
  return result;
}

std::string verdicts_json(const PredictResult& result) {
  json out = json::array();
  for (const auto& v : result.verdicts) {
    json per = json::object();
    for (const auto& [id, p] : v.per_strategy) per[std::to_string(id)] = p;
    out.push_back({{"doc_id", v.doc_id},
                   {"index", v.index},
                   {"probability", v.probability},
                   {"observed", to_string(v.observed)},
                   {"decision", to_string(v.decision)},
                   {"missing_link", v.missing_link},
                   {"per_strategy", std::move(per)}});
  }
  return out.dump(2) + "\n";
}

}  // namespace linkgap
