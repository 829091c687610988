#include "linkgap/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "linkgap/util.hpp"

namespace linkgap {

using nlohmann::json;

ConfusionMatrix confusion(std::span<const Label> y_true, std::span<const Label> y_pred) {
  if (y_true.size() != y_pred.size())
    throw DataError("label vectors differ in length (" + std::to_string(y_true.size()) + " vs " +
                    std::to_string(y_pred.size()) + ")");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool t = y_true[i] == Label::WithLinks, p = y_pred[i] == Label::WithLinks;
    if (t && p) ++cm.tp;
    else if (!t && p) ++cm.fp;
    else if (t && !p) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

namespace {

double ratio(std::size_t num, std::size_t den, const char* what, std::vector<std::string>& warnings) {
  if (den == 0) {
    warnings.emplace_back(std::string(what) + " is undefined (0/0); reported as 0");
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

ClassMetrics class_metrics(std::size_t hit, std::size_t false_alarm, std::size_t miss, const char* name,
                           std::vector<std::string>& warnings) {
  ClassMetrics c;
  c.precision = ratio(hit, hit + false_alarm, (std::string(name) + " precision").c_str(), warnings);
  c.recall = ratio(hit, hit + miss, (std::string(name) + " recall").c_str(), warnings);
  c.f1 = c.precision + c.recall > 0 ? 2 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
  c.support = hit + miss;
  return c;
}

}  // namespace

Metrics metrics(const ConfusionMatrix& cm, Averaging averaging) {
  Metrics m;
  m.averaging = averaging;
  m.positive = class_metrics(cm.tp, cm.fp, cm.fn, "positive", m.warnings);
  m.negative = class_metrics(cm.tn, cm.fn, cm.fp, "negative", m.warnings);
  double wp = 0.5, wn = 0.5;
  if (averaging == Averaging::Weighted) {
    const double total = static_cast<double>(m.positive.support + m.negative.support);
    if (total > 0) {
      wp = static_cast<double>(m.positive.support) / total;
      wn = static_cast<double>(m.negative.support) / total;
    }
  }
  m.precision = wp * m.positive.precision + wn * m.negative.precision;
  m.recall = wp * m.positive.recall + wn * m.negative.recall;
  m.f1 = wp * m.positive.f1 + wn * m.negative.f1;
  return m;
}

namespace {

std::string f4(double v) { return format_fixed(v, 4); }

double r4(double v) { return std::round(v * 1e4) / 1e4; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string ids_text(std::span<const int> ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(ids[i]);
  }
  return out;
}

std::vector<const VotingRow*> sorted_voting(const Report& r) {
  std::vector<const VotingRow*> rows;
  for (const auto& v : r.voting) rows.push_back(&v);
  std::stable_sort(rows.begin(), rows.end(), [](const VotingRow* a, const VotingRow* b) {
    if (a->mode != b->mode) return a->mode == VoteMode::Soft;
    return a->strategy_ids.size() < b->strategy_ids.size();
  });
  return rows;
}

std::vector<const StrategyRow*> sorted_strategies(const Report& r) {
  std::vector<const StrategyRow*> rows;
  for (const auto& s : r.strategies) rows.push_back(&s);
  std::stable_sort(rows.begin(), rows.end(),
                   [](const StrategyRow* a, const StrategyRow* b) { return a->strategy.id < b->strategy.id; });
  return rows;
}

json metrics_json(const Metrics& m) {
  auto cls = [](const ClassMetrics& c) {
    return json{{"precision", r4(c.precision)}, {"recall", r4(c.recall)}, {"f1", r4(c.f1)}, {"support", c.support}};
  };
  return json{{"averaging", m.averaging == Averaging::Weighted ? "weighted" : "macro"},
              {"f1", r4(m.f1)},
              {"precision", r4(m.precision)},
              {"recall", r4(m.recall)},
              {"positive", cls(m.positive)},
              {"negative", cls(m.negative)}};
}

}  // namespace

std::string report_csv(const Report& r) {
  std::ostringstream out;
  out << "kind,id,n,m,k,mode,size,strategies,f1,precision,recall,anchor_f1,positives,negatives,train,test\n";
  for (const auto* s : sorted_strategies(r)) {
    out << "strategy," << s->strategy.id << ',' << s->strategy.before << ',' << s->strategy.after << ','
        << s->strategy.width() << ",,1," << s->strategy.id << ',' << f4(s->metrics.f1) << ','
        << f4(s->metrics.precision) << ',' << f4(s->metrics.recall) << ','
        << (s->anchor_metrics ? f4(s->anchor_metrics->f1) : "") << ',' << s->positives << ','
        << s->negatives << ',' << s->train << ',' << s->test << '\n';
  }
  for (const auto* v : sorted_voting(r)) {
    out << "voting,,,,," << to_string(v->mode) << ',' << v->strategy_ids.size() << ','
        << ids_text(v->strategy_ids) << ',' << f4(v->metrics.f1) << ',' << f4(v->metrics.precision) << ','
        << f4(v->metrics.recall) << ",," << v->metrics.positive.support << ',' << v->metrics.negative.support
        << ",," << (v->metrics.positive.support + v->metrics.negative.support) << '\n';
  }
  return out.str();
}

std::string report_json(const Report& r) {
  json strategies = json::array();
  for (const auto* s : sorted_strategies(r)) {
    json row = {{"id", s->strategy.id},
                {"n", s->strategy.before},
                {"m", s->strategy.after},
                {"k", s->strategy.width()},
                {"metrics", metrics_json(s->metrics)},
                {"positives", s->positives},
                {"negatives", s->negatives},
                {"train", s->train},
                {"test", s->test}};
    if (s->anchor_metrics) row["anchor_metrics"] = metrics_json(*s->anchor_metrics);
    strategies.push_back(std::move(row));
  }
  json doc = {{"format", "linkgap.report"}, {"version", kReportVersion}, {"strategies", std::move(strategies)}};
  if (!r.voting.empty()) {
    json voting = json::array();
    for (const auto* v : sorted_voting(r))
      voting.push_back({{"mode", to_string(v->mode)},
                        {"size", v->strategy_ids.size()},
                        {"strategies", v->strategy_ids},
                        {"threshold", v->threshold},
                        {"metrics", metrics_json(v->metrics)}});
    doc["voting"] = std::move(voting);
  }
  return doc.dump(2) + "\n";
}

std::string lengths_csv(const Report& r) {
  std::vector<LengthBin> bins = r.lengths;
  std::sort(bins.begin(), bins.end(), [](const LengthBin& a, const LengthBin& b) {
    if (a.strategy_id != b.strategy_id) return a.strategy_id < b.strategy_id;
    if (a.label != b.label) return a.label > b.label;  // positive first
    return a.length < b.length;
  });
  std::ostringstream out;
  out << "strategy_id,label,length,count\n";
  for (const auto& b : bins)
    out << b.strategy_id << ',' << to_string(b.label) << ',' << b.length << ',' << b.count << '\n';
  return out.str();
}

std::string voting_csv(const Report& r) {
  std::ostringstream out;
  out << "doc_id,index,true_label";
  for (int id : r.anchor_columns) out << ",p_" << id;
  out << ",decision_soft,decision_hard\n";
  for (const auto& a : r.anchors) {
    out << csv_field(a.prediction.doc_id) << ',' << a.prediction.index << ',' << to_string(a.prediction.truth);
    for (int id : r.anchor_columns) {
      auto it = a.prediction.probabilities.find(id);
      out << ',' << (it == a.prediction.probabilities.end() ? "" : f4(it->second));
    }
    out << ',' << to_string(a.soft) << ',' << to_string(a.hard) << '\n';
  }
  return out.str();
}

void emit_report(const Report& report, const std::filesystem::path& dir) {
  if (report.strategies.empty() && report.voting.empty()) throw DataError("nothing to report");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create report directory " + dir.string() + ": " + ec.message());
  write_file_atomic(dir / "report.csv", report_csv(report));
  write_file_atomic(dir / "report.json", report_json(report));
  write_file_atomic(dir / "lengths.csv", lengths_csv(report));
  if (!report.anchors.empty()) write_file_atomic(dir / "voting.csv", voting_csv(report));
}

}  // namespace linkgap
