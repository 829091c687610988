#include <algorithm>
#include <set>

#include "doctest.h"
#include "linkgap/sampler.hpp"
#include "support.hpp"

using namespace linkgap;
using linkgap::testing::make_document;

namespace {

// Independent run-length count: sum over maximal WithoutLinks runs of
// max(0, L - k + 1).
std::size_t runs_formula(const std::vector<bool>& labels, std::size_t k) {
  std::size_t total = 0, run = 0;
  for (std::size_t i = 0; i <= labels.size(); ++i) {
    if (i < labels.size() && !labels[i]) {
      ++run;
    } else {
      if (run >= k) total += run - k + 1;
      run = 0;
    }
  }
  return total;
}

std::vector<Sample> make_samples(std::size_t pos, std::size_t neg) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < pos + neg; ++i) {
    Sample s;
    s.doc_id = "d" + std::to_string(i % 10);
    s.anchor = i;
    s.label = i < pos ? Label::WithLinks : Label::WithoutLinks;
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("default strategy grid") {
  const auto g = default_strategies();
  REQUIRE(g.size() == 10);
  const std::vector<std::size_t> k = {1, 3, 3, 4, 5, 6, 7, 8, 9, 10};
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(g[i].id == static_cast<int>(i));
    CHECK(g[i].width() == k[i]);
  }
  CHECK(g[0] == SamplingStrategy{0, 0, 0});
  CHECK(g[7] == SamplingStrategy{7, 4, 3});
  CHECK(g[9] == SamplingStrategy{9, 5, 4});
}

TEST_CASE("positive windows") {
  std::vector<bool> labels(20, false);
  labels[10] = true;
  auto doc = make_document("p", labels);
  auto s = positive_samples(doc, {3, 1, 2}, eligible_anchors(doc, 30));
  REQUIRE(s.size() == 1);
  CHECK(s[0].window == Window{9, 12});
  CHECK_FALSE(s[0].clipped_start);
  CHECK_FALSE(s[0].clipped_end);
  CHECK(std::find(s[0].tokens.begin(), s[0].tokens.end(), std::string(kDocStart)) == s[0].tokens.end());

  auto edge = make_document("e", {true, false, false, false, false});
  auto e = positive_samples(edge, {4, 2, 1}, eligible_anchors(edge, 30));
  REQUIRE(e.size() == 1);
  CHECK(e[0].window == Window{0, 1});
  CHECK(e[0].clipped_start);
  CHECK(e[0].tokens.front() == kDocStart);

  auto toy = make_document("t", {false, true, false, false, true, false});
  auto t = positive_samples(toy, {2, 1, 1}, eligible_anchors(toy, 30));
  REQUIRE(t.size() == 2);
  CHECK(t[0].window == Window{0, 2});
  CHECK(t[1].window == Window{3, 5});
}

TEST_CASE("positive window at the end carries docend") {
  auto doc = make_document("z", {false, false, true});
  auto s = positive_samples(doc, {1, 0, 2}, eligible_anchors(doc, 30));
  REQUIRE(s.size() == 1);
  CHECK(s[0].window == Window{2, 2});
  CHECK(s[0].tokens.back() == kDocEnd);
}

TEST_CASE("negative windows slide within runs") {
  auto doc = make_document("n", {false, false, false, false, false});
  auto s = negative_samples(doc, {1, 0, 2}, eligible_anchors(doc, 30));
  REQUIRE(s.size() == 3);
  CHECK(s[0].window == Window{0, 2});
  CHECK(s[1].window == Window{1, 3});
  CHECK(s[2].window == Window{2, 4});
  for (const auto& x : s) CHECK(x.anchor == x.window.first);

  auto short_run = make_document("r", {false, false, true});
  CHECK(negative_samples(short_run, {1, 0, 2}, eligible_anchors(short_run, 30)).empty());
}

TEST_CASE("negative anchor is the first eligible sentence") {
  auto doc = make_document("a", {false, false, false, false}, {5, 5, 40, 40});
  auto s = negative_samples(doc, {1, 1, 1}, eligible_anchors(doc, 30));
  REQUIRE(s.size() == 2);
  CHECK(s[0].anchor == 2);
  CHECK(s[1].anchor == 2);
  auto none = make_document("b", {false, false, false}, {5, 5, 5});
  CHECK(negative_samples(none, {0, 0, 0}, eligible_anchors(none, 30)).empty());
}

TEST_CASE("negative counts match the run-length formula") {
  Rng rng(2024);
  for (int d = 0; d < 20; ++d) {
    auto labels = linkgap::testing::random_labels(rng, 100, 0.15);
    auto doc = make_document("f" + std::to_string(d), labels);
    const auto anchors = eligible_anchors(doc, 30);
    std::size_t positives = 0;
    for (std::size_t k = 1; k <= 10; ++k) {
      SamplingStrategy s{0, k - 1, 0};
      const auto neg = negative_samples(doc, s, anchors);
      CHECK(neg.size() == runs_formula(labels, k));
      for (const auto& x : neg) {
        CHECK(x.window.size() == k);
        for (std::size_t i = x.window.first; i <= x.window.last; ++i)
          CHECK(doc.sentences[i].label == Label::WithoutLinks);
      }
      const auto pos = positive_samples(doc, s, anchors);
      if (k == 1) positives = pos.size();
      CHECK(pos.size() == positives);
    }
  }
}

TEST_CASE("negative stride option") {
  auto doc = make_document("s", std::vector<bool>(10, false));
  SamplerOptions opt;
  opt.negative_stride = 3;
  CHECK(negative_samples(doc, {0, 0, 1}, eligible_anchors(doc, 30), opt).size() == 3);
}

TEST_CASE("undersample balances and is deterministic") {
  auto out = undersample(make_samples(40, 100), 7);
  auto counts = count_classes(out);
  CHECK(counts.positive == 40);
  CHECK(counts.negative == 40);
  auto again = undersample(make_samples(40, 100), 7);
  REQUIRE(again.size() == out.size());
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(again[i].anchor == out[i].anchor);
  // Kept items preserve input order.
  CHECK(std::is_sorted(out.begin(), out.end(), [](const Sample& a, const Sample& b) { return a.anchor < b.anchor; }));

  auto same = undersample(make_samples(10, 10), 3);
  CHECK(same.size() == 20);
  CHECK_THROWS_WITH_AS(undersample(make_samples(0, 5), 1), doctest::Contains("degenerate"), DataError);
}

TEST_CASE("split sizes") {
  auto split = split_train_test(make_samples(50, 50), {0.33, 1, SplitUnit::PerSample});
  CHECK(split.train.size() == 67);
  CHECK(split.test.size() == 33);
  auto tiny = split_train_test(make_samples(2, 1), {0.33, 1, SplitUnit::PerSample});
  CHECK(tiny.train.size() == 2);
  CHECK(tiny.test.size() == 1);
  CHECK_THROWS(split_train_test(make_samples(1, 1), {0.1, 1, SplitUnit::PerSample}));
  CHECK_THROWS_AS(SplitConfig({1.0, 1, SplitUnit::PerSample}).validate(), UsageError);
}

TEST_CASE("per-document split keeps documents whole") {
  std::vector<Sample> samples;
  for (int d = 0; d < 10; ++d)
    for (int i = 0; i < 10; ++i) {
      Sample s;
      s.doc_id = "doc" + std::to_string(d);
      s.anchor = static_cast<std::size_t>(i);
      s.label = i % 2 ? Label::WithLinks : Label::WithoutLinks;
      samples.push_back(s);
    }
  auto split = split_train_test(samples, {0.3, 5, SplitUnit::PerDocument});
  std::set<std::string> train_docs, test_docs;
  for (const auto& s : split.train) train_docs.insert(s.doc_id);
  for (const auto& s : split.test) test_docs.insert(s.doc_id);
  CHECK(test_docs.size() == 3);
  CHECK(split.test.size() == 30);
  for (const auto& d : test_docs) CHECK(train_docs.count(d) == 0);
}
