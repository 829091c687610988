#include <cmath>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "linkgap/classifier.hpp"
#include "linkgap/util.hpp"
#include "support.hpp"

using namespace linkgap;
using linkgap::testing::ScratchDir;

namespace {

SparseVector sv(std::size_t dim, std::vector<SparseEntry> e) { return SparseVector{dim, std::move(e)}; }

struct Toy {
  std::vector<SparseVector> x;
  std::vector<Label> y;
};

// Positives load on features 0-1, negatives on 2-3; feature 4 is noise.
Toy clusters(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  Toy t;
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = i % 2 == 0;
    const std::uint32_t base = pos ? 0 : 2;
    std::vector<SparseEntry> e = {{base, static_cast<std::uint32_t>(2 + rng.below(3))},
                                  {base + 1, static_cast<std::uint32_t>(1 + rng.below(3))}};
    if (rng.bernoulli(0.5)) e.push_back({4, static_cast<std::uint32_t>(1 + rng.below(2))});
    t.x.push_back(sv(5, e));
    t.y.push_back(pos ? Label::WithLinks : Label::WithoutLinks);
  }
  return t;
}

ClassProbabilities dense_forward(const MLPModel& m, const SparseVector& x) {
  std::vector<double> dense(m.input_dim(), 0.0);
  for (auto e : x.entries) dense[e.index] = e.count;
  std::vector<double> h(m.hidden_dim());
  for (std::size_t j = 0; j < m.hidden_dim(); ++j) {
    double a = m.b1(j);
    for (std::size_t i = 0; i < m.input_dim(); ++i) a += m.w1(j, i) * dense[i];
    h[j] = std::max(0.0, a);
  }
  double z[2];
  for (std::size_t o = 0; o < 2; ++o) {
    z[o] = m.b2(o);
    for (std::size_t j = 0; j < m.hidden_dim(); ++j) z[o] += m.w2(o, j) * h[j];
  }
  const double mx = std::max(z[0], z[1]);
  const double e0 = std::exp(z[0] - mx), e1 = std::exp(z[1] - mx);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

}  // namespace

TEST_CASE("hyperparameter validation") {
  MLPHyperparams hp;
  CHECK_NOTHROW(hp.validate());
  hp.hidden_units = 0;
  CHECK_THROWS_AS(hp.validate(), UsageError);
}

TEST_CASE("zero model gives even odds") {
  MLPModel m(6, 3);
  auto p = m.predict_proba(sv(6, {}));
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));
  CHECK_THROWS_AS(m.predict_proba(sv(5, {})), DataError);
}

TEST_CASE("XOR needs the hidden layer") {
  std::vector<SparseVector> x = {sv(2, {}), sv(2, {{0, 1}}), sv(2, {{1, 1}}), sv(2, {{0, 1}, {1, 1}})};
  std::vector<Label> y = {Label::WithoutLinks, Label::WithLinks, Label::WithLinks, Label::WithoutLinks};
  MLPHyperparams hp;
  hp.hidden_units = 8;
  hp.learning_rate = 0.01;
  hp.max_epochs = 5000;
  hp.tol = 1e-7;
  hp.patience = 50;
  hp.l2 = 0.0;
  hp.seed = 1;
  auto m = train(x, y, hp);
  for (std::size_t i = 0; i < 4; ++i) {
    const bool predicted = m.predict_proba(x[i])[1] > 0.5;
    CHECK(predicted == (y[i] == Label::WithLinks));
  }
}

TEST_CASE("separable clusters generalize") {
  auto tr = clusters(1, 100);
  auto te = clusters(2, 100);
  MLPHyperparams hp;
  hp.hidden_units = 10;
  hp.learning_rate = 0.01;
  hp.seed = 3;
  auto m = train(tr.x, tr.y, hp);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < te.x.size(); ++i) {
    const auto p = m.predict_proba(te.x[i]);
    CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-9));
    if ((p[1] > 0.5) == (te.y[i] == Label::WithLinks)) ++correct;
    if (te.y[i] == Label::WithLinks) CHECK(p[1] > 0.9);
  }
  CHECK(static_cast<double>(correct) / te.x.size() >= 0.99);
}

TEST_CASE("training is deterministic") {
  auto tr = clusters(4, 60);
  MLPHyperparams hp;
  hp.hidden_units = 6;
  hp.seed = 17;
  hp.max_epochs = 30;
  auto a = train(tr.x, tr.y, hp);
  auto b = train(tr.x, tr.y, hp);
  CHECK(a.to_json() == b.to_json());
  CHECK(a.info.loss_curve == b.info.loss_curve);
  hp.seed = 18;
  CHECK(train(tr.x, tr.y, hp).to_json() != a.to_json());
}

TEST_CASE("training input errors") {
  auto tr = clusters(4, 10);
  std::vector<Label> same(tr.y.size(), Label::WithLinks);
  CHECK_THROWS_WITH_AS(train(tr.x, same, MLPHyperparams{}), doctest::Contains("single class"), DataError);
  tr.x[3].dimension = 9;
  CHECK_THROWS_AS(train(tr.x, tr.y, MLPHyperparams{}), DataError);
  std::vector<Label> short_y(tr.y.begin(), tr.y.begin() + 3);
  CHECK_THROWS_AS(train(tr.x, short_y, MLPHyperparams{}), DataError);
}

TEST_CASE("sparse forward pass equals dense multiply") {
  Rng rng(8);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto m = MLPModel::initialize(30, 7, seed);
    for (int t = 0; t < 20; ++t) {
      std::vector<SparseEntry> e;
      for (std::uint32_t i = 0; i < 30; ++i)
        if (rng.bernoulli(0.3)) e.push_back({i, static_cast<std::uint32_t>(1 + rng.below(4))});
      const auto x = sv(30, e);
      const auto a = m.predict_proba(x);
      const auto b = dense_forward(m, x);
      CHECK(std::abs(a[0] - b[0]) < 1e-10);
      CHECK(std::abs(a[1] - b[1]) < 1e-10);
    }
  }
}

TEST_CASE("full-batch loss does not increase") {
  auto tr = clusters(6, 40);
  MLPHyperparams hp;
  hp.hidden_units = 5;
  hp.batch_size = tr.x.size();
  hp.learning_rate = 1e-3;
  hp.max_epochs = 60;
  hp.tol = 1e-12;
  hp.patience = 60;
  hp.seed = 2;
  auto m = train(tr.x, tr.y, hp);
  const auto& curve = m.info.loss_curve;
  REQUIRE(curve.size() >= 2);
  for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] <= curve[i - 1] + 1e-12);
}

TEST_CASE("early stopping honours patience") {
  auto tr = clusters(9, 40);
  MLPHyperparams hp;
  hp.hidden_units = 4;
  hp.max_epochs = 500;
  hp.tol = 10.0;  // no epoch can improve by this much
  hp.patience = 3;
  auto m = train(tr.x, tr.y, hp);
  CHECK(m.info.epochs_run == 4);
}

TEST_CASE("gradient check") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    MLPHyperparams hp;
    hp.seed = seed;
    CHECK(gradient_check(hp, 1) < 1e-4);
  }
}

TEST_CASE("saturated zero-loss batch stays finite") {
  MLPModel m(4, 3);
  m.b2(1) = 800.0;
  m.b2(0) = -800.0;
  std::vector<SparseVector> x = {sv(4, {{0, 1}}), sv(4, {{2, 3}})};
  std::vector<Label> y = {Label::WithLinks, Label::WithLinks};
  auto lg = loss_and_gradient(m, x, y, 1e-4);
  CHECK(std::isfinite(lg.loss));
  CHECK(lg.loss == doctest::Approx(0.0));
  for (double g : lg.gradient) CHECK(std::isfinite(g));
  auto p = m.predict_proba(x[0]);
  CHECK(std::isfinite(p[0]));
  CHECK(std::isfinite(p[1]));
}

TEST_CASE("model persistence") {
  auto tr = clusters(12, 30);
  MLPHyperparams hp;
  hp.hidden_units = 5;
  hp.max_epochs = 20;
  auto m = train(tr.x, tr.y, hp);
  ScratchDir dir("model");
  m.save(dir / "m.json");
  auto back = MLPModel::load(dir / "m.json");
  for (const auto& x : tr.x) CHECK(back.predict_proba(x) == m.predict_proba(x));
  CHECK(back.to_json() == m.to_json());

  const std::string text = m.to_json();
  {
    std::ofstream out(dir / "t.json", std::ios::binary);
    out << text.substr(0, text.size() / 3);
  }
  CHECK_THROWS_AS(MLPModel::load(dir / "t.json"), DataError);

  auto doc = nlohmann::json::parse(text);
  doc["version"] = 99;
  CHECK_THROWS_WITH_AS(MLPModel::from_json(doc.dump()), doctest::Contains("version"), DataError);
  doc["version"] = 1;
  doc["dims"] = {5, 4, 2};
  CHECK_THROWS_AS(MLPModel::from_json(doc.dump()), DataError);
}

TEST_CASE("golden model fixture") {
  const std::string dir = LINKGAP_TEST_DATA;
  auto m = MLPModel::load(dir + "/golden_model.json");
  auto probes = nlohmann::json::parse(read_file(dir + "/golden_probes.json"));
  const auto dim = probes.at("dimension").get<std::size_t>();
  REQUIRE(m.input_dim() == dim);
  for (const auto& probe : probes.at("probes")) {
    std::vector<SparseEntry> e;
    for (const auto& pair : probe.at("entries"))
      e.push_back({pair.at(0).get<std::uint32_t>(), pair.at(1).get<std::uint32_t>()});
    const auto p = m.predict_proba(sv(dim, e));
    CHECK(std::abs(p[0] - probe.at("proba").at(0).get<double>()) < 1e-12);
    CHECK(std::abs(p[1] - probe.at("proba").at(1).get<double>()) < 1e-12);
  }
}
