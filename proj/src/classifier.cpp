#include "linkgap/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "linkgap/util.hpp"

namespace linkgap {

using nlohmann::json;

inline constexpr int kModelVersion = 1;

void MLPHyperparams::validate() const {
  if (hidden_units < 1) throw UsageError("hidden_units must be >= 1");
  if (!(learning_rate > 0)) throw UsageError("learning_rate must be positive");
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (max_epochs < 1) throw UsageError("max_epochs must be >= 1");
  if (!(tol > 0)) throw UsageError("tol must be positive");
  if (patience < 1) throw UsageError("patience must be >= 1");
  if (!(l2 >= 0)) throw UsageError("l2 must be non-negative");
}

MLPModel::MLPModel(std::size_t inputs, std::size_t hidden)
    : inputs_(inputs), hidden_(hidden), w1_(inputs * hidden, 0.0), b1_(hidden, 0.0),
      w2_(2 * hidden, 0.0), b2_(2, 0.0) {}

MLPModel MLPModel::initialize(std::size_t inputs, std::size_t hidden, std::uint64_t seed) {
  MLPModel m(inputs, hidden);
  Rng rng(seed);
  const double bound1 = std::sqrt(6.0 / static_cast<double>(inputs + hidden));
  const double bound2 = std::sqrt(6.0 / static_cast<double>(hidden + 2));
  // Hidden-by-input order so the draw sequence does not depend on storage.
  for (std::size_t j = 0; j < hidden; ++j)
    for (std::size_t i = 0; i < inputs; ++i) m.w1(j, i) = rng.uniform(-bound1, bound1);
  for (auto& b : m.b1_) b = rng.uniform(-bound1, bound1);
  for (auto& w : m.w2_) w = rng.uniform(-bound2, bound2);
  for (auto& b : m.b2_) b = rng.uniform(-bound2, bound2);
  m.info.seed = seed;
  return m;
}

double& MLPModel::parameter(std::size_t k) {
  if (k < w1_.size()) {
    // Flat order is hidden-by-input for w1.
    std::size_t j = k / inputs_, i = k % inputs_;
    return w1(j, i);
  }
  k -= w1_.size();
  if (k < b1_.size()) return b1_[k];
  k -= b1_.size();
  if (k < w2_.size()) return w2_[k];
  k -= w2_.size();
  if (k < b2_.size()) return b2_[k];
  throw InvariantError("parameter index out of range");
}

bool MLPModel::all_finite() const {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return finite(w1_) && finite(b1_) && finite(w2_) && finite(b2_);
}

class Backprop {
 public:
  struct Activations {
    std::vector<double> z1;
    std::vector<double> a1;
    std::array<double, 2> z2{};
    std::array<double, 2> p{};
  };

  static void forward(const MLPModel& m, const SparseVector& x, Activations& act) {
    const std::size_t h = m.hidden_;
    act.z1.assign(m.b1_.begin(), m.b1_.end());
    for (const auto& e : x.entries) {
      const double c = e.count;
      const double* row = &m.w1_[static_cast<std::size_t>(e.index) * h];
      for (std::size_t j = 0; j < h; ++j) act.z1[j] += c * row[j];
    }
    act.a1.resize(h);
    for (std::size_t j = 0; j < h; ++j) act.a1[j] = act.z1[j] > 0.0 ? act.z1[j] : 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
      double s = m.b2_[k];
      const double* row = &m.w2_[k * h];
      for (std::size_t j = 0; j < h; ++j) s += row[j] * act.a1[j];
      act.z2[k] = s;
    }
    const double mx = std::max(act.z2[0], act.z2[1]);
    const double e0 = std::exp(act.z2[0] - mx), e1 = std::exp(act.z2[1] - mx);
    act.p = {e0 / (e0 + e1), e1 / (e0 + e1)};
  }

  // Cross-entropy computed from logits via log-sum-exp.
  static double cross_entropy(const Activations& act, std::size_t target) {
    const double mx = std::max(act.z2[0], act.z2[1]);
    const double lse = mx + std::log(std::exp(act.z2[0] - mx) + std::exp(act.z2[1] - mx));
    return lse - act.z2[target];
  }

  // Accumulates the unscaled data gradient (sum over the batch) into the
  // buffers and returns the summed cross-entropy.
  static double accumulate(const MLPModel& m, const SparseVector& x, std::size_t target,
                           Activations& act, std::vector<double>& gw1, std::vector<double>& gb1,
                           std::vector<double>& gw2, std::vector<double>& gb2, std::vector<double>& dz1) {
    forward(m, x, act);
    const std::size_t h = m.hidden_;
    std::array<double, 2> dz2 = act.p;
    dz2[target] -= 1.0;
    dz1.assign(h, 0.0);
    for (std::size_t k = 0; k < 2; ++k) {
      gb2[k] += dz2[k];
      const double* w2row = &m.w2_[k * h];
      double* g2row = &gw2[k * h];
      for (std::size_t j = 0; j < h; ++j) {
        g2row[j] += dz2[k] * act.a1[j];
        dz1[j] += w2row[j] * dz2[k];
      }
    }
    for (std::size_t j = 0; j < h; ++j) {
      if (act.z1[j] <= 0.0) dz1[j] = 0.0;
      gb1[j] += dz1[j];
    }
    for (const auto& e : x.entries) {
      const double c = e.count;
      double* grow = &gw1[static_cast<std::size_t>(e.index) * h];
      for (std::size_t j = 0; j < h; ++j) grow[j] += c * dz1[j];
    }
    return cross_entropy(act, target);
  }

  static double squared_weights(const MLPModel& m) {
    double s = 0.0;
    for (double w : m.w1_) s += w * w;
    for (double w : m.w2_) s += w * w;
    return s;
  }

  static LossAndGradient full(const MLPModel& m, std::span<const SparseVector> xs,
                              std::span<const Label> ys, double l2) {
    const std::size_t h = m.hidden_;
    std::vector<double> gw1(m.w1_.size(), 0.0), gb1(h, 0.0), gw2(2 * h, 0.0), gb2(2, 0.0), dz1;
    Activations act;
    double ce = 0.0;
    for (std::size_t b = 0; b < xs.size(); ++b) ce += accumulate(m, xs[b], class_index(ys[b]), act, gw1, gb1, gw2, gb2, dz1);
    const double inv_b = 1.0 / static_cast<double>(xs.size());
    LossAndGradient out;
    out.loss = ce * inv_b + 0.5 * l2 * inv_b * squared_weights(m);
    out.gradient.reserve(m.parameter_count());
    for (std::size_t j = 0; j < h; ++j)
      for (std::size_t i = 0; i < m.inputs_; ++i)
        out.gradient.push_back(gw1[i * h + j] * inv_b + l2 * inv_b * m.w1(j, i));
    for (std::size_t j = 0; j < h; ++j) out.gradient.push_back(gb1[j] * inv_b);
    for (std::size_t k = 0; k < 2 * h; ++k) out.gradient.push_back(gw2[k] * inv_b + l2 * inv_b * m.w2_[k]);
    for (std::size_t k = 0; k < 2; ++k) out.gradient.push_back(gb2[k] * inv_b);
    return out;
  }

  struct AdamState {
    std::vector<double> m, v;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
  };

  // One adaptive-moment step over a parameter block. grad holds the summed
  // data gradient and is zeroed on the way; weight decay applies when l2 > 0.
  static void adam_block(std::vector<double>& w, std::vector<double>& grad, AdamState& st, double inv_b,
                         double l2, double step, const MLPHyperparams& hp) {
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double g = grad[k] * inv_b + l2 * inv_b * w[k];
      grad[k] = 0.0;
      st.m[k] = hp.beta1 * st.m[k] + (1.0 - hp.beta1) * g;
      st.v[k] = hp.beta2 * st.v[k] + (1.0 - hp.beta2) * g * g;
      w[k] -= step * st.m[k] / (std::sqrt(st.v[k]) + hp.epsilon);
    }
  }

  static MLPModel train(std::span<const SparseVector> xs, std::span<const Label> ys, const MLPHyperparams& hp) {
    hp.validate();
    if (xs.size() != ys.size()) throw DataError("feature/label count mismatch");
    if (xs.size() < 2) throw DataError("need at least 2 training samples");
    const std::size_t n_pos = static_cast<std::size_t>(std::count(ys.begin(), ys.end(), Label::WithLinks));
    if (n_pos == 0 || n_pos == ys.size()) throw DataError("training data contains a single class");
    const std::size_t dim = xs.front().dimension;
    if (dim == 0) throw DataError("zero-dimensional input");
    for (const auto& x : xs)
      if (x.dimension != dim) throw DataError("input dimension mismatch in training data");

    MLPModel m = MLPModel::initialize(dim, hp.hidden_units, hp.seed);
    m.hyperparams = hp;
    const std::size_t h = m.hidden_;
    std::vector<double> gw1(m.w1_.size(), 0.0), gb1(h, 0.0), gw2(2 * h, 0.0), gb2(2, 0.0), dz1;
    AdamState s_w1(m.w1_.size()), s_b1(h), s_w2(2 * h), s_b2(2);
    Activations act;

    Rng rng(hp.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t batch = std::min(hp.batch_size, xs.size());

    double best = std::numeric_limits<double>::infinity();
    std::size_t stale = 0;
    std::uint64_t t = 0;
    for (std::size_t epoch = 0; epoch < hp.max_epochs; ++epoch) {
      rng.shuffle(order);
      double epoch_loss = 0.0;
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t end = std::min(order.size(), start + batch);
        const double inv_b = 1.0 / static_cast<double>(end - start);
        double ce = 0.0;
        for (std::size_t b = start; b < end; ++b)
          ce += accumulate(m, xs[order[b]], class_index(ys[order[b]]), act, gw1, gb1, gw2, gb2, dz1);
        const double penalty = 0.5 * hp.l2 * inv_b * squared_weights(m);
        epoch_loss += (ce * inv_b + penalty) * static_cast<double>(end - start);

        ++t;
        const double step = hp.learning_rate * std::sqrt(1.0 - std::pow(hp.beta2, static_cast<double>(t))) /
                            (1.0 - std::pow(hp.beta1, static_cast<double>(t)));
        adam_block(m.w1_, gw1, s_w1, inv_b, hp.l2, step, hp);
        adam_block(m.b1_, gb1, s_b1, inv_b, 0.0, step, hp);
        adam_block(m.w2_, gw2, s_w2, inv_b, hp.l2, step, hp);
        adam_block(m.b2_, gb2, s_b2, inv_b, 0.0, step, hp);
      }
      epoch_loss /= static_cast<double>(xs.size());
      if (!std::isfinite(epoch_loss))
        throw InvariantError("non-finite training loss at epoch " + std::to_string(epoch + 1) +
                             " (learning_rate " + format_fixed(hp.learning_rate, 6) + ")");
      m.info.loss_curve.push_back(epoch_loss);
      m.info.epochs_run = epoch + 1;
      m.info.final_loss = epoch_loss;

      if (epoch_loss > best - hp.tol)
        ++stale;
      else
        stale = 0;
      best = std::min(best, epoch_loss);
      if (stale >= hp.patience) break;
    }
    if (!m.all_finite()) throw InvariantError("training produced non-finite weights");
    return m;
  }
};

ClassProbabilities MLPModel::predict_proba(const SparseVector& x) const {
  if (x.dimension != inputs_)
    throw DataError("input dimension " + std::to_string(x.dimension) + " does not match model (" +
                    std::to_string(inputs_) + ")");
  Backprop::Activations act;
  Backprop::forward(*this, x, act);
  return act.p;
}

std::vector<ClassProbabilities> MLPModel::predict_proba(std::span<const SparseVector> xs) const {
  std::vector<ClassProbabilities> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(predict_proba(x));
  return out;
}

LossAndGradient loss_and_gradient(const MLPModel& model, std::span<const SparseVector> xs,
                                  std::span<const Label> ys, double l2) {
  if (xs.empty() || xs.size() != ys.size()) throw DataError("bad batch for loss_and_gradient");
  return Backprop::full(model, xs, ys, l2);
}

namespace {

// Data and penalty terms of the batch loss, kept apart so finite differences
// of the small penalty term are not swamped by rounding in the larger one.
std::pair<double, double> loss_terms(const MLPModel& model, std::span<const SparseVector> xs,
                                     std::span<const Label> ys, double l2) {
  if (xs.empty() || xs.size() != ys.size()) throw DataError("bad batch for batch_loss");
  Backprop::Activations act;
  double ce = 0.0;
  for (std::size_t b = 0; b < xs.size(); ++b) {
    Backprop::forward(model, xs[b], act);
    ce += Backprop::cross_entropy(act, class_index(ys[b]));
  }
  const double inv_b = 1.0 / static_cast<double>(xs.size());
  return {ce * inv_b, 0.5 * l2 * inv_b * Backprop::squared_weights(model)};
}

}  // namespace

double batch_loss(const MLPModel& model, std::span<const SparseVector> xs, std::span<const Label> ys,
                  double l2) {
  const auto [data, penalty] = loss_terms(model, xs, ys, l2);
  return data + penalty;
}

MLPModel train(std::span<const SparseVector> xs, std::span<const Label> ys, const MLPHyperparams& hp) {
  return Backprop::train(xs, ys, hp);
}

double gradient_check(const MLPHyperparams& hp, std::size_t trial_count) {
  constexpr std::size_t kInputs = 20, kHidden = 5, kBatch = 8;
  constexpr double kStep = 1e-5;
  double worst = 0.0;
  for (std::size_t trial = 0; trial < trial_count; ++trial) {
    const std::uint64_t seed = hp.seed + trial;
    MLPModel m = MLPModel::initialize(kInputs, kHidden, seed);
    Rng rng(seed * 7919 + 17);
    std::vector<SparseVector> xs(kBatch);
    std::vector<Label> ys(kBatch);
    for (std::size_t b = 0; b < kBatch; ++b) {
      xs[b].dimension = kInputs;
      for (std::uint32_t i = 0; i < kInputs; ++i)
        if (rng.bernoulli(0.5)) xs[b].entries.push_back({i, static_cast<std::uint32_t>(1 + rng.below(3))});
      ys[b] = b % 2 ? Label::WithLinks : Label::WithoutLinks;
    }
    const auto analytic = loss_and_gradient(m, xs, ys, hp.l2);
    for (std::size_t k = 0; k < m.parameter_count(); ++k) {
      double& p = m.parameter(k);
      const double saved = p;
      p = saved + kStep;
      const auto up = loss_terms(m, xs, ys, hp.l2);
      p = saved - kStep;
      const auto down = loss_terms(m, xs, ys, hp.l2);
      p = saved;
      const double numeric =
          ((up.first - down.first) + (up.second - down.second)) / (2 * kStep);
      const double a = analytic.gradient[k];
      const double scale = std::max(std::abs(a), std::abs(numeric));
      if (scale < 1e-12) continue;
      worst = std::max(worst, std::abs(a - numeric) / scale);
    }
  }
  return worst;
}

std::string MLPModel::to_json() const {
  std::vector<double> w1_rows;
  w1_rows.reserve(w1_.size());
  for (std::size_t j = 0; j < hidden_; ++j)
    for (std::size_t i = 0; i < inputs_; ++i) w1_rows.push_back(w1(j, i));
  json doc = {{"format", "linkgap.mlp"},
              {"version", kModelVersion},
              {"dims", {inputs_, hidden_, 2}},
              {"activation", "relu"},
              {"W1", std::move(w1_rows)},
              {"b1", b1_},
              {"W2", w2_},
              {"b2", b2_},
              {"hyperparams",
               {{"hidden_units", hyperparams.hidden_units},
                {"learning_rate", hyperparams.learning_rate},
                {"batch_size", hyperparams.batch_size},
                {"max_epochs", hyperparams.max_epochs},
                {"tol", hyperparams.tol},
                {"patience", hyperparams.patience},
                {"l2", hyperparams.l2},
                {"seed", hyperparams.seed}}},
              {"seed", info.seed},
              {"epochs_run", info.epochs_run},
              {"final_loss", info.final_loss},
              {"loss_curve", info.loss_curve}};
  return doc.dump();
}

MLPModel MLPModel::from_json(std::string_view text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw DataError("model file is not valid json");
  try {
    if (doc.at("format") != "linkgap.mlp") throw DataError("not a model file");
    if (doc.at("version").get<int>() != kModelVersion) throw DataError("unsupported model version");
    auto dims = doc.at("dims").get<std::vector<std::size_t>>();
    if (dims.size() != 3 || dims[2] != 2 || dims[0] == 0 || dims[1] == 0)
      throw DataError("model dims must be [V, H, 2]");
    auto w1_rows = doc.at("W1").get<std::vector<double>>();
    MLPModel m(dims[0], dims[1]);
    if (w1_rows.size() != m.w1_.size()) throw DataError("W1 size does not match dims");
    for (std::size_t j = 0; j < m.hidden_; ++j)
      for (std::size_t i = 0; i < m.inputs_; ++i) m.w1(j, i) = w1_rows[j * m.inputs_ + i];
    m.b1_ = doc.at("b1").get<std::vector<double>>();
    m.w2_ = doc.at("W2").get<std::vector<double>>();
    m.b2_ = doc.at("b2").get<std::vector<double>>();
    if (m.b1_.size() != m.hidden_ || m.w2_.size() != 2 * m.hidden_ || m.b2_.size() != 2)
      throw DataError("layer sizes do not match dims");
    const auto& hp = doc.at("hyperparams");
    m.hyperparams.hidden_units = hp.at("hidden_units").get<std::size_t>();
    m.hyperparams.learning_rate = hp.at("learning_rate").get<double>();
    m.hyperparams.batch_size = hp.at("batch_size").get<std::size_t>();
    m.hyperparams.max_epochs = hp.at("max_epochs").get<std::size_t>();
    m.hyperparams.tol = hp.at("tol").get<double>();
    m.hyperparams.patience = hp.at("patience").get<std::size_t>();
    m.hyperparams.l2 = hp.at("l2").get<double>();
    m.hyperparams.seed = hp.at("seed").get<std::uint64_t>();
    m.info.seed = doc.at("seed").get<std::uint64_t>();
    m.info.epochs_run = doc.at("epochs_run").get<std::size_t>();
    m.info.final_loss = doc.at("final_loss").get<double>();
    m.info.loss_curve = doc.value("loss_curve", std::vector<double>{});
    if (!m.all_finite()) throw DataError("model contains non-finite weights");
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void MLPModel::save(const std::filesystem::path& path) const { write_file_atomic(path, to_json()); }

MLPModel MLPModel::load(const std::filesystem::path& path) { return from_json(read_file(path)); }

}  // namespace linkgap
