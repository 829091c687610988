#pragma once

// Two-class multilayer perceptron over sparse count vectors:
// input -> ReLU hidden layer -> 2-way softmax.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "linkgap/corpus.hpp"
#include "linkgap/vectorizer.hpp"

namespace linkgap {

struct MLPHyperparams {
  std::size_t hidden_units = 100;
  double learning_rate = 1e-3;
  std::size_t batch_size = 200;
  std::size_t max_epochs = 200;
  double tol = 1e-4;
  std::size_t patience = 10;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  // Adaptive-moment constants.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct TrainingInfo {
  std::size_t epochs_run = 0;
  double final_loss = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> loss_curve;
};

// (P(WithoutLinks), P(WithLinks))
using ClassProbabilities = std::array<double, 2>;

inline constexpr std::size_t class_index(Label label) { return label == Label::WithLinks ? 1 : 0; }

class MLPModel {
 public:
  MLPModel() = default;
  // All-zero parameters.
  MLPModel(std::size_t inputs, std::size_t hidden);

  // Glorot-uniform initialization of weights and biases, seeded.
  static MLPModel initialize(std::size_t inputs, std::size_t hidden, std::uint64_t seed);

  std::size_t input_dim() const { return inputs_; }
  std::size_t hidden_dim() const { return hidden_; }
  std::size_t parameter_count() const { return w1_.size() + b1_.size() + w2_.size() + b2_.size(); }

  // Hidden-by-input view of the first layer.
  double w1(std::size_t hidden, std::size_t input) const { return w1_[input * hidden_ + hidden]; }
  double& w1(std::size_t hidden, std::size_t input) { return w1_[input * hidden_ + hidden]; }
  double b1(std::size_t hidden) const { return b1_[hidden]; }
  double& b1(std::size_t hidden) { return b1_[hidden]; }
  double w2(std::size_t out, std::size_t hidden) const { return w2_[out * hidden_ + hidden]; }
  double& w2(std::size_t out, std::size_t hidden) { return w2_[out * hidden_ + hidden]; }
  double b2(std::size_t out) const { return b2_[out]; }
  double& b2(std::size_t out) { return b2_[out]; }

  // Flat parameter access in a fixed order (w1, b1, w2, b2); used by the
  // finite-difference checker.
  double& parameter(std::size_t flat_index);

  ClassProbabilities predict_proba(const SparseVector& x) const;
  std::vector<ClassProbabilities> predict_proba(std::span<const SparseVector> xs) const;

  bool all_finite() const;

  TrainingInfo info;
  MLPHyperparams hyperparams;

  std::string to_json() const;
  static MLPModel from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static MLPModel load(const std::filesystem::path& path);

 private:
  friend class Backprop;

  std::size_t inputs_ = 0;
  std::size_t hidden_ = 0;
  std::vector<double> w1_;  // input-major: w1_[i * hidden_ + j]
  std::vector<double> b1_;
  std::vector<double> w2_;  // 2 x hidden_
  std::vector<double> b2_;
};

/// Mean cross-entropy plus (l2 / 2B) * ||W||^2 over the batch, together with
/// its gradient laid out like MLPModel::parameter().
struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

LossAndGradient loss_and_gradient(const MLPModel& model, std::span<const SparseVector> xs,
                                  std::span<const Label> ys, double l2);

double batch_loss(const MLPModel& model, std::span<const SparseVector> xs, std::span<const Label> ys,
                  double l2);

MLPModel train(std::span<const SparseVector> xs, std::span<const Label> ys, const MLPHyperparams& hp);

/// Compares analytic gradients with central differences (step 1e-5) on
/// trial_count small random nets (20 inputs, 5 hidden units). Returns the
/// largest relative error seen.
double gradient_check(const MLPHyperparams& hp, std::size_t trial_count);

}  // namespace linkgap
