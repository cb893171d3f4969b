#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace vqg {

/// Value baseline b(f) = w2 . tanh(W1 f + b1) + b2 over the policy's state
/// features. Flat parameter layout: W1 (H x D, row-major), b1 (H), w2 (H), b2.
class BaselineNet {
 public:
  BaselineNet() = default;
  BaselineNet(int feature_dim, int hidden, std::uint64_t seed);

  /// All weights zero, output bias `c`: b(f) == c everywhere.
  static BaselineNet constant(int feature_dim, int hidden, double c);

  int feature_dim() const { return feature_dim_; }
  int hidden() const { return hidden_; }
  std::size_t num_params() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  double value(std::span<const double> features) const;
  /// grad += scale * d b(f) / d phi.
  void accumulate_grad(std::span<const double> features, double scale,
                       std::span<double> grad) const;
  bool all_finite() const;

  friend bool operator==(const BaselineNet&, const BaselineNet&) = default;

 private:
  int feature_dim_ = 0;
  int hidden_ = 0;
  std::vector<double> params_;
};

struct BaselineSample {
  std::span<const double> features;
  double target = 0.0;
};

/// Mean over samples of (b(f) - target)^2.
double mse_loss(const BaselineNet& net, std::span<const BaselineSample> samples);
std::vector<double> mse_grad(const BaselineNet& net,
                             std::span<const BaselineSample> samples);
/// One SGD step on mse_loss; returns the loss before the step.
double sgd_step(BaselineNet& net, std::span<const BaselineSample> samples,
                double lr);

}  // namespace vqg
