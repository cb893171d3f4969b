#include "vqg/baseline.hpp"

#include <algorithm>
#include <cmath>

#include "vqg/error.hpp"
#include "vqg/rng.hpp"

namespace vqg {

BaselineNet::BaselineNet(int feature_dim, int hidden, std::uint64_t seed)
    : feature_dim_(feature_dim),
      hidden_(hidden),
      params_(static_cast<std::size_t>(hidden) * (feature_dim + 2) + 1, 0.0) {
  if (feature_dim < 1 || hidden < 1)
    throw Error("BaselineNet: dimensions must be positive");
  Rng rng(derive_seed(seed, "baseline-init"));
  const double s1 = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  const std::size_t w1 = static_cast<std::size_t>(hidden) * feature_dim;
  for (std::size_t i = 0; i < w1; ++i)
    params_[i] = s1 * (2.0 * uniform01(rng) - 1.0);
  for (int h = 0; h < hidden; ++h)
    params_[w1 + hidden + h] = s2 * (2.0 * uniform01(rng) - 1.0);
}

BaselineNet BaselineNet::constant(int feature_dim, int hidden, double c) {
  BaselineNet net(feature_dim, hidden, 0);
  std::fill(net.params_.begin(), net.params_.end(), 0.0);
  net.params_.back() = c;
  return net;
}

double BaselineNet::value(std::span<const double> f) const {
  if (static_cast<int>(f.size()) != feature_dim_)
    throw Error("BaselineNet: feature dimension mismatch");
  const std::size_t w1 = static_cast<std::size_t>(hidden_) * feature_dim_;
  double out = params_.back();
  for (int h = 0; h < hidden_; ++h) {
    const double* row = params_.data() + static_cast<std::size_t>(h) * feature_dim_;
    double z = params_[w1 + h];
    for (int k = 0; k < feature_dim_; ++k) z += row[k] * f[k];
    out += params_[w1 + hidden_ + h] * std::tanh(z);
  }
  return out;
}

void BaselineNet::accumulate_grad(std::span<const double> f, double scale,
                                  std::span<double> grad) const {
  const std::size_t w1 = static_cast<std::size_t>(hidden_) * feature_dim_;
  for (int h = 0; h < hidden_; ++h) {
    const double* row = params_.data() + static_cast<std::size_t>(h) * feature_dim_;
    double z = params_[w1 + h];
    for (int k = 0; k < feature_dim_; ++k) z += row[k] * f[k];
    const double a = std::tanh(z);
    const double w2 = params_[w1 + hidden_ + h];
    grad[w1 + hidden_ + h] += scale * a;
    const double dz = scale * w2 * (1.0 - a * a);
    if (dz == 0.0) continue;
    double* grow = grad.data() + static_cast<std::size_t>(h) * feature_dim_;
    for (int k = 0; k < feature_dim_; ++k) grow[k] += dz * f[k];
    grad[w1 + h] += dz;
  }
  grad[grad.size() - 1] += scale;
}

bool BaselineNet::all_finite() const {
  return std::all_of(params_.begin(), params_.end(),
                     [](double x) { return std::isfinite(x); });
}

double mse_loss(const BaselineNet& net,
                std::span<const BaselineSample> samples) {
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : samples) {
    const double e = net.value(s.features) - s.target;
    sum += e * e;
  }
  return sum / static_cast<double>(samples.size());
}

std::vector<double> mse_grad(const BaselineNet& net,
                             std::span<const BaselineSample> samples) {
  std::vector<double> g(net.num_params(), 0.0);
  if (samples.empty()) return g;
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (const auto& s : samples) {
    const double e = net.value(s.features) - s.target;
    net.accumulate_grad(s.features, 2.0 * e * inv, g);
  }
  return g;
}

double sgd_step(BaselineNet& net, std::span<const BaselineSample> samples,
                double lr) {
  const double loss = mse_loss(net, samples);
  if (lr == 0.0 || samples.empty()) return loss;
  const auto g = mse_grad(net, samples);
  auto p = net.params();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
  return loss;
}

}  // namespace vqg
