#pragma once

#include <cmath>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <unistd.h>

#include "vqg/config.hpp"
#include "vqg/game.hpp"
#include "vqg/grammar.hpp"
#include "vqg/questioner.hpp"
#include "vqg/rng.hpp"
#include "vqg/world.hpp"

namespace vqg::testing {

/// Grammar and feature map built from one config. The feature map points into
/// the grammar, so this stays put.
struct Bench {
  ExperimentConfig cfg;
  Grammar grammar;
  FeatureMap fmap;

  explicit Bench(ExperimentConfig c = {})
      : cfg(std::move(c)),
        grammar(Grammar::build(cfg.grammar, cfg.world)),
        fmap(grammar, cfg.features) {}
  Bench(const Bench&) = delete;
  Bench& operator=(const Bench&) = delete;
};

/// A small but complete run: few scenes, short training.
inline ExperimentConfig small_config() {
  ExperimentConfig c;
  c.harness.n_train_scenes = 40;
  c.harness.n_test_scenes = 20;
  c.harness.workers = 1;
  c.trainer.epochs = 2;
  c.trainer.episodes_per_epoch = 64;
  c.trainer.batch_size = 16;
  c.trainer.lr = 0.1;
  c.trainer.baseline_lr = 0.01;
  c.trainer.episode_log_every = 1;
  c.pretrain.expert_episodes = 32;
  c.pretrain.epochs = 2;
  c.eval.n_games = 50;
  c.eval.n_seeds = 3;
  return c;
}

inline Policy random_policy(int v, int d, Rng& rng, double scale = 1.0) {
  Policy p(v, d);
  std::normal_distribution<double> n(0.0, scale);
  for (double& w : p.params()) w = n(rng);
  return p;
}

inline Scene random_scene(const WorldConfig& world, Rng& rng) {
  return generate_scene(world, rng());
}

/// Drives `env` with uniformly random legal tokens until it finishes.
inline void random_walk(const Grammar& g, GameEnv& env, Rng& rng) {
  while (!env.finished()) {
    const Mask m = legal_tokens(g, env.state());
    std::vector<int> legal;
    for (int t = 0; t < static_cast<int>(m.size()); ++t)
      if (m[t]) legal.push_back(t);
    env.step(legal[uniform_index(rng, legal.size())]);
  }
}

/// Fresh directory removed on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("vqg_" + tag + "_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path / name).string(); }
};

/// |a - b| / max(|a|, |b|, 1e-3).
inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

}  // namespace vqg::testing
