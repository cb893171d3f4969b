#pragma once

#include <cstdint>
#include <string>

#include "vqg/grammar.hpp"
#include "vqg/oracle.hpp"
#include "vqg/questioner.hpp"
#include "vqg/rewards.hpp"
#include "vqg/world.hpp"

namespace vqg {

struct TrainerConfig {
  double lr = 0.001;
  int batch_size = 64;
  int epochs = 100;
  /// Episodes per epoch; 0 means one episode per training scene.
  int episodes_per_epoch = 0;
  double baseline_lr = 0.001;
  int baseline_hidden = 32;
  /// Extensions, off by default.
  double entropy_bonus = 0.0;
  bool normalize_advantage = false;
  /// Checkpoint to warm-start the policy from (usually a pretrain output).
  std::string warm_start;
  int checkpoint_every = 1;
  /// Log the first episode of every n-th update for `replay`; 0 disables.
  int episode_log_every = 50;

  friend bool operator==(const TrainerConfig&, const TrainerConfig&) = default;
};

struct PretrainConfig {
  int expert_episodes = 2000;
  int epochs = 20;
  double lr = 0.1;
  int batch_size = 16;
  /// The scripted expert says "<End>" once the top posterior exceeds this.
  double stop_threshold = 0.95;

  friend bool operator==(const PretrainConfig&, const PretrainConfig&) = default;
};

struct EvalConfig {
  int n_games = 2000;
  int n_seeds = 5;

  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

struct HarnessConfig {
  std::uint64_t seed = 1;
  int n_train_scenes = 2000;
  int n_test_scenes = 500;
  /// Worker threads for rollouts and evaluation; 0 = available cores.
  int workers = 0;
  std::string out_dir = "runs";

  friend bool operator==(const HarnessConfig&, const HarnessConfig&) = default;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string checkpoint_dir = "runs";
  std::string ledger = "runs/study_ledger.jsonl";
  int idle_timeout_s = 1800;
  std::string decode = "greedy";

  friend bool operator==(const ServiceConfig&, const ServiceConfig&) = default;
};

struct ExperimentConfig {
  WorldConfig world;
  OracleConfig oracle{0.1};
  GrammarConfig grammar;
  FeatureConfig features;
  RewardConfig rewards;
  TrainerConfig trainer;
  PretrainConfig pretrain;
  EvalConfig eval;
  HarnessConfig harness;
  ServiceConfig service;

  friend bool operator==(const ExperimentConfig&,
                         const ExperimentConfig&) = default;
};

/// Validates every section; throws ConfigError naming the key and the
/// allowed range.
void validate(const ExperimentConfig& cfg);

/// INI text with sections [world] [oracle] [grammar] [features] [rewards]
/// [trainer] [pretrain] [eval] [harness] [service]. Missing keys keep their
/// defaults; unknown keys are rejected.
ExperimentConfig parse_config(const std::string& text);
/// Reads `path` (throws NotFoundError when absent) and validates.
ExperimentConfig load_config(const std::string& path);
/// Canonical INI rendering; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);
/// FNV-1a of the canonical rendering, as 16 hex digits. Output directory,
/// worker count and the [service] section do not change results and are left
/// out.
std::string config_hash(const ExperimentConfig& cfg);

/// Library version string embedded in every artifact.
const char* code_version();

}  // namespace vqg
