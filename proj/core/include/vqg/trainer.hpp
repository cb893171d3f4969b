#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vqg/baseline.hpp"
#include "vqg/config.hpp"
#include "vqg/game.hpp"
#include "vqg/questioner.hpp"
#include "vqg/rewards.hpp"

namespace vqg {

struct StepRecord {
  std::vector<double> features;
  int action = 0;
  Mask mask;
  double reward = 0.0;
  /// Q_t: undiscounted return from this step on.
  double ret = 0.0;
};

struct TerminalRecord {
  bool success = false;
  int rounds = 0;
  int guess = 0;
  int target = 0;
  /// Ended by J_max rather than "<End>".
  bool forced = false;
};

struct Trajectory {
  std::vector<StepRecord> steps;
  std::vector<RoundRecord> rounds;
  TerminalRecord terminal;
  std::int64_t scene_id = 0;
  std::uint64_t seed = 0;

  double total_reward() const;
  std::vector<int> actions() const;
};

/// Plays one episode, sampling tokens from `policy`. Oracle noise and token
/// sampling use separate streams derived from `seed`.
Trajectory rollout_episode(const Scene& scene, int target, const Policy& policy,
                           const FeatureMap& fmap, const OracleConfig& oracle,
                           const RewardConfig& rewards, std::uint64_t seed);

/// Feeds recorded `actions` through a fresh env with the same seed; the
/// result carries freshly computed rewards and returns.
Trajectory replay_episode(const Scene& scene, int target,
                          std::span<const int> actions, const FeatureMap& fmap,
                          const OracleConfig& oracle,
                          const RewardConfig& rewards, std::uint64_t seed);

struct GradientOptions {
  double entropy_bonus = 0.0;
  bool normalize_advantage = false;
};

/// Batch mean of sum_t grad log pi(A_t | S_t) * (Q_t - b(S_t)), the baseline
/// held constant. Throws Error for an empty batch.
std::vector<double> policy_gradient(std::span<const Trajectory> batch,
                                    const Policy& policy,
                                    const BaselineNet& baseline,
                                    const GradientOptions& opts = {});

/// One SGD step on the mean over all steps of (b(S_t) - Q_t)^2. Returns the
/// loss before the step.
double baseline_update(std::span<const Trajectory> batch,
                       BaselineNet& baseline, double lr);

/// Supervised objective: mean over expert steps of -log pi(expert token).
double supervised_nll(const Policy& policy,
                      std::span<const Trajectory> episodes);
/// Gradient of supervised_nll.
std::vector<double> supervised_nll_grad(const Policy& policy,
                                        std::span<const Trajectory> episodes);

/// Expected posterior entropy after asking predicate p, assuming truthful
/// answers: sum_a P(a) H(posterior | a).
double expected_posterior_entropy(const Posterior& post,
                                  std::span<const Answer> truths_of_p);

/// Scripted expert: "<End>" when the top posterior exceeds `stop_threshold`,
/// when every predicate was asked, or when nothing left is informative;
/// otherwise the unasked predicate with the largest expected entropy
/// reduction (ties within 1e-12 go to the lowest predicate index).
std::vector<int> expert_question(const Grammar& grammar, const Scene& scene,
                                 std::span<const Answer> truths,
                                 const Posterior& post,
                                 const std::vector<bool>& asked,
                                 double stop_threshold);

/// Plays an expert game and records (features, mask, token) per step.
Trajectory expert_episode(const Scene& scene, int target,
                          const FeatureMap& fmap, const OracleConfig& oracle,
                          int j_max, double stop_threshold, std::uint64_t seed);

/// Minibatch SGD on supervised_nll. Returns the NLL after each epoch.
std::vector<double> pretrain_supervised(std::span<const Trajectory> episodes,
                                        Policy& policy,
                                        const PretrainConfig& cfg,
                                        std::uint64_t seed);

/// Object ids used as targets during training, one bit per object, indexed
/// by training scene id. NewObject evaluation excludes them.
struct TargetLog {
  std::vector<std::uint64_t> used;

  void mark(std::int64_t scene_id, int object_id);
  bool seen(std::int64_t scene_id, int object_id) const;
  friend bool operator==(const TargetLog&, const TargetLog&) = default;
};

/// Everything needed to continue training bit-exactly.
struct TrainingState {
  Policy policy;
  BaselineNet baseline;
  int epoch = 0;
  std::uint64_t updates = 0;
  /// Text form of the master Rng (operator<<).
  std::string rng_state;
  TargetLog targets;
};

struct EpochMetrics {
  int epoch = 0;
  double success_rate = 0.0;
  double mean_rounds = 0.0;
  double mean_reward = 0.0;
  double baseline_loss = 0.0;
  std::uint64_t updates = 0;
};

struct TrainHooks {
  /// Called after every epoch with the updated state.
  std::function<void(const TrainingState&, const EpochMetrics&)> on_epoch;
  /// Called for logged episodes (see TrainerConfig::episode_log_every).
  std::function<void(const Trajectory&, int target)> on_episode;
};

/// Runs the policy-gradient loop over `train_scenes` (scene id == index).
class Trainer {
 public:
  Trainer(const ExperimentConfig& cfg, const FeatureMap& fmap,
          std::span<const Scene> train_scenes);

  /// Zero policy, freshly initialised baseline, master Rng seeded from
  /// `master_seed`.
  TrainingState initial_state(std::uint64_t master_seed) const;

  EpochMetrics run_epoch(TrainingState& state, const TrainHooks& hooks = {}) const;
  /// Runs epochs until state.epoch == cfg.trainer.epochs.
  std::vector<EpochMetrics> train(TrainingState& state,
                                  const TrainHooks& hooks = {}) const;

 private:
  ExperimentConfig cfg_;
  const FeatureMap* fmap_;
  std::span<const Scene> scenes_;
};

/// Expert episodes over training scenes; targets are recorded in `log` when
/// given.
std::vector<Trajectory> generate_expert_episodes(
    std::span<const Scene> train_scenes, const FeatureMap& fmap,
    const ExperimentConfig& cfg, std::uint64_t seed, TargetLog* log);

}  // namespace vqg
