#pragma once

#include <span>
#include <vector>

#include "vqg/oracle.hpp"

namespace vqg {

struct RewardConfig {
  double lambda = 0.1;
  double eta = 0.1;
  int j_max = 5;
  bool goal = true;
  bool progressive = true;
  bool informativeness = true;
  /// Success indicator as the only reward; excludes the three switches above.
  bool sole_reward = false;

  friend bool operator==(const RewardConfig&, const RewardConfig&) = default;
};

/// Throws ConfigError naming the offending key.
void validate(const RewardConfig& cfg);

/// 1 + lambda * J_max / J on success, 0 otherwise. Requires 1 <= J <= J_max.
double goal_reward(bool success, int rounds, const RewardConfig& cfg);

/// p_j - p_{j-1}.
double progressive_reward(double p_now, double p_prev);

/// True when at least two objects answer differently.
bool informative(std::span<const Answer> answers);

/// eta when the per-object answers are not all identical, else 0.
double informativeness_reward(std::span<const Answer> answers,
                              const RewardConfig& cfg);

/// Per-round facts needed to place rewards on steps.
struct RoundOutcome {
  /// Step index of the "?" that closed the question.
  int end_step = 0;
  /// Guesser probability of the target after this round's answer.
  double p_target = 0.0;
  bool informative = false;
};

struct EpisodeOutcome {
  std::vector<RoundOutcome> rounds;
  /// Number of actions taken (steps are 0..num_steps-1).
  int num_steps = 0;
  /// Step carrying the goal reward: the "<End>" action, or the last "?" when
  /// J_max forced termination.
  int terminal_step = 0;
  bool success = false;
};

/// Round j's progressive (j > 1) and informativeness rewards land on the step
/// that emitted its "?"; the goal reward lands on the terminal step. Other
/// steps get 0. An episode with zero rounds scores the goal reward as if J = 1.
std::vector<double> assemble_step_rewards(const EpisodeOutcome& episode,
                                          const RewardConfig& cfg);

/// Q_t = sum_{t' >= t} r_t'.
std::vector<double> returns(std::span<const double> step_rewards);

}  // namespace vqg
