#include "vqg/rewards.hpp"

#include <algorithm>
#include <cmath>

#include "vqg/error.hpp"

namespace vqg {

void validate(const RewardConfig& cfg) {
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda))
    throw ConfigError("rewards.lambda", "must be a finite value >= 0");
  if (!(cfg.eta >= 0.0) || !std::isfinite(cfg.eta))
    throw ConfigError("rewards.eta", "must be a finite value >= 0");
  if (cfg.j_max < 1) throw ConfigError("rewards.j_max", "must be >= 1");
  if (cfg.sole_reward && (cfg.goal || cfg.progressive || cfg.informativeness))
    throw ConfigError("rewards.sole_reward",
                      "excludes goal, progressive and informativeness");
}

double goal_reward(bool success, int rounds, const RewardConfig& cfg) {
  if (rounds < 1 || rounds > cfg.j_max)
    throw Error("goal_reward: rounds must lie in [1, J_max]");
  return success ? 1.0 + cfg.lambda * cfg.j_max / rounds : 0.0;
}

double progressive_reward(double p_now, double p_prev) {
  return p_now - p_prev;
}

bool informative(std::span<const Answer> answers) {
  return std::adjacent_find(answers.begin(), answers.end(),
                            std::not_equal_to<>()) != answers.end();
}

double informativeness_reward(std::span<const Answer> answers,
                              const RewardConfig& cfg) {
  if (answers.empty()) throw Error("informativeness_reward: no answers");
  return informative(answers) ? cfg.eta : 0.0;
}

std::vector<double> assemble_step_rewards(const EpisodeOutcome& ep,
                                          const RewardConfig& cfg) {
  const int j = static_cast<int>(ep.rounds.size());
  if (ep.num_steps < 1 || ep.terminal_step < 0 ||
      ep.terminal_step >= ep.num_steps)
    throw Error("assemble_step_rewards: terminal step outside the episode");
  if (j > cfg.j_max)
    throw Error("assemble_step_rewards: more rounds than J_max");
  for (const auto& r : ep.rounds)
    if (r.end_step < 0 || r.end_step > ep.terminal_step)
      throw Error("assemble_step_rewards: round ends outside the episode");

  std::vector<double> r(ep.num_steps, 0.0);
  if (cfg.sole_reward) {
    if (ep.success) r[ep.terminal_step] = 1.0;
    return r;
  }
  for (int k = 0; k < j; ++k) {
    const auto& round = ep.rounds[k];
    // Round 1 has no previous Guesser estimate to compare against.
    if (cfg.progressive && k > 0)
      r[round.end_step] +=
          progressive_reward(round.p_target, ep.rounds[k - 1].p_target);
    if (cfg.informativeness && round.informative) r[round.end_step] += cfg.eta;
  }
  if (cfg.goal) r[ep.terminal_step] += goal_reward(ep.success, std::max(j, 1), cfg);
  return r;
}

std::vector<double> returns(std::span<const double> step_rewards) {
  std::vector<double> q(step_rewards.size());
  double acc = 0.0;
  for (std::size_t i = step_rewards.size(); i-- > 0;) {
    acc += step_rewards[i];
    q[i] = acc;
  }
  return q;
}

}  // namespace vqg
