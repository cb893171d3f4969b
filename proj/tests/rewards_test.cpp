#include <gtest/gtest.h>

#include <numeric>

#include "support.hpp"
#include "vqg/error.hpp"
#include "vqg/rewards.hpp"

using namespace vqg;

TEST(Rewards, GoalRewardTable) {
  const RewardConfig cfg;  // lambda 0.1, J_max 5
  const double want[] = {1.5, 1.25, 1.0 + 0.5 / 3.0, 1.125, 1.1};
  for (int j = 1; j <= 5; ++j) {
    EXPECT_NEAR(goal_reward(true, j, cfg), want[j - 1], 1e-12);
    EXPECT_EQ(goal_reward(false, j, cfg), 0.0);
  }
  EXPECT_THROW(goal_reward(true, 0, cfg), Error);
  EXPECT_THROW(goal_reward(true, 6, cfg), Error);
}

TEST(Rewards, GoalRewardFollowsLambda) {
  RewardConfig cfg;
  cfg.lambda = 0.0;
  EXPECT_EQ(goal_reward(true, 1, cfg), 1.0);
  cfg.lambda = 1.0;
  cfg.j_max = 10;
  EXPECT_EQ(goal_reward(true, 4, cfg), 3.5);
}

TEST(Rewards, Informativeness) {
  const RewardConfig cfg;
  using A = Answer;
  EXPECT_EQ(informativeness_reward(std::vector<A>{A::kYes, A::kYes}, cfg), 0.0);
  EXPECT_EQ(informativeness_reward(std::vector<A>{A::kNA, A::kNA, A::kNA}, cfg), 0.0);
  EXPECT_EQ(informativeness_reward(std::vector<A>{A::kYes, A::kNo}, cfg), 0.1);
  EXPECT_EQ(informativeness_reward(std::vector<A>{A::kNo, A::kNo, A::kNA}, cfg), 0.1);
  EXPECT_EQ(informativeness_reward(std::vector<A>{A::kNA}, cfg), 0.0);
  EXPECT_THROW(informativeness_reward(std::vector<A>{}, cfg), Error);
}

TEST(Rewards, InformativenessMatchesPairScan) {
  const Grammar g = Grammar::build({}, {});
  const RewardConfig cfg;
  Rng rng(5);
  for (int i = 0; i < 3000; ++i) {
    const Scene s = generate_scene(WorldConfig{}, rng());
    const auto answers = answer_all(
        g.predicate(static_cast<int>(uniform_index(rng, g.num_predicates()))), s);
    bool differ = false;
    for (std::size_t a = 0; a < answers.size(); ++a)
      for (std::size_t b = 0; b < answers.size(); ++b)
        differ |= answers[a] != answers[b];
    EXPECT_EQ(informativeness_reward(answers, cfg), differ ? cfg.eta : 0.0);
  }
}

TEST(Rewards, StepPlacement) {
  RewardConfig cfg;
  EpisodeOutcome ep;
  ep.rounds = {{3, 0.2, true}, {7, 0.5, false}, {11, 0.4, true}};
  ep.num_steps = 13;
  ep.terminal_step = 12;
  ep.success = true;
  const auto r = assemble_step_rewards(ep, cfg);
  ASSERT_EQ(r.size(), 13u);
  for (int t : {0, 1, 2, 4, 5, 6, 8, 9, 10}) EXPECT_EQ(r[t], 0.0);
  EXPECT_EQ(r[3], 0.1);
  EXPECT_NEAR(r[7], 0.3, 1e-15);
  EXPECT_NEAR(r[11], -0.1 + 0.1, 1e-15);
  EXPECT_NEAR(r[12], 1.0 + 0.5 / 3.0, 1e-12);
}

TEST(Rewards, ForcedEndPutsGoalOnLastQuestion) {
  RewardConfig cfg;
  cfg.j_max = 2;
  cfg.progressive = false;
  cfg.informativeness = false;
  EpisodeOutcome ep;
  ep.rounds = {{3, 0.3, true}, {7, 0.6, true}};
  ep.num_steps = 8;
  ep.terminal_step = 7;
  ep.success = true;
  const auto r = assemble_step_rewards(ep, cfg);
  EXPECT_EQ(r[7], 1.1);
  EXPECT_EQ(r[3], 0.0);
}

TEST(Rewards, ZeroRoundsScoresAsOneRound) {
  const RewardConfig cfg;
  EpisodeOutcome ep;
  ep.num_steps = 1;
  ep.terminal_step = 0;
  ep.success = true;
  EXPECT_EQ(assemble_step_rewards(ep, cfg), std::vector<double>{1.5});
  ep.success = false;
  EXPECT_EQ(assemble_step_rewards(ep, cfg), std::vector<double>{0.0});
}

TEST(Rewards, SoleReward) {
  RewardConfig cfg;
  cfg.goal = cfg.progressive = cfg.informativeness = false;
  cfg.sole_reward = true;
  EpisodeOutcome ep;
  ep.rounds = {{3, 0.2, true}, {7, 0.9, true}};
  ep.num_steps = 9;
  ep.terminal_step = 8;
  ep.success = true;
  auto r = assemble_step_rewards(ep, cfg);
  EXPECT_EQ(std::accumulate(r.begin(), r.end(), 0.0), 1.0);
  EXPECT_EQ(r[8], 1.0);
  ep.success = false;
  r = assemble_step_rewards(ep, cfg);
  EXPECT_EQ(std::accumulate(r.begin(), r.end(), 0.0), 0.0);
}

TEST(Rewards, ProgressiveTelescopes) {
  RewardConfig cfg;
  cfg.goal = cfg.informativeness = false;
  Rng rng(8);
  for (int i = 0; i < 5000; ++i) {
    EpisodeOutcome ep;
    const int j = 1 + static_cast<int>(uniform_index(rng, 5));
    int step = 0;
    for (int k = 0; k < j; ++k) {
      step += 1 + static_cast<int>(uniform_index(rng, 6));
      ep.rounds.push_back({step, uniform01(rng), false});
    }
    ep.num_steps = step + 2;
    ep.terminal_step = step + 1;
    const auto r = assemble_step_rewards(ep, cfg);
    double sum = 0.0;
    for (double x : r) sum += x;
    EXPECT_NEAR(sum, ep.rounds.back().p_target - ep.rounds.front().p_target, 1e-12);
  }
}

TEST(Rewards, MalformedOutcomes) {
  const RewardConfig cfg;
  EpisodeOutcome ep;
  ep.num_steps = 0;
  EXPECT_THROW(assemble_step_rewards(ep, cfg), Error);
  ep.num_steps = 3;
  ep.terminal_step = 3;
  EXPECT_THROW(assemble_step_rewards(ep, cfg), Error);
  ep.terminal_step = 2;
  ep.rounds.assign(6, {1, 0.5, true});
  EXPECT_THROW(assemble_step_rewards(ep, cfg), Error);
}

TEST(Rewards, SuffixSumsMatchBruteForce) {
  Rng rng(13);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> r(1 + uniform_index(rng, 60));
    for (double& x : r) x = u(rng);
    const auto q = returns(r);
    ASSERT_EQ(q.size(), r.size());
    for (std::size_t t = 0; t < r.size(); ++t) {
      double acc = 0.0;
      for (std::size_t k = r.size(); k-- > t;) acc += r[k];
      ASSERT_EQ(q[t], acc);
    }
  }
  EXPECT_TRUE(returns(std::vector<double>{}).empty());
}

TEST(Rewards, ConfigValidation) {
  RewardConfig cfg;
  cfg.lambda = -1;
  try {
    validate(cfg);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "rewards.lambda");
  }
  cfg = {};
  cfg.sole_reward = true;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = {};
  cfg.j_max = 0;
  EXPECT_THROW(validate(cfg), ConfigError);
}
