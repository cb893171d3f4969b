#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "support.hpp"
#include "vqg/error.hpp"
#include "vqg/guesser.hpp"

using namespace vqg;

TEST(Guesser, UniformPrior) {
  const Posterior p = init_posterior(8);
  for (double x : p.probs) EXPECT_EQ(x, 0.125);
  EXPECT_NEAR(entropy(p.probs), std::log(8.0), 1e-15);
  EXPECT_EQ(guess(p), 0);
  EXPECT_THROW(init_posterior(0), Error);
}

TEST(Guesser, SingleUpdateByHand) {
  const std::vector<Answer> truths{Answer::kYes, Answer::kNo, Answer::kNA,
                                   Answer::kYes};
  const Posterior p =
      update_posterior(init_posterior(4), truths, Answer::kYes, 0.2);
  // Likelihoods 0.8, 0.1, 0.1, 0.8 over a uniform prior.
  EXPECT_NEAR(p.probs[0], 0.8 / 1.8, 1e-15);
  EXPECT_NEAR(p.probs[1], 0.1 / 1.8, 1e-15);
  EXPECT_NEAR(p.probs[2], 0.1 / 1.8, 1e-15);
  EXPECT_NEAR(p.probs[3], 0.8 / 1.8, 1e-15);
  EXPECT_EQ(guess(p), 0);
  EXPECT_FALSE(p.inconsistent);
}

TEST(Guesser, ImpossibleAnswerFallsBackToUniform) {
  const std::vector<Answer> truths{Answer::kYes, Answer::kYes};
  const Posterior p =
      update_posterior(init_posterior(2), truths, Answer::kNo, 0.0);
  EXPECT_TRUE(p.inconsistent);
  EXPECT_EQ(p.probs, init_posterior(2).probs);
}

TEST(Guesser, ArgmaxTiesGoLow) {
  Posterior p{{0.1, 0.4, 0.4, 0.1}, false};
  EXPECT_EQ(guess(p), 1);
  EXPECT_EQ(target_probability(p, 2), 0.4);
  EXPECT_THROW(target_probability(p, 4), Error);
}

TEST(Guesser, SequentialEqualsOneShot) {
  const Grammar g = Grammar::build({}, {});
  Rng rng(17);
  for (int trial = 0; trial < 2000; ++trial) {
    const Scene s = generate_scene(WorldConfig{}, rng());
    const double eps = uniform01(rng) * 0.5;
    const int target = static_cast<int>(uniform_index(rng, s.size()));
    const int rounds = 1 + static_cast<int>(uniform_index(rng, 8));
    Posterior seq = init_posterior(s);
    std::vector<double> joint(s.size(), 1.0);
    for (int j = 0; j < rounds; ++j) {
      const int p = static_cast<int>(uniform_index(rng, g.num_predicates()));
      const Answer obs =
          answer(g.predicate(p), s.objects[target], OracleConfig{eps}, rng);
      const auto truths = answer_all(g.predicate(p), s);
      seq = update_posterior(seq, truths, obs, eps);
      for (int n = 0; n < s.size(); ++n)
        joint[n] *= truths[n] == obs ? 1.0 - eps : eps / 2.0;
    }
    const double z = std::accumulate(joint.begin(), joint.end(), 0.0);
    if (z == 0.0) continue;
    for (int n = 0; n < s.size(); ++n)
      ASSERT_NEAR(seq.probs[n], joint[n] / z, 1e-9);
  }
}

TEST(Guesser, NoiselessSupportIsConsistentSet) {
  const Grammar g = Grammar::build({}, {});
  Rng rng(23);
  for (int trial = 0; trial < 2000; ++trial) {
    const Scene s = generate_scene(WorldConfig{}, rng());
    const int target = static_cast<int>(uniform_index(rng, s.size()));
    Posterior post = init_posterior(s);
    std::vector<bool> consistent(s.size(), true);
    const int rounds = 1 + static_cast<int>(uniform_index(rng, 6));
    for (int j = 0; j < rounds; ++j) {
      const Predicate& pred =
          g.predicate(static_cast<int>(uniform_index(rng, g.num_predicates())));
      const Answer obs = truth_answer(pred, s.objects[target]);
      post = update_posterior(post, pred, obs, s, 0.0);
      for (int n = 0; n < s.size(); ++n)
        if (truth_answer(pred, s.objects[n]) != obs) consistent[n] = false;
    }
    const int k = static_cast<int>(std::count(consistent.begin(), consistent.end(), true));
    ASSERT_TRUE(consistent[target]);
    for (int n = 0; n < s.size(); ++n) {
      ASSERT_EQ(post.probs[n] > 0.0, consistent[n]);
      if (consistent[n]) {
        ASSERT_NEAR(post.probs[n], 1.0 / k, 1e-12);
      }
    }
  }
}
