#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "support.hpp"
#include "vqg/error.hpp"
#include "vqg/eval.hpp"
#include "vqg/parallel.hpp"

using namespace vqg;
using vqg::testing::Bench;

namespace {

GameRecord game(bool success, std::vector<double> p_seq,
                std::vector<bool> flags = {}) {
  GameRecord g;
  g.success = success;
  g.num_objects = 8;
  for (std::size_t j = 0; j < p_seq.size(); ++j) {
    RoundRecord r;
    r.p_target = p_seq[j];
    r.informative = j < flags.size() ? flags[j] : true;
    g.rounds.push_back(r);
  }
  return g;
}

// Expert questioner wrapped as a game, for upper-bound checks.
bool expert_wins(const Bench& b, const Scene& s, int target, std::uint64_t seed) {
  const auto t = expert_episode(s, target, b.fmap, OracleConfig{0.0}, 5, 0.95, seed);
  return t.terminal.success;
}

}  // namespace

TEST(Metrics, TrendExamples) {
  const std::vector<GameRecord> up{game(true, {0.2, 0.4, 0.9})};
  const std::vector<GameRecord> down{game(true, {0.2, 0.5, 0.4})};
  const std::vector<GameRecord> ties{game(true, {0.3, 0.3, 0.5})};
  EXPECT_EQ(progressive_trend_pct(up), 100.0);
  EXPECT_EQ(progressive_trend_pct(down), 0.0);
  EXPECT_EQ(progressive_trend_pct(ties), 100.0);
  EXPECT_FALSE(progressive_trend_pct(std::vector<GameRecord>{game(false, {0.1})}));
}

TEST(Metrics, TrendFixtureOfTen) {
  std::vector<GameRecord> gs;
  for (int i = 0; i < 6; ++i) gs.push_back(game(true, {0.1, 0.3, 0.6}));
  gs.push_back(game(true, {0.5, 0.2}));
  gs.push_back(game(true, {0.2, 0.6, 0.55}));
  gs.push_back(game(false, {0.1, 0.2}));
  gs.push_back(game(false, {0.3, 0.1}));
  EXPECT_EQ(progressive_trend_pct(gs), 75.0);
  std::reverse(gs.begin(), gs.end());
  EXPECT_EQ(progressive_trend_pct(gs), 75.0);
}

TEST(Metrics, HighQualityFixture) {
  std::vector<GameRecord> gs;
  gs.push_back(game(true, {0.1, 0.2, 0.3, 0.4}, {true, false, true, true}));
  gs.push_back(game(true, {0.1, 0.2, 0.3}, {false, true, true}));
  gs.push_back(game(true, {0.1, 0.2, 0.3}, {true, false, true}));
  gs.push_back(game(false, {0.1, 0.2}, {false, false}));
  EXPECT_NEAR(*high_quality_pct(gs), 70.0, 1e-12);
  std::swap(gs[0], gs[3]);
  EXPECT_NEAR(*high_quality_pct(gs), 70.0, 1e-12);
  EXPECT_FALSE(high_quality_pct(std::vector<GameRecord>{game(true, {})}));
  EXPECT_EQ(high_quality_pct(std::vector<GameRecord>{game(true, {0.5}, {true})}), 100.0);
}

TEST(Metrics, MeanRoundsAndSummary) {
  std::vector<GameRecord> gs{game(true, {0.2, 0.3}), game(true, {0.2, 0.3, 0.9, 1}),
                             game(false, {0.1})};
  EXPECT_EQ(mean_rounds_successful(gs), 3.0);
  const auto s = summarize(gs);
  EXPECT_EQ(s.n_games, 3);
  EXPECT_NEAR(s.success_rate, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(s.mean_rounds, 7.0 / 3.0, 1e-15);
  EXPECT_EQ(mean_rounds_successful(std::vector<GameRecord>{}), 0.0);
}

TEST(RoundCurve, EmptyAndByHand) {
  const auto empty = round_success_curve(std::vector<GameRecord>{}, 5);
  EXPECT_EQ(empty.successes, std::vector<int>(5, 0));
  EXPECT_EQ(empty.games, 0);

  GameRecord g;
  g.target = 2;
  for (auto post : {std::vector<double>{0.5, 0.2, 0.3}, {0.2, 0.1, 0.7}}) {
    RoundRecord r;
    r.posterior = post;
    g.rounds.push_back(r);
  }
  GameRecord none;  // no rounds: the uniform prior guesses object 0
  none.target = 0;
  const std::vector<GameRecord> gs{g, none};
  const auto c = round_success_curve(gs, 4);
  EXPECT_EQ(c.successes, (std::vector<int>{1, 2, 2, 2}));
  EXPECT_EQ(c.ratios[0], 0.5);
}

class EvalTest : public ::testing::Test {
 protected:
  Bench bench{vqg::testing::small_config()};
  Splits world = make_splits(60, 60, bench.cfg.world, 2);

  Policy trained() {
    ExperimentConfig c = bench.cfg;
    c.trainer.epochs = 4;
    c.trainer.episodes_per_epoch = 400;
    c.trainer.lr = 0.3;
    const Trainer t(c, bench.fmap, world.train);
    auto s = t.initial_state(4);
    t.train(s);
    targets = s.targets;
    return s.policy;
  }

  EvalOptions options(SplitMode split, DecodeMode mode, int n) {
    EvalOptions o;
    o.split = split;
    o.mode = mode;
    o.n_games = n;
    o.seed = 99;
    o.oracle = bench.cfg.oracle;
    o.targets = &targets;
    return o;
  }

  TargetLog targets;
};

TEST_F(EvalTest, UntrainedGreedyIsChance) {
  const Policy zero(24, bench.fmap.dim());
  const auto r = evaluate(zero, bench.fmap, world.test,
                          options(SplitMode::kNewImage, DecodeMode::greedy(), 10000));
  EXPECT_NEAR(r.success_rate, 0.125, 0.015);
  for (const auto& g : r.games) EXPECT_EQ(g.num_rounds(), 0);
}

TEST_F(EvalTest, DeterministicAndOrderFree) {
  const Policy p = trained();
  for (auto mode : {DecodeMode::sampling(), DecodeMode::greedy(), DecodeMode::beam(5)}) {
    auto o = options(SplitMode::kNewImage, mode, 300);
    const auto a = evaluate(p, bench.fmap, world.test, o);
    o.workers = 3;
    const auto b = evaluate(p, bench.fmap, world.test, o);
    ASSERT_EQ(a.success_rate, b.success_rate);
    for (std::size_t i = 0; i < a.games.size(); ++i) {
      ASSERT_EQ(a.games[i].guess, b.games[i].guess);
      ASSERT_EQ(a.games[i].rounds.size(), b.games[i].rounds.size());
    }
  }
}

TEST_F(EvalTest, RecordsAreConsistent) {
  const Policy p = trained();
  const auto r = evaluate(p, bench.fmap, world.test,
                          options(SplitMode::kNewImage, DecodeMode::sampling(), 400));
  int wins = 0;
  for (const auto& g : r.games) {
    const Scene& s = world.test.at(g.scene_id - 60);
    ASSERT_EQ(g.num_objects, s.size());
    ASSERT_EQ(g.success, g.guess == g.target);
    wins += g.success;
    for (const auto& round : g.rounds) {
      // The stored flag equals a recount from the transcript.
      const auto answers = answer_all(bench.grammar, round.question, s);
      ASSERT_EQ(round.informative, informative(answers));
      ASSERT_EQ(round.p_target, round.posterior[g.target]);
    }
    if (!g.rounds.empty()) {
      ASSERT_EQ(g.guess, guess(Posterior{g.rounds.back().posterior, false}));
    }
  }
  EXPECT_EQ(r.success_rate, double(wins) / r.games.size());
}

TEST_F(EvalTest, CurveAtFinalRoundMatchesOutcome) {
  const Policy p = trained();
  const auto r = evaluate(p, bench.fmap, world.test,
                          options(SplitMode::kNewImage, DecodeMode::sampling(), 600));
  for (int j = 1; j <= 5; ++j) {
    std::vector<GameRecord> len_j;
    for (const auto& g : r.games)
      if (g.num_rounds() == j) len_j.push_back(g);
    const auto c = round_success_curve(len_j, 5);
    int wins = 0;
    for (const auto& g : len_j) wins += g.success;
    EXPECT_EQ(c.successes[j - 1], wins) << "J = " << j;
  }
}

TEST_F(EvalTest, NoiselessCurveIsMonotone) {
  const Policy p = trained();
  auto o = options(SplitMode::kNewImage, DecodeMode::sampling(), 500);
  o.oracle = OracleConfig{0.0};
  const auto r = evaluate(p, bench.fmap, world.test, o);
  for (const auto& g : r.games) {
    const std::vector<GameRecord> one{g};
    const auto c = round_success_curve(one, 5);
    for (int k = 1; k < 5; ++k) ASSERT_GE(c.successes[k], c.successes[k - 1]);
  }
}

TEST_F(EvalTest, NewObjectAvoidsTrainingTargets) {
  const Policy p = trained();
  const auto r = evaluate(p, bench.fmap, world.train,
                          options(SplitMode::kNewObject, DecodeMode::greedy(), 500));
  ASSERT_EQ(r.games.size(), 500u);
  for (const auto& g : r.games) ASSERT_FALSE(targets.seen(g.scene_id, g.target));

  TargetLog all;
  for (const auto& s : world.train)
    for (int n = 0; n < s.size(); ++n) all.mark(s.id, n);
  auto o = options(SplitMode::kNewObject, DecodeMode::greedy(), 10);
  o.targets = &all;
  EXPECT_THROW(evaluate(p, bench.fmap, world.train, o), Error);
  o.targets = nullptr;
  EXPECT_THROW(evaluate(p, bench.fmap, world.train, o), Error);
  EXPECT_THROW(evaluate(p, bench.fmap, std::span<const Scene>{},
                        options(SplitMode::kNewImage, DecodeMode::greedy(), 10)),
               Error);
}

TEST_F(EvalTest, ExpertUpperBoundOnSeparableScenes) {
  int games = 0, wins = 0;
  Rng rng(6);
  while (games < 2000) {
    const Scene s = generate_scene(bench.cfg.world, rng());
    const auto table = answer_table(bench.grammar, s);
    std::vector<std::vector<Answer>> cols(s.size());
    for (int p = 0; p < bench.grammar.num_predicates(); ++p)
      for (int n = 0; n < s.size(); ++n) cols[n].push_back(table[p * s.size() + n]);
    std::sort(cols.begin(), cols.end());
    if (std::adjacent_find(cols.begin(), cols.end()) != cols.end()) continue;
    ++games;
    wins += expert_wins(bench, s, static_cast<int>(uniform_index(rng, s.size())), rng());
  }
  EXPECT_GE(wins / double(games), 0.99);
}

TEST(Variants, NamesAndRewards) {
  for (Variant v : kAllVariants) EXPECT_EQ(variant_from_string(to_string(v)), v);
  EXPECT_THROW(variant_from_string("r_x"), Error);
  const RewardConfig base;
  EXPECT_THROW(variant_rewards(Variant::kSupervised, base), Error);
  const auto sole = variant_rewards(Variant::kSoleReward, base);
  EXPECT_TRUE(sole.sole_reward);
  EXPECT_FALSE(sole.goal || sole.progressive || sole.informativeness);
  const auto gp = variant_rewards(Variant::kGoalProgressive, base);
  EXPECT_TRUE(gp.goal && gp.progressive && !gp.informativeness && !gp.sole_reward);
  const auto gi = variant_rewards(Variant::kGoalInformative, base);
  EXPECT_TRUE(gi.goal && !gi.progressive && gi.informativeness);
  const auto full = variant_rewards(Variant::kFull, base);
  EXPECT_TRUE(full.goal && full.progressive && full.informativeness);
  EXPECT_EQ(to_string(Variant::kFull), std::string("r_g+r_p+r_i"));
}

TEST(Ablation, CellsEqualIndependentEvaluations) {
  ExperimentConfig cfg = vqg::testing::small_config();
  const Bench bench(cfg);
  AblationOptions opts;
  opts.seeds = {1, 2, 3};
  opts.variants = {Variant::kSupervised, Variant::kSoleReward, Variant::kFull};
  opts.modes = {DecodeMode::greedy(), DecodeMode::sampling()};
  const auto report = run_ablation(cfg, opts);
  ASSERT_EQ(report.cells.size(), 3u * 2 * 2);

  for (std::size_t k = 0; k < opts.seeds.size(); ++k) {
    const auto seed = opts.seeds[k];
    const auto trained = train_variants(cfg, bench.fmap, seed, opts.variants);
    for (const auto& cell : report.cells) {
      EvalOptions eo;
      eo.split = cell.split;
      eo.mode = cell.mode;
      eo.n_games = cfg.eval.n_games;
      eo.seed = derive_seed(seed, "eval");
      eo.oracle = cfg.oracle;
      eo.targets = &trained.targets;
      const auto& scenes = cell.split == SplitMode::kNewObject ? trained.splits.train
                                                               : trained.splits.test;
      const auto res = evaluate(trained.policies.at(cell.variant), bench.fmap, scenes, eo);
      ASSERT_EQ(cell.per_seed[k].success_rate, res.success_rate);
    }
  }
  for (const auto& cell : report.cells) {
    double m = 0.0;
    for (const auto& s : cell.per_seed) m += s.success_rate / 3.0;
    EXPECT_NEAR(cell.mean_success(), m, 1e-12);
    double v = 0.0;
    for (const auto& s : cell.per_seed) v += (s.success_rate - m) * (s.success_rate - m);
    EXPECT_NEAR(cell.std_success(), std::sqrt(v / 2.0), 1e-12);
  }

  const auto again = run_ablation(cfg, opts);
  EXPECT_EQ(ablation_json(again), ablation_json(report));
  const auto table = ablation_table(report);
  for (Variant v : opts.variants)
    EXPECT_NE(table.find(to_string(v)), std::string::npos);
  EXPECT_NE(table.find("NewObject/greedy"), std::string::npos);

  opts.seeds = {1, 2};
  EXPECT_THROW(run_ablation(cfg, opts), Error);
}

TEST(Study, MajorityVoteGroups) {
  auto rec = [](std::string ckpt, std::string group, bool ok) {
    StudyRecord r;
    r.checkpoint = std::move(ckpt);
    r.group_id = std::move(group);
    r.correct = ok;
    return r;
  };
  const std::vector<StudyRecord> rs{
      rec("a", "g1", true), rec("a", "g1", true), rec("a", "g1", false),
      rec("a", "g2", true), rec("a", "g2", false), rec("b", "g1", false),
      rec("b", "g3", true)};
  const auto s = summarize_study(rs);
  EXPECT_EQ(s.overall.sessions, 7);
  EXPECT_EQ(s.overall.correct, 4);
  EXPECT_EQ(s.overall.groups, 4);
  EXPECT_EQ(s.overall.groups_correct, 2);
  const auto& a = s.by_checkpoint.at("a");
  EXPECT_EQ(a.sessions, 5);
  EXPECT_EQ(a.groups, 2);
  EXPECT_EQ(a.groups_correct, 1);
  EXPECT_NEAR(a.accuracy(), 0.6, 1e-15);
  EXPECT_EQ(s.by_checkpoint.at("b").group_accuracy(), 0.5);
  EXPECT_EQ(summarize_study(std::vector<StudyRecord>{}).overall.sessions, 0);
}
