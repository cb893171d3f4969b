#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "support.hpp"
#include "vqg/checkpoint.hpp"
#include "vqg/error.hpp"
#include "vqg/records.hpp"

using namespace vqg;
using vqg::testing::Bench;
using vqg::testing::TempDir;

namespace {

TrainingState trained_state(const Bench& b, std::span<const Scene> scenes) {
  const Trainer t(b.cfg, b.fmap, scenes);
  auto s = t.initial_state(5);
  t.train(s);
  return s;
}

}  // namespace

TEST(Checkpoint, RoundTrip) {
  const Bench b(vqg::testing::small_config());
  const auto world = make_splits(20, 5, b.cfg.world, 3);
  const auto state = trained_state(b, world.train);
  TempDir dir("ckpt");
  const auto path = dir.file("a.ckpt");
  save_checkpoint(path, make_checkpoint(b.cfg, b.grammar, b.fmap, state, "full", 11));

  const Checkpoint c = load_checkpoint(path);
  EXPECT_EQ(c.format, kCheckpointFormat);
  EXPECT_EQ(c.config_hash, config_hash(b.cfg));
  EXPECT_EQ(parse_config(c.config_text), b.cfg);
  EXPECT_EQ(c.label, "full");
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.feature_dim, b.fmap.dim());
  EXPECT_EQ(c.state.policy, state.policy);
  EXPECT_EQ(c.state.baseline, state.baseline);
  EXPECT_EQ(c.state.epoch, state.epoch);
  EXPECT_EQ(c.state.updates, state.updates);
  EXPECT_EQ(c.state.rng_state, state.rng_state);
  EXPECT_EQ(c.state.targets, state.targets);

  const auto agent = load_agent(path);
  EXPECT_EQ(agent->policy, state.policy);
  EXPECT_EQ(agent->fmap.dim(), b.fmap.dim());
  EXPECT_EQ(agent->label, "full");
  EXPECT_FALSE(std::filesystem::exists(path + ".tmp"));
}

TEST(Checkpoint, MissingAndCorrupt) {
  TempDir dir("ckpt_bad");
  EXPECT_THROW(load_checkpoint(dir.file("none.ckpt")), NotFoundError);
  EXPECT_THROW(load_agent(dir.file("none.ckpt")), NotFoundError);

  std::ofstream(dir.file("junk.ckpt")) << "this is not a checkpoint";
  EXPECT_THROW(load_checkpoint(dir.file("junk.ckpt")), Error);

  const Bench b;
  TrainingState s;
  s.policy = Policy(24, b.fmap.dim());
  s.baseline = BaselineNet(b.fmap.dim(), 8, 1);
  const auto path = dir.file("cut.ckpt");
  save_checkpoint(path, make_checkpoint(b.cfg, b.grammar, b.fmap, s, "", 1));
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size / 2);
  EXPECT_THROW(load_checkpoint(path), Error);
}

TEST(Checkpoint, MismatchedLayoutIsRejected) {
  const Bench b;
  TrainingState s;
  s.policy = Policy(24, b.fmap.dim());
  s.baseline = BaselineNet(b.fmap.dim(), 8, 1);
  auto c = make_checkpoint(b.cfg, b.grammar, b.fmap, s, "", 1);
  EXPECT_NO_THROW(make_agent(c));
  auto wrong_vocab = c;
  wrong_vocab.grammar_hash ^= 1;
  EXPECT_THROW(make_agent(wrong_vocab), Error);
  auto wrong_shape = c;
  wrong_shape.state.policy = Policy(24, b.fmap.dim() - 1);
  EXPECT_THROW(make_agent(wrong_shape), Error);
}

TEST(Records, SceneLines) {
  const WorldConfig w;
  const auto splits = make_splits(30, 10, w, 8);
  for (const auto* part : {&splits.train, &splits.test}) {
    for (const auto& s : *part) {
      const auto line = scene_line(s, "abc");
      const auto j = nlohmann::json::parse(line);
      ASSERT_EQ(j.at("schema"), kRecordSchema);
      ASSERT_EQ(j.at("kind"), "scene");
      ASSERT_EQ(j.at("config_hash"), "abc");
      ASSERT_EQ(j.at("version"), code_version());
      ASSERT_EQ(scene_from_line(line), s);
    }
  }
  TempDir dir("scenes");
  write_scenes(dir.file("s.jsonl"), splits.test, "abc");
  EXPECT_EQ(read_scenes(dir.file("s.jsonl")), splits.test);
  EXPECT_THROW(read_scenes(dir.file("none.jsonl")), NotFoundError);
  EXPECT_THROW(scene_from_line(pretrain_line(1, 0.5, "abc")), Error);
}

TEST(Records, EpisodeLogReplays) {
  const Bench b(vqg::testing::small_config());
  const auto world = make_splits(20, 5, b.cfg.world, 3);
  TempDir dir("episodes");
  const auto path = dir.file("episodes.jsonl");
  {
    JsonlWriter w(path, true);
    w.write(episode_header_line(b.cfg));
    const Trainer t(b.cfg, b.fmap, world.train);
    auto s = t.initial_state(2);
    TrainHooks hooks;
    std::uint64_t n = 0;
    hooks.on_episode = [&](const Trajectory& traj, int target) {
      w.write(episode_line(traj, world.train.at(traj.scene_id), target, n++,
                           config_hash(b.cfg)));
    };
    t.train(s, hooks);
  }
  const auto log = read_episode_log(path);
  EXPECT_EQ(log.config, b.cfg);
  ASSERT_GT(log.episodes.size(), 4u);
  for (const auto& ep : log.episodes) {
    const auto check = verify_episode(ep, b.fmap, log.config);
    ASSERT_TRUE(check.ok) << check.message;
  }

  auto tampered = log.episodes.front();
  tampered.rewards.back() += 1e-12;
  EXPECT_FALSE(verify_episode(tampered, b.fmap, log.config).ok);
  tampered = log.episodes.front();
  tampered.seed ^= 1;
  tampered.actions.push_back(Vocabulary::kEnd);
  EXPECT_FALSE(verify_episode(tampered, b.fmap, log.config).ok);
}

TEST(Records, EvalAndGameLines) {
  EvalSummary s;
  s.n_games = 3;
  s.success_rate = 2.0 / 3.0;
  s.progressive_trend = 50.0;
  const auto j = nlohmann::json::parse(
      eval_line(s, SplitMode::kNewObject, DecodeMode::beam(5), "h", "full"));
  EXPECT_EQ(j.at("kind"), "eval");
  EXPECT_EQ(j.at("split"), "NewObject");
  EXPECT_EQ(j.at("mode"), "beam5");
  EXPECT_EQ(j.at("success").get<double>(), 2.0 / 3.0);
  EXPECT_EQ(j.at("progressive_trend_pct"), 50.0);
  EXPECT_TRUE(j.at("high_quality_pct").is_null());
}

TEST(Records, StudyLedger) {
  TempDir dir("ledger");
  const auto path = dir.file("ledger.jsonl");
  EXPECT_TRUE(read_study_ledger(path).empty());
  {
    JsonlWriter w(path, false);
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
      threads.emplace_back([&w, t] {
        for (int i = 0; i < 50; ++i) {
          StudyRecord r;
          r.session_id = "s" + std::to_string(t * 100 + i);
          r.checkpoint = t % 2 ? "a" : "b";
          r.group_id = "g" + std::to_string(i % 5);
          r.correct = (i + t) % 3 == 0;
          r.elapsed_s = 1.25;
          w.write(study_record_line(r));
        }
      });
    }
    for (auto& th : threads) th.join();
  }
  const auto got = read_study_ledger(path);
  ASSERT_EQ(got.size(), 200u);
  int correct = 0;
  for (const auto& r : got) correct += r.correct;
  EXPECT_EQ(summarize_study(got).overall.correct, correct);

  StudyRecord r;
  r.session_id = "x";
  r.checkpoint = "ck";
  r.scene_seed = 18446744073709551615ull;
  r.guess = 3;
  r.target = 3;
  r.correct = true;
  const auto back = study_record_from_line(study_record_line(r));
  EXPECT_EQ(back.scene_seed, r.scene_seed);
  EXPECT_EQ(back.session_id, "x");
  EXPECT_TRUE(back.correct);
  EXPECT_THROW(study_record_from_line("{\"kind\":\"study\"}"), Error);
  EXPECT_THROW(study_record_from_line("not json"), Error);
}
