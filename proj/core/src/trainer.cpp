#include "vqg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "vqg/error.hpp"
#include "vqg/parallel.hpp"

namespace vqg {

double Trajectory::total_reward() const {
  double s = 0.0;
  for (const auto& st : steps) s += st.reward;
  return s;
}

std::vector<int> Trajectory::actions() const {
  std::vector<int> out;
  out.reserve(steps.size());
  for (const auto& st : steps) out.push_back(st.action);
  return out;
}

namespace {

int single_legal(const Mask& mask) {
  int found = -1;
  for (int w = 0; w < static_cast<int>(mask.size()); ++w) {
    if (!mask[w]) continue;
    if (found >= 0) return -1;
    found = w;
  }
  return found;
}

template <typename Choose>
Trajectory run_episode(const Scene& scene, int target, const FeatureMap& fmap,
                       const OracleConfig& oracle, const RewardConfig& rewards,
                       std::uint64_t seed, Choose&& choose) {
  const Grammar& g = fmap.grammar();
  GameEnv env(g, scene, target, oracle, rewards.j_max,
              derive_seed(seed, "env"));
  Trajectory traj;
  traj.scene_id = scene.id;
  traj.seed = seed;
  FeatureMap::RoundBlock block;
  while (!env.finished()) {
    const auto& st = env.state();
    if (st.at_boundary()) block = fmap.round_block(st);
    StepRecord step;
    step.mask = legal_tokens(g, env.node());
    step.features.resize(fmap.dim());
    fmap.fill(block, env.node(), static_cast<int>(st.prefix.size()),
              st.last_token, step.features);
    step.action = choose(step);
    env.step(step.action);
    traj.steps.push_back(std::move(step));
  }

  EpisodeOutcome outcome;
  outcome.num_steps = env.num_steps();
  outcome.terminal_step = env.num_steps() - 1;
  outcome.success = env.success();
  for (const auto& r : env.rounds())
    outcome.rounds.push_back({r.end_step, r.p_target, r.informative});
  const auto r = assemble_step_rewards(outcome, rewards);
  const auto q = returns(r);
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    traj.steps[t].reward = r[t];
    traj.steps[t].ret = q[t];
  }
  traj.rounds = env.rounds();
  traj.terminal = {env.success(), env.rounds_used(), env.guess(), target,
                   env.forced()};
  return traj;
}

}  // namespace

Trajectory rollout_episode(const Scene& scene, int target, const Policy& policy,
                           const FeatureMap& fmap, const OracleConfig& oracle,
                           const RewardConfig& rewards, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "policy"));
  return run_episode(scene, target, fmap, oracle, rewards, seed,
                     [&](const StepRecord& step) {
                       if (const int only = single_legal(step.mask); only >= 0)
                         return only;
                       const auto probs =
                           action_distribution(policy, step.features, step.mask);
                       const double u = uniform01(rng);
                       double acc = 0.0;
                       int tok = -1;
                       for (int w = 0; w < policy.num_tokens(); ++w) {
                         if (!step.mask[w]) continue;
                         tok = w;
                         acc += probs[w];
                         if (u < acc) break;
                       }
                       return tok;
                     });
}

Trajectory replay_episode(const Scene& scene, int target,
                          std::span<const int> actions, const FeatureMap& fmap,
                          const OracleConfig& oracle,
                          const RewardConfig& rewards, std::uint64_t seed) {
  std::size_t next = 0;
  auto traj = run_episode(scene, target, fmap, oracle, rewards, seed,
                          [&](const StepRecord&) {
                            if (next >= actions.size())
                              throw Error("replay: recorded actions end before "
                                          "the game does");
                            return actions[next++];
                          });
  if (next != actions.size())
    throw Error("replay: game ended with recorded actions left over");
  return traj;
}

// ---------------------------------------------------------------------------
// Gradients

namespace {

// grad += scale * d H(pi(.|f)) / d theta, H the entropy of the masked softmax.
void accumulate_entropy_grad(const Policy& policy, std::span<const double> f,
                             const Mask& mask, double scale,
                             std::span<double> grad) {
  const auto probs = action_distribution(policy, f, mask);
  double h = 0.0;
  for (int w = 0; w < policy.num_tokens(); ++w)
    if (mask[w] && probs[w] > 0.0) h -= probs[w] * std::log(probs[w]);
  const int d = policy.feature_dim();
  const std::size_t bias_off =
      static_cast<std::size_t>(policy.num_tokens()) * d;
  for (int w = 0; w < policy.num_tokens(); ++w) {
    if (!mask[w] || probs[w] <= 0.0) continue;
    const double coef = -scale * probs[w] * (std::log(probs[w]) + h);
    double* row = grad.data() + static_cast<std::size_t>(w) * d;
    for (int k = 0; k < d; ++k) row[k] += coef * f[k];
    grad[bias_off + w] += coef;
  }
}

}  // namespace

std::vector<double> policy_gradient(std::span<const Trajectory> batch,
                                    const Policy& policy,
                                    const BaselineNet& baseline,
                                    const GradientOptions& opts) {
  if (batch.empty()) throw Error("policy_gradient: empty batch");
  struct Item {
    const StepRecord* step;
    double advantage;
  };
  std::vector<Item> items;
  for (const auto& traj : batch)
    for (const auto& st : traj.steps)
      if (single_legal(st.mask) < 0)
        items.push_back({&st, st.ret - baseline.value(st.features)});

  if (opts.normalize_advantage && items.size() > 1) {
    double mean = 0.0;
    for (const auto& it : items) mean += it.advantage;
    mean /= static_cast<double>(items.size());
    double var = 0.0;
    for (const auto& it : items)
      var += (it.advantage - mean) * (it.advantage - mean);
    const double sd = std::sqrt(var / static_cast<double>(items.size()));
    for (auto& it : items) it.advantage = (it.advantage - mean) / (sd + 1e-8);
  }

  std::vector<double> g(policy.num_params(), 0.0);
  for (const auto& it : items) {
    accumulate_grad_log_prob(policy, it.step->features, it.step->mask,
                             it.step->action, it.advantage, g);
    if (opts.entropy_bonus != 0.0)
      accumulate_entropy_grad(policy, it.step->features, it.step->mask,
                              opts.entropy_bonus, g);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& x : g) x *= inv;
  return g;
}

double baseline_update(std::span<const Trajectory> batch,
                       BaselineNet& baseline, double lr) {
  if (batch.empty()) throw Error("baseline_update: empty batch");
  std::vector<BaselineSample> samples;
  for (const auto& traj : batch)
    for (const auto& st : traj.steps)
      samples.push_back({st.features, st.ret});
  return sgd_step(baseline, samples, lr);
}

double supervised_nll(const Policy& policy,
                      std::span<const Trajectory> episodes) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& ep : episodes)
    for (const auto& st : ep.steps) {
      ++count;
      if (single_legal(st.mask) >= 0) continue;
      sum -= log_prob(policy, st.features, st.mask, st.action);
    }
  return count ? sum / static_cast<double>(count) : 0.0;
}

std::vector<double> supervised_nll_grad(const Policy& policy,
                                        std::span<const Trajectory> episodes) {
  std::vector<double> g(policy.num_params(), 0.0);
  std::size_t count = 0;
  for (const auto& ep : episodes) count += ep.steps.size();
  if (count == 0) return g;
  const double scale = -1.0 / static_cast<double>(count);
  for (const auto& ep : episodes)
    for (const auto& st : ep.steps)
      accumulate_grad_log_prob(policy, st.features, st.mask, st.action, scale,
                               g);
  return g;
}

// ---------------------------------------------------------------------------
// Scripted expert and supervised pretraining

double expected_posterior_entropy(const Posterior& post,
                                  std::span<const Answer> truths_of_p) {
  double mass[kNumAnswers] = {0.0, 0.0, 0.0};
  for (int n = 0; n < post.size(); ++n)
    mass[static_cast<int>(truths_of_p[n])] += post.probs[n];
  double expected = 0.0;
  for (int a = 0; a < kNumAnswers; ++a) {
    if (!(mass[a] > 0.0)) continue;
    double h = 0.0;
    for (int n = 0; n < post.size(); ++n) {
      if (static_cast<int>(truths_of_p[n]) != a || !(post.probs[n] > 0.0))
        continue;
      const double q = post.probs[n] / mass[a];
      h -= q * std::log(q);
    }
    expected += mass[a] * h;
  }
  return expected;
}

std::vector<int> expert_question(const Grammar& grammar, const Scene& scene,
                                 std::span<const Answer> truths,
                                 const Posterior& post,
                                 const std::vector<bool>& asked,
                                 double stop_threshold) {
  const std::vector<int> end{Vocabulary::kEnd};
  const int n = scene.size();
  if (*std::max_element(post.probs.begin(), post.probs.end()) > stop_threshold)
    return end;
  const double h0 = entropy(post.probs);
  int best = -1;
  double best_gain = 0.0;
  for (int p = 0; p < grammar.num_predicates(); ++p) {
    if (p < static_cast<int>(asked.size()) && asked[p]) continue;
    const double gain =
        h0 - expected_posterior_entropy(post, truths.subspan(p * n, n));
    if (best < 0 || gain > best_gain + 1e-12) {
      best = p;
      best_gain = gain;
    }
  }
  if (best < 0 || best_gain <= 1e-12) return end;
  return grammar.predicate_tokens(best);
}

Trajectory expert_episode(const Scene& scene, int target,
                          const FeatureMap& fmap, const OracleConfig& oracle,
                          int j_max, double stop_threshold,
                          std::uint64_t seed) {
  RewardConfig rewards;
  rewards.j_max = j_max;
  std::vector<int> pending;
  std::size_t next = 0;
  const Grammar& g = fmap.grammar();
  // Reuses the rollout machinery; the expert plans one question at a time.
  GameEnv probe(g, scene, target, oracle, j_max, derive_seed(seed, "env"));
  return run_episode(
      scene, target, fmap, oracle, rewards, seed, [&](const StepRecord&) {
        if (next >= pending.size()) {
          const auto& st = probe.state();
          std::vector<bool> asked(g.num_predicates(), false);
          for (const auto& turn : st.history) asked[turn.predicate] = true;
          pending = expert_question(g, scene, st.truths, st.posterior, asked,
                                    stop_threshold);
          next = 0;
        }
        const int tok = pending[next++];
        probe.step(tok);
        return tok;
      });
}

std::vector<double> pretrain_supervised(std::span<const Trajectory> episodes,
                                        Policy& policy,
                                        const PretrainConfig& cfg,
                                        std::uint64_t seed) {
  std::vector<double> history;
  if (episodes.empty()) return history;
  Rng rng(derive_seed(seed, "pretrain"));
  std::vector<std::size_t> order(episodes.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = std::max(1, cfg.batch_size);
  std::vector<Trajectory> minibatch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[uniform_index(rng, i)]);
    for (std::size_t lo = 0; lo < order.size(); lo += bs) {
      const std::size_t hi = std::min(order.size(), lo + bs);
      std::vector<double> g(policy.num_params(), 0.0);
      std::size_t count = 0;
      for (std::size_t k = lo; k < hi; ++k) count += episodes[order[k]].steps.size();
      if (count == 0) continue;
      const double scale = -1.0 / static_cast<double>(count);
      for (std::size_t k = lo; k < hi; ++k)
        for (const auto& st : episodes[order[k]].steps)
          accumulate_grad_log_prob(policy, st.features, st.mask, st.action,
                                   scale, g);
      auto theta = policy.params();
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= cfg.lr * g[i];
    }
    if (!policy.all_finite())
      throw NumericError("pretrain: non-finite policy parameters");
    history.push_back(supervised_nll(policy, episodes));
  }
  return history;
}

std::vector<Trajectory> generate_expert_episodes(
    std::span<const Scene> train_scenes, const FeatureMap& fmap,
    const ExperimentConfig& cfg, std::uint64_t seed, TargetLog* log) {
  if (train_scenes.empty()) throw Error("expert episodes: no training scenes");
  Rng rng(derive_seed(seed, "expert-episodes"));
  const int n = cfg.pretrain.expert_episodes;
  struct Spec {
    std::size_t scene;
    int target;
    std::uint64_t seed;
  };
  std::vector<Spec> specs(n);
  for (auto& s : specs) {
    s.scene = uniform_index(rng, train_scenes.size());
    s.target = static_cast<int>(
        uniform_index(rng, train_scenes[s.scene].objects.size()));
    s.seed = rng();
    if (log) log->mark(train_scenes[s.scene].id, s.target);
  }
  std::vector<Trajectory> out(n);
  parallel_for(specs.size(), resolve_workers(cfg.harness.workers),
               [&](std::size_t i) {
                 const auto& s = specs[i];
                 out[i] = expert_episode(train_scenes[s.scene], s.target, fmap,
                                         cfg.oracle, cfg.rewards.j_max,
                                         cfg.pretrain.stop_threshold, s.seed);
               });
  return out;
}

// ---------------------------------------------------------------------------
// Training loop

void TargetLog::mark(std::int64_t scene_id, int object_id) {
  if (scene_id < 0 || object_id < 0 || object_id >= 64)
    throw Error("TargetLog: id out of range");
  if (static_cast<std::size_t>(scene_id) >= used.size())
    used.resize(static_cast<std::size_t>(scene_id) + 1, 0);
  used[static_cast<std::size_t>(scene_id)] |= std::uint64_t{1} << object_id;
}

bool TargetLog::seen(std::int64_t scene_id, int object_id) const {
  if (scene_id < 0 || static_cast<std::size_t>(scene_id) >= used.size())
    return false;
  return (used[static_cast<std::size_t>(scene_id)] >> object_id) & 1U;
}

Trainer::Trainer(const ExperimentConfig& cfg, const FeatureMap& fmap,
                 std::span<const Scene> train_scenes)
    : cfg_(cfg), fmap_(&fmap), scenes_(train_scenes) {
  validate(cfg_);
  if (scenes_.empty()) throw Error("Trainer: no training scenes");
  for (std::size_t i = 0; i < scenes_.size(); ++i)
    if (scenes_[i].id != static_cast<std::int64_t>(i))
      throw Error("Trainer: training scene ids must equal their index");
}

TrainingState Trainer::initial_state(std::uint64_t master_seed) const {
  TrainingState s;
  s.policy = Policy(fmap_->grammar().vocab().size(), fmap_->dim());
  s.baseline = BaselineNet(fmap_->dim(), cfg_.trainer.baseline_hidden,
                           derive_seed(master_seed, "baseline"));
  std::ostringstream os;
  os << Rng(derive_seed(master_seed, "trainer"));
  s.rng_state = os.str();
  return s;
}

EpochMetrics Trainer::run_epoch(TrainingState& state,
                                const TrainHooks& hooks) const {
  const auto& tc = cfg_.trainer;
  Rng master;
  {
    std::istringstream is(state.rng_state);
    is >> master;
    if (!is) throw Error("Trainer: corrupt rng state");
  }
  const std::size_t n_eps = tc.episodes_per_epoch > 0
                                ? static_cast<std::size_t>(tc.episodes_per_epoch)
                                : scenes_.size();
  // Each pass over the training scenes visits every scene once, in a fresh
  // random order, with a uniformly drawn target.
  struct Spec {
    std::size_t scene;
    int target;
    std::uint64_t seed;
  };
  std::vector<Spec> specs;
  specs.reserve(n_eps);
  std::vector<std::size_t> order(scenes_.size());
  while (specs.size() < n_eps) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[uniform_index(master, i)]);
    for (std::size_t k = 0; k < order.size() && specs.size() < n_eps; ++k) {
      const auto& scene = scenes_[order[k]];
      const int target =
          static_cast<int>(uniform_index(master, scene.objects.size()));
      specs.push_back({order[k], target, master()});
    }
  }

  const int workers = resolve_workers(cfg_.harness.workers);
  const GradientOptions gopts{tc.entropy_bonus, tc.normalize_advantage};
  const std::size_t bs = static_cast<std::size_t>(tc.batch_size);
  EpochMetrics m;
  double successes = 0, rounds = 0, reward = 0, loss = 0;
  std::size_t batches = 0;
  std::vector<Trajectory> batch;
  for (std::size_t lo = 0; lo < specs.size(); lo += bs) {
    const std::size_t hi = std::min(specs.size(), lo + bs);
    batch.assign(hi - lo, Trajectory{});
    parallel_for(hi - lo, workers, [&](std::size_t i) {
      const auto& s = specs[lo + i];
      batch[i] = rollout_episode(scenes_[s.scene], s.target, state.policy,
                                 *fmap_, cfg_.oracle, cfg_.rewards, s.seed);
    });
    for (std::size_t i = lo; i < hi; ++i)
      state.targets.mark(scenes_[specs[i].scene].id, specs[i].target);

    auto g = policy_gradient(batch, state.policy, state.baseline, gopts);
    for (double x : g)
      if (!std::isfinite(x))
        throw NumericError("non-finite policy gradient at update " +
                           std::to_string(state.updates));
    auto theta = state.policy.params();
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += tc.lr * g[i];
    loss += baseline_update(batch, state.baseline, tc.baseline_lr);
    if (!state.baseline.all_finite())
      throw NumericError("non-finite baseline parameters at update " +
                         std::to_string(state.updates));

    if (hooks.on_episode && tc.episode_log_every > 0 &&
        state.updates % static_cast<std::uint64_t>(tc.episode_log_every) == 0)
      hooks.on_episode(batch.front(), specs[lo].target);
    ++state.updates;
    ++batches;
    for (const auto& t : batch) {
      successes += t.terminal.success ? 1 : 0;
      rounds += t.terminal.rounds;
      reward += t.total_reward();
    }
  }

  std::ostringstream os;
  os << master;
  state.rng_state = os.str();
  ++state.epoch;

  const double n = static_cast<double>(specs.size());
  m.epoch = state.epoch;
  m.success_rate = successes / n;
  m.mean_rounds = rounds / n;
  m.mean_reward = reward / n;
  m.baseline_loss = batches ? loss / static_cast<double>(batches) : 0.0;
  m.updates = state.updates;
  if (hooks.on_epoch) hooks.on_epoch(state, m);
  return m;
}

std::vector<EpochMetrics> Trainer::train(TrainingState& state,
                                         const TrainHooks& hooks) const {
  std::vector<EpochMetrics> out;
  while (state.epoch < cfg_.trainer.epochs)
    out.push_back(run_epoch(state, hooks));
  return out;
}

}  // namespace vqg
