#include "vqg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <json.hpp>
#include <numeric>
#include <set>
#include <tuple>

#include "vqg/error.hpp"
#include "vqg/parallel.hpp"

namespace vqg {

const char* to_string(SplitMode m) {
  return m == SplitMode::kNewObject ? "NewObject" : "NewImage";
}

SplitMode split_mode_from_string(const std::string& s) {
  if (s == "NewObject" || s == "new_object" || s == "newobject")
    return SplitMode::kNewObject;
  if (s == "NewImage" || s == "new_image" || s == "newimage")
    return SplitMode::kNewImage;
  throw Error("unknown split mode '" + s + "' (NewObject | NewImage)");
}

GameRecord play_game(const Policy& policy, const FeatureMap& fmap,
                     const Scene& scene, int target, DecodeMode mode,
                     const OracleConfig& oracle, int j_max,
                     std::uint64_t seed) {
  PolicyDialog dialog(policy, fmap, scene, target, oracle, j_max, mode, seed);
  dialog.run();
  const GameEnv& env = dialog.env();
  GameRecord rec;
  rec.scene_id = scene.id;
  rec.target = target;
  rec.guess = env.guess();
  rec.success = env.success();
  rec.forced = env.forced();
  rec.seed = seed;
  rec.num_objects = scene.size();
  rec.rounds = env.rounds();
  return rec;
}

EvalResult evaluate(const Policy& policy, const FeatureMap& fmap,
                    std::span<const Scene> scenes, const EvalOptions& opts) {
  if (scenes.empty()) throw Error("evaluate: empty scene set");
  if (opts.n_games < 1) throw Error("evaluate: n_games must be >= 1");
  const bool new_object = opts.split == SplitMode::kNewObject;
  if (new_object && !opts.targets)
    throw Error("evaluate: NewObject needs the training target log");

  // Candidate targets per eligible scene.
  std::vector<std::size_t> eligible;
  std::vector<std::vector<int>> candidates(scenes.size());
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    for (const auto& obj : scenes[s].objects)
      if (!new_object || !opts.targets->seen(scenes[s].id, obj.id))
        candidates[s].push_back(obj.id);
    if (!candidates[s].empty()) eligible.push_back(s);
  }
  if (eligible.empty())
    throw Error("evaluate: no scene has an unseen target for NewObject");

  EvalResult result;
  result.games.resize(opts.n_games);
  parallel_for(opts.n_games, opts.workers, [&](std::size_t i) {
    Rng rng(derive_seed(opts.seed, "eval", i));
    const std::size_t s = eligible[uniform_index(rng, eligible.size())];
    const auto& cands = candidates[s];
    const int target = cands[uniform_index(rng, cands.size())];
    result.games[i] = play_game(policy, fmap, scenes[s], target, opts.mode,
                                opts.oracle, opts.j_max, rng());
  });
  int wins = 0;
  for (const auto& g : result.games) wins += g.success ? 1 : 0;
  result.success_rate = static_cast<double>(wins) / opts.n_games;
  return result;
}

RoundCurve round_success_curve(std::span<const GameRecord> games, int j_max) {
  RoundCurve c;
  c.successes.assign(j_max, 0);
  c.ratios.assign(j_max, 0.0);
  c.games = static_cast<int>(games.size());
  for (const auto& g : games) {
    for (int r = 1; r <= j_max; ++r) {
      int pick = 0;
      if (!g.rounds.empty()) {
        const auto& post =
            g.rounds[std::min<std::size_t>(r, g.rounds.size()) - 1].posterior;
        pick = guess(Posterior{post, false});
      }
      if (pick == g.target) ++c.successes[r - 1];
    }
  }
  if (c.games > 0)
    for (int r = 0; r < j_max; ++r)
      c.ratios[r] = static_cast<double>(c.successes[r]) / c.games;
  return c;
}

std::optional<double> progressive_trend_pct(std::span<const GameRecord> games) {
  int succ = 0, asc = 0;
  for (const auto& g : games) {
    if (!g.success) continue;
    ++succ;
    bool ok = true;
    for (std::size_t j = 1; j < g.rounds.size(); ++j)
      if (g.rounds[j].p_target < g.rounds[j - 1].p_target) ok = false;
    asc += ok ? 1 : 0;
  }
  if (succ == 0) return std::nullopt;
  return 100.0 * asc / succ;
}

std::optional<double> high_quality_pct(std::span<const GameRecord> games) {
  long total = 0, good = 0;
  for (const auto& g : games) {
    if (!g.success) continue;
    for (const auto& r : g.rounds) {
      ++total;
      good += r.informative ? 1 : 0;
    }
  }
  if (total == 0) return std::nullopt;
  return 100.0 * static_cast<double>(good) / static_cast<double>(total);
}

double mean_rounds_successful(std::span<const GameRecord> games) {
  long n = 0, rounds = 0;
  for (const auto& g : games)
    if (g.success) {
      ++n;
      rounds += g.num_rounds();
    }
  return n ? static_cast<double>(rounds) / static_cast<double>(n) : 0.0;
}

EvalSummary summarize(std::span<const GameRecord> games) {
  EvalSummary s;
  s.n_games = static_cast<int>(games.size());
  long wins = 0, rounds = 0;
  for (const auto& g : games) {
    wins += g.success ? 1 : 0;
    rounds += g.num_rounds();
  }
  if (s.n_games > 0) {
    s.success_rate = static_cast<double>(wins) / s.n_games;
    s.mean_rounds = static_cast<double>(rounds) / s.n_games;
  }
  s.mean_rounds_success = mean_rounds_successful(games);
  s.progressive_trend = progressive_trend_pct(games);
  s.high_quality = high_quality_pct(games);
  return s;
}

// ---------------------------------------------------------------------------
// Ablation

const char* to_string(Variant v) {
  switch (v) {
    case Variant::kSupervised: return "supervised";
    case Variant::kSoleReward: return "sole_reward";
    case Variant::kGoal: return "r_g";
    case Variant::kGoalProgressive: return "r_g+r_p";
    case Variant::kGoalInformative: return "r_g+r_i";
    case Variant::kFull: return "r_g+r_p+r_i";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  for (const Variant v : kAllVariants)
    if (s == to_string(v)) return v;
  if (s == "full") return Variant::kFull;
  if (s == "sole") return Variant::kSoleReward;
  throw Error("unknown variant '" + s + "'");
}

RewardConfig variant_rewards(Variant v, const RewardConfig& base) {
  RewardConfig r = base;
  r.sole_reward = false;
  r.goal = true;
  r.progressive = false;
  r.informativeness = false;
  switch (v) {
    case Variant::kSupervised:
      throw Error("the supervised variant has no reward configuration");
    case Variant::kSoleReward:
      r.sole_reward = true;
      r.goal = false;
      break;
    case Variant::kGoal: break;
    case Variant::kGoalProgressive: r.progressive = true; break;
    case Variant::kGoalInformative: r.informativeness = true; break;
    case Variant::kFull:
      r.progressive = true;
      r.informativeness = true;
      break;
  }
  return r;
}

namespace {

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) /
         static_cast<double>(xs.size());
}

// Sample standard deviation.
double std_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (const double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::vector<double> successes(const AblationCell& c) {
  std::vector<double> out;
  for (const auto& s : c.per_seed) out.push_back(s.success_rate);
  return out;
}

}  // namespace

double AblationCell::mean_success() const { return mean_of(successes(*this)); }
double AblationCell::std_success() const { return std_of(successes(*this)); }

const AblationCell& AblationReport::cell(Variant v, SplitMode s,
                                         DecodeMode m) const {
  for (const auto& c : cells)
    if (c.variant == v && c.split == s && c.mode == m) return c;
  throw NotFoundError(fmt::format("no ablation cell {}/{}/{}", to_string(v),
                                  to_string(s), m.name()));
}

Splits make_run_world(const ExperimentConfig& cfg, std::uint64_t seed) {
  return make_splits(cfg.harness.n_train_scenes, cfg.harness.n_test_scenes,
                     cfg.world, derive_seed(seed, "world"));
}

SeedPolicies train_variants(const ExperimentConfig& cfg, const FeatureMap& fmap,
                            std::uint64_t seed,
                            std::span<const Variant> variants,
                            const std::function<void(const std::string&)>& log) {
  auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };
  SeedPolicies out;
  out.splits = make_run_world(cfg, seed);
  const auto expert = generate_expert_episodes(
      out.splits.train, fmap, cfg, derive_seed(seed, "expert"), &out.targets);
  Policy supervised(fmap.grammar().vocab().size(), fmap.dim());
  const auto nll = pretrain_supervised(expert, supervised, cfg.pretrain,
                                       derive_seed(seed, "pretrain"));
  say(fmt::format("seed {}: pretrained on {} expert dialogs, final nll {:.4f}",
                  seed, expert.size(), nll.empty() ? 0.0 : nll.back()));

  TargetLog merged = out.targets;
  for (const Variant v : variants) {
    if (v == Variant::kSupervised) {
      out.policies[v] = supervised;
      continue;
    }
    ExperimentConfig vc = cfg;
    vc.rewards = variant_rewards(v, cfg.rewards);
    Trainer trainer(vc, fmap, out.splits.train);
    // Same master seed for every variant: identical game draws per update.
    TrainingState state = trainer.initial_state(derive_seed(seed, "train"));
    state.policy = supervised;
    state.targets = out.targets;
    const auto metrics = trainer.train(state);
    say(fmt::format("seed {}: {} trained, last epoch success {:.3f}", seed,
                    to_string(v),
                    metrics.empty() ? 0.0 : metrics.back().success_rate));
    for (std::size_t i = 0; i < state.targets.used.size(); ++i) {
      if (i >= merged.used.size()) merged.used.resize(i + 1, 0);
      merged.used[i] |= state.targets.used[i];
    }
    out.policies[v] = std::move(state.policy);
  }
  out.targets = std::move(merged);
  return out;
}

AblationReport run_ablation(const ExperimentConfig& cfg,
                            const AblationOptions& opts) {
  if (opts.seeds.size() < 3) throw Error("ablation needs at least 3 seeds");
  const Grammar grammar = Grammar::build(cfg.grammar, cfg.world);
  const FeatureMap fmap(grammar, cfg.features);

  AblationReport report;
  report.seeds = opts.seeds;
  report.config_hash = config_hash(cfg);
  report.version = code_version();
  for (const Variant v : opts.variants)
    for (const SplitMode s : opts.splits)
      for (const DecodeMode m : opts.modes) report.cells.push_back({v, s, m, {}});

  for (const std::uint64_t seed : opts.seeds) {
    const auto trained =
        train_variants(cfg, fmap, seed, opts.variants, opts.log);
    for (auto& c : report.cells) {
      EvalOptions eo;
      eo.split = c.split;
      eo.mode = c.mode;
      eo.n_games = cfg.eval.n_games;
      eo.seed = derive_seed(seed, "eval");
      eo.oracle = cfg.oracle;
      eo.j_max = cfg.rewards.j_max;
      eo.targets = &trained.targets;
      eo.workers = resolve_workers(cfg.harness.workers);
      const auto& scenes = c.split == SplitMode::kNewObject
                               ? trained.splits.train
                               : trained.splits.test;
      const auto res =
          evaluate(trained.policies.at(c.variant), fmap, scenes, eo);
      c.per_seed.push_back(summarize(res.games));
    }
    if (opts.log) opts.log(fmt::format("seed {}: evaluated", seed));
  }
  return report;
}

std::string ablation_json(const AblationReport& report) {
  using nlohmann::json;
  json j;
  j["schema"] = 1;
  j["kind"] = "ablation";
  j["config_hash"] = report.config_hash;
  j["version"] = report.version;
  j["seeds"] = report.seeds;
  json cells = json::array();
  for (const auto& c : report.cells) {
    json cj;
    cj["variant"] = to_string(c.variant);
    cj["split"] = to_string(c.split);
    cj["mode"] = c.mode.name();
    cj["mean"] = c.mean_success();
    cj["std"] = c.std_success();
    json seeds = json::array();
    for (const auto& s : c.per_seed) {
      json sj;
      sj["success"] = s.success_rate;
      sj["n_games"] = s.n_games;
      sj["mean_rounds"] = s.mean_rounds;
      sj["mean_rounds_success"] = s.mean_rounds_success;
      sj["progressive_trend_pct"] =
          s.progressive_trend ? json(*s.progressive_trend) : json(nullptr);
      sj["high_quality_pct"] =
          s.high_quality ? json(*s.high_quality) : json(nullptr);
      seeds.push_back(std::move(sj));
    }
    cj["per_seed"] = std::move(seeds);
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  return j.dump(2) + "\n";
}

std::string ablation_table(const AblationReport& report) {
  std::vector<Variant> variants;
  std::vector<std::pair<SplitMode, DecodeMode>> cols;
  for (const auto& c : report.cells) {
    if (std::find(variants.begin(), variants.end(), c.variant) ==
        variants.end())
      variants.push_back(c.variant);
    const auto col = std::make_pair(c.split, c.mode);
    if (std::find(cols.begin(), cols.end(), col) == cols.end())
      cols.push_back(col);
  }
  std::string out = fmt::format("{:<14}", "variant");
  for (const auto& [s, m] : cols)
    out += fmt::format(" {:>18}", fmt::format("{}/{}", to_string(s), m.name()));
  out += "\n";
  for (const Variant v : variants) {
    out += fmt::format("{:<14}", to_string(v));
    for (const auto& [s, m] : cols) {
      const auto& c = report.cell(v, s, m);
      out += fmt::format(" {:>18}",
                         fmt::format("{:.1f} +- {:.1f}", 100 * c.mean_success(),
                                     100 * c.std_success()));
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Human-study ledger

StudySummary summarize_study(std::span<const StudyRecord> records) {
  StudySummary out;
  std::map<std::pair<std::string, std::string>, std::pair<int, int>> groups;
  for (const auto& r : records) {
    for (StudyGroupStats* s : {&out.overall, &out.by_checkpoint[r.checkpoint]}) {
      ++s->sessions;
      s->correct += r.correct ? 1 : 0;
    }
    if (!r.group_id.empty()) {
      auto& g = groups[{r.checkpoint, r.group_id}];
      ++g.first;
      g.second += r.correct ? 1 : 0;
    }
  }
  for (const auto& [key, g] : groups) {
    const bool ok = 2 * g.second > g.first;
    for (StudyGroupStats* s : {&out.overall, &out.by_checkpoint[key.first]}) {
      ++s->groups;
      s->groups_correct += ok ? 1 : 0;
    }
  }
  return out;
}

}  // namespace vqg
