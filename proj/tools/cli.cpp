#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fmt/format.h>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "vqg/checkpoint.hpp"
#include "vqg/config.hpp"
#include "vqg/error.hpp"
#include "vqg/eval.hpp"
#include "vqg/http_server.hpp"
#include "vqg/parallel.hpp"
#include "vqg/records.hpp"
#include "vqg/service.hpp"
#include "vqg/trainer.hpp"

namespace vqg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int workers = -1;
};

ExperimentConfig resolve_config(const Common& c) {
  std::string path = c.config;
  if (path.empty())
    if (const char* env = std::getenv("VQG_CONFIG")) path = env;
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config(path);
  if (c.seed) cfg.harness.seed = *c.seed;
  if (c.workers >= 0) cfg.harness.workers = c.workers;
  if (!c.out_dir.empty())
    cfg.harness.out_dir = c.out_dir;
  else if (const char* env = std::getenv("VQG_LOG_DIR"))
    cfg.harness.out_dir = env;
  validate(cfg);
  return cfg;
}

std::string file_label(std::string s) {
  std::replace(s.begin(), s.end(), '+', '-');
  return s;
}

std::string in_dir(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void add_common(CLI::App* cmd, Common& c, bool with_out = true) {
  cmd->add_option("-c,--config", c.config, "INI configuration (env VQG_CONFIG)");
  cmd->add_option("-s,--seed", c.seed, "master seed (overrides harness.seed)");
  cmd->add_option("-w,--workers", c.workers, "worker threads, 0 = all cores");
  if (with_out)
    cmd->add_option("-o,--out-dir", c.out_dir,
                    "output directory (env VQG_LOG_DIR, else harness.out_dir)");
}

// ---------------------------------------------------------------------------

int gen_world(const Common& c, std::ostream& out) {
  const auto cfg = resolve_config(c);
  const auto world = make_run_world(cfg, cfg.harness.seed);
  const auto hash = config_hash(cfg);
  const auto train = in_dir(cfg.harness.out_dir, "world_train.jsonl");
  const auto test = in_dir(cfg.harness.out_dir, "world_test.jsonl");
  write_scenes(train, world.train, hash);
  write_scenes(test, world.test, hash);
  out << fmt::format("wrote {} train scenes to {}\n", world.train.size(), train);
  out << fmt::format("wrote {} test scenes to {}\n", world.test.size(), test);
  return kOk;
}

int pretrain(const Common& c, const std::string& label, std::ostream& out) {
  const auto cfg = resolve_config(c);
  const std::uint64_t seed = cfg.harness.seed;
  const Grammar grammar = Grammar::build(cfg.grammar, cfg.world);
  const FeatureMap fmap(grammar, cfg.features);
  const auto world = make_run_world(cfg, seed);
  const auto hash = config_hash(cfg);

  TargetLog targets;
  const auto expert = generate_expert_episodes(
      world.train, fmap, cfg, derive_seed(seed, "expert"), &targets);
  Trainer trainer(cfg, fmap, world.train);
  TrainingState state = trainer.initial_state(derive_seed(seed, "train"));
  const auto nll = pretrain_supervised(expert, state.policy, cfg.pretrain,
                                       derive_seed(seed, "pretrain"));
  state.targets = targets;

  JsonlWriter metrics(in_dir(cfg.harness.out_dir, label + ".metrics.jsonl"), true);
  for (std::size_t e = 0; e < nll.size(); ++e) {
    metrics.write(pretrain_line(static_cast<int>(e) + 1, nll[e], hash));
    out << fmt::format("pretrain epoch {:3d}  nll {:.5f}\n", e + 1, nll[e]);
  }
  const auto path = in_dir(cfg.harness.out_dir, label + ".ckpt");
  save_checkpoint(path, make_checkpoint(cfg, grammar, fmap, state, label, seed));
  out << "checkpoint " << path << "\n";
  return kOk;
}

struct TrainArgs {
  std::string variant = "r_g+r_p+r_i";
  std::string warm_start;
  std::string resume;
  std::string label;
  int epochs = -1;
};

int train(const Common& c, const TrainArgs& a, std::ostream& out,
          std::ostream& err) {
  ExperimentConfig cfg;
  std::uint64_t seed = 0;
  std::optional<Checkpoint> resumed;
  if (!a.resume.empty()) {
    resumed = load_checkpoint(a.resume);
    cfg = parse_config(resumed->config_text);
    seed = resumed->seed;
    if (c.workers >= 0) cfg.harness.workers = c.workers;
    if (!c.out_dir.empty()) cfg.harness.out_dir = c.out_dir;
  } else {
    cfg = resolve_config(c);
    seed = cfg.harness.seed;
    if (!a.warm_start.empty()) cfg.trainer.warm_start = a.warm_start;
    const Variant v = variant_from_string(a.variant);
    if (v == Variant::kSupervised)
      throw ConfigError("variant", "use the pretrain subcommand for supervised");
    cfg.rewards = variant_rewards(v, cfg.rewards);
  }
  if (a.epochs >= 0) cfg.trainer.epochs = a.epochs;
  validate(cfg);

  const std::string label =
      !a.label.empty() ? a.label
                       : (resumed ? resumed->label : file_label(a.variant));
  const Grammar grammar = Grammar::build(cfg.grammar, cfg.world);
  const FeatureMap fmap(grammar, cfg.features);
  const auto world = make_run_world(cfg, seed);
  const Trainer trainer(cfg, fmap, world.train);
  const auto hash = config_hash(cfg);

  TrainingState state;
  if (resumed) {
    state = resumed->state;
  } else {
    state = trainer.initial_state(derive_seed(seed, "train"));
    if (!cfg.trainer.warm_start.empty()) {
      const auto warm = load_checkpoint(cfg.trainer.warm_start);
      if (warm.vocab != grammar.vocab().tokens() ||
          warm.feature_dim != fmap.dim())
        throw Error("warm-start checkpoint does not match this configuration");
      state.policy = warm.state.policy;
      state.targets = warm.state.targets;
    }
  }

  const auto dir = cfg.harness.out_dir;
  const bool fresh = !resumed;
  JsonlWriter metrics(in_dir(dir, label + ".metrics.jsonl"), fresh);
  JsonlWriter episodes(in_dir(dir, label + ".episodes.jsonl"), fresh);
  if (fresh) episodes.write(episode_header_line(cfg));
  const auto ckpt_path = in_dir(dir, label + ".ckpt");

  TrainHooks hooks;
  hooks.on_episode = [&](const Trajectory& t, int target) {
    episodes.write(episode_line(t, world.train.at(t.scene_id), target,
                                state.updates, hash));
  };
  hooks.on_epoch = [&](const TrainingState& s, const EpochMetrics& m) {
    metrics.write(epoch_line(m, hash, label));
    out << fmt::format(
        "epoch {:3d}  success {:.3f}  rounds {:.2f}  reward {:.3f}  "
        "baseline_loss {:.4f}\n",
        m.epoch, m.success_rate, m.mean_rounds, m.mean_reward, m.baseline_loss);
    const int every = cfg.trainer.checkpoint_every;
    if (every > 0 && (s.epoch % every == 0 || s.epoch == cfg.trainer.epochs))
      save_checkpoint(ckpt_path, make_checkpoint(cfg, grammar, fmap, s, label, seed));
  };

  while (state.epoch < cfg.trainer.epochs) {
    try {
      trainer.run_epoch(state, hooks);
    } catch (const NumericError& e) {
      const auto diag = in_dir(dir, label + ".diagnostic.ckpt");
      save_checkpoint(diag, make_checkpoint(cfg, grammar, fmap, state, label, seed));
      err << "error: " << e.what() << "; diagnostic checkpoint " << diag << "\n";
      return kRuntime;
    }
  }
  save_checkpoint(ckpt_path, make_checkpoint(cfg, grammar, fmap, state, label, seed));
  out << "checkpoint " << ckpt_path << "\n";
  return kOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string split = "NewImage";
  std::string mode = "greedy";
  int n_games = 0;
  std::optional<std::uint64_t> seed;
  std::string report;
  std::string games;
  int workers = -1;
};

int eval_cmd(const EvalArgs& a, std::ostream& out) {
  const auto agent = load_agent(a.checkpoint);
  const auto& cfg = agent->config;
  const auto world = make_run_world(cfg, agent->seed);
  EvalOptions eo;
  eo.split = split_mode_from_string(a.split);
  eo.mode = DecodeMode::parse(a.mode);
  eo.n_games = a.n_games > 0 ? a.n_games : cfg.eval.n_games;
  eo.seed = a.seed.value_or(derive_seed(agent->seed, "eval"));
  eo.oracle = cfg.oracle;
  eo.j_max = cfg.rewards.j_max;
  eo.targets = &agent->targets;
  eo.workers = resolve_workers(a.workers >= 0 ? a.workers : cfg.harness.workers);
  const auto& scenes =
      eo.split == SplitMode::kNewObject ? world.train : world.test;
  const auto res = evaluate(agent->policy, agent->fmap, scenes, eo);
  const auto s = summarize(res.games);
  const auto curve = round_success_curve(res.games, eo.j_max);
  const auto hash = config_hash(cfg);

  out << fmt::format("{} {} {}: success {:.4f} over {} games, mean rounds {:.2f}\n",
                     agent->label, to_string(eo.split), eo.mode.name(),
                     s.success_rate, s.n_games, s.mean_rounds);
  out << fmt::format("  progressive trend {}  high-quality questions {}\n",
                     s.progressive_trend ? fmt::format("{:.1f}%", *s.progressive_trend)
                                         : std::string("n/a"),
                     s.high_quality ? fmt::format("{:.1f}%", *s.high_quality)
                                    : std::string("n/a"));
  out << "  success by round:";
  for (const double r : curve.ratios) out << fmt::format(" {:.3f}", r);
  out << "\n";
  if (!a.report.empty()) {
    JsonlWriter w(a.report, false);
    w.write(eval_line(s, eo.split, eo.mode, hash, agent->label));
  }
  if (!a.games.empty()) {
    JsonlWriter w(a.games, true);
    for (const auto& g : res.games) w.write(game_record_line(g, agent->grammar, hash));
  }
  return kOk;
}

struct AblateArgs {
  std::string seeds;
  std::string modes = "sampling,greedy,beam5";
  std::string variants;
};

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int ablate(const Common& c, const AblateArgs& a, std::ostream& out) {
  const auto cfg = resolve_config(c);
  AblationOptions opts;
  if (a.seeds.empty()) {
    for (int i = 0; i < cfg.eval.n_seeds; ++i)
      opts.seeds.push_back(cfg.harness.seed + static_cast<std::uint64_t>(i));
  } else {
    for (const auto& s : split_csv(a.seeds)) opts.seeds.push_back(std::stoull(s));
  }
  opts.modes.clear();
  for (const auto& m : split_csv(a.modes)) opts.modes.push_back(DecodeMode::parse(m));
  if (!a.variants.empty()) {
    opts.variants.clear();
    for (const auto& v : split_csv(a.variants))
      opts.variants.push_back(variant_from_string(v));
  }
  opts.log = [&](const std::string& msg) { out << msg << "\n" << std::flush; };
  const auto report = run_ablation(cfg, opts);
  const auto dir = cfg.harness.out_dir;
  fs::create_directories(dir);
  {
    std::ofstream f(in_dir(dir, "ablation.json"));
    f << ablation_json(report);
  }
  const auto table = ablation_table(report);
  {
    std::ofstream f(in_dir(dir, "ablation.txt"));
    f << table;
  }
  out << table;
  return kOk;
}

std::atomic<HttpServer*> g_server{nullptr};

extern "C" void on_signal(int) {
  if (HttpServer* s = g_server.load()) s->stop();
}

struct ServeArgs {
  std::string host;
  int port = -1;
  std::string checkpoint_dir;
  std::string ledger;
};

int serve(const Common& c, const ServeArgs& a, std::ostream& out,
          std::ostream& err) {
  auto cfg = resolve_config(c);
  if (!a.host.empty()) cfg.service.host = a.host;
  if (a.port >= 0) cfg.service.port = a.port;
  if (!a.checkpoint_dir.empty()) cfg.service.checkpoint_dir = a.checkpoint_dir;
  if (!a.ledger.empty()) cfg.service.ledger = a.ledger;
  SessionManager sessions(cfg.service);
  HttpServer server(sessions);
  const int port = server.bind(cfg.service.host, cfg.service.port);
  if (port < 0) {
    err << "error: cannot bind " << cfg.service.host << ":" << cfg.service.port << "\n";
    return kRuntime;
  }
  out << fmt::format("listening on http://{}:{}\n", cfg.service.host, port) << std::flush;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen();
  g_server = nullptr;
  return kOk;
}

struct PlayArgs {
  std::string checkpoint;
  std::uint64_t scene_seed = 1;
  std::optional<std::uint64_t> session_seed;
  std::string decode = "greedy";
  std::string ledger;
};

int play(const PlayArgs& a, std::ostream& out, std::istream& in) {
  ServiceConfig sc;
  sc.ledger = a.ledger;
  SessionManager sessions(sc);
  sessions.register_agent("local", load_agent(a.checkpoint));
  json req{{"checkpoint", "local"}, {"scene_seed", a.scene_seed}, {"decode", a.decode}};
  if (a.session_seed) req["session_seed"] = *a.session_seed;
  auto r = sessions.create_session(req.dump());
  auto j = json::parse(r.body);
  if (r.status != 200) throw Error(j.value("message", "cannot create session"));
  const std::string id = j["session_id"];
  out << "Objects in the scene:\n";
  for (const auto& o : j["scene"]["objects"]) {
    std::string attrs;
    for (const auto& [k, v] : o["attributes"].items())
      attrs += fmt::format(" {}={}", k, v.get<std::string>());
    const auto& b = o["box"];
    out << fmt::format("  [{}] {:<7}{:<24} box ({:.2f},{:.2f})-({:.2f},{:.2f})\n",
                       o["id"].get<int>(), o["category"].get<std::string>(), attrs,
                       b["x_min"].get<double>(), b["y_min"].get<double>(),
                       b["x_max"].get<double>(), b["y_max"].get<double>());
  }
  out << "Press enter for the next question, or type an object id to guess.\n";
  bool terminal = false;
  std::string line;
  while (true) {
    out << (terminal ? "guess> " : "> ") << std::flush;
    if (!std::getline(in, line)) return kOk;
    if (line.empty() || line == "n") {
      if (terminal) {
        out << "no more questions; pick an object id\n";
        continue;
      }
      r = sessions.step_session(id);
      j = json::parse(r.body);
      if (r.status != 200) {
        out << j.value("message", "error") << "\n";
        continue;
      }
      if (!j["round"].is_null())
        out << fmt::format("Q{}: {}  A: {}\n", j["round"]["index"].get<int>(),
                           j["round"]["question"].get<std::string>(),
                           j["round"]["answer"].get<std::string>());
      terminal = j["terminal"].get<bool>();
      if (terminal) out << "(the questioner is done)\n";
      continue;
    }
    int guess = -1;
    try {
      guess = std::stoi(line);
    } catch (const std::exception&) {
      out << "type an object id or press enter\n";
      continue;
    }
    r = sessions.submit_guess(id, json{{"object_id", guess}}.dump());
    j = json::parse(r.body);
    if (r.status != 200) {
      out << j.value("message", "error") << "\n";
      continue;
    }
    out << (j["correct"].get<bool>() ? "correct" : "wrong") << ", the target was "
        << j["target_id"].get<int>() << "\n";
    return kOk;
  }
}

int replay(const std::string& path, int index, std::ostream& out,
           std::ostream& err) {
  const auto log = read_episode_log(path);
  const Grammar grammar = Grammar::build(log.config.grammar, log.config.world);
  const FeatureMap fmap(grammar, log.config.features);
  if (log.episodes.empty()) throw Error("no episodes in " + path);
  std::size_t lo = 0, hi = log.episodes.size();
  if (index >= 0) {
    if (static_cast<std::size_t>(index) >= log.episodes.size())
      throw Error(fmt::format("episode index {} out of range ({} logged)", index,
                              log.episodes.size()));
    lo = index;
    hi = index + 1;
  }
  for (std::size_t i = lo; i < hi; ++i) {
    const auto check = verify_episode(log.episodes[i], fmap, log.config);
    if (!check.ok) {
      err << fmt::format("episode {} (update {}) mismatch: {}\n", i,
                         log.episodes[i].update, check.message);
      return kRuntime;
    }
  }
  out << fmt::format("verified {} episode(s) from {}\n", hi - lo, path);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err, std::istream& in) {
  CLI::App app{"Goal-oriented visual question generation trained with intermediate rewards",
               "vqg"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(code_version()));

  Common common;
  auto* gw = app.add_subcommand("gen-world", "write the train/test scenes of a run");
  add_common(gw, common);

  std::string pre_label = "supervised";
  auto* pre = app.add_subcommand("pretrain", "supervised pretraining on expert dialogs");
  add_common(pre, common);
  pre->add_option("--label", pre_label, "checkpoint name");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "policy-gradient training");
  add_common(tr, common);
  tr->add_option("--variant", ta.variant,
                 "reward variant: sole_reward, r_g, r_g+r_p, r_g+r_i, r_g+r_p+r_i");
  tr->add_option("--warm-start", ta.warm_start, "initial policy checkpoint");
  tr->add_option("--resume", ta.resume, "continue a run from its checkpoint");
  tr->add_option("--label", ta.label, "checkpoint and log name");
  tr->add_option("--epochs", ta.epochs, "override trainer.epochs");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--checkpoint", ea.checkpoint, "checkpoint file")->required();
  ev->add_option("--split", ea.split, "NewObject or NewImage");
  ev->add_option("--mode", ea.mode, "sampling, greedy or beam<width>");
  ev->add_option("-n,--n-games", ea.n_games, "games (default eval.n_games)");
  ev->add_option("-s,--seed", ea.seed, "evaluation seed");
  ev->add_option("--report", ea.report, "append a summary line to this JSONL file");
  ev->add_option("--games", ea.games, "write per-game records to this JSONL file");
  ev->add_option("-w,--workers", ea.workers, "worker threads, 0 = all cores");

  AblateArgs aa;
  auto* ab = app.add_subcommand("ablate", "train and evaluate every reward variant");
  add_common(ab, common);
  ab->add_option("--seeds", aa.seeds, "comma-separated seeds (default eval.n_seeds from --seed)");
  ab->add_option("--modes", aa.modes, "comma-separated decode modes");
  ab->add_option("--variants", aa.variants, "comma-separated variants (default all)");

  ServeArgs sa;
  auto* sv = app.add_subcommand("serve", "human-study HTTP service");
  add_common(sv, common, false);
  sv->add_option("--host", sa.host, "bind address");
  sv->add_option("--port", sa.port, "port, 0 picks a free one");
  sv->add_option("--checkpoint-dir", sa.checkpoint_dir, "directory of <id>.ckpt files");
  sv->add_option("--ledger", sa.ledger, "study ledger JSONL");

  PlayArgs pa;
  auto* pl = app.add_subcommand("play", "guess the target yourself in the terminal");
  pl->add_option("--checkpoint", pa.checkpoint, "checkpoint file")->required();
  pl->add_option("--scene-seed", pa.scene_seed, "scene seed");
  pl->add_option("--session-seed", pa.session_seed, "session seed (default scene seed)");
  pl->add_option("--decode", pa.decode, "sampling, greedy or beam<width>");
  pl->add_option("--ledger", pa.ledger, "append the result to this study ledger");

  std::string episode_path;
  int episode_index = -1;
  auto* rp = app.add_subcommand("replay", "re-run logged episodes and verify their rewards");
  rp->add_option("--episode", episode_path, "episode log (JSONL)")->required();
  rp->add_option("--index", episode_index, "verify only this episode");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (gw->parsed()) return gen_world(common, out);
    if (pre->parsed()) return pretrain(common, pre_label, out);
    if (tr->parsed()) return train(common, ta, out, err);
    if (ev->parsed()) return eval_cmd(ea, out);
    if (ab->parsed()) return ablate(common, aa, out);
    if (sv->parsed()) return serve(common, sa, out, err);
    if (pl->parsed()) return play(pa, out, in);
    if (rp->parsed()) return replay(episode_path, episode_index, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const NotFoundError& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace vqg::cli
