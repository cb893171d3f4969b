#include "vqg/records.hpp"

#include <filesystem>
#include <fmt/format.h>
#include <json.hpp>

#include "vqg/error.hpp"

namespace vqg {

using nlohmann::json;

namespace {

json stamp(const char* kind, const std::string& config_hash) {
  json j;
  j["schema"] = kRecordSchema;
  j["kind"] = kind;
  j["config_hash"] = config_hash;
  j["version"] = code_version();
  return j;
}

json parse_line(const std::string& line) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed record: ") + e.what());
  }
}

json scene_json(const Scene& s) {
  json objs = json::array();
  for (const auto& o : s.objects) {
    json attrs = json::array();
    for (const auto& a : o.attributes) attrs.push_back(a ? json(*a) : json(nullptr));
    objs.push_back({{"id", o.id},
                    {"category", o.category},
                    {"attributes", std::move(attrs)},
                    {"box", {o.box.x_min, o.box.y_min, o.box.x_max, o.box.y_max}}});
  }
  return {{"id", s.id}, {"split", to_string(s.split)}, {"objects", std::move(objs)}};
}

Scene scene_from_json(const json& j) {
  try {
    Scene s;
    s.id = j.at("id").get<std::int64_t>();
    s.split = split_from_string(j.at("split").get<std::string>());
    for (const auto& oj : j.at("objects")) {
      SceneObject o;
      o.id = oj.at("id").get<int>();
      o.category = oj.at("category").get<int>();
      for (const auto& a : oj.at("attributes"))
        o.attributes.push_back(a.is_null() ? std::nullopt
                                           : std::optional<int>(a.get<int>()));
      const auto& b = oj.at("box");
      o.box = {b.at(0).get<double>(), b.at(1).get<double>(),
               b.at(2).get<double>(), b.at(3).get<double>()};
      s.objects.push_back(std::move(o));
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed scene record: ") + e.what());
  }
}

}  // namespace

JsonlWriter::JsonlWriter(const std::string& path, bool truncate) : path_(path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  out_.open(path, truncate ? std::ios::trunc : std::ios::app);
  if (!out_) throw Error("cannot open " + path + " for writing");
}

void JsonlWriter::write(const std::string& line) {
  std::lock_guard lock(mu_);
  const std::string buf = line + "\n";
  out_.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  out_.flush();
  if (!out_) throw Error("write failed: " + path_);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("file not found: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

std::string scene_line(const Scene& scene, const std::string& config_hash) {
  json j = stamp("scene", config_hash);
  j["scene"] = scene_json(scene);
  return j.dump();
}

Scene scene_from_line(const std::string& line) {
  const json j = parse_line(line);
  if (j.value("kind", "") != "scene") throw Error("not a scene record");
  return scene_from_json(j.at("scene"));
}

void write_scenes(const std::string& path, const std::vector<Scene>& scenes,
                  const std::string& config_hash) {
  JsonlWriter w(path, true);
  for (const auto& s : scenes) w.write(scene_line(s, config_hash));
}

std::vector<Scene> read_scenes(const std::string& path) {
  std::vector<Scene> out;
  for (const auto& line : read_lines(path)) out.push_back(scene_from_line(line));
  return out;
}

std::string epoch_line(const EpochMetrics& m, const std::string& config_hash,
                       const std::string& label) {
  json j = stamp("epoch", config_hash);
  j["label"] = label;
  j["epoch"] = m.epoch;
  j["split"] = "train";
  j["mode"] = "sampling";
  j["success"] = m.success_rate;
  j["mean_rounds"] = m.mean_rounds;
  j["mean_reward"] = m.mean_reward;
  j["baseline_loss"] = m.baseline_loss;
  j["updates"] = m.updates;
  return j.dump();
}

std::string pretrain_line(int epoch, double nll, const std::string& config_hash) {
  json j = stamp("pretrain", config_hash);
  j["epoch"] = epoch;
  j["nll"] = nll;
  return j.dump();
}

std::string eval_line(const EvalSummary& s, SplitMode split, DecodeMode mode,
                      const std::string& config_hash, const std::string& label) {
  json j = stamp("eval", config_hash);
  j["label"] = label;
  j["split"] = to_string(split);
  j["mode"] = mode.name();
  j["n_games"] = s.n_games;
  j["success"] = s.success_rate;
  j["mean_rounds"] = s.mean_rounds;
  j["mean_rounds_success"] = s.mean_rounds_success;
  j["progressive_trend_pct"] =
      s.progressive_trend ? json(*s.progressive_trend) : json(nullptr);
  j["high_quality_pct"] = s.high_quality ? json(*s.high_quality) : json(nullptr);
  return j.dump();
}

std::string game_record_line(const GameRecord& g, const Grammar& grammar,
                             const std::string& config_hash) {
  json j = stamp("game", config_hash);
  j["scene_id"] = g.scene_id;
  j["target"] = g.target;
  j["guess"] = g.guess;
  j["success"] = g.success;
  j["forced"] = g.forced;
  j["seed"] = g.seed;
  json rounds = json::array();
  for (const auto& r : g.rounds)
    rounds.push_back({{"question", grammar.render(r.question)},
                      {"tokens", r.question},
                      {"predicate", r.predicate},
                      {"answer", to_string(r.answer)},
                      {"posterior", r.posterior},
                      {"p_target", r.p_target},
                      {"informative", r.informative}});
  j["rounds"] = std::move(rounds);
  return j.dump();
}

std::string episode_header_line(const ExperimentConfig& cfg) {
  json j = stamp("episode_log", config_hash(cfg));
  j["config"] = serialize_config(cfg);
  return j.dump();
}

std::string episode_line(const Trajectory& traj, const Scene& scene, int target,
                         std::uint64_t update, const std::string& config_hash) {
  json j = stamp("episode", config_hash);
  j["update"] = update;
  j["seed"] = traj.seed;
  j["target"] = target;
  j["scene"] = scene_json(scene);
  j["actions"] = traj.actions();
  json r = json::array(), q = json::array();
  for (const auto& st : traj.steps) {
    r.push_back(st.reward);
    q.push_back(st.ret);
  }
  j["rewards"] = std::move(r);
  j["returns"] = std::move(q);
  j["success"] = traj.terminal.success;
  j["rounds"] = traj.terminal.rounds;
  return j.dump();
}

EpisodeLog read_episode_log(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw Error("empty episode log: " + path);
  const json head = parse_line(lines.front());
  if (head.value("kind", "") != "episode_log")
    throw Error("episode log lacks its header line: " + path);
  EpisodeLog log;
  log.config = parse_config(head.at("config").get<std::string>());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const json j = parse_line(lines[i]);
    if (j.value("kind", "") != "episode") continue;
    try {
      LoggedEpisode ep;
      ep.scene = scene_from_json(j.at("scene"));
      ep.target = j.at("target").get<int>();
      ep.seed = j.at("seed").get<std::uint64_t>();
      ep.update = j.at("update").get<std::uint64_t>();
      ep.actions = j.at("actions").get<std::vector<int>>();
      ep.rewards = j.at("rewards").get<std::vector<double>>();
      ep.returns = j.at("returns").get<std::vector<double>>();
      ep.success = j.at("success").get<bool>();
      ep.rounds = j.at("rounds").get<int>();
      log.episodes.push_back(std::move(ep));
    } catch (const json::exception& e) {
      throw Error(fmt::format("malformed episode record on line {}: {}", i + 1,
                              e.what()));
    }
  }
  return log;
}

ReplayCheck verify_episode(const LoggedEpisode& ep, const FeatureMap& fmap,
                           const ExperimentConfig& cfg) {
  Trajectory t;
  try {
    t = replay_episode(ep.scene, ep.target, ep.actions, fmap, cfg.oracle,
                       cfg.rewards, ep.seed);
  } catch (const Error& e) {
    return {false, e.what()};
  }
  if (t.steps.size() != ep.rewards.size() || t.steps.size() != ep.returns.size())
    return {false, "step count differs from the log"};
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    if (t.steps[i].reward != ep.rewards[i])
      return {false, fmt::format("reward at step {}: logged {} replayed {}", i,
                                 ep.rewards[i], t.steps[i].reward)};
    if (t.steps[i].ret != ep.returns[i])
      return {false, fmt::format("return at step {}: logged {} replayed {}", i,
                                 ep.returns[i], t.steps[i].ret)};
  }
  if (t.terminal.success != ep.success || t.terminal.rounds != ep.rounds)
    return {false, "terminal outcome differs from the log"};
  return {true, fmt::format("{} steps, {} rounds", t.steps.size(), ep.rounds)};
}

std::string study_record_line(const StudyRecord& r) {
  json j = stamp("study", "");
  j["session_id"] = r.session_id;
  j["checkpoint"] = r.checkpoint;
  j["group_id"] = r.group_id;
  j["scene_seed"] = r.scene_seed;
  j["session_seed"] = r.session_seed;
  j["rounds_seen"] = r.rounds_seen;
  j["guess"] = r.guess;
  j["target"] = r.target;
  j["correct"] = r.correct;
  j["elapsed_s"] = r.elapsed_s;
  return j.dump();
}

StudyRecord study_record_from_line(const std::string& line) {
  const json j = parse_line(line);
  if (j.value("kind", "") != "study") throw Error("not a study record");
  try {
    StudyRecord r;
    r.session_id = j.at("session_id").get<std::string>();
    r.checkpoint = j.at("checkpoint").get<std::string>();
    r.group_id = j.value("group_id", "");
    r.scene_seed = j.at("scene_seed").get<std::uint64_t>();
    r.session_seed = j.at("session_seed").get<std::uint64_t>();
    r.rounds_seen = j.at("rounds_seen").get<int>();
    r.guess = j.at("guess").get<int>();
    r.target = j.at("target").get<int>();
    r.correct = j.at("correct").get<bool>();
    r.elapsed_s = j.value("elapsed_s", 0.0);
    return r;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed study record: ") + e.what());
  }
}

std::vector<StudyRecord> read_study_ledger(const std::string& path) {
  if (!std::filesystem::exists(path)) return {};
  std::vector<StudyRecord> out;
  for (const auto& line : read_lines(path))
    out.push_back(study_record_from_line(line));
  return out;
}

}  // namespace vqg
