#include "vqg/service.hpp"

#include <cctype>
#include <chrono>
#include <filesystem>
#include <fmt/format.h>
#include <json.hpp>

#include "vqg/error.hpp"
#include "vqg/records.hpp"

namespace vqg {

using nlohmann::json;

const char* to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::kActive: return "active";
    case SessionStatus::kGuessed: return "guessed";
    case SessionStatus::kExpired: return "expired";
  }
  return "?";
}

struct SessionManager::Session {
  std::mutex mu;
  std::string id;
  std::string checkpoint;
  std::string group_id;
  std::uint64_t scene_seed = 0;
  std::uint64_t session_seed = 0;
  std::shared_ptr<const Agent> agent;
  std::unique_ptr<Scene> scene;
  int target = 0;
  std::unique_ptr<PolicyDialog> dialog;
  SessionStatus status = SessionStatus::kActive;
  bool terminal = false;
  /// Transcript rendered for clients; survives expiry of the game state.
  json transcript = json::array();
  double created = 0.0;
  double last_active = 0.0;
};

namespace {

ServiceResponse ok(const json& j) { return {200, j.dump()}; }

ServiceResponse fail(int status, const std::string& error,
                     const std::string& message) {
  return {status, json{{"error", error}, {"message", message}}.dump()};
}

json scene_view(const Scene& scene, const WorldConfig& world) {
  json objs = json::array();
  for (const auto& o : scene.objects) {
    json attrs = json::object();
    for (std::size_t a = 0; a < o.attributes.size(); ++a)
      if (o.attributes[a])
        attrs[world.attributes[a].name] = world.attributes[a].values[*o.attributes[a]];
    objs.push_back({{"id", o.id},
                    {"category", world.categories[o.category]},
                    {"attributes", std::move(attrs)},
                    {"box",
                     {{"x_min", o.box.x_min},
                      {"y_min", o.box.y_min},
                      {"x_max", o.box.x_max},
                      {"y_max", o.box.y_max}}}});
  }
  return {{"objects", std::move(objs)}};
}

bool valid_checkpoint_id(const std::string& id) {
  if (id.empty() || id.size() > 128 || id.front() == '.') return false;
  for (const char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
          c == '.'))
      return false;
  return true;
}

std::uint64_t get_seed(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    throw Error(std::string(key) + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

}  // namespace

SessionManager::SessionManager(ServiceConfig cfg, Clock clock)
    : cfg_(std::move(cfg)), clock_(std::move(clock)) {
  if (!clock_)
    clock_ = [] {
      return std::chrono::duration<double>(
                 std::chrono::steady_clock::now().time_since_epoch())
          .count();
    };
  if (!cfg_.ledger.empty()) {
    for (const auto& r : read_study_ledger(cfg_.ledger)) {
      count(r);
      ++counter_;
    }
    ledger_ = std::make_unique<JsonlWriter>(cfg_.ledger, false);
  }
}

SessionManager::~SessionManager() = default;

void SessionManager::register_agent(const std::string& id,
                                    std::shared_ptr<const Agent> agent) {
  std::lock_guard lock(mu_);
  agents_[id] = std::move(agent);
}

std::shared_ptr<const Agent> SessionManager::resolve_agent(const std::string& id) {
  {
    std::lock_guard lock(mu_);
    if (auto it = agents_.find(id); it != agents_.end()) return it->second;
  }
  if (!valid_checkpoint_id(id)) throw NotFoundError("unknown checkpoint '" + id + "'");
  const auto path =
      (std::filesystem::path(cfg_.checkpoint_dir) / (id + ".ckpt")).string();
  if (!std::filesystem::exists(path))
    throw NotFoundError("unknown checkpoint '" + id + "'");
  auto agent = load_agent(path);
  std::lock_guard lock(mu_);
  return agents_.emplace(id, std::move(agent)).first->second;
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return it->second;
}

void SessionManager::expire_idle() {
  const double now = clock_();
  std::lock_guard lock(mu_);
  for (auto& [id, s] : sessions_) {
    std::lock_guard slock(s->mu);
    if (s->status == SessionStatus::kActive &&
        now - s->last_active > cfg_.idle_timeout_s) {
      s->status = SessionStatus::kExpired;
      s->dialog.reset();
      s->scene.reset();
    }
  }
}

std::size_t SessionManager::active_sessions() {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (auto& [id, s] : sessions_) {
    std::lock_guard slock(s->mu);
    n += s->status == SessionStatus::kActive ? 1 : 0;
  }
  return n;
}

ServiceResponse SessionManager::create_session(const std::string& body) {
  expire_idle();
  json req;
  std::string checkpoint, group, decode_name;
  std::uint64_t scene_seed = 0, session_seed = 0;
  DecodeMode mode;
  try {
    req = json::parse(body.empty() ? "{}" : body);
    if (!req.is_object()) throw Error("body must be a JSON object");
    if (!req.contains("checkpoint") || !req["checkpoint"].is_string())
      throw Error("checkpoint (string) is required");
    checkpoint = req["checkpoint"].get<std::string>();
    scene_seed = req.contains("scene_seed") ? get_seed(req, "scene_seed") : 0;
    session_seed =
        req.contains("session_seed") ? get_seed(req, "session_seed") : scene_seed;
    group = req.value("group_id", "");
    decode_name = req.value("decode", cfg_.decode);
    mode = DecodeMode::parse(decode_name);
  } catch (const std::exception& e) {
    return fail(400, "bad_request", e.what());
  }

  std::shared_ptr<const Agent> agent;
  try {
    agent = resolve_agent(checkpoint);
  } catch (const NotFoundError& e) {
    return fail(404, "not_found", e.what());
  } catch (const Error& e) {
    return fail(500, "checkpoint_error", e.what());
  }

  auto s = std::make_shared<Session>();
  s->checkpoint = checkpoint;
  s->group_id = group;
  s->scene_seed = scene_seed;
  s->session_seed = session_seed;
  s->agent = agent;
  try {
    s->scene = std::make_unique<Scene>(
        generate_scene(agent->config.world, scene_seed, 0, Split::kTest));
  } catch (const Error& e) {
    return fail(500, "world_error", e.what());
  }
  s->target = assign_target(*s->scene, session_seed).target_id;
  s->dialog = std::make_unique<PolicyDialog>(
      agent->policy, agent->fmap, *s->scene, s->target, agent->config.oracle,
      agent->config.rewards.j_max, mode, session_seed);
  s->created = s->last_active = clock_();

  {
    std::lock_guard lock(mu_);
    s->id = fmt::format("{:016x}", derive_seed(0x5e55'1015ULL, "session", counter_++));
    while (sessions_.count(s->id))
      s->id = fmt::format("{:016x}", derive_seed(0x5e55'1015ULL, "session", counter_++));
    sessions_[s->id] = s;
  }
  return ok({{"session_id", s->id},
             {"checkpoint", checkpoint},
             {"scene_seed", scene_seed},
             {"decode", mode.name()},
             {"j_max", agent->config.rewards.j_max},
             {"scene", scene_view(*s->scene, agent->config.world)},
             {"transcript", json::array()},
             {"status", "active"},
             {"terminal", false}});
}

ServiceResponse SessionManager::step_session(const std::string& id) {
  expire_idle();
  std::shared_ptr<Session> s;
  try {
    s = find(id);
  } catch (const NotFoundError& e) {
    return fail(404, "not_found", e.what());
  }
  std::lock_guard lock(s->mu);
  if (s->status != SessionStatus::kActive)
    return fail(409, "conflict",
                fmt::format("session is {}", to_string(s->status)));
  if (s->terminal) return fail(409, "conflict", "dialog already finished");
  s->last_active = clock_();

  const RoundRecord* round = s->dialog->step();
  s->terminal = s->dialog->finished();
  json round_json = nullptr;
  if (round) {
    const auto& g = s->agent->grammar;
    round_json = {{"index", static_cast<int>(s->transcript.size()) + 1},
                  {"question", g.render(round->question)},
                  {"answer", to_string(round->answer)}};
    s->transcript.push_back(round_json);
  }
  return ok({{"session_id", s->id},
             {"round", round_json},
             {"terminal", s->terminal},
             {"transcript", s->transcript},
             {"status", to_string(s->status)}});
}

ServiceResponse SessionManager::submit_guess(const std::string& id,
                                             const std::string& body) {
  expire_idle();
  std::shared_ptr<Session> s;
  try {
    s = find(id);
  } catch (const NotFoundError& e) {
    return fail(404, "not_found", e.what());
  }
  int object_id = -1;
  try {
    const json req = json::parse(body.empty() ? "{}" : body);
    if (!req.is_object() || !req.contains("object_id") ||
        !req["object_id"].is_number_integer())
      throw Error("object_id (integer) is required");
    object_id = req["object_id"].get<int>();
  } catch (const std::exception& e) {
    return fail(400, "bad_request", e.what());
  }

  StudyRecord rec;
  {
    std::lock_guard lock(s->mu);
    if (s->status != SessionStatus::kActive)
      return fail(409, "conflict",
                  fmt::format("session is {}", to_string(s->status)));
    if (object_id < 0 || object_id >= s->scene->size())
      return fail(400, "bad_request",
                  fmt::format("object_id must lie in [0, {})", s->scene->size()));
    s->status = SessionStatus::kGuessed;
    rec.session_id = s->id;
    rec.checkpoint = s->checkpoint;
    rec.group_id = s->group_id;
    rec.scene_seed = s->scene_seed;
    rec.session_seed = s->session_seed;
    rec.rounds_seen = static_cast<int>(s->transcript.size());
    rec.guess = object_id;
    rec.target = s->target;
    rec.correct = object_id == s->target;
    rec.elapsed_s = clock_() - s->created;
    s->dialog.reset();
    s->scene.reset();
  }
  {
    std::lock_guard lock(mu_);
    if (ledger_) ledger_->write(study_record_line(rec));
    count(rec);
  }
  return ok({{"session_id", rec.session_id},
             {"correct", rec.correct},
             {"guess", rec.guess},
             {"target_id", rec.target},
             {"rounds_seen", rec.rounds_seen},
             {"status", "guessed"}});
}

void SessionManager::count(const StudyRecord& r) {
  auto& t = by_checkpoint_[r.checkpoint];
  ++t.sessions;
  t.correct += r.correct ? 1 : 0;
  if (!r.group_id.empty()) {
    auto& g = groups_[{r.checkpoint, r.group_id}];
    ++g.sessions;
    g.correct += r.correct ? 1 : 0;
  }
}

ServiceResponse SessionManager::study_summary() {
  expire_idle();
  std::lock_guard lock(mu_);
  std::map<std::string, std::pair<int, int>> group_tally;  // groups, correct
  for (const auto& [key, g] : groups_) {
    auto& gt = group_tally[key.first];
    ++gt.first;
    gt.second += 2 * g.correct > g.sessions ? 1 : 0;
  }
  auto stats = [](int n, int c, int gn, int gc) {
    return json{{"sessions", n},
                {"correct", c},
                {"accuracy", n ? double(c) / n : 0.0},
                {"groups", gn},
                {"groups_correct", gc},
                {"group_accuracy", gn ? double(gc) / gn : 0.0}};
  };
  json by = json::object();
  int n = 0, c = 0, gn = 0, gc = 0;
  for (const auto& [ckpt, t] : by_checkpoint_) {
    const auto gt = group_tally[ckpt];
    by[ckpt] = stats(t.sessions, t.correct, gt.first, gt.second);
    n += t.sessions;
    c += t.correct;
    gn += gt.first;
    gc += gt.second;
  }
  return ok({{"overall", stats(n, c, gn, gc)}, {"by_checkpoint", std::move(by)}});
}

ServiceResponse SessionManager::health() {
  return ok({{"status", "ok"}, {"version", code_version()}});
}

}  // namespace vqg
