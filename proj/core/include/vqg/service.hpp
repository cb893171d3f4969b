#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "vqg/checkpoint.hpp"
#include "vqg/config.hpp"
#include "vqg/eval.hpp"
#include "vqg/game.hpp"

namespace vqg {

class JsonlWriter;

/// HTTP-independent response: status code plus JSON body.
struct ServiceResponse {
  int status = 200;
  std::string body;
};

enum class SessionStatus : std::uint8_t { kActive, kGuessed, kExpired };
const char* to_string(SessionStatus s);

/// Human-study sessions: the questioner and Oracle play, a person guesses.
/// All request and response bodies are JSON. The target id appears in no
/// response before the guess.
///
///   create  {"checkpoint": id, "scene_seed": n, "session_seed"?: n,
///            "group_id"?: s, "decode"?: "greedy" | "sampling" | "beam5"}
///   step    {} -> next question/answer pair or terminal marker
///   guess   {"object_id": n}
class SessionManager {
 public:
  /// Seconds on a monotonic clock.
  using Clock = std::function<double()>;

  explicit SessionManager(ServiceConfig cfg, Clock clock = {});
  ~SessionManager();

  /// Makes `agent` available under `id` without a checkpoint file.
  void register_agent(const std::string& id, std::shared_ptr<const Agent> agent);

  ServiceResponse create_session(const std::string& body);
  ServiceResponse step_session(const std::string& id);
  ServiceResponse submit_guess(const std::string& id, const std::string& body);
  ServiceResponse study_summary();
  ServiceResponse health();

  /// Marks sessions idle longer than the timeout as expired and frees their
  /// game state. Called on every request.
  void expire_idle();

  std::size_t active_sessions();

 private:
  struct Session;

  std::shared_ptr<const Agent> resolve_agent(const std::string& id);
  std::shared_ptr<Session> find(const std::string& id);

  ServiceConfig cfg_;
  Clock clock_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const Agent>> agents_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
  std::unique_ptr<JsonlWriter> ledger_;

  // Running study tallies, kept independently of the ledger recount.
  struct Tally {
    int sessions = 0;
    int correct = 0;
  };
  std::map<std::string, Tally> by_checkpoint_;
  std::map<std::pair<std::string, std::string>, Tally> groups_;
  void count(const StudyRecord& r);
};

}  // namespace vqg
