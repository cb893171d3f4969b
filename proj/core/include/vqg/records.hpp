#pragma once

#include <cstdint>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include "vqg/config.hpp"
#include "vqg/eval.hpp"
#include "vqg/trainer.hpp"
#include "vqg/world.hpp"

namespace vqg {

/// Line-delimited JSON artifacts. Every line carries "schema", "kind",
/// "config_hash" and "version".
inline constexpr int kRecordSchema = 1;

/// Appends whole lines; each write is one flushed call so concurrent
/// writers in this process never interleave.
class JsonlWriter {
 public:
  /// `truncate` starts a fresh file; otherwise lines are appended.
  JsonlWriter(const std::string& path, bool truncate);
  void write(const std::string& line);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  std::mutex mu_;
};

/// Every non-empty line of a JSONL file; NotFoundError when absent.
std::vector<std::string> read_lines(const std::string& path);

std::string scene_line(const Scene& scene, const std::string& config_hash);
Scene scene_from_line(const std::string& line);
void write_scenes(const std::string& path, const std::vector<Scene>& scenes,
                  const std::string& config_hash);
std::vector<Scene> read_scenes(const std::string& path);

std::string epoch_line(const EpochMetrics& m, const std::string& config_hash,
                       const std::string& label);
std::string pretrain_line(int epoch, double nll, const std::string& config_hash);
std::string eval_line(const EvalSummary& s, SplitMode split, DecodeMode mode,
                      const std::string& config_hash, const std::string& label);
std::string game_record_line(const GameRecord& g, const Grammar& grammar,
                             const std::string& config_hash);

/// A training episode as logged for `replay`.
struct LoggedEpisode {
  Scene scene;
  int target = 0;
  std::uint64_t seed = 0;
  std::uint64_t update = 0;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<double> returns;
  bool success = false;
  int rounds = 0;
};

/// First line of an episode log: the full configuration, so the log replays
/// on its own.
std::string episode_header_line(const ExperimentConfig& cfg);
std::string episode_line(const Trajectory& traj, const Scene& scene, int target,
                         std::uint64_t update, const std::string& config_hash);

struct EpisodeLog {
  ExperimentConfig config;
  std::vector<LoggedEpisode> episodes;
};
EpisodeLog read_episode_log(const std::string& path);

struct ReplayCheck {
  bool ok = false;
  std::string message;
};

/// Re-executes the recorded actions and compares rewards and returns
/// bit-for-bit.
ReplayCheck verify_episode(const LoggedEpisode& ep, const FeatureMap& fmap,
                           const ExperimentConfig& cfg);

std::string study_record_line(const StudyRecord& r);
StudyRecord study_record_from_line(const std::string& line);
/// Missing file reads as an empty ledger.
std::vector<StudyRecord> read_study_ledger(const std::string& path);

}  // namespace vqg
