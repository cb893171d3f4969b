#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vqg/config.hpp"
#include "vqg/game.hpp"
#include "vqg/questioner.hpp"
#include "vqg/trainer.hpp"

namespace vqg {

enum class SplitMode : std::uint8_t { kNewObject, kNewImage };

const char* to_string(SplitMode m);
SplitMode split_mode_from_string(const std::string& s);

/// One evaluated game with its full transcript.
struct GameRecord {
  std::int64_t scene_id = 0;
  int target = 0;
  int guess = 0;
  bool success = false;
  bool forced = false;
  std::uint64_t seed = 0;
  int num_objects = 0;
  std::vector<RoundRecord> rounds;

  int num_rounds() const { return static_cast<int>(rounds.size()); }
};

struct EvalOptions {
  SplitMode split = SplitMode::kNewImage;
  DecodeMode mode = DecodeMode::greedy();
  int n_games = 2000;
  std::uint64_t seed = 1;
  OracleConfig oracle{0.1};
  int j_max = 5;
  /// Training targets; required for NewObject.
  const TargetLog* targets = nullptr;
  int workers = 1;
};

struct EvalResult {
  double success_rate = 0.0;
  std::vector<GameRecord> games;
};

/// Plays one greedy/sampled/beam game; see PolicyDialog for seeding.
GameRecord play_game(const Policy& policy, const FeatureMap& fmap,
                     const Scene& scene, int target, DecodeMode mode,
                     const OracleConfig& oracle, int j_max, std::uint64_t seed);

/// Game i draws its scene, target and play seed from derive_seed(seed,
/// "eval", i), so two policies evaluated with the same options face the same
/// games. NewObject restricts targets to objects absent from `targets`;
/// scenes with no such object are skipped. NewImage draws any object.
/// Throws Error when no scene is eligible.
EvalResult evaluate(const Policy& policy, const FeatureMap& fmap,
                    std::span<const Scene> scenes, const EvalOptions& opts);

struct RoundCurve {
  /// Index r - 1 for rounds r = 1..J_max.
  std::vector<int> successes;
  std::vector<double> ratios;
  int games = 0;
};

/// Success if the Guesser had to pick after round r, from the stored
/// posteriors. Games shorter than r keep their final posterior; games with
/// no rounds use the uniform prior.
RoundCurve round_success_curve(std::span<const GameRecord> games, int j_max);

/// Percentage of successful games whose p_j(target) sequence never decreases.
/// Empty when there is no successful game.
std::optional<double> progressive_trend_pct(std::span<const GameRecord> games);

/// Percentage of questions in successful games whose answers differ across
/// objects. Empty when those games asked no questions.
std::optional<double> high_quality_pct(std::span<const GameRecord> games);

/// Mean number of rounds over successful games (0 when there are none).
double mean_rounds_successful(std::span<const GameRecord> games);

struct EvalSummary {
  int n_games = 0;
  double success_rate = 0.0;
  double mean_rounds = 0.0;
  double mean_rounds_success = 0.0;
  std::optional<double> progressive_trend;
  std::optional<double> high_quality;
};

EvalSummary summarize(std::span<const GameRecord> games);

// ---------------------------------------------------------------------------
// Ablation

enum class Variant : std::uint8_t {
  kSupervised,
  kSoleReward,
  kGoal,
  kGoalProgressive,
  kGoalInformative,
  kFull,
};

inline constexpr std::array<Variant, 6> kAllVariants{
    Variant::kSupervised,      Variant::kSoleReward,
    Variant::kGoal,            Variant::kGoalProgressive,
    Variant::kGoalInformative, Variant::kFull};

/// "supervised", "sole_reward", "r_g", "r_g+r_p", "r_g+r_i", "r_g+r_p+r_i".
const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

/// Reward switches for an RL variant. Throws Error for kSupervised.
RewardConfig variant_rewards(Variant v, const RewardConfig& base);

struct AblationOptions {
  std::vector<std::uint64_t> seeds;
  std::vector<Variant> variants{kAllVariants.begin(), kAllVariants.end()};
  std::vector<SplitMode> splits{SplitMode::kNewObject, SplitMode::kNewImage};
  std::vector<DecodeMode> modes{DecodeMode::sampling(), DecodeMode::greedy(),
                                DecodeMode::beam(5)};
  /// Progress messages (one line each); may be empty.
  std::function<void(const std::string&)> log;
};

struct AblationCell {
  Variant variant = Variant::kFull;
  SplitMode split = SplitMode::kNewImage;
  DecodeMode mode;
  /// One entry per seed, in seed order.
  std::vector<EvalSummary> per_seed;

  double mean_success() const;
  double std_success() const;
};

struct AblationReport {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationCell> cells;
  std::string config_hash;
  std::string version;

  const AblationCell& cell(Variant v, SplitMode s, DecodeMode m) const;
};

/// The world of a run with master seed `seed`.
Splits make_run_world(const ExperimentConfig& cfg, std::uint64_t seed);

/// Trained policies of one seed, keyed by variant.
struct SeedPolicies {
  std::map<Variant, Policy> policies;
  TargetLog targets;
  Splits splits;
};

/// Generates the world for `seed`, pretrains the supervised policy on expert
/// dialogs, then trains each RL variant from that warm start.
SeedPolicies train_variants(const ExperimentConfig& cfg, const FeatureMap& fmap,
                            std::uint64_t seed, std::span<const Variant> variants,
                            const std::function<void(const std::string&)>& log =
                                {});

/// Requires at least three seeds. Every cell is the per-seed evaluate()
/// summary of that seed's trained policy, aggregated as mean and stddev.
AblationReport run_ablation(const ExperimentConfig& cfg,
                            const AblationOptions& opts);

std::string ablation_json(const AblationReport& report);
std::string ablation_table(const AblationReport& report);

// ---------------------------------------------------------------------------
// Human-study ledger

struct StudyRecord {
  std::string session_id;
  std::string checkpoint;
  std::string group_id;
  std::uint64_t scene_seed = 0;
  std::uint64_t session_seed = 0;
  int rounds_seen = 0;
  int guess = 0;
  int target = 0;
  bool correct = false;
  double elapsed_s = 0.0;
};

struct StudyGroupStats {
  int sessions = 0;
  int correct = 0;
  /// Study groups (shared group id), judged by majority vote.
  int groups = 0;
  int groups_correct = 0;

  double accuracy() const { return sessions ? double(correct) / sessions : 0.0; }
  double group_accuracy() const {
    return groups ? double(groups_correct) / groups : 0.0;
  }
  friend bool operator==(const StudyGroupStats&, const StudyGroupStats&) = default;
};

struct StudySummary {
  StudyGroupStats overall;
  std::map<std::string, StudyGroupStats> by_checkpoint;
  friend bool operator==(const StudySummary&, const StudySummary&) = default;
};

/// Recount from ledger records. A group (checkpoint, group id) is correct
/// when more than half of its sessions are.
StudySummary summarize_study(std::span<const StudyRecord> records);

}  // namespace vqg
