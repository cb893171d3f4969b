#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "vqg/grammar.hpp"
#include "vqg/guesser.hpp"
#include "vqg/oracle.hpp"
#include "vqg/questioner.hpp"
#include "vqg/rng.hpp"
#include "vqg/world.hpp"

namespace vqg {

enum class Transition : std::uint8_t {
  /// A word token extended the current question.
  kAppend,
  /// "?" closed the question; the Oracle answered and the pair was appended.
  /// When this completes round J_max the game also ends (finished()).
  kAnswered,
  /// "<End>" closed the dialog; the Guesser guessed.
  kEnded,
};

struct RoundRecord {
  std::vector<int> question;
  int predicate = -1;
  Answer answer = Answer::kYes;
  /// Guesser posterior after this round's answer.
  std::vector<double> posterior;
  double p_target = 0.0;
  /// Noiseless answers over all objects differ somewhere.
  bool informative = false;
  int end_step = 0;
  bool inconsistent = false;
};

/// One game between the Oracle, the Bayes Guesser and a token-emitting
/// questioner. The env knows nothing about policies: callers feed tokens.
/// Oracle noise comes from a private stream so replaying recorded tokens
/// reproduces every answer.
class GameEnv {
 public:
  GameEnv(const Grammar& grammar, const Scene& scene, int target_id,
          const OracleConfig& oracle, int j_max, std::uint64_t oracle_seed);

  const QuestionerState& state() const { return state_; }
  const Scene& scene() const { return *scene_; }
  int target_id() const { return target_; }
  int j_max() const { return state_.j_max; }

  /// Applies one action. Throws GrammarError for an illegal token and
  /// ConflictError once the game has ended.
  Transition step(int token);

  bool finished() const { return finished_; }
  /// True when the game ended because J_max rounds were used.
  bool forced() const { return forced_; }
  int num_steps() const { return steps_; }
  /// Trie node of the current partial question.
  int node() const { return node_; }
  const std::vector<RoundRecord>& rounds() const { return rounds_; }
  int rounds_used() const { return static_cast<int>(rounds_.size()); }

  /// Current argmax of the Guesser (the final guess once finished()).
  int guess() const { return vqg::guess(state_.posterior); }
  bool success() const { return finished_ && guess() == target_; }

 private:
  const Grammar* grammar_;
  const Scene* scene_;
  int target_;
  OracleConfig oracle_;
  Rng oracle_rng_;
  std::shared_ptr<const std::vector<Answer>> truths_;
  QuestionerState state_;
  int node_ = Grammar::kRoot;
  int steps_ = 0;
  bool finished_ = false;
  bool forced_ = false;
  std::vector<RoundRecord> rounds_;
};

/// A GameEnv driven by a trained policy one question at a time. Used for
/// evaluation and by the study service, which both need the same seeding:
/// Oracle noise from derive_seed(seed, "env"), decoding from
/// derive_seed(seed, "decode").
class PolicyDialog {
 public:
  PolicyDialog(const Policy& policy, const FeatureMap& fmap, const Scene& scene,
               int target_id, const OracleConfig& oracle, int j_max,
               DecodeMode mode, std::uint64_t seed);

  /// Decodes and plays the next question. Returns the new round, or nullptr
  /// when the policy emitted "<End>". Throws ConflictError once finished.
  const RoundRecord* step();
  void run();

  const GameEnv& env() const { return env_; }
  bool finished() const { return env_.finished(); }

 private:
  const Policy* policy_;
  const FeatureMap* fmap_;
  DecodeMode mode_;
  Rng rng_;
  GameEnv env_;
};

}  // namespace vqg
