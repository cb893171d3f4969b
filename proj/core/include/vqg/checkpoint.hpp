#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vqg/config.hpp"
#include "vqg/grammar.hpp"
#include "vqg/questioner.hpp"
#include "vqg/trainer.hpp"

namespace vqg {

inline constexpr std::uint32_t kCheckpointFormat = 1;

/// Everything a run needs to resume training or serve a policy. Stored as a
/// single portable binary file.
struct Checkpoint {
  std::uint32_t format = kCheckpointFormat;
  std::string code_version;
  std::string config_hash;
  /// Canonical INI of the run's configuration.
  std::string config_text;
  std::vector<std::string> vocab;
  std::uint64_t grammar_hash = 0;
  FeatureConfig features;
  int feature_dim = 0;
  TrainingState state;
  /// Learning rate in effect (plain SGD keeps no other optimizer state).
  double lr = 0.0;
  /// Free-form tag, e.g. the ablation variant.
  std::string label;
  /// Master seed of the run; regenerates its world.
  std::uint64_t seed = 0;
};

Checkpoint make_checkpoint(const ExperimentConfig& cfg, const Grammar& grammar,
                           const FeatureMap& fmap, const TrainingState& state,
                           std::string label, std::uint64_t seed);

/// Writes to a temporary file and renames it into place.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
/// Throws NotFoundError when the file is missing and Error when it is
/// unreadable or of another format version.
Checkpoint load_checkpoint(const std::string& path);

/// A checkpoint rebuilt into usable objects. Non-movable: the feature map
/// points into the grammar.
struct Agent {
  ExperimentConfig config;
  Grammar grammar;
  FeatureMap fmap;
  Policy policy;
  TargetLog targets;
  std::string label;
  std::uint64_t seed = 0;

  Agent(ExperimentConfig cfg, Grammar g, Policy p, TargetLog t, std::string l,
        std::uint64_t seed);
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;
};

/// Checks that the stored vocabulary, grammar hash and feature layout match
/// what the stored config rebuilds; throws Error otherwise.
std::shared_ptr<const Agent> make_agent(const Checkpoint& ckpt);
std::shared_ptr<const Agent> load_agent(const std::string& path);

}  // namespace vqg
