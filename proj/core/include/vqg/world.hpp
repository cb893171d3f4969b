#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vqg {

struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 1.0;
  double y_max = 1.0;

  friend bool operator==(const Box&, const Box&) = default;
};

/// [x_min, y_min, x_max, y_max, x_center, y_center, width, height]
using SpatialVector = std::array<double, 8>;

SpatialVector spatial_vector(const Box& box);

struct AttributeSpec {
  std::string name;
  std::vector<std::string> values;
  /// Probability that an object carries the attribute at all. Values below
  /// one make the NA answer reachable.
  double presence = 1.0;

  friend bool operator==(const AttributeSpec&, const AttributeSpec&) = default;
};

struct WorldConfig {
  std::vector<std::string> categories{"person", "dog", "cat", "car", "chair",
                                      "cup"};
  std::vector<AttributeSpec> attributes{
      {"color", {"red", "blue", "green", "yellow"}, 0.9},
      {"size", {"big", "small"}, 1.0}};
  int min_objects = 8;
  int max_objects = 8;
  double min_box_size = 0.05;
  double max_box_size = 0.3;
  int max_resample = 64;

  friend bool operator==(const WorldConfig&, const WorldConfig&) = default;
};

/// Throws ConfigError when the config cannot produce valid scenes.
void validate(const WorldConfig& cfg);

struct SceneObject {
  int id = 0;
  int category = 0;
  /// One slot per WorldConfig::attributes entry; empty when absent.
  std::vector<std::optional<int>> attributes;
  Box box;

  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

enum class Split : std::uint8_t { kTrain, kTest };

const char* to_string(Split split);
Split split_from_string(const std::string& s);

struct Scene {
  std::int64_t id = 0;
  std::vector<SceneObject> objects;
  Split split = Split::kTrain;

  int size() const { return static_cast<int>(objects.size()); }
  friend bool operator==(const Scene&, const Scene&) = default;
};

/// Checks every SceneObject/Scene invariant against the schema. Throws Error
/// naming the first violation.
void validate(const Scene& scene, const WorldConfig& cfg);

struct GameInstance {
  const Scene* scene = nullptr;
  int target_id = 0;
};

/// Pure function of (cfg, seed). Resamples up to cfg.max_resample times when
/// every object carries the same category and attributes, then throws
/// DegenerateConfigError.
Scene generate_scene(const WorldConfig& cfg, std::uint64_t seed,
                     std::int64_t id = 0, Split split = Split::kTrain);

GameInstance assign_target(const Scene& scene, std::uint64_t seed);

struct Splits {
  std::vector<Scene> train;
  std::vector<Scene> test;
};

/// Train scenes get ids [0, n_train), test scenes [n_train, n_train + n_test).
Splits make_splits(int n_train, int n_test, const WorldConfig& cfg,
                   std::uint64_t seed);

}  // namespace vqg
