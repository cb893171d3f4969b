#include "vqg/world.hpp"

#include <algorithm>

#include "vqg/error.hpp"
#include "vqg/rng.hpp"

namespace vqg {

SpatialVector spatial_vector(const Box& b) {
  return {b.x_min,
          b.y_min,
          b.x_max,
          b.y_max,
          (b.x_min + b.x_max) / 2.0,
          (b.y_min + b.y_max) / 2.0,
          b.x_max - b.x_min,
          b.y_max - b.y_min};
}

const char* to_string(Split split) {
  return split == Split::kTrain ? "train" : "test";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw Error("unknown split '" + s + "'");
}

void validate(const WorldConfig& cfg) {
  if (cfg.min_objects < 2)
    throw ConfigError("world.min_objects", "must be >= 2");
  if (cfg.max_objects < cfg.min_objects)
    throw ConfigError("world.max_objects", "must be >= world.min_objects");
  if (cfg.max_objects > 64)
    throw ConfigError("world.max_objects", "must be <= 64");
  if (cfg.categories.empty())
    throw ConfigError("world.categories", "at least one category required");
  if (!(cfg.min_box_size > 0.0) || cfg.max_box_size < cfg.min_box_size ||
      cfg.max_box_size > 1.0)
    throw ConfigError("world.min_box_size",
                      "need 0 < min_box_size <= max_box_size <= 1");
  if (cfg.max_resample < 1)
    throw ConfigError("world.max_resample", "must be >= 1");
  for (const auto& a : cfg.attributes) {
    if (a.values.empty())
      throw ConfigError("world." + a.name + "_values",
                        "attribute needs at least one value");
    if (!(a.presence >= 0.0 && a.presence <= 1.0))
      throw ConfigError("world." + a.name + "_presence",
                        "must lie in [0, 1]");
  }
}

namespace {

bool same_concepts(const SceneObject& a, const SceneObject& b) {
  return a.category == b.category && a.attributes == b.attributes;
}

bool degenerate(const std::vector<SceneObject>& objects) {
  return std::all_of(objects.begin(), objects.end(), [&](const auto& o) {
    return same_concepts(o, objects.front());
  });
}

double sample_range(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

Box sample_box(Rng& rng, const WorldConfig& cfg) {
  const double w = sample_range(rng, cfg.min_box_size, cfg.max_box_size);
  const double h = sample_range(rng, cfg.min_box_size, cfg.max_box_size);
  const double cx = uniform01(rng);
  const double cy = uniform01(rng);
  return {std::max(0.0, cx - w / 2), std::max(0.0, cy - h / 2),
          std::min(1.0, cx + w / 2), std::min(1.0, cy + h / 2)};
}

}  // namespace

void validate(const Scene& scene, const WorldConfig& cfg) {
  const int n = scene.size();
  if (n < 2 || n > cfg.max_objects)
    throw Error("scene " + std::to_string(scene.id) + ": object count " +
                std::to_string(n) + " outside [2, " +
                std::to_string(cfg.max_objects) + "]");
  for (int i = 0; i < n; ++i) {
    const auto& o = scene.objects[i];
    if (o.id != i) throw Error("object ids must be 0..N-1 in order");
    const Box& b = o.box;
    if (!(b.x_min < b.x_max && b.y_min < b.y_max && b.x_min >= 0.0 &&
          b.y_min >= 0.0 && b.x_max <= 1.0 && b.y_max <= 1.0))
      throw Error("object " + std::to_string(i) + ": invalid box");
    if (o.category < 0 ||
        o.category >= static_cast<int>(cfg.categories.size()))
      throw Error("object " + std::to_string(i) + ": category out of range");
    if (o.attributes.size() != cfg.attributes.size())
      throw Error("object " + std::to_string(i) + ": attribute arity");
    for (std::size_t a = 0; a < o.attributes.size(); ++a) {
      const auto& v = o.attributes[a];
      if (v && (*v < 0 ||
                *v >= static_cast<int>(cfg.attributes[a].values.size())))
        throw Error("object " + std::to_string(i) + ": value of '" +
                    cfg.attributes[a].name + "' out of range");
    }
  }
  if (degenerate(scene.objects))
    throw Error("scene " + std::to_string(scene.id) +
                ": all objects share category and attributes");
}

Scene generate_scene(const WorldConfig& cfg, std::uint64_t seed,
                     std::int64_t id, Split split) {
  validate(cfg);
  Rng rng(derive_seed(seed, "scene"));
  const int span = cfg.max_objects - cfg.min_objects + 1;
  const int n = cfg.min_objects + static_cast<int>(uniform_index(rng, span));

  Scene scene;
  scene.id = id;
  scene.split = split;
  for (int attempt = 0; attempt < cfg.max_resample; ++attempt) {
    scene.objects.clear();
    for (int i = 0; i < n; ++i) {
      SceneObject o;
      o.id = i;
      o.category =
          static_cast<int>(uniform_index(rng, cfg.categories.size()));
      for (const auto& spec : cfg.attributes) {
        // Always draw both numbers so the stream layout is schema-fixed.
        const bool present = uniform01(rng) < spec.presence;
        const int value =
            static_cast<int>(uniform_index(rng, spec.values.size()));
        o.attributes.push_back(present ? std::optional<int>(value)
                                       : std::nullopt);
      }
      o.box = sample_box(rng, cfg);
      scene.objects.push_back(std::move(o));
    }
    if (!degenerate(scene.objects)) return scene;
  }
  throw DegenerateConfigError(
      "could not generate a non-degenerate scene after " +
      std::to_string(cfg.max_resample) +
      " attempts; the schema admits too few distinct objects");
}

GameInstance assign_target(const Scene& scene, std::uint64_t seed) {
  if (scene.objects.empty()) throw Error("assign_target: empty scene");
  Rng rng(derive_seed(seed, "target"));
  return {&scene, static_cast<int>(uniform_index(rng, scene.objects.size()))};
}

Splits make_splits(int n_train, int n_test, const WorldConfig& cfg,
                   std::uint64_t seed) {
  if (n_train < 1 || n_test < 1)
    throw Error("make_splits: counts must be >= 1");
  Splits s;
  s.train.reserve(n_train);
  s.test.reserve(n_test);
  for (int i = 0; i < n_train; ++i)
    s.train.push_back(generate_scene(cfg, derive_seed(seed, "world", i), i,
                                     Split::kTrain));
  for (int i = 0; i < n_test; ++i) {
    const std::int64_t id = n_train + i;
    s.test.push_back(
        generate_scene(cfg, derive_seed(seed, "world", id), id, Split::kTest));
  }
  return s;
}

}  // namespace vqg
