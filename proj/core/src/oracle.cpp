#include "vqg/oracle.hpp"

#include "vqg/error.hpp"

namespace vqg {

const char* to_string(Answer a) {
  switch (a) {
    case Answer::kYes: return "Yes";
    case Answer::kNo: return "No";
    case Answer::kNA: return "NA";
  }
  return "?";
}

Answer answer_from_string(std::string_view s) {
  if (s == "Yes") return Answer::kYes;
  if (s == "No") return Answer::kNo;
  if (s == "NA") return Answer::kNA;
  throw Error("unknown answer '" + std::string(s) + "'");
}

void validate(const OracleConfig& cfg) {
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon < 1.0))
    throw ConfigError("oracle.epsilon", "must lie in [0, 1)");
}

Answer truth_answer(const Predicate& pred, const SceneObject& obj) {
  switch (pred.kind) {
    case PredicateKind::kCategory:
      return obj.category == pred.value ? Answer::kYes : Answer::kNo;
    case PredicateKind::kAttribute: {
      const auto& v = obj.attributes.at(pred.attribute);
      if (!v) return Answer::kNA;
      return *v == pred.value ? Answer::kYes : Answer::kNo;
    }
    case PredicateKind::kSpatial: {
      const auto s = spatial_vector(obj.box);
      const double cx = s[4];
      const double cy = s[5];
      bool holds = false;
      switch (static_cast<Region>(pred.value)) {
        case Region::kLeft: holds = cx < 0.5; break;
        case Region::kRight: holds = cx >= 0.5; break;
        case Region::kTop: holds = cy < 0.5; break;
        case Region::kBottom: holds = cy >= 0.5; break;
      }
      return holds ? Answer::kYes : Answer::kNo;
    }
  }
  throw Error("corrupt predicate");
}

Answer truth_answer(const Grammar& grammar, std::span<const int> question,
                    const SceneObject& obj) {
  return truth_answer(grammar.predicate(grammar.parse(question)), obj);
}

Answer answer(const Predicate& pred, const SceneObject& target,
              const OracleConfig& cfg, Rng& rng) {
  const Answer truth = truth_answer(pred, target);
  const bool corrupt = uniform01(rng) < cfg.epsilon;
  const int shift = 1 + static_cast<int>(uniform_index(rng, 2));
  if (!corrupt) return truth;
  return static_cast<Answer>((static_cast<int>(truth) + shift) % kNumAnswers);
}

Answer answer(const Grammar& grammar, std::span<const int> question,
              const SceneObject& target, const OracleConfig& cfg,
              std::uint64_t seed) {
  Rng rng(derive_seed(seed, "oracle"));
  return answer(grammar.predicate(grammar.parse(question)), target, cfg, rng);
}

std::vector<Answer> answer_all(const Predicate& pred, const Scene& scene) {
  std::vector<Answer> out;
  out.reserve(scene.objects.size());
  for (const auto& o : scene.objects) out.push_back(truth_answer(pred, o));
  return out;
}

std::vector<Answer> answer_all(const Grammar& grammar,
                               std::span<const int> question,
                               const Scene& scene) {
  return answer_all(grammar.predicate(grammar.parse(question)), scene);
}

std::vector<Answer> answer_table(const Grammar& grammar, const Scene& scene) {
  const int n = scene.size();
  std::vector<Answer> table(static_cast<std::size_t>(grammar.num_predicates()) *
                            n);
  for (int p = 0; p < grammar.num_predicates(); ++p)
    for (int i = 0; i < n; ++i)
      table[p * n + i] = truth_answer(grammar.predicate(p), scene.objects[i]);
  return table;
}

}  // namespace vqg
