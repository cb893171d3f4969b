#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "vqg/grammar.hpp"
#include "vqg/rng.hpp"
#include "vqg/world.hpp"

namespace vqg {

enum class Answer : std::uint8_t { kYes = 0, kNo = 1, kNA = 2 };
inline constexpr int kNumAnswers = 3;

const char* to_string(Answer a);
Answer answer_from_string(std::string_view s);

struct OracleConfig {
  /// Probability that the dialog answer is replaced by one of the two other
  /// answers, chosen uniformly.
  double epsilon = 0.0;

  friend bool operator==(const OracleConfig&, const OracleConfig&) = default;
};

void validate(const OracleConfig& cfg);

/// Noiseless predicate semantics. Category and spatial predicates are always
/// applicable; an attribute predicate on an object lacking that attribute
/// answers NA.
Answer truth_answer(const Predicate& pred, const SceneObject& obj);
/// Parses `question` first; throws GrammarError when it is not a complete
/// question.
Answer truth_answer(const Grammar& grammar, std::span<const int> question,
                    const SceneObject& obj);

/// Dialog answer: the truth with probability 1 - epsilon. Consumes exactly two
/// draws from `rng` per call.
Answer answer(const Predicate& pred, const SceneObject& target,
              const OracleConfig& cfg, Rng& rng);
Answer answer(const Grammar& grammar, std::span<const int> question,
              const SceneObject& target, const OracleConfig& cfg,
              std::uint64_t seed);

/// Noiseless answers for every object, in id order.
std::vector<Answer> answer_all(const Predicate& pred, const Scene& scene);
std::vector<Answer> answer_all(const Grammar& grammar,
                               std::span<const int> question,
                               const Scene& scene);

/// answers[p * N + n] = truth_answer(predicate p, object n).
std::vector<Answer> answer_table(const Grammar& grammar, const Scene& scene);

}  // namespace vqg
