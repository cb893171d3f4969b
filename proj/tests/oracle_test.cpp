#include <gtest/gtest.h>

#include <array>

#include "support.hpp"
#include "vqg/error.hpp"
#include "vqg/oracle.hpp"

using namespace vqg;

namespace {

SceneObject make_object(int category, std::optional<int> color, int size,
                        Box box) {
  return {0, category, {color, size}, box};
}

}  // namespace

TEST(Oracle, TruthSemantics) {
  const Grammar g = Grammar::build({}, {});
  const auto q = [&](const char* s) { return g.tokenize(s); };
  const auto dog_left = make_object(1, 2, 0, {0.1, 0.6, 0.3, 0.9});
  EXPECT_EQ(truth_answer(g, q("is it a dog ?"), dog_left), Answer::kYes);
  EXPECT_EQ(truth_answer(g, q("is it a cat ?"), dog_left), Answer::kNo);
  EXPECT_EQ(truth_answer(g, q("is it green ?"), dog_left), Answer::kYes);
  EXPECT_EQ(truth_answer(g, q("is it red ?"), dog_left), Answer::kNo);
  EXPECT_EQ(truth_answer(g, q("is it big ?"), dog_left), Answer::kYes);
  EXPECT_EQ(truth_answer(g, q("is it in the left half ?"), dog_left),
            Answer::kYes);
  EXPECT_EQ(truth_answer(g, q("is it in the right half ?"), dog_left),
            Answer::kNo);
  EXPECT_EQ(truth_answer(g, q("is it in the bottom half ?"), dog_left),
            Answer::kYes);

  const auto colorless = make_object(0, std::nullopt, 1, {0.6, 0.0, 0.8, 0.2});
  EXPECT_EQ(truth_answer(g, q("is it red ?"), colorless), Answer::kNA);
  EXPECT_EQ(truth_answer(g, q("is it small ?"), colorless), Answer::kYes);
  EXPECT_EQ(truth_answer(g, q("is it in the top half ?"), colorless),
            Answer::kYes);
  EXPECT_THROW(truth_answer(g, q("is it a"), colorless), GrammarError);
}

TEST(Oracle, NoiselessOracleIsTruthful) {
  const Grammar g = Grammar::build({}, {});
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const Scene s = generate_scene(WorldConfig{}, rng());
    const int p = static_cast<int>(uniform_index(rng, g.num_predicates()));
    const auto& obj = s.objects[uniform_index(rng, s.size())];
    EXPECT_EQ(answer(g.predicate(p), obj, OracleConfig{0.0}, rng),
              truth_answer(g.predicate(p), obj));
  }
}

TEST(Oracle, CorruptionRateAndTarget) {
  const Predicate pred{PredicateKind::kCategory, -1, 0};
  const auto obj = make_object(0, 1, 0, {});
  Rng rng(9);
  std::array<int, 3> counts{};
  const int n = 200000;
  for (int i = 0; i < n; ++i)
    ++counts[static_cast<int>(answer(pred, obj, OracleConfig{0.3}, rng))];
  EXPECT_NEAR(counts[0] / double(n), 0.7, 0.005);
  EXPECT_NEAR(counts[1] / double(n), 0.15, 0.005);
  EXPECT_NEAR(counts[2] / double(n), 0.15, 0.005);
}

TEST(Oracle, FixedDrawBudget) {
  const Predicate pred{PredicateKind::kCategory, -1, 0};
  const auto obj = make_object(0, 1, 0, {});
  for (double eps : {0.0, 0.5}) {
    Rng a(3), b(3);
    answer(pred, obj, OracleConfig{eps}, a);
    b.discard(2);
    EXPECT_EQ(a(), b());
  }
}

TEST(Oracle, SeededAnswerIsDeterministic) {
  const Grammar g = Grammar::build({}, {});
  const auto obj = make_object(3, 0, 1, {});
  const auto q = g.tokenize("is it a car ?");
  for (std::uint64_t s = 0; s < 20; ++s)
    EXPECT_EQ(answer(g, q, obj, OracleConfig{0.5}, s),
              answer(g, q, obj, OracleConfig{0.5}, s));
}

TEST(Oracle, AnswerTableLayout) {
  const Grammar g = Grammar::build({}, {});
  const Scene s = generate_scene(WorldConfig{}, 21);
  const auto table = answer_table(g, s);
  ASSERT_EQ(table.size(), std::size_t(g.num_predicates()) * s.size());
  for (int p = 0; p < g.num_predicates(); ++p) {
    const auto row = answer_all(g.predicate(p), s);
    for (int n = 0; n < s.size(); ++n) EXPECT_EQ(table[p * s.size() + n], row[n]);
  }
}

TEST(Oracle, Names) {
  for (Answer a : {Answer::kYes, Answer::kNo, Answer::kNA})
    EXPECT_EQ(answer_from_string(to_string(a)), a);
  EXPECT_THROW(answer_from_string("maybe"), Error);
  EXPECT_THROW(validate(OracleConfig{1.0}), ConfigError);
  EXPECT_THROW(validate(OracleConfig{-0.1}), ConfigError);
}
