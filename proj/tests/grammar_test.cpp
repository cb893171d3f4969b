#include <gtest/gtest.h>

#include <set>

#include "vqg/error.hpp"
#include "vqg/grammar.hpp"

using namespace vqg;

namespace {

Grammar default_grammar() { return Grammar::build({}, {}); }

}  // namespace

TEST(Vocabulary, ReservedTokens) {
  const Vocabulary v;
  EXPECT_EQ(v.size(), 2);
  EXPECT_EQ(v.token(Vocabulary::kEnd), "<End>");
  EXPECT_EQ(v.token(Vocabulary::kQuestionMark), "?");
  EXPECT_EQ(v.index("nope"), -1);
  EXPECT_THROW(Vocabulary({"?", "<End>"}), GrammarError);
}

TEST(Vocabulary, AddIsIdempotent) {
  Vocabulary v;
  const int a = v.add("red");
  EXPECT_EQ(v.add("red"), a);
  EXPECT_EQ(v.size(), 3);
}

TEST(Grammar, DefaultSizes) {
  const Grammar g = default_grammar();
  EXPECT_EQ(g.vocab().size(), 24);
  EXPECT_EQ(g.num_predicates(), 16);
}

TEST(Grammar, EveryPredicateRoundTrips) {
  const Grammar g = default_grammar();
  std::set<std::vector<int>> seen;
  for (int p = 0; p < g.num_predicates(); ++p) {
    const auto& q = g.predicate_tokens(p);
    EXPECT_EQ(q.back(), Vocabulary::kQuestionMark);
    EXPECT_LE(static_cast<int>(q.size()), g.max_question_length());
    EXPECT_EQ(g.parse(q), p);
    EXPECT_EQ(g.tokenize(g.render(q)), q);
    EXPECT_TRUE(seen.insert(q).second);
  }
}

TEST(Grammar, PredicateTable) {
  const Grammar g = default_grammar();
  int cats = 0, attrs = 0, spatial = 0;
  for (int p = 0; p < g.num_predicates(); ++p) switch (g.predicate(p).kind) {
      case PredicateKind::kCategory: ++cats; break;
      case PredicateKind::kAttribute: ++attrs; break;
      case PredicateKind::kSpatial: ++spatial; break;
    }
  EXPECT_EQ(cats, 6);
  EXPECT_EQ(attrs, 6);
  EXPECT_EQ(spatial, 4);
  EXPECT_EQ(g.render(g.tokenize("is it a dog ?")), "is it a dog ?");
  const int dog = g.parse(g.tokenize("is it a dog ?"));
  EXPECT_EQ(g.predicate(dog), (Predicate{PredicateKind::kCategory, -1, 1}));
  const int small = g.parse(g.tokenize("is it small ?"));
  EXPECT_EQ(g.predicate(small), (Predicate{PredicateKind::kAttribute, 1, 1}));
  const int top = g.parse(g.tokenize("is it in the top half ?"));
  EXPECT_EQ(g.predicate(top),
            (Predicate{PredicateKind::kSpatial, -1, int(Region::kTop)}));
}

TEST(Grammar, TrieStructure) {
  const Grammar g = default_grammar();
  EXPECT_EQ(g.reachable_predicates(Grammar::kRoot).size(), 16u);
  // Depth-first walk: every leaf is a predicate, every internal node's
  // reachable set is the union of its children's.
  std::vector<int> stack{Grammar::kRoot};
  int leaves = 0;
  while (!stack.empty()) {
    const int node = stack.back();
    stack.pop_back();
    const auto& kids = g.child_tokens(node);
    if (kids.empty()) {
      ASSERT_GE(g.leaf_predicate(node), 0);
      EXPECT_EQ(g.reachable_predicates(node),
                std::vector<int>{g.leaf_predicate(node)});
      ++leaves;
      continue;
    }
    EXPECT_EQ(g.leaf_predicate(node), -1);
    EXPECT_TRUE(std::is_sorted(kids.begin(), kids.end()));
    std::set<int> uni;
    for (int t : kids) {
      const int c = g.child(node, t);
      ASSERT_GE(c, 0);
      EXPECT_EQ(g.depth(c), g.depth(node) + 1);
      for (int p : g.reachable_predicates(c)) uni.insert(p);
      stack.push_back(c);
    }
    EXPECT_EQ(std::vector<int>(uni.begin(), uni.end()),
              g.reachable_predicates(node));
    EXPECT_EQ(g.child(node, Vocabulary::kEnd), -1);
  }
  EXPECT_EQ(leaves, 16);
}

TEST(Grammar, RejectsNonQuestions) {
  const Grammar g = default_grammar();
  const std::vector<int> partial = g.tokenize("is it a");
  EXPECT_NO_THROW(g.walk(partial));
  EXPECT_THROW(g.parse(partial), GrammarError);
  EXPECT_THROW(g.walk(g.tokenize("it is")), GrammarError);
  EXPECT_THROW(g.tokenize("is it a unicorn ?"), GrammarError);
}

TEST(Grammar, HashTracksContent) {
  EXPECT_EQ(default_grammar().hash(), default_grammar().hash());
  GrammarConfig gc;
  gc.regions = {"left", "right"};
  EXPECT_NE(Grammar::build(gc, {}).hash(), default_grammar().hash());
}

TEST(Grammar, ConfigErrors) {
  GrammarConfig gc;
  gc.category_template = "is it a {category}";
  EXPECT_THROW(Grammar::build(gc, {}), ConfigError);
  gc = {};
  gc.max_question_length = 4;
  EXPECT_THROW(Grammar::build(gc, {}), ConfigError);
  gc = {};
  gc.regions = {"north"};
  EXPECT_THROW(Grammar::build(gc, {}), ConfigError);
  gc = {};
  gc.attribute_template = "is it {category} ?";
  EXPECT_THROW(Grammar::build(gc, {}), ConfigError);
}
