#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vqg/world.hpp"

namespace vqg {

enum class PredicateKind : std::uint8_t { kCategory, kAttribute, kSpatial };

enum class Region : std::uint8_t { kLeft, kRight, kTop, kBottom };

/// The meaning of one grammar leaf. `value` is a category index, an attribute
/// value index, or a Region, depending on `kind`.
struct Predicate {
  PredicateKind kind = PredicateKind::kCategory;
  int attribute = -1;
  int value = 0;

  friend bool operator==(const Predicate&, const Predicate&) = default;
};

class Vocabulary {
 public:
  static constexpr int kEnd = 0;
  static constexpr int kQuestionMark = 1;
  static constexpr std::string_view kEndToken = "<End>";
  static constexpr std::string_view kQuestionMarkToken = "?";

  Vocabulary();
  explicit Vocabulary(std::vector<std::string> tokens);

  /// Appends `word` if new; returns its index either way.
  int add(const std::string& word);
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int i) const { return tokens_.at(i); }
  /// -1 when unknown.
  int index(std::string_view word) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct GrammarConfig {
  /// Longest question in tokens, counting the closing "?".
  int max_question_length = 12;
  std::string category_template = "is it a {category} ?";
  std::string attribute_template = "is it {value} ?";
  std::string spatial_template = "is it in the {region} half ?";
  std::vector<std::string> regions{"left", "right", "top", "bottom"};

  friend bool operator==(const GrammarConfig&, const GrammarConfig&) = default;
};

/// Question templates expanded into a prefix tree over the vocabulary. Every
/// root-to-leaf path is one complete question ending in "?" and maps to
/// exactly one Predicate.
class Grammar {
 public:
  static Grammar build(const GrammarConfig& cfg, const WorldConfig& world);

  const Vocabulary& vocab() const { return vocab_; }
  int num_predicates() const { return static_cast<int>(predicates_.size()); }
  const Predicate& predicate(int p) const { return predicates_.at(p); }
  const std::vector<int>& predicate_tokens(int p) const {
    return predicate_tokens_.at(p);
  }
  int max_question_length() const { return max_question_length_; }

  static constexpr int kRoot = 0;
  /// Node reached by appending `token` at `node`, or -1.
  int child(int node, int token) const;
  /// Child tokens of `node`, ascending by token index.
  const std::vector<int>& child_tokens(int node) const {
    return nodes_[node].child_tokens;
  }
  /// Predicate completed at `node` (node entered via "?"), otherwise -1.
  int leaf_predicate(int node) const { return nodes_[node].predicate; }
  int depth(int node) const { return nodes_[node].depth; }
  /// Predicates whose question passes through `node`, ascending.
  const std::vector<int>& reachable_predicates(int node) const {
    return nodes_[node].reachable;
  }

  /// Node for a partial question; throws GrammarError if not a trie prefix.
  int walk(std::span<const int> prefix) const;
  /// Predicate of a complete question; throws GrammarError otherwise.
  int parse(std::span<const int> question) const;

  std::vector<int> tokenize(std::string_view text) const;
  std::string render(std::span<const int> tokens) const;

  /// Stable digest of vocabulary and predicate table, stored in checkpoints.
  std::uint64_t hash() const;

 private:
  struct Node {
    std::vector<int> child_tokens;
    std::vector<int> child_nodes;
    int predicate = -1;
    int depth = 0;
    std::vector<int> reachable;
  };

  int add_path(const std::vector<int>& tokens, int predicate);

  Vocabulary vocab_;
  std::vector<Predicate> predicates_;
  std::vector<std::vector<int>> predicate_tokens_;
  std::vector<Node> nodes_;
  int max_question_length_ = 12;
};

}  // namespace vqg
