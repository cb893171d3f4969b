#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vqg/grammar.hpp"
#include "vqg/guesser.hpp"
#include "vqg/oracle.hpp"
#include "vqg/rng.hpp"
#include "vqg/world.hpp"

namespace vqg {

/// One completed question-answer round.
struct Turn {
  std::vector<int> question;
  int predicate = -1;
  Answer answer = Answer::kYes;
};

/// What the questioner conditions on at step t: the scene (through its
/// noiseless answer table), the Guesser posterior, the dialog so far and the
/// partial question.
struct QuestionerState {
  const Scene* scene = nullptr;
  /// answer_table(grammar, *scene); owned by the caller.
  std::span<const Answer> truths;
  Posterior posterior;
  std::vector<Turn> history;
  std::vector<int> prefix;
  int last_token = -1;
  int j_max = 5;

  /// Current round j, 1-based.
  int round() const { return static_cast<int>(history.size()) + 1; }
  /// t = sum of completed question lengths + current prefix length.
  int step() const;
  bool at_boundary() const { return prefix.empty(); }
};

using Mask = std::vector<std::uint8_t>;

/// Trie children of the current prefix; "<End>" is added only at the empty
/// prefix. Throws GrammarError when the prefix is not in the trie.
Mask legal_tokens(const Grammar& grammar, const QuestionerState& state);
Mask legal_tokens(const Grammar& grammar, int node);

struct FeatureConfig {
  /// Per-predicate entropy of the answer distribution under the posterior.
  bool answer_entropy = true;
  /// Per-token best answer entropy among not-yet-asked predicates reachable
  /// through it.
  bool lookahead = true;

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

/// Fixed-dimension state featurization. Layout, in order:
///   entropy, max prob, top-3 probs (desc), j / J_max, m / M_max,
///   one-hot last token [V], split score [P], asked [P],
///   answer entropy [P] (optional), lookahead [V] (optional).
/// The split score of predicate p is the posterior mass of objects whose
/// truthful answer is Yes.
class FeatureMap {
 public:
  struct Layout {
    int entropy = 0;
    int max_prob = 1;
    int top3 = 2;
    int round = 5;
    int position = 6;
    int last_token = 7;
    int split = -1;
    int asked = -1;
    int answer_entropy = -1;
    int lookahead = -1;
    int dim = 0;
  };

  /// Prefix-independent part of the features, computed once per round.
  struct RoundBlock {
    std::vector<double> base;
    std::vector<double> predicate_entropy;
    std::vector<std::uint8_t> asked;
  };

  FeatureMap(const Grammar& grammar, FeatureConfig cfg = {});

  int dim() const { return layout_.dim; }
  const Layout& layout() const { return layout_; }
  const FeatureConfig& config() const { return cfg_; }
  const Grammar& grammar() const { return *grammar_; }

  RoundBlock round_block(const QuestionerState& state) const;
  /// Writes the full vector for a partial question at trie `node`.
  void fill(const RoundBlock& block, int node, int position, int last_token,
            std::span<double> out) const;

  std::vector<double> operator()(const QuestionerState& state) const;

 private:
  const Grammar* grammar_;
  FeatureConfig cfg_;
  Layout layout_;
};

/// Linear-softmax policy: logits = W f + b with W of shape |V| x D. Parameters
/// live in one flat vector, W row-major followed by b, so gradients and
/// optimizers can treat them uniformly.
class Policy {
 public:
  Policy() = default;
  Policy(int num_tokens, int feature_dim);

  int num_tokens() const { return num_tokens_; }
  int feature_dim() const { return feature_dim_; }
  std::size_t num_params() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  double& weight(int token, int feature) {
    return params_[static_cast<std::size_t>(token) * feature_dim_ + feature];
  }
  double& bias(int token) {
    return params_[static_cast<std::size_t>(num_tokens_) * feature_dim_ +
                   token];
  }

  void logits(std::span<const double> features, std::span<double> out) const;
  bool all_finite() const;

  friend bool operator==(const Policy&, const Policy&) = default;

 private:
  int num_tokens_ = 0;
  int feature_dim_ = 0;
  std::vector<double> params_;
};

/// Softmax restricted to legal tokens; illegal tokens get exactly zero.
std::vector<double> action_distribution(const Policy& policy,
                                        std::span<const double> features,
                                        const Mask& mask);
std::vector<double> action_distribution(const Policy& policy,
                                        const FeatureMap& fmap,
                                        const QuestionerState& state);

/// log pi(action) under the masked softmax.
double log_prob(const Policy& policy, std::span<const double> features,
                const Mask& mask, int action);

/// grad_theta log pi(action): row w gets (1{w = action} - pi_w) * f, bias
/// row gets (1{w = action} - pi_w). `grad += scale * that` in the
/// accumulating overload. Throws Error for an illegal action.
std::vector<double> grad_log_prob(const Policy& policy,
                                  std::span<const double> features,
                                  const Mask& mask, int action);
void accumulate_grad_log_prob(const Policy& policy,
                              std::span<const double> features,
                              const Mask& mask, int action, double scale,
                              std::span<double> grad);
std::vector<double> grad_log_prob(const Policy& policy, const FeatureMap& fmap,
                                  const QuestionerState& state, int action);

struct DecodeMode {
  enum class Kind : std::uint8_t { kSampling, kGreedy, kBeam };
  Kind kind = Kind::kGreedy;
  int beam_width = 5;

  static DecodeMode sampling() { return {Kind::kSampling, 1}; }
  static DecodeMode greedy() { return {Kind::kGreedy, 1}; }
  static DecodeMode beam(int width) { return {Kind::kBeam, width}; }
  /// "sampling" | "greedy" | "beam<width>" (e.g. "beam5").
  static DecodeMode parse(const std::string& name);
  std::string name() const;

  friend bool operator==(const DecodeMode&, const DecodeMode&) = default;
};

struct DecodedQuestion {
  std::vector<int> tokens;
  double log_prob = 0.0;
};

/// Generates the next question (ending in "?") or the single token "<End>"
/// from a state at a question boundary. Greedy breaks ties toward the lowest
/// token index; beam keeps the `width` best prefixes ordered by total
/// log-probability, then lexicographically by token index; the greedy
/// question also competes for the final pick, so beam never scores below it.
DecodedQuestion decode_question(const Policy& policy, const FeatureMap& fmap,
                                const QuestionerState& state, DecodeMode mode,
                                Rng& rng);
DecodedQuestion decode_question(const Policy& policy, const FeatureMap& fmap,
                                const QuestionerState& state, DecodeMode mode,
                                std::uint64_t seed);

/// Log-probability of emitting `tokens` as the next question from a boundary
/// state.
double sequence_log_prob(const Policy& policy, const FeatureMap& fmap,
                         const QuestionerState& state,
                         std::span<const int> tokens);

}  // namespace vqg
