#include "vqg/questioner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vqg/error.hpp"

namespace vqg {

int QuestionerState::step() const {
  int t = static_cast<int>(prefix.size());
  for (const auto& turn : history) t += static_cast<int>(turn.question.size());
  return t;
}

Mask legal_tokens(const Grammar& grammar, int node) {
  Mask mask(grammar.vocab().size(), 0);
  const int m = grammar.depth(node);
  if (m >= grammar.max_question_length())
    throw GrammarError("question already at maximum length");
  const auto& children = grammar.child_tokens(node);
  if (m == grammar.max_question_length() - 1) {
    if (!std::binary_search(children.begin(), children.end(),
                            Vocabulary::kQuestionMark))
      throw GrammarError("question cannot be closed at maximum length");
    mask[Vocabulary::kQuestionMark] = 1;
    return mask;
  }
  for (int tok : children) mask[tok] = 1;
  if (node == Grammar::kRoot) mask[Vocabulary::kEnd] = 1;
  return mask;
}

Mask legal_tokens(const Grammar& grammar, const QuestionerState& state) {
  return legal_tokens(grammar, grammar.walk(state.prefix));
}

// ---------------------------------------------------------------------------
// Features

FeatureMap::FeatureMap(const Grammar& grammar, FeatureConfig cfg)
    : grammar_(&grammar), cfg_(cfg) {
  const int v = grammar.vocab().size();
  const int p = grammar.num_predicates();
  int off = 7;
  layout_.last_token = off;
  off += v;
  layout_.split = off;
  off += p;
  layout_.asked = off;
  off += p;
  if (cfg_.answer_entropy) {
    layout_.answer_entropy = off;
    off += p;
  }
  if (cfg_.lookahead) {
    layout_.lookahead = off;
    off += v;
  }
  layout_.dim = off;
}

FeatureMap::RoundBlock FeatureMap::round_block(
    const QuestionerState& state) const {
  const auto& post = state.posterior.probs;
  const int n = static_cast<int>(post.size());
  const int np = grammar_->num_predicates();
  if (static_cast<int>(state.truths.size()) != n * np)
    throw Error("features: answer table does not match the scene");

  RoundBlock block;
  block.base.assign(layout_.dim, 0.0);
  auto& f = block.base;
  f[layout_.entropy] = entropy(post);

  std::vector<double> sorted = post;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  f[layout_.max_prob] = sorted.front();
  for (int k = 0; k < 3 && k < n; ++k) f[layout_.top3 + k] = sorted[k];
  f[layout_.round] = static_cast<double>(state.round()) / state.j_max;

  block.predicate_entropy.assign(np, 0.0);
  for (int p = 0; p < np; ++p) {
    double mass[kNumAnswers] = {0.0, 0.0, 0.0};
    for (int i = 0; i < n; ++i)
      mass[static_cast<int>(state.truths[p * n + i])] += post[i];
    f[layout_.split + p] = mass[0];
    block.predicate_entropy[p] = entropy(mass);
    if (cfg_.answer_entropy)
      f[layout_.answer_entropy + p] = block.predicate_entropy[p];
  }
  block.asked.assign(np, 0);
  for (const auto& turn : state.history)
    if (turn.predicate >= 0) {
      f[layout_.asked + turn.predicate] = 1.0;
      block.asked[turn.predicate] = 1;
    }
  return block;
}

void FeatureMap::fill(const RoundBlock& block, int node, int position,
                      int last_token, std::span<double> out) const {
  std::copy(block.base.begin(), block.base.end(), out.begin());
  out[layout_.position] =
      static_cast<double>(position) / grammar_->max_question_length();
  if (last_token >= 0) out[layout_.last_token + last_token] = 1.0;
  if (cfg_.lookahead) {
    const auto& children = grammar_->child_tokens(node);
    for (int tok : children) {
      const int next = grammar_->child(node, tok);
      double best = 0.0;
      for (int p : grammar_->reachable_predicates(next))
        if (!block.asked[p]) best = std::max(best, block.predicate_entropy[p]);
      out[layout_.lookahead + tok] = best;
    }
  }
}

std::vector<double> FeatureMap::operator()(const QuestionerState& state) const {
  const int node = grammar_->walk(state.prefix);
  std::vector<double> f(layout_.dim);
  fill(round_block(state), node, static_cast<int>(state.prefix.size()),
       state.last_token, f);
  return f;
}

// ---------------------------------------------------------------------------
// Policy

Policy::Policy(int num_tokens, int feature_dim)
    : num_tokens_(num_tokens),
      feature_dim_(feature_dim),
      params_(static_cast<std::size_t>(num_tokens) * (feature_dim + 1), 0.0) {
  if (num_tokens < 1 || feature_dim < 1)
    throw Error("Policy: dimensions must be positive");
}

void Policy::logits(std::span<const double> features,
                    std::span<double> out) const {
  const std::size_t bias_off =
      static_cast<std::size_t>(num_tokens_) * feature_dim_;
  for (int w = 0; w < num_tokens_; ++w) {
    const double* row = params_.data() + static_cast<std::size_t>(w) * feature_dim_;
    double z = params_[bias_off + w];
    for (int k = 0; k < feature_dim_; ++k) z += row[k] * features[k];
    out[w] = z;
  }
}

bool Policy::all_finite() const {
  return std::all_of(params_.begin(), params_.end(),
                     [](double x) { return std::isfinite(x); });
}

namespace {

void check_shapes(const Policy& policy, std::span<const double> features,
                  const Mask& mask) {
  if (static_cast<int>(features.size()) != policy.feature_dim() ||
      static_cast<int>(mask.size()) != policy.num_tokens())
    throw Error("policy: feature or mask dimension mismatch");
}

// Masked softmax over legal rows only; returns probabilities and fills
// `logp` for legal entries when non-null.
std::vector<double> masked_softmax(const Policy& policy,
                                   std::span<const double> features,
                                   const Mask& mask,
                                   std::vector<double>* logp = nullptr) {
  check_shapes(policy, features, mask);
  const int v = policy.num_tokens();
  const int d = policy.feature_dim();
  const auto theta = policy.params();
  const std::size_t bias_off = static_cast<std::size_t>(v) * d;

  std::vector<double> z(v, -std::numeric_limits<double>::infinity());
  double zmax = -std::numeric_limits<double>::infinity();
  int legal = 0;
  for (int w = 0; w < v; ++w) {
    if (!mask[w]) continue;
    ++legal;
    const double* row = theta.data() + static_cast<std::size_t>(w) * d;
    double acc = theta[bias_off + w];
    for (int k = 0; k < d; ++k) acc += row[k] * features[k];
    z[w] = acc;
    zmax = std::max(zmax, acc);
  }
  if (legal == 0) throw Error("action_distribution: no legal token");

  std::vector<double> probs(v, 0.0);
  double sum = 0.0;
  for (int w = 0; w < v; ++w) {
    if (!mask[w]) continue;
    probs[w] = std::exp(z[w] - zmax);
    sum += probs[w];
  }
  const double lse = zmax + std::log(sum);
  for (int w = 0; w < v; ++w)
    if (mask[w]) probs[w] /= sum;
  if (logp) {
    logp->assign(v, -std::numeric_limits<double>::infinity());
    for (int w = 0; w < v; ++w)
      if (mask[w]) (*logp)[w] = z[w] - lse;
  }
  return probs;
}

int count_legal(const Mask& mask) {
  return static_cast<int>(std::count(mask.begin(), mask.end(), 1));
}

}  // namespace

std::vector<double> action_distribution(const Policy& policy,
                                        std::span<const double> features,
                                        const Mask& mask) {
  return masked_softmax(policy, features, mask);
}

std::vector<double> action_distribution(const Policy& policy,
                                        const FeatureMap& fmap,
                                        const QuestionerState& state) {
  return action_distribution(policy, fmap(state),
                             legal_tokens(fmap.grammar(), state));
}

double log_prob(const Policy& policy, std::span<const double> features,
                const Mask& mask, int action) {
  if (action < 0 || action >= policy.num_tokens() || !mask[action])
    throw Error("log_prob: illegal action");
  std::vector<double> logp;
  masked_softmax(policy, features, mask, &logp);
  return logp[action];
}

void accumulate_grad_log_prob(const Policy& policy,
                              std::span<const double> features,
                              const Mask& mask, int action, double scale,
                              std::span<double> grad) {
  if (action < 0 || action >= policy.num_tokens() || !mask[action])
    throw Error("grad_log_prob: illegal action");
  if (grad.size() != policy.num_params())
    throw Error("grad_log_prob: gradient buffer has wrong size");
  // A forced token has log-probability identically zero.
  if (count_legal(mask) == 1 || scale == 0.0) return;
  const auto probs = masked_softmax(policy, features, mask);
  const int v = policy.num_tokens();
  const int d = policy.feature_dim();
  const std::size_t bias_off = static_cast<std::size_t>(v) * d;
  for (int w = 0; w < v; ++w) {
    if (!mask[w]) continue;
    const double coef = scale * ((w == action ? 1.0 : 0.0) - probs[w]);
    double* row = grad.data() + static_cast<std::size_t>(w) * d;
    for (int k = 0; k < d; ++k) row[k] += coef * features[k];
    grad[bias_off + w] += coef;
  }
}

std::vector<double> grad_log_prob(const Policy& policy,
                                  std::span<const double> features,
                                  const Mask& mask, int action) {
  std::vector<double> g(policy.num_params(), 0.0);
  accumulate_grad_log_prob(policy, features, mask, action, 1.0, g);
  return g;
}

std::vector<double> grad_log_prob(const Policy& policy, const FeatureMap& fmap,
                                  const QuestionerState& state, int action) {
  return grad_log_prob(policy, fmap(state), legal_tokens(fmap.grammar(), state),
                       action);
}

// ---------------------------------------------------------------------------
// Decoding

DecodeMode DecodeMode::parse(const std::string& name) {
  if (name == "sampling") return sampling();
  if (name == "greedy") return greedy();
  if (name.rfind("beam", 0) == 0) {
    std::string digits = name.substr(4);
    if (!digits.empty() && digits.front() == '(' && digits.back() == ')')
      digits = digits.substr(1, digits.size() - 2);
    if (digits.empty()) return beam(5);
    try {
      std::size_t used = 0;
      const int w = std::stoi(digits, &used);
      if (used == digits.size() && w >= 1) return beam(w);
    } catch (const std::exception&) {
    }
  }
  throw Error("unknown decode mode '" + name +
              "' (sampling | greedy | beam<width>)");
}

std::string DecodeMode::name() const {
  switch (kind) {
    case Kind::kSampling: return "sampling";
    case Kind::kGreedy: return "greedy";
    case Kind::kBeam: return "beam" + std::to_string(beam_width);
  }
  return "?";
}

namespace {

struct Hypothesis {
  std::vector<int> tokens;
  int node = Grammar::kRoot;
  int last_token = -1;
  double log_prob = 0.0;
  bool done = false;
};

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.tokens < b.tokens;
}

bool closes(int tok) {
  return tok == Vocabulary::kEnd || tok == Vocabulary::kQuestionMark;
}

DecodedQuestion decode_linear(const Policy& policy, const FeatureMap& fmap,
                              const QuestionerState& state, bool sample,
                              Rng& rng) {
  const Grammar& g = fmap.grammar();
  const auto block = fmap.round_block(state);
  std::vector<double> f(fmap.dim());
  DecodedQuestion out;
  int node = Grammar::kRoot;
  int last = state.last_token;
  while (true) {
    const Mask mask = legal_tokens(g, node);
    int tok = -1;
    double lp = 0.0;
    if (count_legal(mask) == 1) {
      tok = static_cast<int>(std::find(mask.begin(), mask.end(), 1) -
                             mask.begin());
    } else {
      fmap.fill(block, node, static_cast<int>(out.tokens.size()), last, f);
      std::vector<double> logp;
      const auto probs = masked_softmax(policy, f, mask, &logp);
      if (sample) {
        const double u = uniform01(rng);
        double acc = 0.0;
        for (int w = 0; w < policy.num_tokens(); ++w) {
          if (!mask[w]) continue;
          tok = w;
          acc += probs[w];
          if (u < acc) break;
        }
      } else {
        for (int w = 0; w < policy.num_tokens(); ++w)
          if (mask[w] && (tok < 0 || probs[w] > probs[tok])) tok = w;
      }
      lp = logp[tok];
    }
    out.tokens.push_back(tok);
    out.log_prob += lp;
    if (closes(tok)) return out;
    node = g.child(node, tok);
    last = tok;
  }
}

DecodedQuestion decode_beam(const Policy& policy, const FeatureMap& fmap,
                            const QuestionerState& state, int width) {
  const Grammar& g = fmap.grammar();
  const auto block = fmap.round_block(state);
  std::vector<double> f(fmap.dim());
  std::vector<Hypothesis> active{{{}, Grammar::kRoot, state.last_token, 0.0}};
  std::vector<Hypothesis> finished;
  while (!active.empty()) {
    std::vector<Hypothesis> candidates;
    for (const auto& h : active) {
      const Mask mask = legal_tokens(g, h.node);
      std::vector<double> logp(policy.num_tokens(), 0.0);
      if (count_legal(mask) > 1) {
        fmap.fill(block, h.node, static_cast<int>(h.tokens.size()),
                  h.last_token, f);
        masked_softmax(policy, f, mask, &logp);
      }
      for (int w = 0; w < policy.num_tokens(); ++w) {
        if (!mask[w]) continue;
        Hypothesis next = h;
        next.tokens.push_back(w);
        next.log_prob += logp[w];
        next.done = closes(w);
        if (!next.done) next.node = g.child(h.node, w);
        next.last_token = w;
        candidates.push_back(std::move(next));
      }
    }
    std::sort(candidates.begin(), candidates.end(), better);
    if (static_cast<int>(candidates.size()) > width) candidates.resize(width);
    active.clear();
    for (auto& c : candidates)
      (c.done ? finished : active).push_back(std::move(c));
  }
  Rng unused(0);
  const auto greedy = decode_linear(policy, fmap, state, false, unused);
  finished.push_back({greedy.tokens, Grammar::kRoot, -1, greedy.log_prob, true});
  const auto best = std::min_element(finished.begin(), finished.end(), better);
  return {best->tokens, best->log_prob};
}

}  // namespace

DecodedQuestion decode_question(const Policy& policy, const FeatureMap& fmap,
                                const QuestionerState& state, DecodeMode mode,
                                Rng& rng) {
  if (!state.at_boundary())
    throw Error("decode_question: state is mid-question");
  switch (mode.kind) {
    case DecodeMode::Kind::kSampling:
      return decode_linear(policy, fmap, state, true, rng);
    case DecodeMode::Kind::kGreedy:
      return decode_linear(policy, fmap, state, false, rng);
    case DecodeMode::Kind::kBeam:
      if (mode.beam_width < 1) throw Error("beam width must be >= 1");
      return decode_beam(policy, fmap, state, mode.beam_width);
  }
  throw Error("corrupt decode mode");
}

DecodedQuestion decode_question(const Policy& policy, const FeatureMap& fmap,
                                const QuestionerState& state, DecodeMode mode,
                                std::uint64_t seed) {
  Rng rng(derive_seed(seed, "decode"));
  return decode_question(policy, fmap, state, mode, rng);
}

double sequence_log_prob(const Policy& policy, const FeatureMap& fmap,
                         const QuestionerState& state,
                         std::span<const int> tokens) {
  const Grammar& g = fmap.grammar();
  const auto block = fmap.round_block(state);
  std::vector<double> f(fmap.dim());
  int node = Grammar::kRoot;
  int last = state.last_token;
  double total = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int tok = tokens[i];
    const Mask mask = legal_tokens(g, node);
    fmap.fill(block, node, static_cast<int>(i), last, f);
    total += log_prob(policy, f, mask, tok);
    if (closes(tok)) {
      if (i + 1 != tokens.size())
        throw GrammarError("tokens continue after the question closed");
      return total;
    }
    node = g.child(node, tok);
    last = tok;
  }
  throw GrammarError("sequence does not close the question");
}

}  // namespace vqg
