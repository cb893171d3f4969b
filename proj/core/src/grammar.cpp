#include "vqg/grammar.hpp"

#include <algorithm>
#include <sstream>

#include "vqg/error.hpp"
#include "vqg/rng.hpp"

namespace vqg {

Vocabulary::Vocabulary() {
  add(std::string(kEndToken));
  add(std::string(kQuestionMarkToken));
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  for (auto& t : tokens) {
    if (index(t) >= 0) throw GrammarError("duplicate token '" + t + "'");
    add(t);
  }
  if (size() < 2 || tokens_[kEnd] != kEndToken ||
      tokens_[kQuestionMark] != kQuestionMarkToken)
    throw GrammarError("vocabulary must start with <End> and ?");
}

int Vocabulary::add(const std::string& word) {
  if (auto it = index_.find(word); it != index_.end()) return it->second;
  tokens_.push_back(word);
  return index_[word] = static_cast<int>(tokens_.size()) - 1;
}

int Vocabulary::index(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? -1 : it->second;
}

namespace {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

struct Template {
  std::vector<std::string> words;
  int slot = -1;
};

Template parse_template(const std::string& text, std::string_view placeholder,
                        const char* key) {
  Template t;
  t.words = split_words(text);
  if (t.words.empty()) return t;
  if (t.words.back() != Vocabulary::kQuestionMarkToken)
    throw ConfigError(key, "template must end with '?'");
  for (std::size_t i = 0; i < t.words.size(); ++i) {
    const auto& w = t.words[i];
    if (w == placeholder) {
      if (t.slot >= 0)
        throw ConfigError(key, "placeholder appears more than once");
      t.slot = static_cast<int>(i);
    } else if (w == Vocabulary::kEndToken ||
               (w == Vocabulary::kQuestionMarkToken &&
                i + 1 != t.words.size())) {
      throw ConfigError(key, "reserved token '" + w + "' inside template");
    }
  }
  if (t.slot < 0)
    throw ConfigError(key, "missing placeholder " + std::string(placeholder));
  return t;
}

}  // namespace

int Grammar::add_path(const std::vector<int>& tokens, int predicate) {
  int node = kRoot;
  nodes_[node].reachable.push_back(predicate);
  for (int tok : tokens) {
    int next = child(node, tok);
    if (next < 0) {
      next = static_cast<int>(nodes_.size());
      Node fresh;
      fresh.depth = nodes_[node].depth + 1;
      nodes_.push_back(std::move(fresh));
      auto& parent = nodes_[node];
      auto pos = std::lower_bound(parent.child_tokens.begin(),
                                  parent.child_tokens.end(), tok);
      const auto off = pos - parent.child_tokens.begin();
      parent.child_tokens.insert(pos, tok);
      parent.child_nodes.insert(parent.child_nodes.begin() + off, next);
    } else if (nodes_[next].predicate >= 0 || tok == Vocabulary::kQuestionMark) {
      throw GrammarError("two questions share the token sequence '" +
                         render(tokens) + "'");
    }
    node = next;
    nodes_[node].reachable.push_back(predicate);
  }
  nodes_[node].predicate = predicate;
  return node;
}

Grammar Grammar::build(const GrammarConfig& cfg, const WorldConfig& world) {
  if (cfg.max_question_length < 2)
    throw ConfigError("grammar.max_question_length", "must be >= 2");
  Grammar g;
  g.max_question_length_ = cfg.max_question_length;
  g.nodes_.emplace_back();

  struct Pending {
    Predicate pred;
    std::vector<std::string> words;
  };
  std::vector<Pending> pending;
  auto expand = [&](const Template& t, const std::string& word,
                    Predicate pred) {
    if (word == Vocabulary::kEndToken ||
        word == Vocabulary::kQuestionMarkToken ||
        word.find_first_of(" \t") != std::string::npos)
      throw GrammarError("'" + word + "' cannot be used as a question word");
    auto words = t.words;
    words[t.slot] = word;
    pending.push_back({pred, std::move(words)});
  };

  const Template cat = parse_template(cfg.category_template, "{category}",
                                      "grammar.category_template");
  if (!cat.words.empty())
    for (std::size_t c = 0; c < world.categories.size(); ++c)
      expand(cat, world.categories[c],
             {PredicateKind::kCategory, -1, static_cast<int>(c)});

  const Template attr = parse_template(cfg.attribute_template, "{value}",
                                       "grammar.attribute_template");
  if (!attr.words.empty())
    for (std::size_t a = 0; a < world.attributes.size(); ++a)
      for (std::size_t v = 0; v < world.attributes[a].values.size(); ++v)
        expand(attr, world.attributes[a].values[v],
               {PredicateKind::kAttribute, static_cast<int>(a),
                static_cast<int>(v)});

  const Template spatial = parse_template(cfg.spatial_template, "{region}",
                                          "grammar.spatial_template");
  if (!spatial.words.empty())
    for (const auto& name : cfg.regions) {
      Region r;
      if (name == "left") r = Region::kLeft;
      else if (name == "right") r = Region::kRight;
      else if (name == "top") r = Region::kTop;
      else if (name == "bottom") r = Region::kBottom;
      else
        throw ConfigError("grammar.regions", "unknown region '" + name +
                                                 "' (left|right|top|bottom)");
      expand(spatial, name,
             {PredicateKind::kSpatial, -1, static_cast<int>(r)});
    }

  if (pending.empty()) throw ConfigError("grammar", "no question templates");

  for (auto& p : pending) {
    if (static_cast<int>(p.words.size()) > cfg.max_question_length)
      throw ConfigError("grammar.max_question_length",
                        "question '" + p.words.front() + " ...' has " +
                            std::to_string(p.words.size()) + " tokens");
    std::vector<int> tokens;
    for (const auto& w : p.words) tokens.push_back(g.vocab_.add(w));
    const int id = static_cast<int>(g.predicates_.size());
    g.predicates_.push_back(p.pred);
    g.predicate_tokens_.push_back(tokens);
    g.add_path(tokens, id);
  }
  // A question word must never double as a completed question: every leaf
  // is entered through "?" and "?" never has children.
  for (const auto& n : g.nodes_)
    if (n.predicate >= 0 && !n.child_tokens.empty())
      throw GrammarError("a complete question is a prefix of another");
  return g;
}

int Grammar::child(int node, int token) const {
  const auto& n = nodes_.at(node);
  auto it = std::lower_bound(n.child_tokens.begin(), n.child_tokens.end(),
                             token);
  if (it == n.child_tokens.end() || *it != token) return -1;
  return n.child_nodes[it - n.child_tokens.begin()];
}

int Grammar::walk(std::span<const int> prefix) const {
  int node = kRoot;
  for (int tok : prefix) {
    node = child(node, tok);
    if (node < 0)
      throw GrammarError("'" + render(prefix) + "' is not a question prefix");
  }
  return node;
}

int Grammar::parse(std::span<const int> question) const {
  const int node = walk(question);
  if (nodes_[node].predicate < 0)
    throw GrammarError("'" + render(question) + "' is not a complete question");
  return nodes_[node].predicate;
}

std::vector<int> Grammar::tokenize(std::string_view text) const {
  std::vector<int> out;
  for (const auto& w : split_words(text)) {
    const int t = vocab_.index(w);
    if (t < 0) throw GrammarError("unknown token '" + w + "'");
    out.push_back(t);
  }
  return out;
}

std::string Grammar::render(std::span<const int> tokens) const {
  std::string s;
  for (int t : tokens) {
    if (!s.empty()) s += ' ';
    s += (t >= 0 && t < vocab_.size()) ? vocab_.token(t) : "<unk>";
  }
  return s;
}

std::uint64_t Grammar::hash() const {
  std::uint64_t h = fnv1a("vqg-grammar-v1");
  for (const auto& t : vocab_.tokens()) h = fnv1a(t + '\n', h);
  for (std::size_t p = 0; p < predicates_.size(); ++p) {
    const auto& pr = predicates_[p];
    h = fnv1a(std::to_string(static_cast<int>(pr.kind)) + ':' +
                  std::to_string(pr.attribute) + ':' +
                  std::to_string(pr.value) + '=' +
                  render(predicate_tokens_[p]) + '\n',
              h);
  }
  return fnv1a(std::to_string(max_question_length_), h);
}

}  // namespace vqg
