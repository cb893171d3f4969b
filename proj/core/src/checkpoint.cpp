#include "vqg/checkpoint.hpp"

#include <cereal/archives/portable_binary.hpp>
#include <cereal/types/string.hpp>
#include <cereal/types/vector.hpp>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "vqg/error.hpp"

namespace vqg {

namespace {

constexpr char kMagic[] = "VQGCKPT";

template <class Archive>
void save_state(Archive& ar, const TrainingState& s) {
  const auto p = s.policy.params();
  const auto b = s.baseline.params();
  ar(s.policy.num_tokens(), s.policy.feature_dim(),
     std::vector<double>(p.begin(), p.end()));
  ar(s.baseline.feature_dim(), s.baseline.hidden(),
     std::vector<double>(b.begin(), b.end()));
  ar(s.epoch, s.updates, s.rng_state, s.targets.used);
}

template <class Archive>
void load_state(Archive& ar, TrainingState& s) {
  int v = 0, d = 0, h = 0;
  std::vector<double> p, b;
  ar(v, d, p);
  s.policy = Policy(v, d);
  if (p.size() != s.policy.num_params())
    throw Error("checkpoint: policy parameter count mismatch");
  std::copy(p.begin(), p.end(), s.policy.params().begin());
  ar(d, h, b);
  s.baseline = BaselineNet::constant(d, h, 0.0);
  if (b.size() != s.baseline.num_params())
    throw Error("checkpoint: baseline parameter count mismatch");
  std::copy(b.begin(), b.end(), s.baseline.params().begin());
  ar(s.epoch, s.updates, s.rng_state, s.targets.used);
}

}  // namespace

Checkpoint make_checkpoint(const ExperimentConfig& cfg, const Grammar& grammar,
                           const FeatureMap& fmap, const TrainingState& state,
                           std::string label, std::uint64_t seed) {
  Checkpoint c;
  c.code_version = code_version();
  c.config_hash = config_hash(cfg);
  c.config_text = serialize_config(cfg);
  c.vocab = grammar.vocab().tokens();
  c.grammar_hash = grammar.hash();
  c.features = fmap.config();
  c.feature_dim = fmap.dim();
  c.state = state;
  c.lr = cfg.trainer.lr;
  c.label = std::move(label);
  c.seed = seed;
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint: " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    cereal::PortableBinaryOutputArchive ar(out);
    ar(c.format, c.code_version, c.config_hash,
       c.config_text, c.vocab, c.grammar_hash, c.features.answer_entropy,
       c.features.lookahead, c.feature_dim);
    save_state(ar, c.state);
    ar(c.lr, c.label, c.seed);
    if (!out) throw Error("cannot write checkpoint: " + tmp.string());
  }
  fs::rename(tmp, target);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("checkpoint file not found: " + path);
  Checkpoint c;
  char magic[sizeof kMagic] = {};
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw Error("not a checkpoint file: " + path);
  try {
    cereal::PortableBinaryInputArchive ar(in);
    ar(c.format);
    if (c.format != kCheckpointFormat)
      throw Error("unsupported checkpoint format " + std::to_string(c.format));
    ar(c.code_version, c.config_hash, c.config_text, c.vocab, c.grammar_hash,
       c.features.answer_entropy, c.features.lookahead, c.feature_dim);
    load_state(ar, c.state);
    ar(c.lr, c.label, c.seed);
  } catch (const cereal::Exception& e) {
    throw Error("corrupt checkpoint " + path + ": " + e.what());
  } catch (const std::bad_alloc&) {
    throw Error("corrupt checkpoint " + path + ": implausible length field");
  } catch (const std::length_error&) {
    throw Error("corrupt checkpoint " + path + ": implausible length field");
  }
  return c;
}

Agent::Agent(ExperimentConfig cfg, Grammar g, Policy p, TargetLog t,
             std::string l, std::uint64_t s)
    : config(std::move(cfg)),
      grammar(std::move(g)),
      fmap(grammar, config.features),
      policy(std::move(p)),
      targets(std::move(t)),
      label(std::move(l)),
      seed(s) {}

std::shared_ptr<const Agent> make_agent(const Checkpoint& c) {
  ExperimentConfig cfg = parse_config(c.config_text);
  Grammar g = Grammar::build(cfg.grammar, cfg.world);
  if (g.vocab().tokens() != c.vocab || g.hash() != c.grammar_hash)
    throw Error("checkpoint grammar does not match its configuration");
  if (!(cfg.features == c.features))
    throw Error("checkpoint feature switches do not match its configuration");
  auto agent = std::make_shared<Agent>(std::move(cfg), std::move(g),
                                       c.state.policy, c.state.targets, c.label,
                                       c.seed);
  if (agent->fmap.dim() != c.feature_dim ||
      c.state.policy.feature_dim() != c.feature_dim ||
      c.state.policy.num_tokens() != agent->grammar.vocab().size())
    throw Error("checkpoint policy shape does not match its configuration");
  return agent;
}

std::shared_ptr<const Agent> load_agent(const std::string& path) {
  return make_agent(load_checkpoint(path));
}

}  // namespace vqg
