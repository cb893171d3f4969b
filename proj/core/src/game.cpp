#include "vqg/game.hpp"

#include "vqg/error.hpp"
#include "vqg/rewards.hpp"

namespace vqg {

GameEnv::GameEnv(const Grammar& grammar, const Scene& scene, int target_id,
                 const OracleConfig& oracle, int j_max,
                 std::uint64_t oracle_seed)
    : grammar_(&grammar),
      scene_(&scene),
      target_(target_id),
      oracle_(oracle),
      oracle_rng_(derive_seed(oracle_seed, "oracle")),
      truths_(std::make_shared<const std::vector<Answer>>(
          answer_table(grammar, scene))) {
  if (target_id < 0 || target_id >= scene.size())
    throw Error("GameEnv: target id out of range");
  if (j_max < 1) throw Error("GameEnv: j_max must be >= 1");
  state_.scene = scene_;
  state_.truths = *truths_;
  state_.posterior = init_posterior(scene);
  state_.j_max = j_max;
}

Transition GameEnv::step(int token) {
  if (finished_) throw ConflictError("game already ended");
  const Mask mask = legal_tokens(*grammar_, node_);
  if (token < 0 || token >= static_cast<int>(mask.size()) || !mask[token])
    throw GrammarError("token '" +
                       (token >= 0 && token < grammar_->vocab().size()
                            ? grammar_->vocab().token(token)
                            : std::to_string(token)) +
                       "' is illegal after '" +
                       grammar_->render(state_.prefix) + "'");
  const int t = steps_++;
  state_.last_token = token;

  if (token == Vocabulary::kEnd) {
    finished_ = true;
    return Transition::kEnded;
  }
  state_.prefix.push_back(token);
  if (token != Vocabulary::kQuestionMark) {
    node_ = grammar_->child(node_, token);
    return Transition::kAppend;
  }

  const int pred = grammar_->parse(state_.prefix);
  const int n = scene_->size();
  const std::span<const Answer> truths(truths_->data() + pred * n, n);
  const Answer a =
      answer(grammar_->predicate(pred), scene_->objects[target_], oracle_,
             oracle_rng_);
  state_.posterior =
      update_posterior(state_.posterior, truths, a, oracle_.epsilon);

  RoundRecord rec;
  rec.question = state_.prefix;
  rec.predicate = pred;
  rec.answer = a;
  rec.posterior = state_.posterior.probs;
  rec.p_target = state_.posterior.probs[target_];
  rec.informative = informative(truths);
  rec.end_step = t;
  rec.inconsistent = state_.posterior.inconsistent;
  rounds_.push_back(std::move(rec));

  state_.history.push_back({std::move(state_.prefix), pred, a});
  state_.prefix.clear();
  node_ = Grammar::kRoot;
  if (rounds_used() >= state_.j_max) {
    finished_ = true;
    forced_ = true;
  }
  return Transition::kAnswered;
}

PolicyDialog::PolicyDialog(const Policy& policy, const FeatureMap& fmap,
                           const Scene& scene, int target_id,
                           const OracleConfig& oracle, int j_max,
                           DecodeMode mode, std::uint64_t seed)
    : policy_(&policy),
      fmap_(&fmap),
      mode_(mode),
      rng_(derive_seed(seed, "decode")),
      env_(fmap.grammar(), scene, target_id, oracle, j_max,
           derive_seed(seed, "env")) {}

const RoundRecord* PolicyDialog::step() {
  if (env_.finished()) throw ConflictError("dialog already ended");
  const auto q = decode_question(*policy_, *fmap_, env_.state(), mode_, rng_);
  for (const int tok : q.tokens) env_.step(tok);
  if (q.tokens.back() == Vocabulary::kEnd) return nullptr;
  return &env_.rounds().back();
}

void PolicyDialog::run() {
  while (!env_.finished()) step();
}

}  // namespace vqg
