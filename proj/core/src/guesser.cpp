#include "vqg/guesser.hpp"

#include <cmath>

#include "vqg/error.hpp"

namespace vqg {

Posterior init_posterior(int num_objects) {
  if (num_objects < 1) throw Error("init_posterior: no objects");
  return {std::vector<double>(num_objects, 1.0 / num_objects), false};
}

Posterior update_posterior(const Posterior& post,
                           std::span<const Answer> truths, Answer observed,
                           double epsilon) {
  if (truths.size() != post.probs.size())
    throw Error("update_posterior: answer count does not match posterior");
  const double match = 1.0 - epsilon;
  const double miss = epsilon / 2.0;
  Posterior out;
  out.probs.resize(post.probs.size());
  double z = 0.0;
  for (std::size_t n = 0; n < truths.size(); ++n) {
    out.probs[n] = post.probs[n] * (truths[n] == observed ? match : miss);
    z += out.probs[n];
  }
  if (!(z > 0.0)) {
    out = init_posterior(post.size());
    out.inconsistent = true;
    return out;
  }
  for (double& p : out.probs) p /= z;
  return out;
}

Posterior update_posterior(const Posterior& post, const Predicate& pred,
                           Answer observed, const Scene& scene,
                           double epsilon) {
  const auto truths = answer_all(pred, scene);
  return update_posterior(post, truths, observed, epsilon);
}

Posterior update_posterior(const Posterior& post, const Grammar& grammar,
                           std::span<const int> question, Answer observed,
                           const Scene& scene, double epsilon) {
  return update_posterior(post, grammar.predicate(grammar.parse(question)),
                          observed, scene, epsilon);
}

int guess(const Posterior& post) {
  int best = 0;
  for (int n = 1; n < post.size(); ++n)
    if (post.probs[n] > post.probs[best]) best = n;
  return best;
}

double target_probability(const Posterior& post, int target_id) {
  if (target_id < 0 || target_id >= post.size())
    throw Error("target_probability: object id " + std::to_string(target_id) +
                " out of range");
  return post.probs[target_id];
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

}  // namespace vqg
