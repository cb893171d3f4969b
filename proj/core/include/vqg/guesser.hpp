#pragma once

#include <span>
#include <vector>

#include "vqg/grammar.hpp"
#include "vqg/oracle.hpp"
#include "vqg/world.hpp"

namespace vqg {

/// Exact Bayes filter over scene objects. Shares the Oracle's corruption model:
/// P(observed | object) = 1 - eps when the object's truth matches, eps/2
/// otherwise.
struct Posterior {
  std::vector<double> probs;
  /// Set when an update had zero evidence everywhere (eps = 0 and an answer no
  /// object can produce) and the filter fell back to uniform.
  bool inconsistent = false;

  int size() const { return static_cast<int>(probs.size()); }
};

Posterior init_posterior(int num_objects);
inline Posterior init_posterior(const Scene& scene) {
  return init_posterior(scene.size());
}

/// `truths[n]` is the noiseless answer of object n to the question asked.
Posterior update_posterior(const Posterior& post,
                           std::span<const Answer> truths, Answer observed,
                           double epsilon);
Posterior update_posterior(const Posterior& post, const Predicate& pred,
                           Answer observed, const Scene& scene, double epsilon);
Posterior update_posterior(const Posterior& post, const Grammar& grammar,
                           std::span<const int> question, Answer observed,
                           const Scene& scene, double epsilon);

/// Argmax; ties go to the lowest object id.
int guess(const Posterior& post);

double target_probability(const Posterior& post, int target_id);

/// Shannon entropy in nats.
double entropy(std::span<const double> probs);

}  // namespace vqg
