#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "spanfill/tagging.hpp"

namespace spanfill {

/// CRF parameters emitted for one token position.
/// `transitions(to, from)` scores the move from this position's tag to the next one's;
/// the block at the final position is never used.
struct StepPotentials {
  Eigen::Matrix4d transitions = Eigen::Matrix4d::Zero();
  Eigen::Vector4d unary = Eigen::Vector4d::Zero();
};

using Potentials = std::vector<StepPotentials>;

/// Unnormalized log score of one tag sequence.
double path_score(std::span<const StepPotentials> potentials, const TagSequence& tags);

/// log of the sum of exp(path_score) over all 4^T sequences (forward recursion).
double log_partition(std::span<const StepPotentials> potentials);

struct Marginals {
  std::vector<Eigen::Vector4d> unary;     // p(y_t = k), T entries
  std::vector<Eigen::Matrix4d> pairwise;  // p(y_t = from, y_{t+1} = to) at (to, from), T - 1 entries
  double log_partition = 0.0;
};

Marginals marginals(std::span<const StepPotentials> potentials);

struct NllResult {
  double loss = 0.0;
  Potentials gradients;  // d loss / d potentials, same shape as the input
};

/// Negative log-likelihood of `gold` under the unconstrained CRF, with gradients
/// marginal - indicator for every unary and transition entry.
NllResult nll_and_gradients(std::span<const StepPotentials> potentials, const TagSequence& gold);

/// Highest-scoring sequence, restricted to `mask` when given. Ties go to the lowest tag index.
TagSequence viterbi(std::span<const StepPotentials> potentials, const TransitionMask* mask = nullptr);

/// exp(path_score - log_partition).
double sequence_probability(std::span<const StepPotentials> potentials, const TagSequence& tags);

}  // namespace spanfill
