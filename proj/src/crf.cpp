#include "spanfill/crf.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "spanfill/error.hpp"

namespace spanfill {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const Eigen::Vector4d& v) {
  const double m = v.maxCoeff();
  if (m == kNegInf) return kNegInf;
  return m + std::log((v.array() - m).exp().sum());
}

void require_nonempty(std::span<const StepPotentials> potentials) {
  if (potentials.empty()) throw ShapeError("CRF over an empty sequence");
}

// alpha[t](k): log-sum of scores of all prefixes ending in tag k at t.
std::vector<Eigen::Vector4d> forward(std::span<const StepPotentials> p) {
  std::vector<Eigen::Vector4d> alpha(p.size());
  alpha[0] = p[0].unary;
  for (std::size_t t = 1; t < p.size(); ++t) {
    for (int to = 0; to < kNumTags; ++to) {
      const Eigen::Vector4d incoming = alpha[t - 1] + p[t - 1].transitions.row(to).transpose();
      alpha[t](to) = p[t].unary(to) + log_sum_exp(incoming);
    }
  }
  return alpha;
}

// beta[t](k): log-sum of scores of all suffixes after position t given tag k at t.
std::vector<Eigen::Vector4d> backward(std::span<const StepPotentials> p) {
  const std::size_t T = p.size();
  std::vector<Eigen::Vector4d> beta(T);
  beta[T - 1].setZero();
  for (std::size_t t = T - 1; t-- > 0;) {
    const Eigen::Vector4d next = p[t + 1].unary + beta[t + 1];
    for (int from = 0; from < kNumTags; ++from) {
      beta[t](from) = log_sum_exp(p[t].transitions.col(from) + next);
    }
  }
  return beta;
}

}  // namespace

double path_score(std::span<const StepPotentials> potentials, const TagSequence& tags) {
  if (tags.size() != potentials.size()) {
    throw ShapeError("tag sequence length " + std::to_string(tags.size()) + " != potentials length " +
                     std::to_string(potentials.size()));
  }
  double score = 0.0;
  for (std::size_t t = 0; t < tags.size(); ++t) {
    score += potentials[t].unary(index(tags[t]));
    if (t + 1 < tags.size()) score += potentials[t].transitions(index(tags[t + 1]), index(tags[t]));
  }
  return score;
}

double log_partition(std::span<const StepPotentials> potentials) {
  require_nonempty(potentials);
  return log_sum_exp(forward(potentials).back());
}

Marginals marginals(std::span<const StepPotentials> potentials) {
  require_nonempty(potentials);
  const std::size_t T = potentials.size();
  const auto alpha = forward(potentials);
  const auto beta = backward(potentials);
  Marginals m;
  m.log_partition = log_sum_exp(alpha.back());
  m.unary.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    m.unary[t] = (alpha[t] + beta[t]).array() - m.log_partition;
    m.unary[t] = m.unary[t].array().exp();
  }
  m.pairwise.resize(T - 1);
  for (std::size_t t = 0; t + 1 < T; ++t) {
    const Eigen::Vector4d next = potentials[t + 1].unary + beta[t + 1];
    Eigen::Matrix4d& pw = m.pairwise[t];
    for (int to = 0; to < kNumTags; ++to) {
      for (int from = 0; from < kNumTags; ++from) {
        pw(to, from) = std::exp(alpha[t](from) + potentials[t].transitions(to, from) + next(to) - m.log_partition);
      }
    }
  }
  return m;
}

NllResult nll_and_gradients(std::span<const StepPotentials> potentials, const TagSequence& gold) {
  if (gold.size() != potentials.size()) {
    throw ShapeError("gold length " + std::to_string(gold.size()) + " != potentials length " +
                     std::to_string(potentials.size()));
  }
  require_nonempty(potentials);
  const Marginals m = marginals(potentials);
  NllResult result;
  result.loss = m.log_partition - path_score(potentials, gold);
  result.gradients.resize(potentials.size());
  for (std::size_t t = 0; t < potentials.size(); ++t) {
    auto& g = result.gradients[t];
    g.unary = m.unary[t];
    g.unary(index(gold[t])) -= 1.0;
    if (t + 1 < potentials.size()) {
      g.transitions = m.pairwise[t];
      g.transitions(index(gold[t + 1]), index(gold[t])) -= 1.0;
    }
  }
  return result;
}

TagSequence viterbi(std::span<const StepPotentials> potentials, const TransitionMask* mask) {
  require_nonempty(potentials);
  const std::size_t T = potentials.size();
  std::vector<std::array<int, kNumTags>> backptr(T);
  Eigen::Vector4d delta = potentials[0].unary;
  if (mask != nullptr) {
    for (int k = 0; k < kNumTags; ++k) {
      if (!mask->start[k]) delta(k) = kNegInf;
    }
  }
  for (std::size_t t = 1; t < T; ++t) {
    Eigen::Vector4d next;
    for (int to = 0; to < kNumTags; ++to) {
      double best = kNegInf;
      int arg = 0;
      for (int from = 0; from < kNumTags; ++from) {
        if (mask != nullptr && !mask->allowed[from][to]) continue;
        const double s = delta(from) + potentials[t - 1].transitions(to, from);
        if (s > best) {
          best = s;
          arg = from;
        }
      }
      next(to) = best + potentials[t].unary(to);
      backptr[t][to] = arg;
    }
    delta = next;
  }
  double best = kNegInf;
  int last = 0;
  for (int k = 0; k < kNumTags; ++k) {
    if (mask != nullptr && !mask->end[k]) continue;
    if (delta(k) > best) {
      best = delta(k);
      last = k;
    }
  }
  TagSequence tags(T);
  tags[T - 1] = tag_from_index(last);
  for (std::size_t t = T - 1; t > 0; --t) tags[t - 1] = tag_from_index(backptr[t][index(tags[t])]);
  return tags;
}

double sequence_probability(std::span<const StepPotentials> potentials, const TagSequence& tags) {
  return std::exp(path_score(potentials, tags) - log_partition(potentials));
}

}  // namespace spanfill
