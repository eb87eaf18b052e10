// Brute-force reference computations for the CRF and finite-difference helpers.
// Everything here works straight from the definition of the path score and shares no
// code with the forward/backward or Viterbi implementations.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "spanfill/crf.hpp"

namespace oracle {

using spanfill::StepPotentials;

/// All 4^T sequences as integer vectors, in lexicographic order.
inline std::vector<std::vector<int>> all_sequences(int T) {
  std::vector<std::vector<int>> out;
  std::vector<int> seq(static_cast<std::size_t>(T), 0);
  while (true) {
    out.push_back(seq);
    int i = T - 1;
    while (i >= 0 && seq[static_cast<std::size_t>(i)] == 3) seq[static_cast<std::size_t>(i--)] = 0;
    if (i < 0) break;
    ++seq[static_cast<std::size_t>(i)];
  }
  return out;
}

inline double score(const std::vector<StepPotentials>& p, const std::vector<int>& y) {
  double s = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) s += p[t].unary(y[t]);
  for (std::size_t t = 0; t + 1 < y.size(); ++t) s += p[t].transitions(y[t + 1], y[t]);
  return s;
}

struct Enumeration {
  double log_partition = 0.0;
  std::vector<Eigen::Vector4d> unary;
  std::vector<Eigen::Matrix4d> pairwise;  // (to, from)
  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<int>> argmax;   // every maximizer (within 1e-12)
};

inline Enumeration enumerate(const std::vector<StepPotentials>& p) {
  const int T = static_cast<int>(p.size());
  const auto seqs = all_sequences(T);
  std::vector<double> scores;
  scores.reserve(seqs.size());
  double max_score = -std::numeric_limits<double>::infinity();
  for (const auto& y : seqs) {
    scores.push_back(score(p, y));
    max_score = std::max(max_score, scores.back());
  }
  double z = 0.0;
  for (double s : scores) z += std::exp(s - max_score);
  Enumeration e;
  e.log_partition = max_score + std::log(z);
  e.unary.assign(static_cast<std::size_t>(T), Eigen::Vector4d::Zero());
  e.pairwise.assign(static_cast<std::size_t>(std::max(T - 1, 0)), Eigen::Matrix4d::Zero());
  e.best_score = max_score;
  for (std::size_t k = 0; k < seqs.size(); ++k) {
    const double prob = std::exp(scores[k] - e.log_partition);
    const auto& y = seqs[k];
    for (int t = 0; t < T; ++t) e.unary[static_cast<std::size_t>(t)](y[static_cast<std::size_t>(t)]) += prob;
    for (int t = 0; t + 1 < T; ++t) {
      e.pairwise[static_cast<std::size_t>(t)](y[static_cast<std::size_t>(t) + 1], y[static_cast<std::size_t>(t)]) += prob;
    }
    if (scores[k] >= max_score - 1e-12) e.argmax.push_back(y);
  }
  return e;
}

/// Potentials with every entry ~ N(0, sigma^2).
inline std::vector<StepPotentials> random_potentials(std::mt19937_64& rng, int T, double sigma) {
  std::normal_distribution<double> normal(0.0, sigma);
  std::vector<StepPotentials> p(static_cast<std::size_t>(T));
  for (auto& step : p) {
    for (int i = 0; i < 4; ++i) {
      step.unary(i) = normal(rng);
      for (int j = 0; j < 4; ++j) step.transitions(i, j) = normal(rng);
    }
  }
  return p;
}

/// Central difference of f with respect to x, step h.
inline double central_difference(const std::function<double()>& f, double& x, double h = 1e-5) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

/// |a - b| / max(|a|, |b|, floor): relative error that stays meaningful near zero.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
