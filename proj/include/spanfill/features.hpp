#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "spanfill/tokenizer.hpp"

namespace spanfill {

inline constexpr int kFeatureDim = 5;
inline constexpr std::size_t kLengthClamp = 20;

struct TokenFeatures {
  bool is_alphanumeric = false;
  bool is_numeric = false;
  bool is_word_start = false;
  std::size_t char_length = 0;
  bool slot_requested = false;

  friend bool operator==(const TokenFeatures&, const TokenFeatures&) = default;
};

/// A token is alphanumeric (numeric) when every character of its surface is a letter or
/// digit (a digit).
std::vector<TokenFeatures> featurize(const TokenSequence& tokens, bool slot_requested);

/// [alnum, numeric, word_start, min(len, 20) / 20, requested]
Eigen::Matrix<double, kFeatureDim, 1> feature_vector(const TokenFeatures& f);

/// Feature vectors stacked column-wise: kFeatureDim x T.
Eigen::MatrixXd feature_matrix(const std::vector<TokenFeatures>& features);

}  // namespace spanfill
