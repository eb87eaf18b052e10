#include "spanfill/features.hpp"

#include <algorithm>

#include "spanfill/utf8.hpp"

namespace spanfill {

std::vector<TokenFeatures> featurize(const TokenSequence& tokens, bool slot_requested) {
  std::vector<TokenFeatures> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    const std::u32string surface = utf8::decode(t.surface());
    TokenFeatures f;
    f.is_alphanumeric = !surface.empty() && std::all_of(surface.begin(), surface.end(), chars::is_alnum);
    f.is_numeric = !surface.empty() && std::all_of(surface.begin(), surface.end(), chars::is_digit);
    f.is_word_start = t.word_start;
    f.char_length = t.end - t.start;
    f.slot_requested = slot_requested;
    out.push_back(f);
  }
  return out;
}

Eigen::Matrix<double, kFeatureDim, 1> feature_vector(const TokenFeatures& f) {
  Eigen::Matrix<double, kFeatureDim, 1> v;
  v << (f.is_alphanumeric ? 1.0 : 0.0), (f.is_numeric ? 1.0 : 0.0), (f.is_word_start ? 1.0 : 0.0),
      static_cast<double>(std::min(f.char_length, kLengthClamp)) / static_cast<double>(kLengthClamp),
      (f.slot_requested ? 1.0 : 0.0);
  return v;
}

Eigen::MatrixXd feature_matrix(const std::vector<TokenFeatures>& features) {
  Eigen::MatrixXd m(kFeatureDim, static_cast<Eigen::Index>(features.size()));
  for (std::size_t t = 0; t < features.size(); ++t) m.col(static_cast<Eigen::Index>(t)) = feature_vector(features[t]);
  return m;
}

}  // namespace spanfill
