#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spanfill/crf.hpp"
#include "spanfill/error.hpp"
#include "spanfill/features.hpp"
#include "spanfill/random.hpp"

namespace spanfill {

/// 16 transition scores (row-major [to][from]) followed by 4 unary potentials.
inline constexpr int kPotentialsPerStep = kNumTags * kNumTags + kNumTags;

struct EncoderConfig {
  int embedding_dim = 32;
  std::vector<int> channels{100, 100, 100};
  std::vector<int> widths{8, 4, 1};
  double keep_embedding = 0.5;
  double keep_features = 0.5;

  int input_dim() const { return embedding_dim + kFeatureDim; }

  /// From-scratch subword table.
  static EncoderConfig vanilla() { return {}; }
  /// Frozen pretrained vectors of width `dim` (512 for ConveRT-style, 768 for BERT-style exports).
  static EncoderConfig pretrained(int dim) { return {dim, {128, 64}, {1, 5}, 0.5, 0.6}; }

  void validate() const {
    if (embedding_dim <= 0) throw ShapeError("embedding_dim must be positive");
    if (channels.empty() || channels.size() != widths.size()) {
      throw ShapeError("conv channels and widths must be non-empty lists of equal length");
    }
    for (std::size_t i = 0; i < channels.size(); ++i) {
      if (channels[i] <= 0 || widths[i] <= 0) throw ShapeError("conv channels and widths must be positive");
    }
    if (!(keep_embedding > 0.0 && keep_embedding <= 1.0) || !(keep_features > 0.0 && keep_features <= 1.0)) {
      throw ShapeError("keep probabilities must lie in (0, 1]");
    }
  }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Same-length 1D convolution. `weight` is out x (in * width); columns [j*in, (j+1)*in)
/// hold tap j, which reads position t - (width-1)/2 + j.
template <typename Scalar>
struct ConvLayer {
  MatrixX<Scalar> weight;
  VectorX<Scalar> bias;
  int width = 1;

  int in_channels() const { return static_cast<int>(weight.cols()) / width; }
  int out_channels() const { return static_cast<int>(weight.rows()); }
};

template <typename Scalar>
struct EncoderWeights {
  std::vector<ConvLayer<Scalar>> convs;
  MatrixX<Scalar> head_weight;  // kPotentialsPerStep x last channels
  VectorX<Scalar> head_bias;

  static EncoderWeights zeros(const EncoderConfig& config) {
    config.validate();
    EncoderWeights w;
    int in = config.input_dim();
    for (std::size_t i = 0; i < config.channels.size(); ++i) {
      ConvLayer<Scalar> layer;
      layer.width = config.widths[i];
      layer.weight = MatrixX<Scalar>::Zero(config.channels[i], in * config.widths[i]);
      layer.bias = VectorX<Scalar>::Zero(config.channels[i]);
      w.convs.push_back(std::move(layer));
      in = config.channels[i];
    }
    w.head_weight = MatrixX<Scalar>::Zero(kPotentialsPerStep, in);
    w.head_bias = VectorX<Scalar>::Zero(kPotentialsPerStep);
    return w;
  }

  /// Biases zero. Conv weights uniform in +-sqrt(6/fan_in) (He), which keeps activation
  /// variance roughly constant through the SiLU stack; head weights in +-1/sqrt(fan_in).
  static EncoderWeights random(const EncoderConfig& config, std::uint64_t seed) {
    EncoderWeights w = zeros(config);
    SplitMix64 rng(seed);
    auto fill = [&rng](MatrixX<Scalar>& m, double gain) {
      const double scale = std::sqrt(gain / static_cast<double>(m.cols()));
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>(rng.uniform(-scale, scale));
      }
    };
    for (auto& layer : w.convs) fill(layer.weight, 6.0);
    fill(w.head_weight, 1.0);
    return w;
  }

  /// Throws ShapeError unless every tensor matches `config`.
  void check(const EncoderConfig& config) const {
    bool ok = convs.size() == config.channels.size() && convs.size() == config.widths.size();
    Eigen::Index in = config.input_dim();
    for (std::size_t i = 0; ok && i < convs.size(); ++i) {
      ok = convs[i].width == config.widths[i] && convs[i].weight.rows() == config.channels[i] &&
           convs[i].weight.cols() == in * config.widths[i] && convs[i].bias.size() == config.channels[i];
      in = config.channels[i];
    }
    ok = ok && head_weight.rows() == kPotentialsPerStep && head_weight.cols() == in &&
         head_bias.size() == kPotentialsPerStep;
    if (!ok) throw ShapeError("encoder weights do not match the encoder config");
  }

  /// Calls f(name, tensor) for every tensor in a fixed order.
  template <typename F>
  void for_each_tensor(F&& f) {
    for (std::size_t i = 0; i < convs.size(); ++i) {
      f("conv" + std::to_string(i) + ".weight", convs[i].weight);
      f("conv" + std::to_string(i) + ".bias", convs[i].bias);
    }
    f(std::string("head.weight"), head_weight);
    f(std::string("head.bias"), head_bias);
  }

  template <typename F>
  void for_each_tensor(F&& f) const {
    const_cast<EncoderWeights*>(this)->for_each_tensor(
        [&f](const std::string& name, const auto& tensor) { f(name, tensor); });
  }

  /// this += alpha * other
  void axpy(Scalar alpha, const EncoderWeights& other) {
    for (std::size_t i = 0; i < convs.size(); ++i) {
      convs[i].weight += alpha * other.convs[i].weight;
      convs[i].bias += alpha * other.convs[i].bias;
    }
    head_weight += alpha * other.head_weight;
    head_bias += alpha * other.head_bias;
  }

  void set_zero() {
    for_each_tensor([](const std::string&, auto& tensor) { tensor.setZero(); });
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for_each_tensor([&n](const std::string&, const auto& tensor) { n += tensor.size(); });
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    for_each_tensor([&ok](const std::string&, const auto& tensor) { ok = ok && tensor.allFinite(); });
    return ok;
  }
};

/// Intermediate values kept by the forward pass for encode_backward.
template <typename Scalar>
struct EncoderCache {
  std::uint64_t seed = 0;
  bool training = false;
  Eigen::Index length = 0;
  int embedding_dim = 0;
  MatrixX<Scalar> dropout_scale;          // input_dim x T; empty when no dropout was applied
  std::vector<MatrixX<Scalar>> columns;   // unfolded input of each conv layer
  std::vector<MatrixX<Scalar>> pre;       // conv pre-activations
  MatrixX<Scalar> last;                   // input of the head
};

template <typename Scalar>
struct EncoderGradients {
  EncoderWeights<Scalar> weights;
  MatrixX<Scalar> embedded;  // d loss / d embedded, embedding_dim x T
};

namespace detail {

template <typename Scalar>
MatrixX<Scalar> unfold(const MatrixX<Scalar>& x, int width) {
  const Eigen::Index channels = x.rows();
  const Eigen::Index T = x.cols();
  const Eigen::Index left = (width - 1) / 2;
  MatrixX<Scalar> cols = MatrixX<Scalar>::Zero(channels * width, T);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int j = 0; j < width; ++j) {
      const Eigen::Index src = t - left + j;
      if (src >= 0 && src < T) cols.block(j * channels, t, channels, 1) = x.col(src);
    }
  }
  return cols;
}

template <typename Scalar>
MatrixX<Scalar> fold_back(const MatrixX<Scalar>& cols, Eigen::Index channels, int width) {
  const Eigen::Index T = cols.cols();
  const Eigen::Index left = (width - 1) / 2;
  MatrixX<Scalar> x = MatrixX<Scalar>::Zero(channels, T);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int j = 0; j < width; ++j) {
      const Eigen::Index src = t - left + j;
      if (src >= 0 && src < T) x.col(src) += cols.block(j * channels, t, channels, 1);
    }
  }
  return x;
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  return Scalar(1) / (Scalar(1) + std::exp(-z));
}

}  // namespace detail

/// Dropout on [embedded; features], then conv -> SiLU per layer, then a position-wise
/// linear head giving one StepPotentials per token. Dropout is inverted and only active
/// when `training`; the mask is a pure function of `seed`.
template <typename Scalar>
Potentials encode(const EncoderConfig& config, const EncoderWeights<Scalar>& weights, const MatrixX<Scalar>& embedded,
                  const Eigen::MatrixXd& features, bool training, std::uint64_t seed,
                  EncoderCache<Scalar>* cache = nullptr) {
  weights.check(config);
  const Eigen::Index T = embedded.cols();
  if (T < 1) throw ShapeError("encoder input must have at least one token");
  if (embedded.rows() != config.embedding_dim) {
    throw ShapeError("embedding width " + std::to_string(embedded.rows()) + " != configured " +
                     std::to_string(config.embedding_dim));
  }
  if (features.rows() != kFeatureDim || features.cols() != T) throw ShapeError("feature matrix shape mismatch");

  const int d = config.embedding_dim;
  MatrixX<Scalar> x(config.input_dim(), T);
  x.topRows(d) = embedded;
  x.bottomRows(kFeatureDim) = features.cast<Scalar>();

  MatrixX<Scalar> scale;
  if (training && (config.keep_embedding < 1.0 || config.keep_features < 1.0)) {
    SplitMix64 rng(seed);
    scale.resize(x.rows(), T);
    for (Eigen::Index t = 0; t < T; ++t) {
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double keep = r < d ? config.keep_embedding : config.keep_features;
        scale(r, t) = rng.uniform() < keep ? static_cast<Scalar>(1.0 / keep) : Scalar(0);
      }
    }
    x = x.cwiseProduct(scale);
  }

  std::vector<MatrixX<Scalar>> columns;
  std::vector<MatrixX<Scalar>> pre;
  for (const auto& layer : weights.convs) {
    columns.push_back(detail::unfold(x, layer.width));
    MatrixX<Scalar> z = layer.weight * columns.back();
    z.colwise() += layer.bias;
    x = z.unaryExpr([](Scalar v) { return v * detail::sigmoid(v); });
    pre.push_back(std::move(z));
  }

  MatrixX<Scalar> out = weights.head_weight * x;
  out.colwise() += weights.head_bias;

  Potentials potentials(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    auto& p = potentials[static_cast<std::size_t>(t)];
    for (int to = 0; to < kNumTags; ++to) {
      for (int from = 0; from < kNumTags; ++from) p.transitions(to, from) = static_cast<double>(out(to * kNumTags + from, t));
    }
    for (int k = 0; k < kNumTags; ++k) p.unary(k) = static_cast<double>(out(kNumTags * kNumTags + k, t));
  }

  if (cache != nullptr) {
    cache->seed = seed;
    cache->training = training;
    cache->length = T;
    cache->embedding_dim = d;
    cache->dropout_scale = std::move(scale);
    cache->columns = std::move(columns);
    cache->pre = std::move(pre);
    cache->last = std::move(x);
  }
  return potentials;
}

/// Reverse mode of `encode` given d loss / d potentials.
template <typename Scalar>
EncoderGradients<Scalar> encode_backward(const EncoderConfig& config, const EncoderWeights<Scalar>& weights,
                                         const EncoderCache<Scalar>& cache, std::span<const StepPotentials> upstream) {
  weights.check(config);
  if (cache.length == 0 || cache.pre.size() != weights.convs.size() || cache.embedding_dim != config.embedding_dim) {
    throw ShapeError("encoder cache does not come from a forward pass with this config");
  }
  const Eigen::Index T = cache.length;
  if (static_cast<Eigen::Index>(upstream.size()) != T) {
    throw ShapeError("upstream gradient covers " + std::to_string(upstream.size()) + " steps, forward pass had " +
                     std::to_string(T));
  }

  MatrixX<Scalar> d_out(kPotentialsPerStep, T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& g = upstream[static_cast<std::size_t>(t)];
    for (int to = 0; to < kNumTags; ++to) {
      for (int from = 0; from < kNumTags; ++from) d_out(to * kNumTags + from, t) = static_cast<Scalar>(g.transitions(to, from));
    }
    for (int k = 0; k < kNumTags; ++k) d_out(kNumTags * kNumTags + k, t) = static_cast<Scalar>(g.unary(k));
  }

  EncoderGradients<Scalar> grads{EncoderWeights<Scalar>::zeros(config), {}};
  grads.weights.head_weight = d_out * cache.last.transpose();
  grads.weights.head_bias = d_out.rowwise().sum();
  MatrixX<Scalar> dx = weights.head_weight.transpose() * d_out;

  for (std::size_t i = weights.convs.size(); i-- > 0;) {
    const auto& layer = weights.convs[i];
    const MatrixX<Scalar>& z = cache.pre[i];
    const MatrixX<Scalar> dz = dx.cwiseProduct(z.unaryExpr([](Scalar v) {
      const Scalar s = detail::sigmoid(v);
      return s * (Scalar(1) + v * (Scalar(1) - s));
    }));
    grads.weights.convs[i].weight = dz * cache.columns[i].transpose();
    grads.weights.convs[i].bias = dz.rowwise().sum();
    dx = detail::fold_back<Scalar>(layer.weight.transpose() * dz, layer.in_channels(), layer.width);
  }

  if (cache.dropout_scale.size() != 0) dx = dx.cwiseProduct(cache.dropout_scale);
  grads.embedded = dx.topRows(config.embedding_dim);
  return grads;
}

}  // namespace spanfill
