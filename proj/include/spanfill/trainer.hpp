#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spanfill/crf.hpp"
#include "spanfill/data_model.hpp"
#include "spanfill/embeddings.hpp"
#include "spanfill/encoder.hpp"
#include "spanfill/eval.hpp"
#include "spanfill/tagging.hpp"
#include "spanfill/tokenizer.hpp"

namespace spanfill {

enum class DecodeMask { grammar, none };

DecodeMask parse_decode_mask(const std::string& name);
std::string to_string(DecodeMask mask);

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;  // epochs without a dev F1 gain before stopping
  std::uint64_t seed = 1;
  double momentum = 0.0;      // 0 = plain SGD

  void validate() const;
};

/// Everything the encoder needs for one (utterance, slot) pair.
struct Example {
  std::string id;
  TokenSequence tokens;
  std::vector<int> ids;
  Eigen::MatrixXd features;  // kFeatureDim x T
  TagSequence gold;
  std::optional<CharSpan> gold_span;  // original character span, not the token cover
};

Example make_training_example(const Utterance& utterance, const std::string& slot, const Vocabulary& vocab);

/// Trained model for one slot.
class SlotExtractor {
 public:
  SlotExtractor(std::string slot, std::shared_ptr<const Vocabulary> vocab, EmbeddingProvider embeddings,
                EncoderConfig config, EncoderWeights<double> weights, DecodeMask mask = DecodeMask::grammar);

  const std::string& slot() const { return slot_; }
  const Vocabulary& vocabulary() const { return *vocab_; }
  std::shared_ptr<const Vocabulary> shared_vocabulary() const { return vocab_; }
  const EmbeddingProvider& embeddings() const { return embeddings_; }
  EmbeddingProvider& embeddings() { return embeddings_; }
  const EncoderConfig& config() const { return config_; }
  const EncoderWeights<double>& weights() const { return weights_; }
  EncoderWeights<double>& weights() { return weights_; }
  DecodeMask decode_mask() const { return mask_; }
  void set_decode_mask(DecodeMask mask) { mask_ = mask; }

  /// Inference-mode CRF potentials (no dropout).
  Potentials potentials(const Example& example) const;

  SpanPrediction predict(const Example& example) const;
  SpanPrediction predict(const Utterance& utterance) const;

  /// JSON container with config, slot metadata and every tensor; `vocabulary_file` is
  /// recorded relative to the checkpoint's directory.
  void save(const std::filesystem::path& checkpoint_file, const std::filesystem::path& vocabulary_file) const;

  /// Fails when tensors disagree with the stored config or with `expected` when given.
  static SlotExtractor load(const std::filesystem::path& checkpoint_file,
                            std::shared_ptr<const PrecomputedEmbeddings> precomputed = nullptr,
                            const EncoderConfig* expected = nullptr);

 private:
  std::string slot_;
  std::shared_ptr<const Vocabulary> vocab_;
  EmbeddingProvider embeddings_;
  EncoderConfig config_;
  EncoderWeights<double> weights_;
  DecodeMask mask_;
};

/// Mean NLL of `examples` and its gradient w.r.t. the encoder weights and, for a
/// trainable table, the embedding rows.
struct BatchGradient {
  double loss = 0.0;
  EncoderWeights<double> weights;
  Eigen::MatrixXd embedding;  // vocab x dim; empty for frozen embeddings
};

BatchGradient batch_gradient(const SlotExtractor& model, std::span<const Example* const> examples, bool training,
                             std::uint64_t seed);

struct EpochLog {
  std::size_t epoch = 0;
  double train_nll = 0.0;
  double dev_f1 = 0.0;
};

struct TrainResult {
  SlotExtractor model;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;        // 0 = the initialized model was kept
  std::size_t misaligned_spans = 0;  // gold spans that had to be widened to token boundaries
};

/// Stable seed for a slot name, used to give each slot its own weight initialization.
std::uint64_t slot_seed(std::uint64_t run_seed, const std::string& slot);

/// Fresh extractor: random encoder weights and, when `embeddings` is empty, a new
/// trainable table sized to the vocabulary.
SlotExtractor init_extractor(const std::string& slot, std::shared_ptr<const Vocabulary> vocab,
                             const EncoderConfig& config, std::uint64_t seed,
                             std::shared_ptr<const PrecomputedEmbeddings> precomputed = nullptr);

/// Minibatch SGD on mean NLL with early stopping on dev span F1. Returns the best-dev model.
TrainResult train_slot(const Dataset& dataset, SlotExtractor initial, const TrainConfig& config);

void write_training_log(const std::filesystem::path& file, const std::vector<EpochLog>& log);

/// A fraction num/den in (0, 1].
struct Fraction {
  std::uint64_t numerator = 1;
  std::uint64_t denominator = 1;

  /// Accepts "1", "1/16", ...
  static Fraction parse(const std::string& text);
  std::string to_string() const;
  double value() const { return static_cast<double>(numerator) / static_cast<double>(denominator); }
  void validate() const;
};

/// floor(n * fraction), but at least one example when n > 0.
std::size_t fraction_size(std::size_t n, Fraction fraction);

/// Uniform sample of the train split without replacement; dev untouched. Samples for the
/// same seed are nested: a smaller fraction is a subset of a larger one.
Dataset sample_fraction(const Dataset& dataset, Fraction fraction, std::uint64_t seed);

}  // namespace spanfill
