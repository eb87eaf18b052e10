#include "spanfill/trainer.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "spanfill/error.hpp"
#include "spanfill/random.hpp"

namespace spanfill {

DecodeMask parse_decode_mask(const std::string& name) {
  if (name == "grammar") return DecodeMask::grammar;
  if (name == "none") return DecodeMask::none;
  throw ValidationError("unknown decode mask '" + name + "' (expected grammar or none)");
}

std::string to_string(DecodeMask mask) { return mask == DecodeMask::grammar ? "grammar" : "none"; }

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (patience < 1) throw ValidationError("patience must be at least 1");
  if (momentum < 0.0 || momentum >= 1.0) throw ValidationError("momentum must lie in [0, 1)");
}

Example make_training_example(const Utterance& utterance, const std::string& slot, const Vocabulary& vocab) {
  Example ex;
  ex.id = utterance.id;
  ex.tokens = tokenize(vocab, utterance.text);
  ex.ids = token_ids(ex.tokens);
  ex.features = feature_matrix(featurize(ex.tokens, utterance.requests(slot)));
  ex.gold_span = utterance.span_for(slot);
  ex.gold = span_to_tags(ex.tokens, ex.gold_span, utterance.id);
  return ex;
}

SlotExtractor::SlotExtractor(std::string slot, std::shared_ptr<const Vocabulary> vocab, EmbeddingProvider embeddings,
                             EncoderConfig config, EncoderWeights<double> weights, DecodeMask mask)
    : slot_(std::move(slot)),
      vocab_(std::move(vocab)),
      embeddings_(std::move(embeddings)),
      config_(std::move(config)),
      weights_(std::move(weights)),
      mask_(mask) {
  if (!vocab_) throw ValidationError("slot extractor needs a vocabulary");
  config_.validate();
  weights_.check(config_);
  if (embeddings_.dim() != config_.embedding_dim) {
    throw ShapeError("embedding width " + std::to_string(embeddings_.dim()) + " != encoder embedding_dim " +
                     std::to_string(config_.embedding_dim));
  }
  if (embeddings_.trainable() && embeddings_.table().vocab_size() != vocab_->size()) {
    throw ShapeError("embedding table rows do not match the vocabulary size");
  }
}

Potentials SlotExtractor::potentials(const Example& example) const {
  const Eigen::MatrixXd embedded = embeddings_.embed(example.id, example.ids);
  return encode(config_, weights_, embedded, example.features, false, 0);
}

SpanPrediction SlotExtractor::predict(const Example& example) const {
  SpanPrediction p;
  p.id = example.id;
  p.slot = slot_;
  if (example.tokens.empty()) {
    p.confidence = 1.0;
    return p;
  }
  const Potentials pots = potentials(example);
  const TagSequence tags = viterbi(pots, mask_ == DecodeMask::grammar ? &valid_transitions() : nullptr);
  p.confidence = sequence_probability(pots, tags);
  // Unmasked decoding may produce an ungrammatical sequence; read it as no span.
  if (satisfies_grammar(tags)) p.span = tags_to_span(example.tokens, tags);
  return p;
}

SpanPrediction SlotExtractor::predict(const Utterance& utterance) const {
  Example ex;
  ex.id = utterance.id;
  ex.tokens = tokenize(*vocab_, utterance.text);
  ex.ids = token_ids(ex.tokens);
  ex.features = feature_matrix(featurize(ex.tokens, utterance.requests(slot_)));
  return predict(ex);
}

BatchGradient batch_gradient(const SlotExtractor& model, std::span<const Example* const> examples, bool training,
                             std::uint64_t seed) {
  BatchGradient g{0.0, EncoderWeights<double>::zeros(model.config()), {}};
  const bool trainable = model.embeddings().trainable();
  if (trainable) {
    const auto& rows = model.embeddings().table().rows();
    g.embedding = Eigen::MatrixXd::Zero(rows.rows(), rows.cols());
  }
  std::size_t counted = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const Example& ex = *examples[i];
    if (ex.tokens.empty()) continue;
    const Eigen::MatrixXd embedded = model.embeddings().embed(ex.id, ex.ids);
    EncoderCache<double> cache;
    const Potentials pots =
        encode(model.config(), model.weights(), embedded, ex.features, training, derive_seed(seed, i), &cache);
    const NllResult nll = nll_and_gradients(pots, ex.gold);
    const auto back = encode_backward(model.config(), model.weights(), cache, nll.gradients);
    g.loss += nll.loss;
    g.weights.axpy(1.0, back.weights);
    if (trainable) model.embeddings().table().accumulate_gradient(ex.ids, back.embedded, g.embedding);
    ++counted;
  }
  if (counted > 0) {
    const double scale = 1.0 / static_cast<double>(counted);
    g.loss *= scale;
    g.weights.for_each_tensor([scale](const std::string&, auto& t) { t *= scale; });
    if (trainable) g.embedding *= scale;
  }
  return g;
}

std::uint64_t slot_seed(std::uint64_t run_seed, const std::string& slot) {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (unsigned char c : slot) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return derive_seed(run_seed, h);
}

SlotExtractor init_extractor(const std::string& slot, std::shared_ptr<const Vocabulary> vocab,
                             const EncoderConfig& config, std::uint64_t seed,
                             std::shared_ptr<const PrecomputedEmbeddings> precomputed) {
  auto weights = EncoderWeights<double>::random(config, derive_seed(seed, 1));
  if (precomputed) {
    return SlotExtractor(slot, std::move(vocab), EmbeddingProvider(std::move(precomputed)), config, std::move(weights));
  }
  EmbeddingTable table(vocab->size(), config.embedding_dim, derive_seed(seed, 2));
  return SlotExtractor(slot, std::move(vocab), EmbeddingProvider(std::move(table)), config, std::move(weights));
}

namespace {

double dev_f1(const SlotExtractor& model, const std::vector<Example>& dev) {
  std::vector<std::optional<CharSpan>> predicted;
  std::vector<std::optional<CharSpan>> gold;
  predicted.reserve(dev.size());
  gold.reserve(dev.size());
  for (const auto& ex : dev) {
    predicted.push_back(model.predict(ex).span);
    gold.push_back(ex.gold_span);
  }
  return score_slot(std::span<const std::optional<CharSpan>>(predicted), std::span<const std::optional<CharSpan>>(gold)).f1;
}

}  // namespace

TrainResult train_slot(const Dataset& dataset, SlotExtractor initial, const TrainConfig& config) {
  config.validate();
  const std::string slot = initial.slot();
  TrainResult result{std::move(initial), {}, 0, 0};
  SlotExtractor& model = result.model;

  std::vector<Example> train;
  train.reserve(dataset.train.size());
  for (const auto& u : dataset.train) {
    train.push_back(make_training_example(u, slot, model.vocabulary()));
    if (train.back().gold_span && !aligned_to_tokens(train.back().tokens, *train.back().gold_span)) {
      ++result.misaligned_spans;
    }
  }
  std::vector<Example> dev;
  dev.reserve(dataset.dev.size());
  for (const auto& u : dataset.dev) dev.push_back(make_training_example(u, slot, model.vocabulary()));

  if (config.max_epochs == 0 || train.empty()) return result;

  const bool trainable = model.embeddings().trainable();
  EncoderWeights<double> velocity = EncoderWeights<double>::zeros(model.config());
  Eigen::MatrixXd table_velocity;
  if (trainable) table_velocity = Eigen::MatrixXd::Zero(model.embeddings().table().rows().rows(), model.config().embedding_dim);

  EncoderWeights<double> best_weights = model.weights();
  std::optional<EmbeddingTable> best_table;
  if (trainable) best_table = model.embeddings().table();
  double best_f1 = -1.0;
  std::size_t stale = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    SplitMix64 shuffle_rng(derive_seed(config.seed, 0x5348554646ULL, epoch));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<const Example*> batch;
      batch.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) batch.push_back(&train[order[i]]);

      const BatchGradient g = batch_gradient(model, batch, true, derive_seed(config.seed, epoch, begin));
      if (!std::isfinite(g.loss) || !g.weights.all_finite()) {
        throw TrainingError("slot '" + slot + "': non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                            std::to_string(begin) + "; try a smaller learning rate");
      }
      loss_sum += g.loss;
      ++batches;

      if (config.momentum > 0.0) {
        velocity.for_each_tensor([&](const std::string&, auto& v) { v *= config.momentum; });
        velocity.axpy(1.0, g.weights);
        model.weights().axpy(-config.learning_rate, velocity);
        if (trainable) {
          table_velocity = config.momentum * table_velocity + g.embedding;
          model.embeddings().table().sgd_step(table_velocity, config.learning_rate);
        }
      } else {
        model.weights().axpy(-config.learning_rate, g.weights);
        if (trainable) model.embeddings().table().sgd_step(g.embedding, config.learning_rate);
      }
    }

    const double f1 = dev.empty() ? 0.0 : dev_f1(model, dev);
    result.log.push_back({epoch, loss_sum / static_cast<double>(batches), f1});

    // Without a dev split every epoch counts as an improvement, so the last one is kept.
    if (dev.empty() || f1 > best_f1) {
      best_f1 = f1;
      result.best_epoch = epoch;
      best_weights = model.weights();
      if (trainable) best_table = model.embeddings().table();
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }

  model.weights() = std::move(best_weights);
  if (trainable) model.embeddings().table() = std::move(*best_table);
  return result;
}

void write_training_log(const std::filesystem::path& file, const std::vector<EpochLog>& log) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ParseError(file.string() + ": cannot write");
  out << "epoch,train_nll,dev_f1\n";
  char line[96];
  for (const auto& e : log) {
    std::snprintf(line, sizeof line, "%zu,%.10f,%.6f\n", e.epoch, e.train_nll, e.dev_f1);
    out << line;
  }
}

Fraction Fraction::parse(const std::string& text) {
  Fraction f;
  try {
    const auto slash = text.find('/');
    std::size_t used = 0;
    if (slash == std::string::npos) {
      f.numerator = std::stoull(text, &used);
      if (used != text.size()) throw ValidationError("");
      f.denominator = 1;
    } else {
      const std::string num = text.substr(0, slash);
      const std::string den = text.substr(slash + 1);
      f.numerator = std::stoull(num, &used);
      if (used != num.size()) throw ValidationError("");
      f.denominator = std::stoull(den, &used);
      if (used != den.size()) throw ValidationError("");
    }
  } catch (const std::exception&) {
    throw ValidationError("cannot parse fraction '" + text + "' (expected e.g. 1 or 1/16)");
  }
  f.validate();
  return f;
}

std::string Fraction::to_string() const {
  if (denominator == 1) return std::to_string(numerator);
  return std::to_string(numerator) + "/" + std::to_string(denominator);
}

void Fraction::validate() const {
  if (denominator == 0 || numerator == 0 || numerator > denominator) {
    throw ValidationError("fraction " + std::to_string(numerator) + "/" + std::to_string(denominator) +
                          " outside (0, 1]");
  }
}

std::size_t fraction_size(std::size_t n, Fraction fraction) {
  fraction.validate();
  if (n == 0) return 0;
  const std::uint64_t num = fraction.numerator;
  const std::uint64_t den = fraction.denominator;
  const std::size_t k = n / den * num + (n % den) * num / den;
  return std::max<std::size_t>(k, 1);
}

Dataset sample_fraction(const Dataset& dataset, Fraction fraction, std::uint64_t seed) {
  const std::size_t k = fraction_size(dataset.train.size(), fraction);
  // A single seeded permutation; every fraction takes a prefix of it, hence nesting.
  std::vector<std::size_t> order(dataset.train.size());
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(derive_seed(seed, 0x4652414354ULL));
  rng.shuffle(order);
  order.resize(k);
  std::sort(order.begin(), order.end());

  Dataset out;
  out.name = dataset.name;
  out.dev = dataset.dev;
  out.slot_names = dataset.slot_names;
  out.train.reserve(k);
  for (std::size_t i : order) out.train.push_back(dataset.train[i]);
  return out;
}

}  // namespace spanfill
