#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spanfill/data_model.hpp"
#include "spanfill/encoder.hpp"
#include "spanfill/eval.hpp"
#include "spanfill/trainer.hpp"

namespace spanfill {

enum class EmbeddingMode { scratch, precomputed };

EmbeddingMode parse_embedding_mode(const std::string& name);
std::string to_string(EmbeddingMode mode);

/// Fully determines a run. Written to <out>/manifest.json by every command that trains.
struct RunManifest {
  std::filesystem::path data;
  DatasetFormat format = DatasetFormat::canonical;
  EndConvention end_convention = EndConvention::exclusive;
  std::optional<std::vector<std::string>> slots;  // nullopt = every slot in the dataset
  EmbeddingMode mode = EmbeddingMode::scratch;
  std::optional<std::filesystem::path> embeddings_file;
  Fraction fraction;
  std::uint64_t seed = 1;
  std::filesystem::path out = "runs";
  DecodeMask decode_mask = DecodeMask::grammar;
  std::size_t vocab_size = 2000;
  std::size_t workers = 1;
  TrainConfig train;
  /// Encoder fields overriding the embedding mode's defaults.
  nlohmann::json encoder_overrides = nlohmann::json::object();

  /// Applies overrides such as {"learning_rate": 0.05, "channels": [64, 64], ...}.
  /// Unknown keys are rejected.
  void apply_overrides(const nlohmann::json& overrides);

  /// Encoder config after mode defaults are resolved.
  EncoderConfig resolved_encoder(int embedding_dim) const;

  nlohmann::json to_json() const;
};

struct SlotTrainSummary {
  std::string slot;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_dev_f1 = 0.0;
  std::size_t misaligned_spans = 0;
  std::filesystem::path checkpoint;
};

struct TrainSummary {
  std::size_t train_size = 0;
  std::vector<SlotTrainSummary> slots;
};

/// Trains one extractor per slot; writes vocab.txt, <slot>/checkpoint.json,
/// <slot>/train_log.csv and manifest.json under manifest.out.
TrainSummary cmd_train(const RunManifest& manifest, std::ostream& log);

struct SlotEvaluation {
  std::string slot;
  SlotScore score;
  ErrorBreakdown errors;
};

struct EvalSummary {
  std::size_t train_size = 0;
  std::vector<SlotEvaluation> slots;
  std::optional<double> average_f1;
  std::vector<SpanPrediction> predictions;
};

/// Evaluates the checkpoints under `checkpoints` on the dev split; writes predictions.jsonl,
/// metrics.csv and error_categories.csv under manifest.out.
EvalSummary cmd_eval(const RunManifest& manifest, const std::filesystem::path& checkpoints, std::ostream& log);

struct FewShotRow {
  Fraction fraction;
  std::size_t train_size = 0;
  std::map<std::string, double> f1;
  double average_f1 = 0.0;
};

/// Train + evaluate at each fraction; writes fewshot.csv (one row per fraction, per-slot
/// columns plus the average) and per-fraction run directories.
std::vector<FewShotRow> cmd_fewshot(const RunManifest& manifest, const std::vector<Fraction>& fractions, std::ostream& log);

/// Predicts every slot model under `checkpoints` for every record of `input`
/// (canonical or released record layout; labels ignored).
std::vector<SpanPrediction> cmd_predict(const std::filesystem::path& checkpoints, const std::filesystem::path& input,
                                        const std::optional<std::filesystem::path>& embeddings_file,
                                        const std::optional<std::vector<std::string>>& slots);

struct ErrorReportOptions {
  std::optional<std::string> slot;
  ReportOptions sampling;
};

/// Error listing for one prediction file, or the model-exclusive errors of two files.
std::string cmd_error_report(const RunManifest& manifest, const std::filesystem::path& predictions_a,
                             const std::optional<std::filesystem::path>& predictions_b, const ErrorReportOptions& options);

/// Slot models found under a checkpoint directory, sorted by slot name.
std::map<std::string, std::filesystem::path> find_checkpoints(const std::filesystem::path& dir);

}  // namespace spanfill
