#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>

#include <Eigen/Core>

namespace spanfill {

/// Context-free lookup table trained from scratch. One row per vocabulary id.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  /// Uniform init in [-1/sqrt(dim), 1/sqrt(dim)].
  EmbeddingTable(std::size_t vocab_size, int dim, std::uint64_t seed);
  explicit EmbeddingTable(Eigen::MatrixXd rows) : rows_(std::move(rows)) {}

  int dim() const { return static_cast<int>(rows_.cols()); }
  std::size_t vocab_size() const { return static_cast<std::size_t>(rows_.rows()); }
  const Eigen::MatrixXd& rows() const { return rows_; }
  Eigen::MatrixXd& rows() { return rows_; }

  /// dim x T, column t = row of ids[t].
  Eigen::MatrixXd embed(std::span<const int> ids) const;

  /// Adds column t of `upstream` (dim x T) to row ids[t] of `gradient` (vocab x dim).
  void accumulate_gradient(std::span<const int> ids, const Eigen::MatrixXd& upstream, Eigen::MatrixXd& gradient) const;

  void sgd_step(const Eigen::MatrixXd& gradient, double learning_rate) { rows_ -= learning_rate * gradient; }

 private:
  Eigen::MatrixXd rows_;  // vocab x dim
};

/// Frozen contextual vectors exported offline, keyed by utterance id.
class PrecomputedEmbeddings {
 public:
  /// JSON-lines: {"id": str, "dim": int, "vectors": [[float, ...], ...]} per line.
  static PrecomputedEmbeddings load(const std::filesystem::path& file);

  void insert(const std::string& utterance_id, Eigen::MatrixXd vectors);  // dim x T

  int dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  bool contains(const std::string& utterance_id) const { return vectors_.count(utterance_id) != 0; }

  /// Throws LookupError when the id is missing or holds a different number of vectors.
  const Eigen::MatrixXd& lookup(const std::string& utterance_id, std::size_t token_count) const;

 private:
  int dim_ = 0;
  std::unordered_map<std::string, Eigen::MatrixXd> vectors_;
};

enum class EmbeddingKind { trainable_table, precomputed_file };

class EmbeddingProvider {
 public:
  explicit EmbeddingProvider(EmbeddingTable table) : source_(std::move(table)) {}
  explicit EmbeddingProvider(std::shared_ptr<const PrecomputedEmbeddings> file) : source_(std::move(file)) {}

  EmbeddingKind kind() const;
  int dim() const;
  bool trainable() const { return kind() == EmbeddingKind::trainable_table; }

  /// dim x T. Checks id range for the table and presence/length for the file.
  Eigen::MatrixXd embed(const std::string& utterance_id, std::span<const int> ids) const;

  /// Throws Error for the precomputed kind.
  EmbeddingTable& table();
  const EmbeddingTable& table() const;

  /// Convenience: accumulate into a fresh gradient and apply one plain SGD step.
  void accumulate_gradient(std::span<const int> ids, const Eigen::MatrixXd& upstream, double learning_rate);

 private:
  std::variant<EmbeddingTable, std::shared_ptr<const PrecomputedEmbeddings>> source_;
};

}  // namespace spanfill
