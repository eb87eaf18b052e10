#include "spanfill/embeddings.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "spanfill/error.hpp"
#include "spanfill/random.hpp"

namespace spanfill {

EmbeddingTable::EmbeddingTable(std::size_t vocab_size, int dim, std::uint64_t seed)
    : rows_(static_cast<Eigen::Index>(vocab_size), dim) {
  if (dim <= 0) throw ShapeError("embedding dimension must be positive");
  SplitMix64 rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (Eigen::Index j = 0; j < rows_.cols(); ++j) {
    for (Eigen::Index i = 0; i < rows_.rows(); ++i) rows_(i, j) = rng.uniform(-scale, scale);
  }
}

Eigen::MatrixXd EmbeddingTable::embed(std::span<const int> ids) const {
  Eigen::MatrixXd out(rows_.cols(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] < 0 || static_cast<std::size_t>(ids[t]) >= vocab_size()) {
      throw ShapeError("token id " + std::to_string(ids[t]) + " outside embedding table of " +
                       std::to_string(vocab_size()) + " rows");
    }
    out.col(static_cast<Eigen::Index>(t)) = rows_.row(ids[t]).transpose();
  }
  return out;
}

void EmbeddingTable::accumulate_gradient(std::span<const int> ids, const Eigen::MatrixXd& upstream,
                                         Eigen::MatrixXd& gradient) const {
  if (upstream.rows() != rows_.cols() || upstream.cols() != static_cast<Eigen::Index>(ids.size())) {
    throw ShapeError("upstream embedding gradient has the wrong shape");
  }
  if (gradient.rows() != rows_.rows() || gradient.cols() != rows_.cols()) {
    throw ShapeError("embedding gradient buffer has the wrong shape");
  }
  for (std::size_t t = 0; t < ids.size(); ++t) gradient.row(ids[t]) += upstream.col(static_cast<Eigen::Index>(t)).transpose();
}

PrecomputedEmbeddings PrecomputedEmbeddings::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError(file.string() + ": cannot open embeddings file");
  PrecomputedEmbeddings out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = file.string() + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!j.contains("id") || !j["id"].is_string() || !j.contains("dim") || !j["dim"].is_number_integer() ||
        !j.contains("vectors") || !j["vectors"].is_array()) {
      throw ParseError(where + ": record needs string 'id', integer 'dim' and list 'vectors'");
    }
    const int dim = j["dim"].get<int>();
    const auto& vectors = j["vectors"];
    Eigen::MatrixXd m(dim, static_cast<Eigen::Index>(vectors.size()));
    for (std::size_t t = 0; t < vectors.size(); ++t) {
      if (!vectors[t].is_array() || vectors[t].size() != static_cast<std::size_t>(dim)) {
        throw ParseError(where + ": vector " + std::to_string(t) + " does not have " + std::to_string(dim) + " entries");
      }
      for (int k = 0; k < dim; ++k) m(k, static_cast<Eigen::Index>(t)) = vectors[t][static_cast<std::size_t>(k)].get<double>();
    }
    try {
      out.insert(j["id"].get<std::string>(), std::move(m));
    } catch (const Error& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return out;
}

void PrecomputedEmbeddings::insert(const std::string& utterance_id, Eigen::MatrixXd vectors) {
  if (vectors.rows() <= 0) throw ShapeError("embedding dimension must be positive");
  if (dim_ == 0) dim_ = static_cast<int>(vectors.rows());
  if (vectors.rows() != dim_) {
    throw ShapeError("record '" + utterance_id + "' has dim " + std::to_string(vectors.rows()) + ", expected " +
                     std::to_string(dim_));
  }
  if (!vectors_.emplace(utterance_id, std::move(vectors)).second) {
    throw ShapeError("duplicate embedding record '" + utterance_id + "'");
  }
}

const Eigen::MatrixXd& PrecomputedEmbeddings::lookup(const std::string& utterance_id, std::size_t token_count) const {
  auto it = vectors_.find(utterance_id);
  if (it == vectors_.end()) throw LookupError("no precomputed embeddings for utterance '" + utterance_id + "'");
  if (static_cast<std::size_t>(it->second.cols()) != token_count) {
    throw LookupError("utterance '" + utterance_id + "' has " + std::to_string(it->second.cols()) +
                      " precomputed vectors but " + std::to_string(token_count) + " tokens");
  }
  return it->second;
}

EmbeddingKind EmbeddingProvider::kind() const {
  return std::holds_alternative<EmbeddingTable>(source_) ? EmbeddingKind::trainable_table
                                                         : EmbeddingKind::precomputed_file;
}

int EmbeddingProvider::dim() const {
  if (const auto* t = std::get_if<EmbeddingTable>(&source_)) return t->dim();
  return std::get<std::shared_ptr<const PrecomputedEmbeddings>>(source_)->dim();
}

Eigen::MatrixXd EmbeddingProvider::embed(const std::string& utterance_id, std::span<const int> ids) const {
  if (const auto* t = std::get_if<EmbeddingTable>(&source_)) return t->embed(ids);
  return std::get<std::shared_ptr<const PrecomputedEmbeddings>>(source_)->lookup(utterance_id, ids.size());
}

EmbeddingTable& EmbeddingProvider::table() {
  if (auto* t = std::get_if<EmbeddingTable>(&source_)) return *t;
  throw Error("precomputed embeddings are frozen and have no trainable table");
}

const EmbeddingTable& EmbeddingProvider::table() const {
  if (const auto* t = std::get_if<EmbeddingTable>(&source_)) return *t;
  throw Error("precomputed embeddings are frozen and have no trainable table");
}

void EmbeddingProvider::accumulate_gradient(std::span<const int> ids, const Eigen::MatrixXd& upstream,
                                            double learning_rate) {
  EmbeddingTable& t = table();
  Eigen::MatrixXd gradient = Eigen::MatrixXd::Zero(t.rows().rows(), t.rows().cols());
  t.accumulate_gradient(ids, upstream, gradient);
  t.sgd_step(gradient, learning_rate);
}

}  // namespace spanfill
