// Checkpoint container for SlotExtractor: a single JSON document holding the slot
// metadata, the encoder config and every tensor (column-major data with its shape).

#include <fstream>

#include <json.hpp>

#include "spanfill/error.hpp"
#include "spanfill/trainer.hpp"

namespace spanfill {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "spanfill.slot_extractor";
constexpr int kVersion = 1;

template <typename Derived>
json tensor_to_json(const Eigen::MatrixBase<Derived>& m) {
  std::vector<double> data(m.derived().data(), m.derived().data() + m.size());
  return {{"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
}

template <typename Derived>
void tensor_from_json(const json& j, const std::string& name, Eigen::PlainObjectBase<Derived>& m) {
  const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (shape.size() != 2 || shape[0] * shape[1] != static_cast<Eigen::Index>(data.size())) {
    throw ParseError("tensor '" + name + "' has inconsistent shape and data");
  }
  if (shape[0] != m.rows() || shape[1] != m.cols()) {
    throw ShapeError("tensor '" + name + "' has shape " + std::to_string(shape[0]) + "x" + std::to_string(shape[1]) +
                     ", config expects " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  std::copy(data.begin(), data.end(), m.data());
}

json config_to_json(const EncoderConfig& c) {
  return {{"embedding_dim", c.embedding_dim},
          {"channels", c.channels},
          {"widths", c.widths},
          {"keep_embedding", c.keep_embedding},
          {"keep_features", c.keep_features}};
}

EncoderConfig config_from_json(const json& j) {
  EncoderConfig c;
  c.embedding_dim = j.at("embedding_dim").get<int>();
  c.channels = j.at("channels").get<std::vector<int>>();
  c.widths = j.at("widths").get<std::vector<int>>();
  c.keep_embedding = j.at("keep_embedding").get<double>();
  c.keep_features = j.at("keep_features").get<double>();
  c.validate();
  return c;
}

}  // namespace

void SlotExtractor::save(const fs::path& checkpoint_file, const fs::path& vocabulary_file) const {
  json tensors = json::object();
  weights_.for_each_tensor([&tensors](const std::string& name, const auto& t) { tensors[name] = tensor_to_json(t); });
  if (embeddings_.trainable()) tensors["embedding.table"] = tensor_to_json(embeddings_.table().rows());

  const fs::path base = checkpoint_file.has_parent_path() ? checkpoint_file.parent_path() : fs::path(".");
  json doc = {{"format", kFormat},
              {"version", kVersion},
              {"slot", slot_},
              {"decode_mask", to_string(mask_)},
              {"vocabulary", fs::relative(vocabulary_file, base).generic_string()},
              {"vocabulary_size", vocab_->size()},
              {"embedding",
               {{"kind", embeddings_.trainable() ? "trainable_table" : "precomputed_file"}, {"dim", embeddings_.dim()}}},
              {"encoder", config_to_json(config_)},
              {"tensors", std::move(tensors)}};
  std::ofstream out(checkpoint_file, std::ios::binary);
  if (!out) throw ParseError(checkpoint_file.string() + ": cannot write");
  out << doc.dump() << '\n';
}

SlotExtractor SlotExtractor::load(const fs::path& checkpoint_file, std::shared_ptr<const PrecomputedEmbeddings> precomputed,
                                  const EncoderConfig* expected) {
  std::ifstream in(checkpoint_file);
  if (!in) throw ParseError(checkpoint_file.string() + ": cannot open checkpoint");
  try {
    const json doc = json::parse(in);
    if (doc.at("format") != kFormat) throw ParseError(checkpoint_file.string() + ": not a slot extractor checkpoint");
    if (doc.at("version").get<int>() != kVersion) {
      throw ParseError(checkpoint_file.string() + ": unsupported checkpoint version " + doc.at("version").dump());
    }
    const EncoderConfig config = config_from_json(doc.at("encoder"));
    if (expected != nullptr && !(*expected == config)) {
      throw ShapeError(checkpoint_file.string() + ": encoder config differs from the requested one");
    }

    const fs::path base = checkpoint_file.has_parent_path() ? checkpoint_file.parent_path() : fs::path(".");
    auto vocab = std::make_shared<const Vocabulary>(Vocabulary::load(base / doc.at("vocabulary").get<std::string>()));
    if (vocab->size() != doc.at("vocabulary_size").get<std::size_t>()) {
      throw ShapeError(checkpoint_file.string() + ": vocabulary file does not match the checkpoint");
    }

    const json& tensors = doc.at("tensors");
    auto weights = EncoderWeights<double>::zeros(config);
    weights.for_each_tensor([&tensors](const std::string& name, auto& t) {
      if (!tensors.contains(name)) throw ParseError("checkpoint lacks tensor '" + name + "'");
      tensor_from_json(tensors.at(name), name, t);
    });

    const std::string kind = doc.at("embedding").at("kind").get<std::string>();
    const int dim = doc.at("embedding").at("dim").get<int>();
    if (kind == "trainable_table") {
      Eigen::MatrixXd rows(static_cast<Eigen::Index>(vocab->size()), dim);
      tensor_from_json(tensors.at("embedding.table"), "embedding.table", rows);
      return SlotExtractor(doc.at("slot").get<std::string>(), std::move(vocab), EmbeddingProvider(EmbeddingTable(std::move(rows))),
                           config, std::move(weights), parse_decode_mask(doc.at("decode_mask").get<std::string>()));
    }
    if (kind != "precomputed_file") throw ParseError(checkpoint_file.string() + ": unknown embedding kind '" + kind + "'");
    if (!precomputed) {
      throw LookupError(checkpoint_file.string() + ": model was trained on precomputed embeddings; supply the embeddings file");
    }
    if (precomputed->dim() != dim) {
      throw ShapeError(checkpoint_file.string() + ": precomputed embeddings have dim " + std::to_string(precomputed->dim()) +
                       ", model expects " + std::to_string(dim));
    }
    return SlotExtractor(doc.at("slot").get<std::string>(), std::move(vocab), EmbeddingProvider(std::move(precomputed)),
                         config, std::move(weights), parse_decode_mask(doc.at("decode_mask").get<std::string>()));
  } catch (const json::exception& e) {
    throw ParseError(checkpoint_file.string() + ": " + e.what());
  }
}

}  // namespace spanfill
