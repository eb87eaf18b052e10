#include "spanfill/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "spanfill/error.hpp"
#include "spanfill/utf8.hpp"

namespace spanfill {

namespace fs = std::filesystem;
using nlohmann::json;

EmbeddingMode parse_embedding_mode(const std::string& name) {
  if (name == "scratch") return EmbeddingMode::scratch;
  if (name == "precomputed") return EmbeddingMode::precomputed;
  throw ValidationError("unknown embedding mode '" + name + "' (expected scratch or precomputed)");
}

std::string to_string(EmbeddingMode mode) { return mode == EmbeddingMode::scratch ? "scratch" : "precomputed"; }

namespace {

const std::set<std::string> kEncoderKeys = {"embedding_dim", "channels", "widths", "keep_embedding", "keep_features"};

std::string format_double(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string fraction_tag(Fraction f) { return "fraction_" + std::to_string(f.numerator) + "_" + std::to_string(f.denominator); }

Dataset load_for(const RunManifest& m) {
  Dataset ds = load_dataset(m.data, m.format, LoadOptions{m.end_convention});
  return sample_fraction(ds, m.fraction, m.seed);
}

std::vector<std::string> resolve_slots(const RunManifest& m, const Dataset& ds) {
  if (!m.slots) return ds.slot_names;
  for (const auto& s : *m.slots) {
    if (std::find(ds.slot_names.begin(), ds.slot_names.end(), s) == ds.slot_names.end()) {
      throw ValidationError("slot '" + s + "' does not occur in dataset '" + ds.name + "'");
    }
  }
  return *m.slots;
}

std::shared_ptr<const PrecomputedEmbeddings> load_precomputed(const RunManifest& m) {
  if (m.mode != EmbeddingMode::precomputed) return nullptr;
  if (!m.embeddings_file) throw ValidationError("--mode precomputed needs --embeddings-file");
  return std::make_shared<const PrecomputedEmbeddings>(PrecomputedEmbeddings::load(*m.embeddings_file));
}

Vocabulary build_vocabulary(const std::vector<Utterance>& train, std::size_t target) {
  std::vector<std::string> corpus;
  corpus.reserve(train.size());
  std::set<char32_t> inventory;
  for (const auto& u : train) {
    corpus.push_back(u.text);
    for (char32_t c : utf8::decode(u.text)) {
      if (!chars::is_space(c)) inventory.insert(chars::fold(c));
    }
  }
  if (corpus.empty()) throw ValidationError("training split is empty");
  return induce_vocabulary(corpus, std::max(target, inventory.size()));
}

template <typename Job>
void run_parallel(std::size_t count, std::size_t workers, Job job) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void write_manifest(const RunManifest& m) {
  std::ofstream out(m.out / "manifest.json", std::ios::binary);
  if (!out) throw ParseError((m.out / "manifest.json").string() + ": cannot write");
  out << m.to_json().dump(2) << '\n';
}

}  // namespace

void RunManifest::apply_overrides(const json& overrides) {
  if (!overrides.is_object()) throw ValidationError("config overrides must be a JSON object");
  for (const auto& [key, value] : overrides.items()) {
    try {
      if (key == "learning_rate") train.learning_rate = value.get<double>();
      else if (key == "batch_size") train.batch_size = value.get<std::size_t>();
      else if (key == "max_epochs") train.max_epochs = value.get<std::size_t>();
      else if (key == "patience") train.patience = value.get<std::size_t>();
      else if (key == "momentum") train.momentum = value.get<double>();
      else if (key == "vocab_size") vocab_size = value.get<std::size_t>();
      else if (kEncoderKeys.count(key) != 0) encoder_overrides[key] = value;
      else throw ValidationError("unknown config key '" + key + "'");
    } catch (const json::exception& e) {
      throw ValidationError("config key '" + key + "': " + e.what());
    }
  }
  train.validate();
}

EncoderConfig RunManifest::resolved_encoder(int embedding_dim) const {
  EncoderConfig c = mode == EmbeddingMode::scratch ? EncoderConfig::vanilla() : EncoderConfig::pretrained(embedding_dim);
  try {
    if (encoder_overrides.contains("embedding_dim")) c.embedding_dim = encoder_overrides["embedding_dim"].get<int>();
    if (encoder_overrides.contains("channels")) c.channels = encoder_overrides["channels"].get<std::vector<int>>();
    if (encoder_overrides.contains("widths")) c.widths = encoder_overrides["widths"].get<std::vector<int>>();
    if (encoder_overrides.contains("keep_embedding")) c.keep_embedding = encoder_overrides["keep_embedding"].get<double>();
    if (encoder_overrides.contains("keep_features")) c.keep_features = encoder_overrides["keep_features"].get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("encoder config override: ") + e.what());
  }
  if (mode == EmbeddingMode::precomputed && c.embedding_dim != embedding_dim) {
    throw ShapeError("embedding_dim " + std::to_string(c.embedding_dim) + " != precomputed dim " + std::to_string(embedding_dim));
  }
  c.validate();
  return c;
}

json RunManifest::to_json() const {
  json j = {{"data", data.generic_string()},
            {"format", to_string(format)},
            {"end_convention", end_convention == EndConvention::exclusive ? "exclusive" : "inclusive"},
            {"slots", slots ? json(*slots) : json(nullptr)},
            {"mode", to_string(mode)},
            {"embeddings_file", embeddings_file ? json(embeddings_file->generic_string()) : json(nullptr)},
            {"fraction", fraction.to_string()},
            {"seed", seed},
            {"decode_mask", to_string(decode_mask)},
            {"vocab_size", vocab_size},
            {"train",
             {{"learning_rate", train.learning_rate},
              {"batch_size", train.batch_size},
              {"max_epochs", train.max_epochs},
              {"patience", train.patience},
              {"momentum", train.momentum}}},
            {"encoder_overrides", encoder_overrides}};
  return j;
}

std::map<std::string, fs::path> find_checkpoints(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ParseError(dir.string() + ": checkpoint directory not found");
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::is_regular_file(entry.path() / "checkpoint.json")) {
      out.emplace(entry.path().filename().string(), entry.path() / "checkpoint.json");
    }
  }
  return out;
}

TrainSummary cmd_train(const RunManifest& manifest, std::ostream& log) {
  const Dataset ds = load_for(manifest);
  const std::vector<std::string> slots = resolve_slots(manifest, ds);
  TrainSummary summary;
  summary.train_size = ds.train.size();
  if (slots.empty()) {
    log << "warning: no slots selected, nothing to train\n";
    return summary;
  }
  fs::create_directories(manifest.out);
  write_manifest(manifest);

  auto precomputed = load_precomputed(manifest);
  const EncoderConfig encoder = manifest.resolved_encoder(precomputed ? precomputed->dim() : 0);
  auto vocab = std::make_shared<const Vocabulary>(build_vocabulary(ds.train, manifest.vocab_size));
  const fs::path vocab_file = manifest.out / "vocab.txt";
  vocab->save(vocab_file);

  TrainConfig config = manifest.train;
  summary.slots.resize(slots.size());
  run_parallel(slots.size(), manifest.workers, [&](std::size_t i) {
    const std::string& slot = slots[i];
    TrainConfig slot_config = config;
    slot_config.seed = slot_seed(manifest.seed, slot);
    SlotExtractor initial = init_extractor(slot, vocab, encoder, slot_config.seed, precomputed);
    initial.set_decode_mask(manifest.decode_mask);
    TrainResult result = train_slot(ds, std::move(initial), slot_config);

    const fs::path dir = manifest.out / slot;
    fs::create_directories(dir);
    result.model.save(dir / "checkpoint.json", vocab_file);
    write_training_log(dir / "train_log.csv", result.log);

    auto& s = summary.slots[i];
    s.slot = slot;
    s.epochs_run = result.log.size();
    s.best_epoch = result.best_epoch;
    s.best_dev_f1 = result.best_epoch > 0 ? result.log[result.best_epoch - 1].dev_f1 : 0.0;
    s.misaligned_spans = result.misaligned_spans;
    s.checkpoint = dir / "checkpoint.json";
  });

  for (const auto& s : summary.slots) {
    log << "slot " << s.slot << ": " << s.epochs_run << " epochs, best epoch " << s.best_epoch << ", dev F1 "
        << format_double(s.best_dev_f1, 4);
    if (s.misaligned_spans > 0) log << ", " << s.misaligned_spans << " gold spans widened to token boundaries";
    log << "\n";
  }
  return summary;
}

EvalSummary cmd_eval(const RunManifest& manifest, const fs::path& checkpoints, std::ostream& log) {
  const Dataset ds = load_for(manifest);
  auto found = find_checkpoints(checkpoints);
  std::vector<std::string> slots;
  if (manifest.slots) {
    for (const auto& s : *manifest.slots) {
      if (found.count(s) == 0) throw ParseError(checkpoints.string() + ": no checkpoint for slot '" + s + "'");
      slots.push_back(s);
    }
  } else {
    for (const auto& [slot, _] : found) slots.push_back(slot);
  }

  EvalSummary summary;
  summary.train_size = ds.train.size();
  auto precomputed = load_precomputed(manifest);
  std::vector<std::vector<SpanPrediction>> per_slot(slots.size());
  summary.slots.resize(slots.size());
  run_parallel(slots.size(), manifest.workers, [&](std::size_t i) {
    SlotExtractor model = SlotExtractor::load(found.at(slots[i]), precomputed);
    if (model.slot() != slots[i]) {
      throw ValidationError(found.at(slots[i]).string() + ": checkpoint is for slot '" + model.slot() + "'");
    }
    model.set_decode_mask(manifest.decode_mask);
    std::vector<std::optional<CharSpan>> predicted;
    std::vector<std::optional<CharSpan>> gold;
    for (const auto& u : ds.dev) {
      per_slot[i].push_back(model.predict(u));
      predicted.push_back(per_slot[i].back().span);
      gold.push_back(u.span_for(slots[i]));
    }
    auto& e = summary.slots[i];
    e.slot = slots[i];
    e.score = score_slot(std::span<const std::optional<CharSpan>>(predicted), std::span<const std::optional<CharSpan>>(gold));
    e.errors = categorize_errors(std::span<const std::optional<CharSpan>>(predicted),
                                 std::span<const std::optional<CharSpan>>(gold));
  });

  // Utterance-major order, slots sorted within each utterance.
  for (std::size_t u = 0; u < ds.dev.size(); ++u) {
    for (std::size_t i = 0; i < slots.size(); ++i) summary.predictions.push_back(per_slot[i][u]);
  }
  std::map<std::string, double> f1s;
  for (const auto& e : summary.slots) f1s[e.slot] = e.score.f1;
  if (!f1s.empty()) summary.average_f1 = average_f1(f1s);

  fs::create_directories(manifest.out);
  write_predictions(manifest.out / "predictions.jsonl", summary.predictions);
  {
    std::ofstream out(manifest.out / "metrics.csv", std::ios::binary);
    out << "slot,fraction,train_size,precision,recall,f1,vacuous\n";
    for (const auto& e : summary.slots) {
      out << e.slot << ',' << manifest.fraction.to_string() << ',' << summary.train_size << ','
          << format_double(e.score.precision, 6) << ',' << format_double(e.score.recall, 6) << ','
          << format_double(e.score.f1, 6) << ',' << (e.score.vacuous ? 1 : 0) << '\n';
    }
    if (summary.average_f1) {
      out << "average," << manifest.fraction.to_string() << ',' << summary.train_size << ",,,"
          << format_double(*summary.average_f1, 6) << ",\n";
    }
  }
  {
    std::ofstream out(manifest.out / "error_categories.csv", std::ios::binary);
    out << "slot,exact_match,true_negative,missed_span,spurious_span,non_overlapping,overlapping,utterances\n";
    for (const auto& e : summary.slots) {
      out << e.slot << ',' << e.errors.exact_matches << ',' << e.errors.true_negatives << ','
          << e.errors.count(ErrorCategory::MissedSpan) << ',' << e.errors.count(ErrorCategory::SpuriousSpan) << ','
          << e.errors.count(ErrorCategory::NonOverlapping) << ',' << e.errors.count(ErrorCategory::Overlapping) << ','
          << e.errors.total() << '\n';
    }
  }

  for (const auto& e : summary.slots) {
    log << e.slot << ": P " << format_double(e.score.precision, 4) << " R " << format_double(e.score.recall, 4) << " F1 "
        << format_double(e.score.f1, 4) << (e.score.vacuous ? " (vacuous: no gold or predicted spans)" : "") << "\n";
  }
  if (summary.average_f1) log << "average F1 " << format_double(*summary.average_f1, 4) << "\n";
  return summary;
}

std::vector<FewShotRow> cmd_fewshot(const RunManifest& manifest, const std::vector<Fraction>& fractions, std::ostream& log) {
  if (fractions.empty()) throw ValidationError("no fractions given");
  std::vector<FewShotRow> rows;
  std::set<std::string> slot_columns;
  for (const Fraction& f : fractions) {
    RunManifest sub = manifest;
    sub.fraction = f;
    sub.out = manifest.out / fraction_tag(f);
    log << "== fraction " << f.to_string() << " ==\n";
    const TrainSummary trained = cmd_train(sub, log);
    FewShotRow row;
    row.fraction = f;
    row.train_size = trained.train_size;
    if (!trained.slots.empty()) {
      sub.slots.reset();
      const EvalSummary eval = cmd_eval(sub, sub.out, log);
      for (const auto& e : eval.slots) {
        row.f1[e.slot] = e.score.f1;
        slot_columns.insert(e.slot);
      }
      row.average_f1 = eval.average_f1.value_or(0.0);
    }
    rows.push_back(std::move(row));
  }

  fs::create_directories(manifest.out);
  std::ofstream out(manifest.out / "fewshot.csv", std::ios::binary);
  out << "fraction,train_size";
  for (const auto& s : slot_columns) out << ',' << s;
  out << ",average_f1\n";
  for (const auto& r : rows) {
    out << r.fraction.to_string() << ',' << r.train_size;
    for (const auto& s : slot_columns) {
      out << ',';
      if (auto it = r.f1.find(s); it != r.f1.end()) out << format_double(it->second, 6);
    }
    out << ',' << format_double(r.average_f1, 6) << '\n';
  }
  return rows;
}

std::vector<SpanPrediction> cmd_predict(const fs::path& checkpoints, const fs::path& input,
                                        const std::optional<fs::path>& embeddings_file,
                                        const std::optional<std::vector<std::string>>& slots) {
  const std::vector<Utterance> utterances = load_split(input, "input");
  for (const auto& u : utterances) validate(u);
  const auto found = find_checkpoints(checkpoints);
  std::shared_ptr<const PrecomputedEmbeddings> precomputed;
  if (embeddings_file) precomputed = std::make_shared<const PrecomputedEmbeddings>(PrecomputedEmbeddings::load(*embeddings_file));

  std::vector<SlotExtractor> models;
  for (const auto& [slot, path] : found) {
    if (slots && std::find(slots->begin(), slots->end(), slot) == slots->end()) continue;
    models.push_back(SlotExtractor::load(path, precomputed));
  }
  if (slots) {
    for (const auto& s : *slots) {
      if (found.count(s) == 0) throw ParseError(checkpoints.string() + ": no checkpoint for slot '" + s + "'");
    }
  }
  std::vector<SpanPrediction> out;
  for (const auto& u : utterances) {
    for (const auto& m : models) out.push_back(m.predict(u));
  }
  return out;
}

namespace {

std::vector<ErrorRecord> errors_for_slot(const std::vector<SpanPrediction>& predictions, const fs::path& source,
                                         const std::vector<Utterance>& gold, const std::string& slot) {
  std::map<std::string, const SpanPrediction*> by_id;
  for (const auto& p : predictions) {
    if (p.slot == slot) by_id[p.id] = &p;
  }
  std::vector<SpanPrediction> aligned;
  aligned.reserve(gold.size());
  for (const auto& u : gold) {
    auto it = by_id.find(u.id);
    if (it == by_id.end()) {
      throw ValidationError(source.string() + ": no prediction for utterance '" + u.id + "', slot '" + slot + "'");
    }
    aligned.push_back(*it->second);
  }
  if (by_id.size() != gold.size()) {
    throw ValidationError(source.string() + ": predictions for slot '" + slot + "' do not align with the gold utterances");
  }
  return collect_errors(aligned, gold);
}

}  // namespace

std::string cmd_error_report(const RunManifest& manifest, const fs::path& predictions_a,
                             const std::optional<fs::path>& predictions_b, const ErrorReportOptions& options) {
  const Dataset ds = load_dataset(manifest.data, manifest.format, LoadOptions{manifest.end_convention});
  const std::vector<Utterance>& gold = ds.dev.empty() ? ds.train : ds.dev;
  const auto a = read_predictions(predictions_a);
  std::optional<std::vector<SpanPrediction>> b;
  if (predictions_b) b = read_predictions(*predictions_b);

  std::set<std::string> slots;
  if (options.slot) {
    slots.insert(*options.slot);
  } else {
    for (const auto& p : a) slots.insert(p.slot);
  }

  std::ostringstream out;
  for (const auto& slot : slots) {
    const auto errors_a = errors_for_slot(a, predictions_a, gold, slot);
    if (!b) {
      out << "# slot " << slot << ": " << errors_a.size() << " errors in " << predictions_a.generic_string() << "\n";
      out << error_report(errors_a, options.sampling);
      continue;
    }
    const auto errors_b = errors_for_slot(*b, *predictions_b, gold, slot);
    const auto only_a = exclusive_errors(errors_a, errors_b);
    const auto only_b = exclusive_errors(errors_b, errors_a);
    out << "# slot " << slot << ": " << only_a.size() << " errors exclusive to " << predictions_a.generic_string() << "\n";
    out << error_report(only_a, options.sampling);
    out << "# slot " << slot << ": " << only_b.size() << " errors exclusive to " << predictions_b->generic_string() << "\n";
    out << error_report(only_b, options.sampling);
  }
  return out.str();
}

}  // namespace spanfill
