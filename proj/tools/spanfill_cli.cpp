// spanfill: train, evaluate and run per-slot span extractors.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "spanfill/commands.hpp"
#include "spanfill/error.hpp"

namespace fs = std::filesystem;
using namespace spanfill;

namespace {

struct Flags {
  std::string data;
  std::string format = "canonical";
  bool end_inclusive = false;
  std::vector<std::string> slots;
  std::string mode = "scratch";
  std::string embeddings_file;
  std::string fraction = "1";
  std::uint64_t seed = 1;
  std::string out;
  std::string decode_mask = "grammar";
  std::string config;
  std::size_t workers = 1;
};

void add_run_flags(CLI::App* cmd, Flags& f, bool needs_data = true) {
  auto* data = cmd->add_option("--data", f.data, "Dataset directory or JSON file");
  if (needs_data) data->required();
  cmd->add_option("--format", f.format, "canonical | restaurants8k | dstc8_single_domain")->capture_default_str();
  cmd->add_flag("--end-inclusive", f.end_inclusive, "Source span end indices are inclusive");
  cmd->add_option("--slots", f.slots, "Slots to process (default: all)")->delimiter(',')->expected(0, -1);
  cmd->add_option("--mode", f.mode, "scratch | precomputed")->capture_default_str();
  cmd->add_option("--embeddings-file", f.embeddings_file, "JSON-lines precomputed embeddings");
  cmd->add_option("--fraction", f.fraction, "Training fraction, e.g. 1/16")->capture_default_str();
  cmd->add_option("--seed", f.seed, "Run seed")->capture_default_str();
  cmd->add_option("--out", f.out, "Output directory (default: $SPANFILL_OUT or ./runs)");
  cmd->add_option("--decode-mask", f.decode_mask, "grammar | none")->capture_default_str();
  cmd->add_option("--config", f.config, "JSON file or inline JSON overriding training/encoder defaults");
  cmd->add_option("--workers", f.workers, "Slots processed in parallel")->capture_default_str();
}

RunManifest to_manifest(const Flags& f, const CLI::App* cmd) {
  RunManifest m;
  m.data = f.data;
  m.format = parse_dataset_format(f.format);
  m.end_convention = f.end_inclusive ? EndConvention::inclusive : EndConvention::exclusive;
  if (cmd->count("--slots") > 0) m.slots = f.slots;
  m.mode = parse_embedding_mode(f.mode);
  if (!f.embeddings_file.empty()) m.embeddings_file = f.embeddings_file;
  m.fraction = Fraction::parse(f.fraction);
  m.seed = f.seed;
  if (!f.out.empty()) {
    m.out = f.out;
  } else if (const char* env = std::getenv("SPANFILL_OUT")) {
    m.out = env;
  }
  m.decode_mask = parse_decode_mask(f.decode_mask);
  m.workers = f.workers;
  if (!f.config.empty()) {
    nlohmann::json overrides;
    if (f.config.front() == '{') {
      overrides = nlohmann::json::parse(f.config);
    } else {
      std::ifstream in(f.config);
      if (!in) throw ParseError(f.config + ": cannot open config");
      overrides = nlohmann::json::parse(in);
    }
    m.apply_overrides(overrides);
  }
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-slot span extraction with a CNN-parameterized CRF"};
  app.require_subcommand(1);

  Flags train_flags;
  auto* train = app.add_subcommand("train", "Train one extractor per slot");
  add_run_flags(train, train_flags);

  Flags eval_flags;
  std::string eval_checkpoints;
  auto* eval = app.add_subcommand("eval", "Score checkpoints on the dev split");
  add_run_flags(eval, eval_flags);
  eval->add_option("--checkpoints", eval_checkpoints, "Directory written by train (default: --out)");

  Flags fewshot_flags;
  std::vector<std::string> fractions{"1", "1/2", "1/4", "1/8", "1/16", "1/32", "1/64", "1/128"};
  auto* fewshot = app.add_subcommand("fewshot", "Train and evaluate across training fractions");
  add_run_flags(fewshot, fewshot_flags);
  fewshot->add_option("--fractions", fractions, "Fractions to sweep")->delimiter(',');

  std::string predict_checkpoints, predict_input, predict_output, predict_embeddings;
  std::vector<std::string> predict_slots;
  auto* predict = app.add_subcommand("predict", "Predict spans for a file of utterances");
  predict->add_option("--checkpoints", predict_checkpoints, "Directory written by train")->required();
  predict->add_option("--input", predict_input, "JSON list of utterance records")->required();
  predict->add_option("--out", predict_output, "Predictions JSON-lines file (default: stdout)");
  predict->add_option("--embeddings-file", predict_embeddings, "Precomputed embeddings for the input ids");
  predict->add_option("--slots", predict_slots, "Slots to predict (default: all)")->delimiter(',');

  Flags report_flags;
  std::string report_a, report_b, report_slot;
  std::size_t report_sample = 0;
  auto* report = app.add_subcommand("error-report", "List errors, or the errors exclusive to each of two models");
  add_run_flags(report, report_flags);
  report->add_option("--predictions", report_a, "Predictions JSON-lines file")->required();
  report->add_option("--compare", report_b, "Second predictions file for an exclusive-error diff");
  report->add_option("--slot", report_slot, "Restrict to one slot");
  report->add_option("--sample", report_sample, "Random sample of this many errors per listing (0 = all)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      cmd_train(to_manifest(train_flags, train), std::cout);
    } else if (eval->parsed()) {
      const RunManifest m = to_manifest(eval_flags, eval);
      cmd_eval(m, eval_checkpoints.empty() ? m.out : fs::path(eval_checkpoints), std::cout);
    } else if (fewshot->parsed()) {
      std::vector<Fraction> parsed;
      for (const auto& f : fractions) parsed.push_back(Fraction::parse(f));
      cmd_fewshot(to_manifest(fewshot_flags, fewshot), parsed, std::cout);
    } else if (predict->parsed()) {
      std::optional<fs::path> embeddings;
      if (!predict_embeddings.empty()) embeddings = predict_embeddings;
      std::optional<std::vector<std::string>> slots;
      if (!predict_slots.empty()) slots = predict_slots;
      const auto predictions = cmd_predict(predict_checkpoints, predict_input, embeddings, slots);
      if (predict_output.empty()) {
        for (const auto& p : predictions) {
          nlohmann::json j = {{"id", p.id}, {"slot", p.slot}, {"start", nullptr}, {"end", nullptr}, {"confidence", p.confidence}};
          if (p.span) {
            j["start"] = p.span->start;
            j["end"] = p.span->end;
          }
          std::cout << j.dump() << '\n';
        }
      } else {
        write_predictions(predict_output, predictions);
      }
    } else if (report->parsed()) {
      const RunManifest m = to_manifest(report_flags, report);
      ErrorReportOptions options;
      if (!report_slot.empty()) options.slot = report_slot;
      if (report_sample > 0) options.sampling.sample = report_sample;
      options.sampling.seed = m.seed;
      std::optional<fs::path> b;
      if (!report_b.empty()) b = report_b;
      std::cout << cmd_error_report(m, report_a, b, options);
    }
  } catch (const spanfill::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
