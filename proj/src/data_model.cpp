#include "spanfill/data_model.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <regex>
#include <unordered_set>

#include <json.hpp>

#include "spanfill/error.hpp"
#include "spanfill/utf8.hpp"

namespace spanfill {

namespace fs = std::filesystem;
using nlohmann::json;

std::optional<CharSpan> Utterance::span_for(const std::string& slot) const {
  for (const auto& label : labels) {
    if (label.slot == slot) return label.span();
  }
  return std::nullopt;
}

DatasetFormat parse_dataset_format(const std::string& name) {
  if (name == "canonical") return DatasetFormat::canonical;
  if (name == "restaurants8k" || name == "restaurants-8k") return DatasetFormat::restaurants8k;
  if (name == "dstc8_single_domain" || name == "dstc8") return DatasetFormat::dstc8_single_domain;
  throw ValidationError("unknown dataset format '" + name + "'");
}

std::string to_string(DatasetFormat format) {
  switch (format) {
    case DatasetFormat::canonical: return "canonical";
    case DatasetFormat::restaurants8k: return "restaurants8k";
    case DatasetFormat::dstc8_single_domain: return "dstc8_single_domain";
  }
  return "canonical";
}

namespace {

std::string locus(const fs::path& file, std::size_t index) {
  return file.string() + ": record " + std::to_string(index);
}

std::size_t read_index(const json& value, const std::string& what, const std::string& where) {
  if (!value.is_number_integer() || value.get<long long>() < 0) {
    throw ParseError(where + ": '" + what + "' must be a non-negative integer");
  }
  return value.get<std::size_t>();
}

SpanLabel parse_label(const json& j, const LoadOptions& options, const std::string& where) {
  if (!j.is_object() || !j.contains("slot") || !j["slot"].is_string()) {
    throw ParseError(where + ": label without a string 'slot'");
  }
  SpanLabel label;
  label.slot = j["slot"].get<std::string>();
  if (j.contains("start") || j.contains("end")) {
    if (!j.contains("start") || !j.contains("end")) throw ParseError(where + ": label needs both 'start' and 'end'");
    label.start = read_index(j["start"], "start", where);
    label.end = read_index(j["end"], "end", where);
  } else if (j.contains("valueSpan")) {
    // Released files omit zero-valued fields, so a missing startIndex means 0.
    const json& span = j["valueSpan"];
    label.start = span.contains("startIndex") ? read_index(span["startIndex"], "startIndex", where) : 0;
    if (!span.contains("endIndex")) throw ParseError(where + ": valueSpan without 'endIndex'");
    label.end = read_index(span["endIndex"], "endIndex", where);
  } else {
    throw ParseError(where + ": label for slot '" + label.slot + "' has no span");
  }
  if (options.end_convention == EndConvention::inclusive) label.end += 1;
  return label;
}

Utterance parse_record(const json& j, const LoadOptions& options, const std::string& default_id,
                       const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": record is not an object");
  Utterance u;
  if (j.contains("id")) {
    if (!j["id"].is_string()) throw ParseError(where + ": 'id' must be a string");
    u.id = j["id"].get<std::string>();
  } else {
    u.id = default_id;
  }

  if (j.contains("text")) {
    if (!j["text"].is_string()) throw ParseError(where + ": 'text' must be a string");
    u.text = j["text"].get<std::string>();
  } else if (j.contains("userInput") && j["userInput"].is_object() && j["userInput"].contains("text")) {
    u.text = j["userInput"]["text"].get<std::string>();
  } else {
    throw ParseError(where + ": record has no text");
  }

  const json* requested = nullptr;
  if (j.contains("requested_slots")) {
    requested = &j["requested_slots"];
  } else if (j.contains("context") && j["context"].is_object() && j["context"].contains("requestedSlots")) {
    requested = &j["context"]["requestedSlots"];
  }
  if (requested != nullptr) {
    if (!requested->is_array()) throw ParseError(where + ": requested slots must be a list");
    for (const auto& s : *requested) {
      if (!s.is_string()) throw ParseError(where + ": requested slot names must be strings");
      u.requested_slots.insert(s.get<std::string>());
    }
  }

  if (j.contains("labels")) {
    if (!j["labels"].is_array()) throw ParseError(where + ": 'labels' must be a list");
    for (const auto& l : j["labels"]) u.labels.push_back(parse_label(l, options, where));
  }
  return u;
}

// train.json, train_0.json, train_1.json ... ordered by numeric suffix.
std::vector<fs::path> train_files(const fs::path& dir) {
  static const std::regex pattern(R"(train(?:_(\d+))?\.json)");
  std::vector<std::pair<long, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    std::smatch m;
    if (entry.is_regular_file() && std::regex_match(name, m, pattern)) {
      found.emplace_back(m[1].matched ? std::stol(m[1].str()) : -1, entry.path());
    }
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& [_, p] : found) out.push_back(std::move(p));
  return out;
}

std::optional<fs::path> dev_file(const fs::path& dir) {
  for (const char* name : {"dev.json", "test.json"}) {
    if (fs::is_regular_file(dir / name)) return dir / name;
  }
  return std::nullopt;
}

}  // namespace

std::vector<Utterance> load_split(const fs::path& file, const std::string& id_prefix, const LoadOptions& options) {
  std::ifstream in(file);
  if (!in) throw ParseError(file.string() + ": cannot open");
  const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (content.find_first_not_of(" \t\r\n") == std::string::npos) return {};
  json doc;
  try {
    doc = json::parse(content);
  } catch (const json::parse_error& e) {
    throw ParseError(file.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw ParseError(file.string() + ": top level must be a list of records");
  std::vector<Utterance> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    try {
      out.push_back(parse_record(doc[i], options, id_prefix + "-" + std::to_string(i), locus(file, i)));
    } catch (const json::exception& e) {
      throw ParseError(locus(file, i) + ": " + e.what());
    }
  }
  return out;
}

Dataset load_dataset(const fs::path& path, DatasetFormat format, const LoadOptions& options) {
  Dataset ds;
  if (!fs::exists(path)) throw ParseError(path.string() + ": no such file or directory");
  if (fs::is_directory(path)) {
    ds.name = path.filename().empty() ? path.parent_path().filename().string() : path.filename().string();
    const auto files = train_files(path);
    if (files.empty()) throw ParseError(path.string() + ": no train*.json split for format " + to_string(format));
    for (std::size_t f = 0; f < files.size(); ++f) {
      const std::string prefix = files.size() == 1 ? "train" : "train" + std::to_string(f);
      auto part = load_split(files[f], prefix, options);
      ds.train.insert(ds.train.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    if (auto dev = dev_file(path)) ds.dev = load_split(*dev, "dev", options);
  } else {
    ds.name = path.stem().string();
    ds.train = load_split(path, "train", options);
  }

  std::vector<Utterance> all = ds.train;
  all.insert(all.end(), ds.dev.begin(), ds.dev.end());
  ds.slot_names = collect_slot_names(all);
  validate(ds);
  return ds;
}

void save_split(const fs::path& file, std::span<const Utterance> utterances) {
  json doc = json::array();
  for (const auto& u : utterances) {
    json labels = json::array();
    for (const auto& l : u.labels) labels.push_back({{"slot", l.slot}, {"start", l.start}, {"end", l.end}});
    doc.push_back({{"id", u.id},
                   {"text", u.text},
                   {"requested_slots", std::vector<std::string>(u.requested_slots.begin(), u.requested_slots.end())},
                   {"labels", labels}});
  }
  std::ofstream out(file);
  if (!out) throw ParseError(file.string() + ": cannot write");
  out << doc.dump(1) << '\n';
}

void validate(const Utterance& u) {
  if (u.text.empty()) throw ValidationError("utterance '" + u.id + "': empty text");
  std::size_t length = 0;
  try {
    length = utf8::length(u.text);
  } catch (const ParseError& e) {
    throw ValidationError("utterance '" + u.id + "': " + e.what());
  }
  std::set<std::string> seen;
  for (const auto& l : u.labels) {
    if (!(l.start < l.end && l.end <= length)) {
      throw ValidationError("utterance '" + u.id + "': span [" + std::to_string(l.start) + "," +
                            std::to_string(l.end) + ") for slot '" + l.slot + "' outside text of length " +
                            std::to_string(length));
    }
    if (!seen.insert(l.slot).second) {
      throw ValidationError("utterance '" + u.id + "': more than one span for slot '" + l.slot + "'");
    }
  }
}

void validate(const Dataset& ds) {
  const std::set<std::string> known(ds.slot_names.begin(), ds.slot_names.end());
  std::unordered_set<std::string> train_ids;
  for (const auto& u : ds.train) {
    validate(u);
    if (!train_ids.insert(u.id).second) throw ValidationError("duplicate utterance id '" + u.id + "' in train");
  }
  std::unordered_set<std::string> dev_ids;
  for (const auto& u : ds.dev) {
    validate(u);
    if (train_ids.count(u.id) != 0) throw ValidationError("utterance id '" + u.id + "' in both train and dev");
    if (!dev_ids.insert(u.id).second) throw ValidationError("duplicate utterance id '" + u.id + "' in dev");
  }
  for (const auto* split : {&ds.train, &ds.dev}) {
    for (const auto& u : *split) {
      for (const auto& l : u.labels) {
        if (known.count(l.slot) == 0) {
          throw ValidationError("utterance '" + u.id + "': slot '" + l.slot + "' not in dataset slot list");
        }
      }
    }
  }
}

std::vector<std::string> collect_slot_names(std::span<const Utterance> utterances) {
  std::set<std::string> names;
  for (const auto& u : utterances) {
    for (const auto& l : u.labels) names.insert(l.slot);
    names.insert(u.requested_slots.begin(), u.requested_slots.end());
  }
  return {names.begin(), names.end()};
}

std::map<std::string, SlotCount> slot_counts(std::span<const Utterance> utterances) {
  std::map<std::string, SlotCount> counts;
  for (const auto& u : utterances) {
    for (const auto& l : u.labels) ++counts[l.slot].with_span;
    for (const auto& s : u.requested_slots) ++counts[s].requested;
  }
  return counts;
}

}  // namespace spanfill
