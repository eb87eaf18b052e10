#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace spanfill {

/// Half-open character range [start, end) counted in Unicode scalar values.
struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool overlaps(const CharSpan& other) const { return start < other.end && other.start < end; }
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
  friend auto operator<=>(const CharSpan&, const CharSpan&) = default;
};

struct SpanLabel {
  std::string slot;
  std::size_t start = 0;
  std::size_t end = 0;

  CharSpan span() const { return {start, end}; }
  friend bool operator==(const SpanLabel&, const SpanLabel&) = default;
};

/// One user turn with the slots requested by the system in the previous turn.
struct Utterance {
  std::string id;
  std::string text;  // UTF-8
  std::set<std::string> requested_slots;
  std::vector<SpanLabel> labels;

  bool requests(const std::string& slot) const { return requested_slots.count(slot) != 0; }
  std::optional<CharSpan> span_for(const std::string& slot) const;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Dataset {
  std::string name;
  std::vector<Utterance> train;
  std::vector<Utterance> dev;
  std::vector<std::string> slot_names;  // sorted

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

enum class DatasetFormat {
  canonical,            // {"id","text","requested_slots","labels":[{"slot","start","end"}]}
  restaurants8k,        // released files: train_*.json + test.json
  dstc8_single_domain,  // released filtered files: train.json + test.json
};

DatasetFormat parse_dataset_format(const std::string& name);
std::string to_string(DatasetFormat format);

/// Whether the source stores the span end index as exclusive (Python slice) or inclusive.
enum class EndConvention { exclusive, inclusive };

struct LoadOptions {
  EndConvention end_convention = EndConvention::exclusive;
};

/// Reads one JSON split file. Records may use canonical or released field names.
/// Unknown fields are ignored; ids missing from the source become "<id_prefix>-<index>".
std::vector<Utterance> load_split(const std::filesystem::path& file, const std::string& id_prefix,
                                  const LoadOptions& options = {});

/// Loads a dataset from a directory (split files located per format) or a single file
/// (all records go to train). Validates every invariant before returning.
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format, const LoadOptions& options = {});

/// Writes records in the canonical schema.
void save_split(const std::filesystem::path& file, std::span<const Utterance> utterances);

/// Throws ValidationError naming the offending utterance.
void validate(const Utterance& utterance);
void validate(const Dataset& dataset);

std::vector<std::string> collect_slot_names(std::span<const Utterance> utterances);

struct SlotCount {
  std::size_t with_span = 0;
  std::size_t requested = 0;
  friend bool operator==(const SlotCount&, const SlotCount&) = default;
};

std::map<std::string, SlotCount> slot_counts(std::span<const Utterance> utterances);

}  // namespace spanfill
