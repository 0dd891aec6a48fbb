#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sil/corpus.hpp"

namespace sil {

/// How to read a delimited export of the rating study into corpus records.
///
/// long format: one row per (item, participant) judgment, rating in `rating`.
/// wide format: one row per item, participant ratings spread over
/// `rating_columns` (empty cells skipped).
struct ImportMapping {
  std::string format = "long";
  char delimiter = ',';
  std::string id = "id";
  std::string sentence = "sentence";
  std::string context;  // optional
  std::string rating = "rating";
  std::vector<std::string> rating_columns;
  std::string context_delimiter = "###";
  /// Feature name (partitive, strength, mention, subjecthood, modification) to column.
  std::map<std::string, std::string> features;
  /// Per binary feature: cell values meaning 1. Default: 1, yes, true, y (any case).
  std::map<std::string, std::set<std::string>> true_values;

  // Optional no-context ratings file, always long format.
  std::string no_context_id = "id";
  std::string no_context_rating = "rating";
};

void from_json(const nlohmann::json& j, ImportMapping& m);

struct ImportStats {
  std::size_t rows = 0;
  std::size_t records = 0;
  std::size_t without_some = 0;
  std::size_t with_no_context = 0;
};

/// Builds records: tokens via `tokenize`, context utterances split on
/// `context_delimiter` and joined with kContextSeparator, some_index = first
/// "some", an "of" right after it partitive, every other "of" non-partitive.
std::vector<UtteranceRecord> import_table(const std::string& text, const ImportMapping& mapping,
                                          const std::string* no_context_text = nullptr, ImportStats* stats = nullptr);

}  // namespace sil
