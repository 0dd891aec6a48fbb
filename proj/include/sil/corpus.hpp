#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace sil {

/// Hand-coded regression predictors for one item.
struct FeatureVector {
  int partitive = 0;
  double determiner_strength = 1.0;
  int linguistic_mention = 0;
  int subjecthood = 0;
  int modification = 0;
  /// Token count before any truncation.
  int utterance_length = 1;

  bool operator==(const FeatureVector&) const = default;
};

struct UtteranceRecord {
  std::string id;
  std::vector<std::string> tokens;
  /// Preceding utterances, flattened, with kContextSeparator between them.
  std::vector<std::string> context_tokens;
  double mean_rating = 1.0;
  std::vector<double> participant_ratings;
  std::optional<double> no_context_mean_rating;
  FeatureVector features;
  /// Position of "some" in `tokens`; absent if dropped by truncation.
  std::optional<std::size_t> some_index;
  std::vector<std::size_t> of_partitive_indices;
  std::vector<std::size_t> of_other_indices;

  bool operator==(const UtteranceRecord&) const = default;
};

inline constexpr const char* kContextSeparator = "<SEP>";
inline constexpr std::size_t kMaxTargetTokens = 30;
inline constexpr std::size_t kMaxContextTokens = 150;

/// Column order of the corpus TSV.
const std::vector<std::string>& corpus_columns();

/// Reads and validates a corpus TSV. Throws SchemaError for missing columns,
/// ValidationError (naming the row) for invariant violations.
std::vector<UtteranceRecord> parse_corpus(const std::filesystem::path& path);
std::vector<UtteranceRecord> parse_corpus_text(const std::string& text);

/// Serializes in the same format `parse_corpus` reads; floats use shortest
/// round-trip form so parse(serialize(x)) == x exactly.
std::string serialize_corpus(const std::vector<UtteranceRecord>& records);
void write_corpus(const std::vector<UtteranceRecord>& records, const std::filesystem::path& path);

/// Checks every record invariant; throws ValidationError with `context` prefixed.
void validate_record(const UtteranceRecord& r, const std::string& context);

/// Likert 1..7 to [0, 1]: (r - 1) / 6.
double rescale_rating(double r);
double unscale_rating(double score);

enum class TruncationMode { target_only, with_context };

/// target_only keeps the first 30 target tokens; with_context keeps the last
/// 150 context tokens. Marker indices outside the kept window are dropped.
UtteranceRecord truncate(const UtteranceRecord& record, TruncationMode mode);

struct Split {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::uint64_t seed = 0;
};

/// Seeded random split. |train| = ceil(n * train_fraction).
Split split(const std::vector<std::string>& ids, double train_fraction, std::uint64_t seed);
Split split(const std::vector<UtteranceRecord>& records, double train_fraction, std::uint64_t seed);

struct Fold {
  std::vector<std::string> train_ids;
  std::vector<std::string> heldout_ids;
};

/// Seeded k-fold partition; fold sizes differ by at most one, larger folds first.
std::vector<Fold> kfold(const std::vector<std::string>& ids, std::size_t k, std::uint64_t seed);
std::vector<Fold> kfold(const std::vector<UtteranceRecord>& records, std::size_t k, std::uint64_t seed);

nlohmann::json split_manifest(const Split& s);
Split split_from_manifest(const nlohmann::json& j);

std::vector<std::string> record_ids(const std::vector<UtteranceRecord>& records);

/// Records whose id is in `ids`, in the order of `ids`. Throws LookupError on unknown ids.
std::vector<UtteranceRecord> select(const std::vector<UtteranceRecord>& records, const std::vector<std::string>& ids);

}  // namespace sil
