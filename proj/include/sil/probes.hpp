#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sil/corpus.hpp"
#include "sil/embeddings.hpp"
#include "sil/metrics.hpp"
#include "sil/model.hpp"

namespace sil {

// ---- minimal pairs ----

/// One hand-built sentence: subject NP, verb, object NP, optional tail.
/// verb_passive carries its auxiliary ("were milked", "was poured").
struct SentenceFrame {
  std::string id;
  std::string det = "the";
  std::string subj_pre, subj_head, subj_post;
  std::string obj_pre, obj_head, obj_post;
  std::string verb_active, verb_passive;
  std::string tail;
};

/// TSV with header: frame_id det subj_pre subj_head subj_post obj_pre obj_head
/// obj_post verb_active verb_passive [tail]. All slots but tail must be nonempty.
std::vector<SentenceFrame> parse_frames(const std::string& text);
std::vector<SentenceFrame> load_frames(const std::filesystem::path& path);

struct VariantFeatures {
  bool some_subject = false;  // some-NP is the agent (subject of the active form)
  bool passive = false;
  bool partitive = false;
  bool prenominal = false;
  bool postnominal = false;

  bool surface_subject() const { return some_subject != passive; }
  bool modified() const { return prenominal || postnominal; }
  bool operator==(const VariantFeatures&) const = default;
};

struct MinimalPairVariant {
  std::string id;
  std::string frame_id;
  VariantFeatures features;
  std::string text;
  std::vector<std::string> tokens;
  std::size_t some_index = 0;
};

std::string realize(const SentenceFrame& frame, const VariantFeatures& features);

/// 32 variants per frame, frame order then odometer over
/// (some_subject, passive, partitive, prenominal, postnominal), last bit fastest.
std::vector<MinimalPairVariant> generate_minimal_pairs(const std::vector<SentenceFrame>& frames);

struct VariantScore {
  std::string id;
  std::string frame_id;
  VariantFeatures features;
  double rating = 4.0;  // raw 1-7 scale
};

struct GroupSummary {
  std::string dimension;  // partitive | function | modification | prenominal | postnominal
  std::string level;
  std::size_t n = 0;
  Interval rating;
};

struct MinimalPairReport {
  std::vector<VariantScore> scores;
  std::vector<GroupSummary> groups;
};

std::vector<VariantScore> score_variants(const ModelParams& params, const std::vector<MinimalPairVariant>& variants,
                                         const EmbeddingSource& source);
MinimalPairReport minimal_pair_report(std::vector<VariantScore> scores, std::size_t replicates, std::uint64_t seed);

std::string variant_scores_csv(const MinimalPairReport& report);
std::string group_summary_csv(const MinimalPairReport& report);

// ---- attention ----

/// Attention of one corpus utterance, with the markers needed by the analyses.
struct AttentionSample {
  std::string id;
  std::vector<double> weights;  // over target tokens after truncation
  std::size_t untruncated_length = 0;
  std::optional<std::size_t> some_index;
  bool subject = false;
  std::vector<std::size_t> of_partitive;
  std::vector<std::size_t> of_other;
};

/// Runs the model over each record's (truncated, context-free) target tokens.
/// Throws ContractViolation if the model has no attention layer.
std::vector<AttentionSample> collect_attention(const ModelParams& params, const std::vector<UtteranceRecord>& records,
                                               const EmbeddingSource& source);

/// Weights with index `drop` set to 0 and the rest rescaled to sum to 1.
std::vector<double> renormalize_without(std::span<const double> weights, std::size_t drop);
/// Weights at `indices`, rescaled to sum to 1 (same order as `indices`).
std::vector<double> renormalize_subset(std::span<const double> weights, std::span<const std::size_t> indices);

struct CurvePoint {
  std::string analysis;  // some_vs_other | subject_renormalized
  std::string group;
  std::size_t position = 0;
  std::size_t n = 0;
  Interval weight;
};

struct AttentionReport {
  std::vector<CurvePoint> curves;
  std::size_t utterances_used = 0;
  std::size_t excluded_no_some = 0;
  std::size_t excluded_too_long = 0;
};

/// (a) raw weight of the some-token vs other tokens per position;
/// (b) some-weight removed and renormalized, other tokens averaged per position
/// for subject vs non-subject some-NPs. Both keep utterances of <= max_len tokens.
AttentionReport attention_by_position(const std::vector<AttentionSample>& samples, std::size_t max_len,
                                      std::size_t replicates, std::uint64_t seed);

struct OfClassSummary {
  std::string mode;   // raw | normalized
  std::string klass;  // partitive | other
  std::size_t n = 0;
  Interval weight;
};

struct PartitiveOfReport {
  std::vector<OfClassSummary> rows;
  std::size_t normalized_utterances = 0;
};

/// raw: every of-token's weight by class. normalized: utterances with at least
/// two of-tokens, of-weights rescaled to sum to 1 within the utterance.
PartitiveOfReport partitive_of_analysis(const std::vector<AttentionSample>& samples, std::size_t replicates,
                                        std::uint64_t seed);

std::string attention_curves_csv(const AttentionReport& report);
std::string partitive_of_csv(const PartitiveOfReport& report);

// ---- regression ----

/// Item-level outcome and named predictor columns.
struct RegressionData {
  std::vector<std::string> ids;
  std::vector<double> y;
  std::map<std::string, std::vector<double>> columns;
  std::set<std::string> binary;  // centered rather than z-scored
};

/// Columns partitive, strength, mention, subjecthood, modification,
/// utterance_length from the records; y = mean_rating. If `nn` is given, adds
/// column "nn" (raw-scale prediction per id); every record must have one.
RegressionData regression_data(const std::vector<UtteranceRecord>& records,
                               const std::map<std::string, double>* nn = nullptr);

struct RegressionSpec {
  std::vector<std::string> predictors{"partitive",   "strength",     "mention",
                                      "subjecthood", "modification", "utterance_length"};
  std::vector<std::pair<std::string, std::string>> interactions;
  bool standardize = true;
  std::string nn_column = "nn";

  std::vector<std::string> term_names() const;
  void validate(const RegressionData& data) const;
};

void from_json(const nlohmann::json& j, RegressionSpec& s);

struct OlsFit {
  std::vector<std::string> terms;  // excludes the intercept
  double intercept = 0.0;
  std::vector<double> beta;
};

/// Least squares with intercept on the (transformed) design built from `spec`.
/// Zero-variance columns get beta 0. Collinear columns raise NumericError naming them.
OlsFit fit_ols(const RegressionData& data, const RegressionSpec& spec, bool include_nn);

struct CoefficientRow {
  std::string term;
  std::optional<double> beta_original;
  double lo_original = 0.0, hi_original = 0.0;
  double beta_extended = 0.0;
  double lo_extended = 0.0, hi_extended = 0.0;
  std::optional<double> p_shrink;
  std::string stars;
};

struct RegressionComparison {
  std::vector<CoefficientRow> rows;  // spec terms, then the NN term
  std::size_t items = 0;
  std::size_t replicates = 0;
};

std::string significance_stars(double p_shrink);

/// Fits the original and extended models, then refits both on `replicates`
/// item resamples (the same resample for both). p_shrink counts ties as half.
RegressionComparison regression_compare(const RegressionData& data, const RegressionSpec& spec,
                                        std::size_t replicates, std::uint64_t seed, std::size_t workers = 1);

std::string coefficient_csv(const RegressionComparison& cmp);

}  // namespace sil
