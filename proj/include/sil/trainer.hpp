#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sil/corpus.hpp"
#include "sil/embeddings.hpp"
#include "sil/model.hpp"

namespace sil {

/// One training item: embedded input and target on the [0, 1] scale.
struct Example {
  std::string id;
  Array inputs;
  double target = 0.0;
};

/// Truncates each record for the chosen mode, embeds it and rescales its rating.
std::vector<Example> build_examples(const std::vector<UtteranceRecord>& records, const EmbeddingSource& source,
                                    bool with_context);

struct TrainConfig {
  ModelConfig model;
  std::size_t epochs = 40;
  std::size_t batch_size = 32;
  double lr = 0.001;
  bool with_context = false;
  std::optional<double> clip_norm;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_mse = 0.0;
  std::optional<double> valid_r;
};
using LearningCurve = std::vector<EpochStats>;

struct TrainResult {
  ModelParams params;
  LearningCurve curve;
  std::size_t best_epoch = 0;
  bool aborted = false;
  std::string diagnostic;
};

/// Minibatch Adam on MSE. With a validation set, returns the parameters of the
/// epoch with the highest validation r; otherwise those of the last epoch.
/// A non-finite loss stops training and returns the last good parameters.
TrainResult train(std::span<const Example> train_set, std::span<const Example> valid_set, const TrainConfig& config);

std::vector<PredictionReport> predict_all(const ModelParams& params, std::span<const Example> examples);
std::vector<double> scores_of(const std::vector<PredictionReport>& reports);
std::vector<double> targets_of(std::span<const Example> examples);

/// Learning curve as CSV: epoch,train_mse,valid_r.
std::string learning_curve_csv(const LearningCurve& curve);

/// A configuration competing in a tuning sweep, with the examples it trains on.
struct Candidate {
  std::string label;
  TrainConfig config;
  std::shared_ptr<const std::vector<Example>> examples;
};

struct TuneEntry {
  std::size_t candidate = 0;
  std::string label;
  TrainConfig config;
  std::vector<double> fold_r;  // best-epoch validation r per fold
  double mean_r = 0.0;
  /// Mean validation r per epoch across folds.
  std::vector<double> mean_curve;
  std::optional<std::string> error;
};

struct TuneReport {
  std::vector<TuneEntry> ranked;
  std::vector<Fold> folds;
  std::set<std::string> ids_used;
};

/// Sorts by mean r descending; failed entries last; ties: smaller hidden_dim,
/// lower dropout, then existing order.
void rank_tune_entries(std::vector<TuneEntry>& entries);

/// k-fold CV over `train_ids` for every candidate. Failed candidates are kept
/// (with `error` set) and ranked last. Ties: smaller hidden_dim, lower dropout, input order.
TuneReport tune(const std::vector<Candidate>& candidates, const std::vector<std::string>& train_ids, std::size_t k,
                std::uint64_t seed, std::size_t workers = 1);

struct GridSpec {
  std::vector<std::size_t> hidden_dims{100, 200, 400, 800};
  std::vector<double> dropouts{0.1, 0.2, 0.3, 0.4};
  std::vector<Pooling> poolings{Pooling::attention, Pooling::final_state};
  std::vector<bool> with_context{false, true};
  std::vector<std::string> embeddings{"glove"};
};

void from_json(const nlohmann::json& j, GridSpec& g);

/// Expands the grid in nested order (embedding, context, pooling, hidden, dropout),
/// sharing one example set per (embedding, context) pair.
std::vector<Candidate> make_candidates(const GridSpec& grid, const TrainConfig& base,
                                       const std::vector<UtteranceRecord>& records,
                                       const std::map<std::string, const EmbeddingSource*>& sources);

/// Tuning report CSV: config fields, r per fold, mean.
std::string tune_report_csv(const TuneReport& report);

struct CvPrediction {
  PredictionReport report;
  std::size_t fold = 0;
};

/// Out-of-fold predictions: each example is scored by a model trained on the
/// other k-1 folds. Output order follows `examples`.
std::vector<CvPrediction> cv_predict(const std::vector<Example>& examples, const TrainConfig& config, std::size_t k,
                                     std::uint64_t seed, std::size_t workers = 1);

}  // namespace sil
