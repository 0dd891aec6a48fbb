#include "sil/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "sil/error.hpp"
#include "sil/metrics.hpp"
#include "sil/optim.hpp"
#include "sil/util.hpp"

namespace sil {

std::vector<Example> build_examples(const std::vector<UtteranceRecord>& records, const EmbeddingSource& source,
                                    bool with_context) {
  std::vector<Example> out;
  out.reserve(records.size());
  const auto mode = with_context ? TruncationMode::with_context : TruncationMode::target_only;
  for (const auto& r : records) {
    const auto cut = truncate(r, mode);
    out.push_back({r.id, source.embed(cut, with_context), rescale_rating(r.mean_rating)});
  }
  return out;
}

void TrainConfig::validate() const {
  model.validate();
  if (epochs < 1) throw ContractViolation("train config: epochs must be >= 1");
  if (batch_size < 1) throw ContractViolation("train config: batch_size must be >= 1");
  if (!(lr > 0.0)) throw ContractViolation("train config: lr must be positive");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"model", c.model},   {"epochs", c.epochs}, {"batch_size", c.batch_size},
       {"lr", c.lr},         {"with_context", c.with_context}, {"seed", c.seed}};
  if (c.clip_norm) j["clip_norm"] = *c.clip_norm;
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = TrainConfig{};
  if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.with_context = j.value("with_context", c.with_context);
  c.seed = j.value("seed", c.seed);
  if (j.contains("clip_norm") && !j.at("clip_norm").is_null()) c.clip_norm = j.at("clip_norm").get<double>();
}

namespace {

std::optional<double> correlation_or_none(const std::vector<double>& a, const std::vector<double>& b) {
  try {
    return pearson(a, b);
  } catch (const UndefinedCorrelation&) {
    return std::nullopt;
  }
}

void accumulate(GradientMap& total, const GradientMap& add) {
  for (const auto& [name, g] : add) {
    auto [it, inserted] = total.try_emplace(name, g);
    if (inserted) continue;
    auto dst = it->second.data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

}  // namespace

std::vector<PredictionReport> predict_all(const ModelParams& params, std::span<const Example> examples) {
  std::vector<PredictionReport> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(predict(params, e.inputs, e.id));
  return out;
}

std::vector<double> scores_of(const std::vector<PredictionReport>& reports) {
  std::vector<double> s;
  s.reserve(reports.size());
  for (const auto& r : reports) s.push_back(r.score);
  return s;
}

std::vector<double> targets_of(std::span<const Example> examples) {
  std::vector<double> t;
  t.reserve(examples.size());
  for (const auto& e : examples) t.push_back(e.target);
  return t;
}

TrainResult train(std::span<const Example> train_set, std::span<const Example> valid_set, const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw ContractViolation("train: empty training set");
  for (const auto& e : train_set) {
    if (!(e.target >= 0.0 && e.target <= 1.0)) {
      throw ContractViolation("train: target for '" + e.id + "' is not on the rescaled [0,1] scale");
    }
  }

  ModelConfig model_cfg = config.model;
  model_cfg.seed = derive_seed(config.seed, "init");
  TrainResult result;
  result.params = init_params(model_cfg);
  ModelParams last_good = result.params;
  std::optional<double> best_r;

  AdamState adam;
  adam.lr = config.lr;
  const std::vector<double> valid_targets = targets_of(valid_set);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(config.seed, "shuffle/" + std::to_string(epoch)));
    Rng dropout_rng(derive_seed(config.seed, "dropout/" + std::to_string(epoch)));
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    double sq_error = 0.0;
    try {
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t stop = std::min(order.size(), start + config.batch_size);
        const auto batch_len = static_cast<double>(stop - start);
        GradientMap grads;
        for (std::size_t k = start; k < stop; ++k) {
          const Example& ex = train_set[order[k]];
          Tape tape;
          auto out = forward(tape, result.params, ex.inputs, ForwardMode::train(dropout_rng));
          Var loss = ops::scale(ops::mse(out.score, Array::scalar(ex.target)), 1.0 / batch_len);
          const double err = out.score.value()[0] - ex.target;
          sq_error += err * err;
          tape.backward(loss);
          accumulate(grads, tape.gradients());
        }
        if (config.clip_norm) clip_global_norm(grads, *config.clip_norm);
        adam_step(result.params.tensors, grads, adam);
      }
      for (const auto& [name, a] : result.params.tensors) {
        if (!a.all_finite()) throw NumericError("parameter '" + name + "' became non-finite");
      }
    } catch (const NumericError& e) {
      result.aborted = true;
      result.diagnostic = "epoch " + std::to_string(epoch) + ": " + e.what();
      result.params = std::move(last_good);
      return result;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_mse = sq_error / static_cast<double>(order.size());
    if (!valid_set.empty()) {
      stats.valid_r = correlation_or_none(scores_of(predict_all(result.params, valid_set)), valid_targets);
    }
    result.curve.push_back(stats);

    if (valid_set.empty()) {
      result.best_epoch = epoch;
      last_good = result.params;
    } else {
      if (stats.valid_r && (!best_r || *stats.valid_r > *best_r)) {
        best_r = stats.valid_r;
        result.best_epoch = epoch;
        last_good = result.params;
      } else if (!best_r) {
        last_good = result.params;
        result.best_epoch = epoch;
      }
    }
  }
  result.params = std::move(last_good);
  return result;
}

std::string learning_curve_csv(const LearningCurve& curve) {
  std::string out = "epoch,train_mse,valid_r\n";
  for (const auto& e : curve) {
    out += std::to_string(e.epoch) + "," + format_double(e.train_mse) + "," +
           (e.valid_r ? format_double(*e.valid_r) : std::string()) + "\n";
  }
  return out;
}

void rank_tune_entries(std::vector<TuneEntry>& entries) {
  std::stable_sort(entries.begin(), entries.end(), [](const TuneEntry& a, const TuneEntry& b) {
    if (a.error.has_value() != b.error.has_value()) return !a.error.has_value();
    if (a.error) return false;
    if (a.mean_r != b.mean_r) return a.mean_r > b.mean_r;
    if (a.config.model.hidden_dim != b.config.model.hidden_dim) {
      return a.config.model.hidden_dim < b.config.model.hidden_dim;
    }
    return a.config.model.dropout < b.config.model.dropout;
  });
}

TuneReport tune(const std::vector<Candidate>& candidates, const std::vector<std::string>& train_ids, std::size_t k,
                std::uint64_t seed, std::size_t workers) {
  if (candidates.empty()) throw ContractViolation("tune: empty grid");
  TuneReport report;
  report.folds = kfold(train_ids, k, seed);
  report.ids_used.insert(train_ids.begin(), train_ids.end());

  struct FoldOutcome {
    std::optional<double> r;
    std::vector<std::optional<double>> curve;
    std::optional<std::string> error;
  };
  std::vector<FoldOutcome> outcomes(candidates.size() * k);

  parallel_for(outcomes.size(), workers, [&](std::size_t task) {
    const std::size_t c = task / k;
    const std::size_t f = task % k;
    const Candidate& cand = candidates[c];
    FoldOutcome& out = outcomes[task];
    try {
      std::unordered_map<std::string, const Example*> by_id;
      for (const auto& e : *cand.examples) by_id[e.id] = &e;
      auto gather = [&](const std::vector<std::string>& ids) {
        std::vector<Example> xs;
        xs.reserve(ids.size());
        for (const auto& id : ids) {
          auto it = by_id.find(id);
          if (it == by_id.end()) throw LookupError("tune: candidate '" + cand.label + "' lacks example '" + id + "'");
          xs.push_back(*it->second);
        }
        return xs;
      };
      const auto tr = gather(report.folds[f].train_ids);
      const auto va = gather(report.folds[f].heldout_ids);
      TrainConfig cfg = cand.config;
      cfg.seed = derive_seed(seed, "fold/" + std::to_string(f));
      auto result = train(tr, va, cfg);
      for (const auto& e : result.curve) out.curve.push_back(e.valid_r);
      if (result.best_epoch > 0 && result.best_epoch <= result.curve.size()) {
        out.r = result.curve[result.best_epoch - 1].valid_r;
      }
      if (result.aborted && !out.r) out.error = result.diagnostic;
      if (!out.r && !out.error) out.error = "validation correlation undefined in every epoch";
    } catch (const std::exception& e) {
      out.error = e.what();
    }
  });

  for (std::size_t c = 0; c < candidates.size(); ++c) {
    TuneEntry entry;
    entry.candidate = c;
    entry.label = candidates[c].label;
    entry.config = candidates[c].config;
    std::vector<std::vector<double>> curves;
    for (std::size_t f = 0; f < k; ++f) {
      const auto& o = outcomes[c * k + f];
      if (o.error) {
        entry.error = "fold " + std::to_string(f) + ": " + *o.error;
        break;
      }
      entry.fold_r.push_back(*o.r);
      for (std::size_t e = 0; e < o.curve.size(); ++e) {
        if (curves.size() <= e) curves.emplace_back();
        if (o.curve[e]) curves[e].push_back(*o.curve[e]);
      }
    }
    if (!entry.error) {
      entry.mean_r = mean(entry.fold_r);
      for (const auto& per_epoch : curves) {
        entry.mean_curve.push_back(per_epoch.empty() ? std::nan("") : mean(per_epoch));
      }
    }
    report.ranked.push_back(std::move(entry));
  }

  rank_tune_entries(report.ranked);
  return report;
}

void from_json(const nlohmann::json& j, GridSpec& g) {
  g = GridSpec{};
  if (j.contains("hidden_dim")) g.hidden_dims = j.at("hidden_dim").get<std::vector<std::size_t>>();
  if (j.contains("dropout")) g.dropouts = j.at("dropout").get<std::vector<double>>();
  if (j.contains("pooling")) {
    g.poolings.clear();
    for (const auto& p : j.at("pooling")) g.poolings.push_back(parse_pooling(p.get<std::string>()));
  }
  if (j.contains("with_context")) g.with_context = j.at("with_context").get<std::vector<bool>>();
  if (j.contains("embedding")) g.embeddings = j.at("embedding").get<std::vector<std::string>>();
}

std::vector<Candidate> make_candidates(const GridSpec& grid, const TrainConfig& base,
                                       const std::vector<UtteranceRecord>& records,
                                       const std::map<std::string, const EmbeddingSource*>& sources) {
  std::vector<Candidate> out;
  for (const auto& emb : grid.embeddings) {
    auto src = sources.find(emb);
    if (src == sources.end() || !src->second) throw LookupError("grid names unknown embedding source '" + emb + "'");
    for (bool ctx : grid.with_context) {
      auto examples = std::make_shared<const std::vector<Example>>(build_examples(records, *src->second, ctx));
      for (Pooling pooling : grid.poolings) {
        for (std::size_t hidden : grid.hidden_dims) {
          for (double dropout : grid.dropouts) {
            Candidate c;
            c.config = base;
            c.config.with_context = ctx;
            c.config.model.input_dim = src->second->dim();
            c.config.model.hidden_dim = hidden;
            c.config.model.dropout = dropout;
            c.config.model.pooling = pooling;
            c.label = emb + (ctx ? "+context" : "") + "/" + to_string(pooling) + "/h" + std::to_string(hidden) + "/d" +
                      format_double(dropout);
            c.examples = examples;
            out.push_back(std::move(c));
          }
        }
      }
    }
  }
  return out;
}

std::string tune_report_csv(const TuneReport& report) {
  const std::size_t k = report.folds.size();
  std::string out = "rank,label,hidden_dim,dropout,pooling,with_context";
  for (std::size_t f = 0; f < k; ++f) out += ",r_fold" + std::to_string(f);
  out += ",mean_r,error\n";
  for (std::size_t i = 0; i < report.ranked.size(); ++i) {
    const auto& e = report.ranked[i];
    out += std::to_string(i + 1) + "," + e.label + "," + std::to_string(e.config.model.hidden_dim) + "," +
           format_double(e.config.model.dropout) + "," + to_string(e.config.model.pooling) + "," +
           (e.config.with_context ? "1" : "0");
    for (std::size_t f = 0; f < k; ++f) out += "," + (f < e.fold_r.size() ? format_double(e.fold_r[f]) : std::string());
    out += "," + (e.error ? std::string() : format_double(e.mean_r));
    std::string err = e.error.value_or("");
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out += "," + err + "\n";
  }
  return out;
}

std::vector<CvPrediction> cv_predict(const std::vector<Example>& examples, const TrainConfig& config, std::size_t k,
                                     std::uint64_t seed, std::size_t workers) {
  std::vector<std::string> ids;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    ids.push_back(examples[i].id);
    if (!index.emplace(examples[i].id, i).second) throw ContractViolation("cv_predict: duplicate id '" + examples[i].id + "'");
  }
  const auto folds = kfold(ids, k, seed);
  std::vector<CvPrediction> out(examples.size());
  std::vector<std::optional<std::string>> errors(k);

  parallel_for(k, workers, [&](std::size_t f) {
    std::vector<Example> tr;
    for (const auto& id : folds[f].train_ids) tr.push_back(examples[index.at(id)]);
    TrainConfig cfg = config;
    cfg.seed = derive_seed(seed, "cv-fold/" + std::to_string(f));
    auto result = train(tr, {}, cfg);
    if (result.aborted) errors[f] = result.diagnostic;
    for (const auto& id : folds[f].heldout_ids) {
      const std::size_t i = index.at(id);
      out[i].report = predict(result.params, examples[i].inputs, id);
      out[i].fold = f;
    }
  });
  for (std::size_t f = 0; f < k; ++f) {
    if (errors[f]) throw NumericError("cv_predict: fold " + std::to_string(f) + " aborted: " + *errors[f]);
  }
  return out;
}

}  // namespace sil
