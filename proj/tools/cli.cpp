#include "cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sil/corpus.hpp"
#include "sil/embeddings.hpp"
#include "sil/error.hpp"
#include "sil/import.hpp"
#include "sil/metrics.hpp"
#include "sil/model.hpp"
#include "sil/probes.hpp"
#include "sil/rng.hpp"
#include "sil/trainer.hpp"
#include "sil/util.hpp"

#ifndef SIL_DATA_DIR
#define SIL_DATA_DIR "data"
#endif

namespace sil::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json parse_json_file(const fs::path& path) { return json::parse(read_file(path)); }

// Collects outputs as they are written and emits manifest.json last.
struct Run {
  Run(std::string cmd, fs::path dir) : command(std::move(cmd)), out_dir(std::move(dir)) {}

  std::string command;
  fs::path out_dir;
  json config = json::object();
  std::optional<std::string> corpus_hash;
  std::uint64_t seed = 0;
  json inputs = json::object();
  json outputs = json::object();
  json notes = json::object();
  std::string started = utc_now();

  void input(const std::string& role, const fs::path& path, std::string_view bytes) {
    inputs[role] = {{"path", path.string()}, {"hash", fingerprint(bytes)}};
  }

  void write(const std::string& name, const std::string& contents) {
    fs::create_directories(out_dir);
    const auto path = out_dir / name;
    write_file_atomic(path, contents);
    outputs[name] = {{"path", path.string()}, {"hash", fingerprint(contents)}};
  }

  void finish() {
    json m = {{"command", command},
              {"config", config},
              {"config_hash", fingerprint(config.dump())},
              {"corpus_hash", corpus_hash ? json(*corpus_hash) : json(nullptr)},
              {"seed", seed},
              {"started_at", started},
              {"finished_at", utc_now()},
              {"inputs", inputs},
              {"outputs", outputs}};
    if (!notes.empty()) m["notes"] = notes;
    fs::create_directories(out_dir);
    write_file_atomic(out_dir / "manifest.json", m.dump(2) + "\n");
  }
};

std::vector<UtteranceRecord> load_corpus(Run& run, const fs::path& path) {
  const std::string bytes = read_file(path);
  run.corpus_hash = fingerprint(bytes);
  run.input("corpus", path, bytes);
  return parse_corpus_text(bytes);
}

json load_config(Run& run, const std::string& path) {
  if (path.empty()) return json::object();
  const std::string bytes = read_file(path);
  run.input("config", path, bytes);
  auto j = json::parse(bytes);
  if (!j.is_object()) throw ValidationError("config '" + path + "' must hold a JSON object");
  return j;
}

std::unique_ptr<EmbeddingSource> load_source(const json& spec) {
  const std::string type = spec.value("type", std::string("glove"));
  if (!spec.contains("path")) throw ValidationError("embedding spec needs a 'path'");
  const fs::path path = spec.at("path").get<std::string>();
  if (type == "glove") {
    return std::make_unique<EmbeddingTable>(load_glove(path, parse_unk_policy(spec.value("unk", std::string("zero_vector")))));
  }
  if (type == "precomputed") return std::make_unique<PrecomputedEmbeddings>(load_precomputed(path));
  throw ValidationError("unknown embedding type '" + type + "'");
}

// "embeddings" is either one spec ({"type", "path", ...}, named by its "name"
// or "glove") or an object of named specs.
std::map<std::string, json> embedding_specs(const json& cfg) {
  if (!cfg.contains("embeddings")) throw ValidationError("config has no 'embeddings' entry");
  const auto& e = cfg.at("embeddings");
  if (!e.is_object()) throw ValidationError("config 'embeddings' must be an object");
  if (e.contains("path")) return {{e.value("name", std::string("glove")), e}};
  std::map<std::string, json> out;
  for (const auto& [name, spec] : e.items()) out[name] = spec;
  if (out.empty()) throw ValidationError("config 'embeddings' is empty");
  return out;
}

std::pair<std::string, json> single_embedding(const json& cfg) {
  auto specs = embedding_specs(cfg);
  if (specs.size() != 1) throw ValidationError("this command takes exactly one embedding source");
  return *specs.begin();
}

Split resolve_split(Run& run, const std::vector<UtteranceRecord>& records, const std::string& split_path,
                    const json& cfg) {
  if (!split_path.empty()) {
    const std::string bytes = read_file(split_path);
    run.input("split", split_path, bytes);
    return split_from_manifest(json::parse(bytes));
  }
  return split(records, cfg.value("train_fraction", 0.7), cfg.value("seed", std::uint64_t{0}));
}

std::size_t input_dim_of(const std::vector<Example>& examples, const EmbeddingSource& source) {
  return examples.empty() ? source.dim() : examples.front().inputs.cols();
}

TrainResult train_on(const std::vector<UtteranceRecord>& records, const std::vector<std::string>& ids,
                     const EmbeddingSource& source, TrainConfig& tc, double valid_fraction) {
  std::vector<std::string> train_ids = ids, valid_ids;
  if (valid_fraction > 0.0) {
    if (valid_fraction >= 1.0) throw ValidationError("valid_fraction must be below 1");
    auto inner = split(ids, 1.0 - valid_fraction, derive_seed(tc.seed, "valid"));
    train_ids = std::move(inner.train_ids);
    valid_ids = std::move(inner.test_ids);
  }
  const auto train_set = build_examples(select(records, train_ids), source, tc.with_context);
  const auto valid_set = build_examples(select(records, valid_ids), source, tc.with_context);
  tc.model.input_dim = input_dim_of(train_set, source);
  return train(train_set, valid_set, tc);
}

void write_model(Run& run, const TrainResult& result, const TrainConfig& tc, const std::string& emb_name,
                 const json& emb_spec) {
  json meta = {{"train_config", tc}, {"embedding_name", emb_name}, {"embeddings", emb_spec},
               {"best_epoch", result.best_epoch}};
  run.write("model.bin", serialize_checkpoint(result.params, meta));
  run.write("learning_curve.csv", learning_curve_csv(result.curve));
  run.notes["best_epoch"] = result.best_epoch;
  if (result.aborted) run.notes["aborted"] = result.diagnostic;
}

struct LoadedModel {
  Checkpoint checkpoint;
  TrainConfig config;
  std::unique_ptr<EmbeddingSource> source;
};

LoadedModel load_model(Run& run, const std::string& model_path, const std::string& embeddings_path) {
  const std::string bytes = read_file(model_path);
  run.input("model", model_path, bytes);
  LoadedModel m{parse_checkpoint(bytes), {}, nullptr};
  const auto& meta = m.checkpoint.metadata;
  if (meta.contains("train_config")) m.config = meta.at("train_config").get<TrainConfig>();
  m.config.model = m.checkpoint.params.config;
  json spec;
  if (!embeddings_path.empty()) {
    spec = parse_json_file(embeddings_path);
    run.input("embeddings", embeddings_path, spec.dump());
  } else if (meta.contains("embeddings")) {
    spec = meta.at("embeddings");
  } else {
    throw ValidationError("model '" + model_path + "' records no embedding source; pass --embeddings");
  }
  run.config["embeddings"] = spec;
  m.source = load_source(spec);
  if (m.source->dim() != m.config.model.input_dim) {
    throw ValidationError("embedding width " + std::to_string(m.source->dim()) + " does not match model input_dim " +
                          std::to_string(m.config.model.input_dim));
  }
  return m;
}

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// ---- options ----

struct Common {
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::size_t workers = 0;
};

struct ImportOpts {
  std::string mapping, input, no_context;
};
struct TrainOpts {
  std::string config, corpus, split;
  std::optional<std::size_t> epochs;
  std::optional<double> valid_fraction;
};
struct TuneOpts {
  std::string config, corpus, split;
  std::optional<std::size_t> k;
  bool train_best = false;
};
struct EvalOpts {
  std::string model, corpus, split, embeddings;
  std::size_t replicates = 1000;
};
struct CvOpts {
  std::string config, corpus;
  std::optional<std::size_t> k;
};
struct PairsOpts {
  std::string model, frames = std::string(SIL_DATA_DIR) + "/frames.tsv", embeddings;
  std::size_t replicates = 1000;
};
struct AttentionOpts {
  std::string model, corpus, split, embeddings;
  std::size_t max_len = kMaxTargetTokens;
  std::size_t replicates = 1000;
};
struct RegressOpts {
  std::string corpus, predictions, spec;
  std::size_t replicates = 10000;
};
struct CeilingOpts {
  std::string corpus;
  std::size_t replicates = 1000;
};

// ---- commands ----

int cmd_import(const ImportOpts& o, const Common& c, std::ostream& out) {
  Run run{"import", c.out_dir};
  const std::string mapping_bytes = read_file(o.mapping);
  run.input("mapping", o.mapping, mapping_bytes);
  run.config = json::parse(mapping_bytes);
  const auto mapping = run.config.get<ImportMapping>();
  const std::string text = read_file(o.input);
  run.input("table", o.input, text);
  std::optional<std::string> nc;
  if (!o.no_context.empty()) {
    nc = read_file(o.no_context);
    run.input("no_context", o.no_context, *nc);
  }
  ImportStats stats;
  const auto records = import_table(text, mapping, nc ? &*nc : nullptr, &stats);
  const std::string corpus = serialize_corpus(records);
  run.corpus_hash = fingerprint(corpus);
  run.write("corpus.tsv", corpus);
  run.notes = {{"rows", stats.rows},
               {"records", stats.records},
               {"without_some", stats.without_some},
               {"with_no_context", stats.with_no_context}};
  run.finish();
  out << "imported " << stats.records << " records from " << stats.rows << " rows (" << stats.without_some
      << " without 'some', " << stats.with_no_context << " with no-context ratings)\n";
  return 0;
}

int cmd_train(const TrainOpts& o, const Common& c, std::ostream& out) {
  Run run{"train", c.out_dir};
  json cfg = load_config(run, o.config);
  if (c.seed) cfg["seed"] = *c.seed;
  if (o.epochs) cfg["epochs"] = *o.epochs;
  if (o.valid_fraction) cfg["valid_fraction"] = *o.valid_fraction;
  run.config = cfg;
  auto tc = cfg.get<TrainConfig>();
  run.seed = tc.seed;

  const auto records = load_corpus(run, o.corpus);
  const auto s = resolve_split(run, records, o.split, cfg);
  const auto [emb_name, emb_spec] = single_embedding(cfg);
  const auto source = load_source(emb_spec);
  const auto result = train_on(records, s.train_ids, *source, tc, cfg.value("valid_fraction", 0.0));
  write_model(run, result, tc, emb_name, emb_spec);
  run.write("split.json", split_manifest(s).dump(2) + "\n");
  run.finish();
  if (result.aborted) throw NumericError("training aborted: " + result.diagnostic);
  out << "trained " << result.curve.size() << " epochs on " << s.train_ids.size() << " items";
  if (!result.curve.empty()) out << ", final train mse " << format_double(result.curve.back().train_mse);
  out << "\n";
  return 0;
}

int cmd_tune(const TuneOpts& o, const Common& c, std::ostream& out) {
  Run run{"tune", c.out_dir};
  json cfg = load_config(run, o.config);
  if (c.seed) cfg["seed"] = *c.seed;
  if (o.k) cfg["k"] = *o.k;
  if (o.train_best) cfg["train_best"] = true;
  run.config = cfg;
  const auto base = cfg.get<TrainConfig>();
  run.seed = base.seed;
  const std::size_t k = cfg.value("k", std::size_t{5});

  const auto records = load_corpus(run, o.corpus);
  const auto s = resolve_split(run, records, o.split, cfg);
  const auto train_records = select(records, s.train_ids);

  const auto specs = embedding_specs(cfg);
  std::map<std::string, std::unique_ptr<EmbeddingSource>> owned;
  std::map<std::string, const EmbeddingSource*> sources;
  for (const auto& [name, spec] : specs) {
    owned[name] = load_source(spec);
    sources[name] = owned[name].get();
  }
  GridSpec grid = cfg.contains("grid") ? cfg.at("grid").get<GridSpec>() : GridSpec{};
  if (!cfg.contains("grid") || !cfg.at("grid").contains("embedding")) {
    grid.embeddings.clear();
    for (const auto& [name, spec] : specs) grid.embeddings.push_back(name);
  }
  auto candidates = make_candidates(grid, base, train_records, sources);
  for (auto& cand : candidates) cand.config.model.input_dim = cand.examples->front().inputs.cols();

  const auto report = tune(candidates, s.train_ids, k, base.seed, worker_count(c.workers));
  run.write("tune_report.csv", tune_report_csv(report));
  run.write("split.json", split_manifest(s).dump(2) + "\n");

  const auto& best = report.ranked.front();
  if (best.error) throw NumericError("every candidate failed; first error: " + *best.error);
  TrainConfig best_cfg = best.config;
  if (!best.mean_curve.empty()) {
    best_cfg.epochs = static_cast<std::size_t>(
        std::max_element(best.mean_curve.begin(), best.mean_curve.end()) - best.mean_curve.begin() + 1);
  }
  const std::string emb_name = best.label.substr(0, best.label.find_first_of("+/"));
  json best_json = best_cfg;
  best_json["embeddings"] = specs.at(emb_name);
  best_json["embeddings"]["name"] = emb_name;
  best_json["train_fraction"] = cfg.value("train_fraction", 0.7);
  best_json["mean_r"] = best.mean_r;
  run.write("best_config.json", best_json.dump(2) + "\n");

  out << "best " << best.label << " mean r " << format_double(best.mean_r) << " at " << best_cfg.epochs
      << " epochs\n";
  if (cfg.value("train_best", false)) {
    const auto result = train_on(records, s.train_ids, *sources.at(emb_name), best_cfg, 0.0);
    write_model(run, result, best_cfg, emb_name, best_json["embeddings"]);
    run.finish();
    if (result.aborted) throw NumericError("training aborted: " + result.diagnostic);
    return 0;
  }
  run.finish();
  return 0;
}

int cmd_eval(const EvalOpts& o, const Common& c, std::ostream& out) {
  Run run{"eval", c.out_dir};
  run.seed = c.seed.value_or(0);
  run.config = {{"replicates", o.replicates}, {"seed", run.seed}};
  const auto m = load_model(run, o.model, o.embeddings);
  auto records = load_corpus(run, o.corpus);
  if (!o.split.empty()) records = select(records, resolve_split(run, records, o.split, {}).test_ids);
  const auto examples = build_examples(records, *m.source, m.config.with_context);
  const auto preds = predict_all(m.checkpoint.params, examples);
  const auto scores = scores_of(preds);
  const auto targets = targets_of(examples);

  const auto r = bootstrap_pearson_ci(targets, scores, o.replicates, 0.95, derive_seed(run.seed, "eval/pearson"));
  const double mse = mean_squared_error(targets, scores);
  run.write("report.csv", "metric,value,lo,hi\npearson_r," + format_double(r.mean) + "," + format_double(r.lo) + "," +
                              format_double(r.hi) + "\nmse," + format_double(mse) + ",,\nn," +
                              std::to_string(examples.size()) + ",,\n");

  std::string pred = "id,empirical_rating,predicted_rating,score,attention\n";
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::vector<std::string> att;
    for (double w : preds[i].attention) att.push_back(format_double(w));
    pred += csv_field(records[i].id) + "," + format_double(records[i].mean_rating) + "," +
            format_double(unscale_rating(preds[i].score)) + "," + format_double(preds[i].score) + "," +
            join(att, ";") + "\n";
  }
  run.write("predictions.csv", pred);
  run.notes = {{"pearson_r", r.mean}, {"mse", mse}, {"n", examples.size()}};
  run.finish();
  out << "pearson_r " << format_double(r.mean) << " [" << format_double(r.lo) << ", " << format_double(r.hi)
      << "] mse " << format_double(mse) << " n " << examples.size() << "\n";
  return 0;
}

int cmd_cv_predict(const CvOpts& o, const Common& c, std::ostream& out) {
  Run run{"cv-predict", c.out_dir};
  json cfg = load_config(run, o.config);
  if (c.seed) cfg["seed"] = *c.seed;
  if (o.k) cfg["k"] = *o.k;
  run.config = cfg;
  auto tc = cfg.get<TrainConfig>();
  run.seed = tc.seed;
  const std::size_t k = cfg.value("k", std::size_t{6});

  const auto records = load_corpus(run, o.corpus);
  const auto source = load_source(single_embedding(cfg).second);
  const auto examples = build_examples(records, *source, tc.with_context);
  tc.model.input_dim = input_dim_of(examples, *source);
  const auto preds = cv_predict(examples, tc, k, tc.seed, worker_count(c.workers));

  std::string csv = "id,fold,empirical_rating,predicted_rating,score\n";
  for (std::size_t i = 0; i < preds.size(); ++i) {
    csv += csv_field(records[i].id) + "," + std::to_string(preds[i].fold) + "," +
           format_double(records[i].mean_rating) + "," + format_double(unscale_rating(preds[i].report.score)) + "," +
           format_double(preds[i].report.score) + "\n";
  }
  run.write("cv_predictions.csv", csv);
  run.finish();
  out << "out-of-fold predictions for " << preds.size() << " items over " << k << " folds\n";
  return 0;
}

int cmd_minimal_pairs(const PairsOpts& o, const Common& c, std::ostream& out) {
  Run run{"minimal-pairs", c.out_dir};
  run.seed = c.seed.value_or(0);
  run.config = {{"replicates", o.replicates}, {"seed", run.seed}};
  const auto m = load_model(run, o.model, o.embeddings);
  if (dynamic_cast<const PrecomputedEmbeddings*>(m.source.get())) {
    throw ValidationError("minimal pairs need an embedding source that can embed new sentences (glove)");
  }
  const std::string frames_text = read_file(o.frames);
  run.input("frames", o.frames, frames_text);
  const auto variants = generate_minimal_pairs(parse_frames(frames_text));
  const auto report = minimal_pair_report(score_variants(m.checkpoint.params, variants, *m.source), o.replicates,
                                          derive_seed(run.seed, "minimal-pairs"));
  run.write("variants.csv", variant_scores_csv(report));
  run.write("groups.csv", group_summary_csv(report));
  run.finish();
  for (const auto& g : report.groups) {
    out << g.dimension << "/" << g.level << " n=" << g.n << " mean " << format_double(g.rating.mean) << "\n";
  }
  return 0;
}

int cmd_attention(const AttentionOpts& o, const Common& c, std::ostream& out) {
  Run run{"attention", c.out_dir};
  run.seed = c.seed.value_or(0);
  run.config = {{"replicates", o.replicates}, {"seed", run.seed}, {"max_len", o.max_len}};
  const auto m = load_model(run, o.model, o.embeddings);
  auto records = load_corpus(run, o.corpus);
  if (!o.split.empty()) records = select(records, resolve_split(run, records, o.split, {}).test_ids);
  const auto samples = collect_attention(m.checkpoint.params, records, *m.source);
  const auto curves = attention_by_position(samples, o.max_len, o.replicates, derive_seed(run.seed, "attention/position"));
  const auto of = partitive_of_analysis(samples, o.replicates, derive_seed(run.seed, "attention/of"));
  run.write("attention_curves.csv", attention_curves_csv(curves));
  run.write("partitive_of.csv", partitive_of_csv(of));
  run.notes = {{"utterances_used", curves.utterances_used},
               {"excluded_no_some", curves.excluded_no_some},
               {"excluded_too_long", curves.excluded_too_long},
               {"multi_of_utterances", of.normalized_utterances}};
  run.finish();
  out << "utterances used " << curves.utterances_used << ", multi-of utterances " << of.normalized_utterances << "\n";
  return 0;
}

int cmd_regress(const RegressOpts& o, const Common& c, std::ostream& out) {
  Run run{"regress", c.out_dir};
  run.seed = c.seed.value_or(0);
  json spec_json = o.spec.empty() ? json::object() : load_config(run, o.spec);
  run.config = {{"spec", spec_json}, {"replicates", o.replicates}, {"seed", run.seed}};
  const auto spec = spec_json.get<RegressionSpec>();
  const auto records = load_corpus(run, o.corpus);

  const std::string pred_text = read_file(o.predictions);
  run.input("predictions", o.predictions, pred_text);
  const auto rows = parse_csv(pred_text);
  if (rows.empty()) throw SchemaError("predictions file is empty");
  const auto col = [&](const std::string& name) {
    auto it = std::find(rows[0].begin(), rows[0].end(), name);
    if (it == rows[0].end()) throw SchemaError("predictions file lacks column '" + name + "'");
    return static_cast<std::size_t>(it - rows[0].begin());
  };
  const std::size_t c_id = col("id"), c_pred = col("predicted_rating");
  std::map<std::string, double> nn;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() <= std::max(c_id, c_pred)) throw ValidationError("predictions row " + std::to_string(i) + " is too short");
    auto v = parse_double(rows[i][c_pred]);
    if (!v) throw ValidationError("predictions row " + std::to_string(i) + ": bad predicted_rating");
    nn[rows[i][c_id]] = *v;
  }
  std::vector<UtteranceRecord> used;
  for (const auto& r : records) {
    if (nn.contains(r.id)) used.push_back(r);
  }
  if (used.size() != nn.size()) throw LookupError("predictions name ids that are not in the corpus");

  const auto data = regression_data(used, &nn);
  const auto cmp = regression_compare(data, spec, o.replicates, derive_seed(run.seed, "regress"), worker_count(c.workers));
  run.write("coefficients.csv", coefficient_csv(cmp));
  run.notes = {{"items", cmp.items}};
  run.finish();
  for (const auto& row : cmp.rows) {
    out << row.term << " " << cell(row.beta_original) << " -> " << format_double(row.beta_extended);
    if (row.p_shrink) out << " p_shrink " << format_double(*row.p_shrink) << " " << row.stars;
    out << "\n";
  }
  return 0;
}

int cmd_ceiling(const CeilingOpts& o, const Common& c, std::ostream& out) {
  Run run{"ceiling", c.out_dir};
  run.seed = c.seed.value_or(0);
  run.config = {{"replicates", o.replicates}, {"seed", run.seed}};
  const auto records = load_corpus(run, o.corpus);
  std::vector<std::vector<double>> ratings;
  std::vector<double> with_ctx, without_ctx;
  for (const auto& r : records) {
    ratings.push_back(r.participant_ratings);
    if (!r.no_context_mean_rating) continue;
    with_ctx.push_back(r.mean_rating);
    without_ctx.push_back(*r.no_context_mean_rating);
  }
  const double ceiling = bootstrap_ceiling(ratings, o.replicates, derive_seed(run.seed, "ceiling"));
  std::string csv = "metric,value,lo,hi,n\nceiling," + format_double(ceiling) + ",,," + std::to_string(records.size()) + "\n";
  out << "ceiling " << format_double(ceiling) << "\n";
  if (!with_ctx.empty()) {
    const auto r =
        bootstrap_pearson_ci(with_ctx, without_ctx, o.replicates, 0.95, derive_seed(run.seed, "ceiling/no-context"));
    csv += "context_vs_no_context_r," + format_double(r.mean) + "," + format_double(r.lo) + "," + format_double(r.hi) +
           "," + std::to_string(with_ctx.size()) + "\n";
    out << "context vs no-context r " << format_double(r.mean) << " (n=" << with_ctx.size() << ")\n";
  }
  run.write("ceiling.csv", csv);
  run.finish();
  return 0;
}

void add_common(CLI::App* cmd, Common& c, bool parallel) {
  cmd->add_option("-o,--out-dir", c.out_dir, "Directory for outputs and manifest.json")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Top-level seed (overrides the config)");
  if (parallel) cmd->add_option("--workers", c.workers, "Worker threads (default: SIL_WORKERS or 1)");
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural models of scalar inference strength"};
  app.name("sil");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  Common common;
  const auto file = CLI::ExistingFile;

  ImportOpts imp;
  auto* c_import = app.add_subcommand("import", "Convert a ratings table into a corpus TSV");
  c_import->add_option("--mapping", imp.mapping, "Column mapping JSON")->required()->check(file);
  c_import->add_option("--input", imp.input, "Ratings table (CSV/TSV)")->required()->check(file);
  c_import->add_option("--no-context", imp.no_context, "Ratings collected without context")->check(file);
  add_common(c_import, common, false);

  TrainOpts tr;
  auto* c_train = app.add_subcommand("train", "Train one model on the training split");
  c_train->add_option("--config", tr.config, "Training config JSON")->check(file);
  c_train->add_option("--corpus", tr.corpus, "Corpus TSV")->required()->check(file);
  c_train->add_option("--split", tr.split, "Split manifest JSON (default: split by seed)")->check(file);
  c_train->add_option("--epochs", tr.epochs);
  c_train->add_option("--valid-fraction", tr.valid_fraction, "Hold out part of the training split for model selection");
  add_common(c_train, common, false);

  TuneOpts tu;
  auto* c_tune = app.add_subcommand("tune", "k-fold grid search over the training split");
  c_tune->add_option("--config", tu.config, "Base config with grid and embeddings")->required()->check(file);
  c_tune->add_option("--corpus", tu.corpus, "Corpus TSV")->required()->check(file);
  c_tune->add_option("--split", tu.split, "Split manifest JSON")->check(file);
  c_tune->add_option("-k,--folds", tu.k);
  c_tune->add_flag("--train-best", tu.train_best, "Retrain the winner on the whole training split");
  add_common(c_tune, common, true);

  EvalOpts ev;
  auto* c_eval = app.add_subcommand("eval", "Score a corpus with a trained model");
  c_eval->add_option("--model", ev.model)->required()->check(file);
  c_eval->add_option("--corpus", ev.corpus)->required()->check(file);
  c_eval->add_option("--split", ev.split, "Evaluate the test ids of this split only")->check(file);
  c_eval->add_option("--embeddings", ev.embeddings, "Embedding spec JSON (overrides the checkpoint)")->check(file);
  c_eval->add_option("-B,--replicates", ev.replicates)->capture_default_str();
  add_common(c_eval, common, false);

  CvOpts cv;
  auto* c_cv = app.add_subcommand("cv-predict", "Out-of-fold predictions for every item");
  c_cv->add_option("--config", cv.config, "Training config JSON")->required()->check(file);
  c_cv->add_option("--corpus", cv.corpus)->required()->check(file);
  c_cv->add_option("-k,--folds", cv.k);
  add_common(c_cv, common, true);

  PairsOpts mp;
  auto* c_pairs = app.add_subcommand("minimal-pairs", "Score the generated minimal-pair variants");
  c_pairs->add_option("--model", mp.model)->required()->check(file);
  c_pairs->add_option("--frames", mp.frames)->capture_default_str()->check(file);
  c_pairs->add_option("--embeddings", mp.embeddings)->check(file);
  c_pairs->add_option("-B,--replicates", mp.replicates)->capture_default_str();
  add_common(c_pairs, common, false);

  AttentionOpts at;
  auto* c_att = app.add_subcommand("attention", "Attention weight analyses");
  c_att->add_option("--model", at.model)->required()->check(file);
  c_att->add_option("--corpus", at.corpus)->required()->check(file);
  c_att->add_option("--split", at.split)->check(file);
  c_att->add_option("--embeddings", at.embeddings)->check(file);
  c_att->add_option("--max-len", at.max_len)->capture_default_str();
  c_att->add_option("-B,--replicates", at.replicates)->capture_default_str();
  add_common(c_att, common, false);

  RegressOpts rg;
  auto* c_reg = app.add_subcommand("regress", "Compare regressions with and without the model predictor");
  c_reg->add_option("--corpus", rg.corpus)->required()->check(file);
  c_reg->add_option("--predictions", rg.predictions, "CSV with id and predicted_rating")->required()->check(file);
  c_reg->add_option("--spec", rg.spec, "Regression spec JSON")->check(file);
  c_reg->add_option("-B,--replicates", rg.replicates)->capture_default_str();
  add_common(c_reg, common, true);

  CeilingOpts ce;
  auto* c_ceil = app.add_subcommand("ceiling", "Human agreement ceiling");
  c_ceil->add_option("--corpus", ce.corpus)->required()->check(file);
  c_ceil->add_option("-B,--replicates", ce.replicates)->capture_default_str();
  add_common(c_ceil, common, false);

  try {
    app.parse(argc, argv);
    if (*c_import) return cmd_import(imp, common, out);
    if (*c_train) return cmd_train(tr, common, out);
    if (*c_tune) return cmd_tune(tu, common, out);
    if (*c_eval) return cmd_eval(ev, common, out);
    if (*c_cv) return cmd_cv_predict(cv, common, out);
    if (*c_pairs) return cmd_minimal_pairs(mp, common, out);
    if (*c_att) return cmd_attention(at, common, out);
    if (*c_reg) return cmd_regress(rg, common, out);
    if (*c_ceil) return cmd_ceiling(ce, common, out);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const sil::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const LookupError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const IntegrityError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    err << "error: bad JSON: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace sil::cli
