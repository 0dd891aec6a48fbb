// Acceptance checks. One line per criterion part:
//   [PASS] / [FAIL] / [BLOCKED] <criterion> <name>: <detail>
//
// acceptance            checks that need no external data; exit 1 on any FAIL
// acceptance --dataset  full pipeline on the released ratings study; exit 77 if
//                       the data is not configured (see README)

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "sil/corpus.hpp"
#include "sil/embeddings.hpp"
#include "sil/error.hpp"
#include "sil/import.hpp"
#include "sil/metrics.hpp"
#include "sil/model.hpp"
#include "sil/optim.hpp"
#include "sil/probes.hpp"
#include "sil/trainer.hpp"
#include "sil/util.hpp"
#include "toy_data.hpp"

using namespace sil;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void line(const std::string& status, const std::string& id, const std::string& name, const std::string& detail) {
  if (status == "FAIL") ++failures;
  std::cout << "[" << status << "] " << id << " " << name << ": " << detail << std::endl;
}

void verdict(bool ok, const std::string& id, const std::string& name, const std::string& detail) {
  line(ok ? "PASS" : "FAIL", id, name, detail);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

Array random_array(std::size_t rows, std::size_t cols, Rng& rng) {
  Array a = Array::zeros(rows, cols);
  for (double& v : a.data()) v = rng.uniform(-1, 1);
  return a;
}

int run_cli(std::vector<std::string> args, std::string* err_out = nullptr) {
  args.insert(args.begin(), "sil");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cerr << "sil " << args[1] << " exited " << code << ": " << err.str();
  if (err_out) *err_out = err.str();
  return code;
}

std::vector<std::map<std::string, std::string>> read_csv_rows(const fs::path& path) {
  const auto rows = parse_csv(read_file(path));
  std::vector<std::map<std::string, std::string>> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::map<std::string, std::string> m;
    for (std::size_t j = 0; j < rows[0].size() && j < rows[i].size(); ++j) m[rows[0][j]] = rows[i][j];
    out.push_back(std::move(m));
  }
  return out;
}

double as_double(const std::string& s) { return parse_double(s).value_or(std::nan("")); }

// ---- criterion 1 ----

void gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(derive_seed(1, "acceptance/gradcheck"));
  double worst = 0.0;
  std::string worst_case;
  for (int i = 0; i < 50; ++i) {
    ModelConfig cfg;
    cfg.input_dim = 1 + rng.below(6);
    cfg.hidden_dim = 1 + rng.below(8);
    cfg.dropout = rng.bernoulli(0.5) ? 0.0 : rng.uniform(0.0, 0.5);
    cfg.pooling = rng.bernoulli(0.5) ? Pooling::attention : Pooling::final_state;
    cfg.seed = rng.next_u64();
    const std::size_t steps = 1 + rng.below(5);
    const Array x = random_array(steps, cfg.input_dim, rng);
    const double target = rng.uniform();
    const std::uint64_t mask_seed = rng.next_u64();
    const auto params = init_params(cfg);
    ModelParams owner;
    GraphBuilder build = [&](Tape& tape, const ParamMap& ps) {
      owner = ModelParams{cfg, ps};
      Rng mask_rng(mask_seed);
      auto out = forward(tape, owner, x, ForwardMode::train(mask_rng));
      return ops::mse(out.score, Array::scalar(target));
    };
    const double err = finite_diff_check(build, params.tensors, 1e-4);
    if (err > worst) {
      worst = err;
      worst_case = "hidden " + std::to_string(cfg.hidden_dim) + ", T " + std::to_string(steps) + ", " +
                   to_string(cfg.pooling);
    }
  }
  const double secs = seconds_since(t0);
  verdict(worst < 1e-4 && secs < 60, "1", "gradient correctness",
          "max relative error " + num(worst) + " over 50 cases (worst: " + worst_case + "), " + num(secs) + " s");
}

// ---- criterion 2 (and its determinism part of 8) ----

std::vector<Example> memorization_items() {
  Rng rng(derive_seed(2, "acceptance/memorize"));
  std::vector<Example> items;
  for (int i = 0; i < 8; ++i) {
    Example e;
    e.id = "m" + std::to_string(i);
    e.inputs = random_array(3 + rng.below(4), 8, rng);
    e.target = rng.uniform(0.1, 0.9);
    items.push_back(std::move(e));
  }
  return items;
}

TrainConfig memorization_config() {
  TrainConfig cfg;
  cfg.model.input_dim = 8;
  cfg.model.hidden_dim = 32;
  cfg.model.dropout = 0.0;
  cfg.model.pooling = Pooling::attention;
  cfg.epochs = 500;
  cfg.batch_size = 4;
  cfg.lr = 0.01;
  cfg.seed = 2;
  return cfg;
}

bool memorization() {
  const auto items = memorization_items();
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = train(items, {}, memorization_config());
  const double secs = seconds_since(t0);
  const double mse = mean_squared_error(scores_of(predict_all(result.params, items)), targets_of(items));
  std::size_t first = 0;
  for (const auto& e : result.curve) {
    if (e.train_mse < 1e-3) {
      first = e.epoch;
      break;
    }
  }
  verdict(mse < 1e-3 && secs < 60 && !result.aborted, "2", "memorization sanity",
          "train MSE " + num(mse) + " after 500 epochs (epoch-mean below 1e-3 from epoch " + std::to_string(first) +
              "), " + num(secs) + " s");

  const auto again = train(items, {}, memorization_config());
  const bool same = serialize_checkpoint(again.params) == serialize_checkpoint(result.params) &&
                    learning_curve_csv(again.curve) == learning_curve_csv(result.curve);
  return same;
}

// ---- criterion 5 (generation) ----

void minimal_pair_suite() {
  const auto variants = generate_minimal_pairs(load_frames(fs::path(SIL_DATA_DIR) / "frames.tsv"));
  std::set<std::string> ids;
  for (const auto& v : variants) ids.insert(v.id);
  verdict(variants.size() == 800 && ids.size() == 800, "5a", "minimal pairs count",
          std::to_string(variants.size()) + " variants, " + std::to_string(ids.size()) + " unique");

  const std::map<std::string, std::string> golden{
      {"farmers-10111", "Some of the organic farmers in the mountains milked the brown goats who graze on the meadows."},
      {"farmers-10011", "Some organic farmers in the mountains milked the brown goats who graze on the meadows."},
      {"farmers-00111", "The organic farmers in the mountains milked some of the brown goats who graze on the meadows."},
      {"farmers-11111",
       "The brown goats who graze on the meadows were milked by some of the organic farmers in the mountains."},
      {"farmers-01111",
       "Some of the brown goats who graze on the meadows were milked by the organic farmers in the mountains."},
      {"waiters-10111",
       "Some of the attentive waiters at the gallery opening poured the white wine that my friend really likes."},
      {"waiters-00111",
       "The attentive waiters at the gallery opening poured some of the white wine that my friend really likes."},
  };
  std::size_t matched = 0;
  std::string first_miss;
  for (const auto& [id, text] : golden) {
    auto it = std::find_if(variants.begin(), variants.end(), [&](const auto& v) { return v.id == id; });
    if (it != variants.end() && it->text == text) {
      ++matched;
    } else if (first_miss.empty()) {
      first_miss = id;
    }
  }
  verdict(matched == golden.size(), "5b", "golden strings",
          std::to_string(matched) + "/" + std::to_string(golden.size()) + " byte-exact" +
              (first_miss.empty() ? "" : ", first mismatch " + first_miss));
}

// ---- criterion 6 (weights sum to one) ----

void attention_sums() {
  const auto s = toy::study(40, 6);
  const auto records = import_table(s.table, nlohmann::json::parse(s.mapping).get<ImportMapping>());
  const auto glove = parse_glove(toy::glove(6, 3));
  ModelConfig cfg;
  cfg.input_dim = 6;
  cfg.hidden_dim = 8;
  cfg.seed = 6;
  const auto params = init_params(cfg);
  double worst = 0.0;
  std::size_t vectors = 0;
  for (const auto& sample : collect_attention(params, records, glove)) {
    double sum = 0.0;
    for (double w : sample.weights) sum += w;
    worst = std::max(worst, std::abs(sum - 1.0));
    ++vectors;
  }
  for (const auto& v : generate_minimal_pairs(load_frames(fs::path(SIL_DATA_DIR) / "frames.tsv"))) {
    const auto p = predict(params, glove.embed_tokens(v.tokens), v.id);
    double sum = 0.0;
    for (double w : p.attention) sum += w;
    worst = std::max(worst, std::abs(sum - 1.0));
    ++vectors;
  }
  verdict(worst <= 1e-9, "6a", "attention weights sum to 1",
          "max |sum - 1| " + num(worst) + " over " + std::to_string(vectors) + " vectors");
}

// ---- criterion 7 (synthetic) ----

void regression_synthetic() {
  // nn = 2*x1 + u carries x1 plus a component u that is orthogonal (in sample)
  // to every regressor, so only x1's coefficient should move.
  Rng rng(derive_seed(7, "acceptance/regression"));
  const std::size_t n = 400;
  RegressionData raw;
  for (std::size_t i = 0; i < n; ++i) {
    raw.ids.push_back("r" + std::to_string(i));
    raw.columns["x1"].push_back(rng.uniform(-1, 1));
    raw.columns["x2"].push_back(rng.uniform(-1, 1));
    raw.columns["b"].push_back(rng.bernoulli(0.4) ? 1.0 : 0.0);
    raw.y.push_back(rng.uniform(-1, 1));
  }
  RegressionSpec plain;
  plain.predictors = {"x1", "x2", "b"};
  plain.standardize = false;
  const auto proj = fit_ols(raw, plain, false);

  RegressionData d = raw;
  d.y.clear();
  d.binary = {"b"};
  for (std::size_t i = 0; i < n; ++i) {
    double u = raw.y[i] - proj.intercept;
    for (std::size_t j = 0; j < proj.terms.size(); ++j) u -= proj.beta[j] * raw.columns.at(proj.terms[j])[i];
    const double x1 = raw.columns["x1"][i], x2 = raw.columns["x2"][i], b = raw.columns["b"][i];
    d.columns["nn"].push_back(2 * x1 + u);
    d.y.push_back(2 * x1 + u + x2 + 0.5 * b + 0.3 * rng.uniform(-1, 1));
  }
  RegressionSpec spec;
  spec.predictors = {"x1", "x2", "b"};
  const auto cmp = regression_compare(d, spec, 2000, 7, worker_count());
  bool ok = true;
  std::string detail;
  for (const auto& r : cmp.rows) {
    if (!r.p_shrink) continue;
    const double p = *r.p_shrink;
    ok = ok && (r.term == "x1" ? p > 0.95 : (p >= 0.2 && p <= 0.8));
    detail += (detail.empty() ? "" : ", ") + r.term + (r.term == "x1" ? " (mediated)" : "") + " p_shrink " + num(p);
  }
  verdict(ok, "7a", "regression probe, synthetic", detail);
}

// ---- criterion 8 via the command-line tool ----

void determinism(bool memorization_same) {
  verdict(memorization_same, "8a", "determinism, criterion 2", "retraining gives byte-identical parameters and curve");

  const fs::path dir = fs::temp_directory_path() / ("sil_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  const auto s = toy::study(40, 8);
  toy::write(dir / "table.csv", s.table);
  toy::write(dir / "mapping.json", s.mapping);
  toy::write(dir / "glove.txt", toy::glove(6, 4));
  toy::write(dir / "train.json", R"({"model": {"hidden_dim": 6}, "epochs": 5, "batch_size": 4, "lr": 0.01,
    "embeddings": {"type": "glove", "path": ")" + (dir / "glove.txt").string() + "\"}}");
  bool ok = run_cli({"import", "--mapping", (dir / "mapping.json").string(), "--input", (dir / "table.csv").string(),
                     "-o", (dir / "data").string()}) == 0;
  for (const char* run : {"a", "b"}) {
    const auto out = dir / run;
    ok = ok && run_cli({"train", "--config", (dir / "train.json").string(), "--corpus", (dir / "data/corpus.tsv").string(),
                        "--seed", "7", "-o", out.string()}) == 0;
    ok = ok && run_cli({"minimal-pairs", "--model", (out / "model.bin").string(), "-B", "200", "--seed", "7", "-o",
                        out.string()}) == 0;
  }
  std::size_t identical = 0;
  const std::vector<std::string> files{"model.bin", "learning_curve.csv", "split.json", "variants.csv", "groups.csv"};
  for (const auto& f : files) {
    if (ok && read_file(dir / "a" / f) == read_file(dir / "b" / f)) ++identical;
  }
  fs::remove_all(dir);
  verdict(ok && identical == files.size(), "8b", "determinism, criterion 5 via sil train + minimal-pairs",
          std::to_string(identical) + "/" + std::to_string(files.size()) + " outputs byte-identical across reruns");
}

// ---- dataset mode ----

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

int dataset_mode() {
  const char* table = env("SIL_DATA_TABLE");
  const char* mapping = env("SIL_DATA_MAPPING");
  const char* glove = env("SIL_GLOVE");
  const char* no_context = env("SIL_DATA_NO_CONTEXT");
  if (!table || !mapping || !glove) {
    const std::string why = "set SIL_DATA_TABLE, SIL_DATA_MAPPING and SIL_GLOVE to the released ratings study";
    for (const auto& [id, name] : std::vector<std::pair<std::string, std::string>>{
             {"3", "dataset reproduction"},
             {"4", "held-out model quality"},
             {"5c", "minimal-pair orderings"},
             {"6b", "attention corpus counts and some-weight"},
             {"7b", "regression probe, corpus"},
             {"8c", "determinism, criterion 4"}}) {
      line("BLOCKED", id, name, why);
    }
    return 77;
  }
  const fs::path dir = env("SIL_ACCEPT_OUT") ? fs::path(env("SIL_ACCEPT_OUT")) : fs::path("acceptance_dataset_out");
  const std::string seed = env("SIL_ACCEPT_SEED") ? env("SIL_ACCEPT_SEED") : "0";
  const auto p = [&](const std::string& rel) { return (dir / rel).string(); };

  // 3
  std::vector<std::string> import_args{"import", "--mapping", mapping, "--input", table, "-o", p("data")};
  if (no_context) {
    import_args.push_back("--no-context");
    import_args.push_back(no_context);
  }
  if (run_cli(import_args) != 0) {
    line("FAIL", "3", "dataset reproduction", "import failed");
    return 1;
  }
  const auto records = parse_corpus(p("data/corpus.tsv"));
  const auto s = split(records, 0.7, std::stoull(seed));
  verdict(records.size() == 1362, "3", "import record count", std::to_string(records.size()) + " records");
  verdict(s.train_ids.size() == 954 && s.test_ids.size() == 408, "3", "split sizes",
          std::to_string(s.train_ids.size()) + "/" + std::to_string(s.test_ids.size()));
  run_cli({"ceiling", "--corpus", p("data/corpus.tsv"), "-B", "1000", "--seed", seed, "-o", p("ceiling")});
  for (const auto& row : read_csv_rows(p("ceiling/ceiling.csv"))) {
    const double v = as_double(row.at("value"));
    if (row.at("metric") == "ceiling") {
      verdict(v >= 0.91 && v <= 0.95, "3", "bootstrap ceiling", num(v));
    } else if (row.at("metric") == "context_vs_no_context_r") {
      verdict(std::abs(v - 0.68) <= 0.02, "3", "context vs no-context r", num(v));
    }
  }
  if (!no_context) line("BLOCKED", "3", "context vs no-context r", "SIL_DATA_NO_CONTEXT not set");

  // 4: tune then retrain the winner on the training split
  nlohmann::json tune_cfg = {{"epochs", 40}, {"batch_size", 32}, {"lr", 0.001}, {"k", 5}, {"seed", std::stoull(seed)},
                             {"embeddings", {{"type", "glove"}, {"path", glove}, {"name", "glove"}}},
                             {"grid", {{"hidden_dim", {100, 200, 400, 800}}, {"dropout", {0.1, 0.2, 0.3, 0.4}},
                                       {"pooling", {"attention"}}, {"with_context", {false}}}}};
  if (const char* grid = env("SIL_ACCEPT_GRID")) tune_cfg["grid"] = nlohmann::json::parse(grid);
  toy::write(dir / "tune.json", tune_cfg.dump(2));
  const auto t0 = std::chrono::steady_clock::now();
  if (run_cli({"tune", "--config", p("tune.json"), "--corpus", p("data/corpus.tsv"), "--train-best", "-o", p("tune")}) != 0) {
    line("FAIL", "4", "held-out model quality", "tune failed");
    return 1;
  }
  const double tune_secs = seconds_since(t0);
  run_cli({"eval", "--model", p("tune/model.bin"), "--corpus", p("data/corpus.tsv"), "--split", p("tune/split.json"),
           "--seed", seed, "-o", p("eval")});
  double r = std::nan("");
  for (const auto& row : read_csv_rows(p("eval/report.csv"))) {
    if (row.at("metric") == "pearson_r") r = as_double(row.at("value"));
  }
  verdict(r >= 0.5 && tune_secs < 7200, "4", "held-out model quality",
          "test r " + num(r) + " (floor 0.5), tune " + num(tune_secs / 60) + " min");

  // 5
  run_cli({"minimal-pairs", "--model", p("tune/model.bin"), "--seed", seed, "-o", p("pairs")});
  std::map<std::string, double> g;
  for (const auto& row : read_csv_rows(p("pairs/groups.csv"))) g[row.at("dimension") + "/" + row.at("level")] = as_double(row.at("mean"));
  verdict(g["partitive/partitive"] > g["partitive/no_partitive"] && g["function/subject"] > g["function/other"] &&
              g["modification/unmodified"] > g["modification/modified"],
          "5c", "minimal-pair orderings",
          "partitive " + num(g["partitive/partitive"]) + " vs " + num(g["partitive/no_partitive"]) + ", subject " +
              num(g["function/subject"]) + " vs " + num(g["function/other"]) + ", unmodified " +
              num(g["modification/unmodified"]) + " vs " + num(g["modification/modified"]));

  // 6
  run_cli({"attention", "--model", p("tune/model.bin"), "--corpus", p("data/corpus.tsv"), "--seed", seed, "-o", p("attention")});
  const auto notes = nlohmann::json::parse(read_file(p("attention/manifest.json"))).at("notes");
  std::map<std::string, std::pair<double, double>> weighted;
  for (const auto& row : read_csv_rows(p("attention/attention_curves.csv"))) {
    if (row.at("analysis") != "some_vs_other") continue;
    auto& [sum, n] = weighted[row.at("group")];
    sum += as_double(row.at("mean")) * as_double(row.at("n"));
    n += as_double(row.at("n"));
  }
  const double some_w = weighted["some"].first / weighted["some"].second;
  const double other_w = weighted["other"].first / weighted["other"].second;
  verdict(notes.at("utterances_used") == 1028, "6b", "length filter", notes.at("utterances_used").dump() + " utterances");
  verdict(notes.at("multi_of_utterances") == 128, "6b", "multi-of subset", notes.at("multi_of_utterances").dump() + " utterances");
  verdict(some_w > other_w, "6b", "some-weight", "mean weight on some " + num(some_w) + " vs other " + num(other_w));

  // 7
  auto best = nlohmann::json::parse(read_file(p("tune/best_config.json")));
  best["k"] = 6;
  toy::write(dir / "best_cv.json", best.dump(2));
  run_cli({"cv-predict", "--config", p("best_cv.json"), "--corpus", p("data/corpus.tsv"), "-o", p("cv")});
  run_cli({"regress", "--corpus", p("data/corpus.tsv"), "--predictions", p("cv/cv_predictions.csv"), "--seed", seed,
           "-o", p("regress")});
  std::map<std::string, double> shrink;
  for (const auto& row : read_csv_rows(p("regress/coefficients.csv"))) shrink[row.at("term")] = as_double(row.at("p_shrink"));
  verdict(shrink["partitive"] > 0.5 && shrink["subjecthood"] > 0.5 && shrink["modification"] > 0.5, "7b",
          "regression probe, corpus",
          "p_shrink partitive " + num(shrink["partitive"]) + ", subjecthood " + num(shrink["subjecthood"]) +
              ", modification " + num(shrink["modification"]));

  // 8: retrain the tuned configuration twice
  bool same = true;
  for (const char* run : {"again_a", "again_b"}) {
    same = same && run_cli({"train", "--config", p("tune/best_config.json"), "--corpus", p("data/corpus.tsv"), "--split",
                            p("tune/split.json"), "-o", p(run)}) == 0;
  }
  same = same && read_file(p("again_a/model.bin")) == read_file(p("again_b/model.bin"));
  verdict(same, "8c", "determinism, criterion 4", "retrained tuned model byte-identical");
  return failures ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    if (argc > 1 && std::string(argv[1]) == "--dataset") return dataset_mode();
    gradient_correctness();
    const bool same = memorization();
    minimal_pair_suite();
    attention_sums();
    regression_synthetic();
    determinism(same);
    line("BLOCKED", "3-7", "dataset parts", "run `acceptance --dataset` (ctest: acceptance_dataset)");
  } catch (const std::exception& e) {
    line("FAIL", "-", "unexpected error", e.what());
  }
  return failures ? 1 : 0;
}
