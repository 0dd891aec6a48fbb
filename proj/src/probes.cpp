#include "sil/probes.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <tuple>
#include <unordered_map>

#include <Eigen/Dense>

#include "sil/error.hpp"
#include "sil/rng.hpp"
#include "sil/util.hpp"

namespace sil {

// ---- minimal pairs ----

namespace {

const std::vector<std::string> kFrameColumns = {"frame_id", "det",      "subj_pre",    "subj_head",    "subj_post",
                                                "obj_pre",  "obj_head", "obj_post",    "verb_active",  "verb_passive"};

bool has_word_some(const std::string& s) {
  for (const auto& t : tokenize(s)) {
    if (t == "some") return true;
  }
  return false;
}

std::string some_np(const VariantFeatures& f, const std::string& pre, const std::string& head, const std::string& post) {
  std::string np = "some";
  if (f.partitive) np += " of the";
  if (f.prenominal) np += " " + pre;
  np += " " + head;
  if (f.postnominal) np += " " + post;
  return np;
}

std::string full_np(const std::string& det, const std::string& pre, const std::string& head, const std::string& post) {
  return det + " " + pre + " " + head + " " + post;
}

std::string bits(const VariantFeatures& f) {
  std::string s;
  for (bool b : {f.some_subject, f.passive, f.partitive, f.prenominal, f.postnominal}) s += b ? '1' : '0';
  return s;
}

std::string flag(bool b) { return b ? "1" : "0"; }

}  // namespace

std::vector<SentenceFrame> parse_frames(const std::string& text) {
  auto lines = split_string(text, '\n');
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw SchemaError("frames: missing header line");
  const auto header = split_string(lines.front(), '\t');
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const auto& name : kFrameColumns) {
    if (!col.contains(name)) throw SchemaError("frames: missing column '" + name + "'");
  }

  std::vector<SentenceFrame> frames;
  std::set<std::string> ids, verbs;
  std::set<std::pair<std::string, std::string>> pairs;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const auto fields = split_string(lines[li], '\t');
    if (fields.size() != header.size()) {
      throw ValidationError("frames row " + std::to_string(li) + ": expected " + std::to_string(header.size()) +
                            " fields, got " + std::to_string(fields.size()));
    }
    auto get = [&](const std::string& name) { return fields[col.at(name)]; };
    SentenceFrame f{get("frame_id"), get("det"),      get("subj_pre"),    get("subj_head"),    get("subj_post"),
                    get("obj_pre"),  get("obj_head"), get("obj_post"),    get("verb_active"),  get("verb_passive"),
                    col.contains("tail") ? get("tail") : std::string()};
    const std::string ctx = "frames row " + std::to_string(li) + " ('" + f.id + "')";
    for (const auto& name : kFrameColumns) {
      if (get(name).empty()) throw ValidationError(ctx + ": empty slot '" + name + "'");
    }
    for (const auto& name : header) {
      if (has_word_some(get(name)) && name != "frame_id") {
        throw ValidationError(ctx + ": slot '" + name + "' already contains 'some'");
      }
    }
    if (!ids.insert(f.id).second) throw ValidationError(ctx + ": duplicate frame id");
    if (!verbs.insert(f.verb_active).second) throw ValidationError(ctx + ": verb '" + f.verb_active + "' reused");
    if (!pairs.emplace(f.subj_head, f.obj_head).second) throw ValidationError(ctx + ": NP pair reused");
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<SentenceFrame> load_frames(const std::filesystem::path& path) { return parse_frames(read_file(path)); }

std::string realize(const SentenceFrame& fr, const VariantFeatures& f) {
  const std::string subj = f.some_subject ? some_np(f, fr.subj_pre, fr.subj_head, fr.subj_post)
                                          : full_np(fr.det, fr.subj_pre, fr.subj_head, fr.subj_post);
  const std::string obj = f.some_subject ? full_np(fr.det, fr.obj_pre, fr.obj_head, fr.obj_post)
                                         : some_np(f, fr.obj_pre, fr.obj_head, fr.obj_post);
  std::string s = f.passive ? obj + " " + fr.verb_passive + " by " + subj : subj + " " + fr.verb_active + " " + obj;
  if (!fr.tail.empty()) s += " " + fr.tail;
  s += ".";
  s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::vector<MinimalPairVariant> generate_minimal_pairs(const std::vector<SentenceFrame>& frames) {
  std::vector<MinimalPairVariant> out;
  out.reserve(frames.size() * 32);
  for (const auto& fr : frames) {
    for (unsigned code = 0; code < 32; ++code) {
      VariantFeatures f;
      f.some_subject = code & 16u;
      f.passive = code & 8u;
      f.partitive = code & 4u;
      f.prenominal = code & 2u;
      f.postnominal = code & 1u;
      MinimalPairVariant v;
      v.frame_id = fr.id;
      v.features = f;
      v.id = fr.id + "-" + bits(f);
      v.text = realize(fr, f);
      v.tokens = tokenize(v.text);
      const auto n_some = std::count(v.tokens.begin(), v.tokens.end(), "some");
      if (n_some != 1) throw ValidationError("frame '" + fr.id + "' realizes " + std::to_string(n_some) + " 'some' tokens");
      v.some_index = static_cast<std::size_t>(std::find(v.tokens.begin(), v.tokens.end(), "some") - v.tokens.begin());
      out.push_back(std::move(v));
    }
  }
  return out;
}

std::vector<VariantScore> score_variants(const ModelParams& params, const std::vector<MinimalPairVariant>& variants,
                                         const EmbeddingSource& source) {
  std::vector<VariantScore> out;
  out.reserve(variants.size());
  for (const auto& v : variants) {
    UtteranceRecord r;
    r.id = v.id;
    r.tokens = v.tokens;
    r.features.utterance_length = static_cast<int>(v.tokens.size());
    const auto cut = truncate(r, TruncationMode::target_only);
    const auto report = predict(params, source.embed(cut, false), v.id);
    out.push_back({v.id, v.frame_id, v.features, unscale_rating(report.score)});
  }
  return out;
}

MinimalPairReport minimal_pair_report(std::vector<VariantScore> scores, std::size_t replicates, std::uint64_t seed) {
  MinimalPairReport report;
  report.scores = std::move(scores);
  struct Dim {
    const char* name;
    const char* yes;
    const char* no;
    bool (*test)(const VariantFeatures&);
  };
  const Dim dims[] = {
      {"partitive", "partitive", "no_partitive", [](const VariantFeatures& f) { return f.partitive; }},
      {"function", "subject", "other", [](const VariantFeatures& f) { return f.surface_subject(); }},
      {"modification", "unmodified", "modified", [](const VariantFeatures& f) { return !f.modified(); }},
      {"prenominal", "prenominal", "no_prenominal", [](const VariantFeatures& f) { return f.prenominal; }},
      {"postnominal", "postnominal", "no_postnominal", [](const VariantFeatures& f) { return f.postnominal; }},
  };
  for (const auto& d : dims) {
    for (bool side : {true, false}) {
      std::vector<double> values;
      for (const auto& s : report.scores) {
        if (d.test(s.features) == side) values.push_back(s.rating);
      }
      if (values.empty()) continue;
      const std::string level = side ? d.yes : d.no;
      GroupSummary g{d.name, level, values.size(),
                     bootstrap_mean_ci(values, replicates, 0.95, derive_seed(seed, std::string("mp/") + d.name + "/" + level))};
      report.groups.push_back(g);
    }
  }
  return report;
}

std::string variant_scores_csv(const MinimalPairReport& report) {
  std::string out =
      "variant_id,frame_id,some_subject,passive,partitive,prenominal,postnominal,surface_subject,modified,rating\n";
  for (const auto& s : report.scores) {
    const auto& f = s.features;
    out += s.id + "," + s.frame_id + "," + flag(f.some_subject) + "," + flag(f.passive) + "," + flag(f.partitive) +
           "," + flag(f.prenominal) + "," + flag(f.postnominal) + "," + flag(f.surface_subject()) + "," +
           flag(f.modified()) + "," + format_double(s.rating) + "\n";
  }
  return out;
}

std::string group_summary_csv(const MinimalPairReport& report) {
  std::string out = "dimension,level,n,mean,lo,hi\n";
  for (const auto& g : report.groups) {
    out += g.dimension + "," + g.level + "," + std::to_string(g.n) + "," + format_double(g.rating.mean) + "," +
           format_double(g.rating.lo) + "," + format_double(g.rating.hi) + "\n";
  }
  return out;
}

// ---- attention ----

std::vector<AttentionSample> collect_attention(const ModelParams& params, const std::vector<UtteranceRecord>& records,
                                               const EmbeddingSource& source) {
  if (params.config.pooling != Pooling::attention) {
    throw ContractViolation("attention probes need a model with attention pooling");
  }
  std::vector<AttentionSample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const auto cut = truncate(r, TruncationMode::target_only);
    const auto report = predict(params, source.embed(cut, false), r.id);
    if (report.attention.size() != cut.tokens.size()) {
      throw ContractViolation("attention length " + std::to_string(report.attention.size()) + " != token count " +
                              std::to_string(cut.tokens.size()) + " for '" + r.id + "'");
    }
    AttentionSample s;
    s.id = r.id;
    s.weights = report.attention;
    s.untruncated_length = r.tokens.size();
    s.some_index = cut.some_index;
    s.subject = r.features.subjecthood == 1;
    s.of_partitive = cut.of_partitive_indices;
    s.of_other = cut.of_other_indices;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<double> renormalize_without(std::span<const double> weights, std::size_t drop) {
  if (drop >= weights.size()) throw ContractViolation("renormalize_without: index out of range");
  double rest = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (i != drop) rest += weights[i];
  }
  if (!(rest > 0.0)) throw NumericError("renormalize_without: no weight left to renormalize");
  std::vector<double> out(weights.size(), 0.0);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (i != drop) out[i] = weights[i] / rest;
  }
  return out;
}

std::vector<double> renormalize_subset(std::span<const double> weights, std::span<const std::size_t> indices) {
  double total = 0.0;
  for (auto i : indices) {
    if (i >= weights.size()) throw ContractViolation("renormalize_subset: index out of range");
    total += weights[i];
  }
  if (!(total > 0.0)) throw NumericError("renormalize_subset: selected weights sum to zero");
  std::vector<double> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(weights[i] / total);
  return out;
}

AttentionReport attention_by_position(const std::vector<AttentionSample>& samples, std::size_t max_len,
                                      std::size_t replicates, std::uint64_t seed) {
  using Key = std::tuple<std::string, std::string, std::size_t>;
  std::map<Key, std::vector<double>> cells;
  AttentionReport report;
  for (const auto& s : samples) {
    if (!s.some_index || *s.some_index >= s.weights.size()) {
      ++report.excluded_no_some;
      continue;
    }
    if (s.untruncated_length > max_len) {
      ++report.excluded_too_long;
      continue;
    }
    ++report.utterances_used;
    const std::size_t some = *s.some_index;
    cells[{"some_vs_other", "some", some}].push_back(s.weights[some]);
    for (std::size_t t = 0; t < s.weights.size(); ++t) {
      if (t != some) cells[{"some_vs_other", "other", t}].push_back(s.weights[t]);
    }
    if (s.weights.size() < 2) continue;
    const auto renorm = renormalize_without(s.weights, some);
    const std::string group = s.subject ? "subject" : "non_subject";
    for (std::size_t t = 0; t < renorm.size(); ++t) {
      if (t != some) cells[{"subject_renormalized", group, t}].push_back(renorm[t]);
    }
  }
  for (const auto& [key, values] : cells) {
    const auto& [analysis, group, position] = key;
    const auto s = derive_seed(seed, analysis + "/" + group + "/" + std::to_string(position));
    report.curves.push_back({analysis, group, position, values.size(), bootstrap_mean_ci(values, replicates, 0.95, s)});
  }
  return report;
}

PartitiveOfReport partitive_of_analysis(const std::vector<AttentionSample>& samples, std::size_t replicates,
                                        std::uint64_t seed) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> cells;
  PartitiveOfReport report;
  for (const auto& s : samples) {
    std::vector<std::size_t> idx;
    std::vector<bool> is_partitive;
    for (auto i : s.of_partitive) {
      if (i < s.weights.size()) {
        idx.push_back(i);
        is_partitive.push_back(true);
        cells[{"raw", "partitive"}].push_back(s.weights[i]);
      }
    }
    for (auto i : s.of_other) {
      if (i < s.weights.size()) {
        idx.push_back(i);
        is_partitive.push_back(false);
        cells[{"raw", "other"}].push_back(s.weights[i]);
      }
    }
    if (idx.size() < 2) continue;
    ++report.normalized_utterances;
    const auto renorm = renormalize_subset(s.weights, idx);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      cells[{"normalized", is_partitive[k] ? "partitive" : "other"}].push_back(renorm[k]);
    }
  }
  for (const char* mode : {"raw", "normalized"}) {
    for (const char* klass : {"partitive", "other"}) {
      auto it = cells.find({mode, klass});
      if (it == cells.end()) continue;
      const auto s = derive_seed(seed, std::string("of/") + mode + "/" + klass);
      report.rows.push_back({mode, klass, it->second.size(), bootstrap_mean_ci(it->second, replicates, 0.95, s)});
    }
  }
  return report;
}

std::string attention_curves_csv(const AttentionReport& report) {
  std::string out = "analysis,group,position,n,mean,lo,hi\n";
  for (const auto& c : report.curves) {
    out += c.analysis + "," + c.group + "," + std::to_string(c.position) + "," + std::to_string(c.n) + "," +
           format_double(c.weight.mean) + "," + format_double(c.weight.lo) + "," + format_double(c.weight.hi) + "\n";
  }
  return out;
}

std::string partitive_of_csv(const PartitiveOfReport& report) {
  std::string out = "mode,class,n,mean,lo,hi\n";
  for (const auto& r : report.rows) {
    out += r.mode + "," + r.klass + "," + std::to_string(r.n) + "," + format_double(r.weight.mean) + "," +
           format_double(r.weight.lo) + "," + format_double(r.weight.hi) + "\n";
  }
  return out;
}

// ---- regression ----

RegressionData regression_data(const std::vector<UtteranceRecord>& records, const std::map<std::string, double>* nn) {
  RegressionData d;
  d.binary = {"partitive", "mention", "subjecthood", "modification"};
  for (const char* c : {"partitive", "strength", "mention", "subjecthood", "modification", "utterance_length"}) {
    d.columns[c];
  }
  if (nn) d.columns["nn"];
  for (const auto& r : records) {
    d.ids.push_back(r.id);
    d.y.push_back(r.mean_rating);
    const auto& f = r.features;
    d.columns["partitive"].push_back(f.partitive);
    d.columns["strength"].push_back(f.determiner_strength);
    d.columns["mention"].push_back(f.linguistic_mention);
    d.columns["subjecthood"].push_back(f.subjecthood);
    d.columns["modification"].push_back(f.modification);
    d.columns["utterance_length"].push_back(f.utterance_length);
    if (nn) {
      auto it = nn->find(r.id);
      if (it == nn->end()) throw LookupError("no NN prediction for record '" + r.id + "'");
      d.columns["nn"].push_back(it->second);
    }
  }
  return d;
}

std::vector<std::string> RegressionSpec::term_names() const {
  std::vector<std::string> out = predictors;
  for (const auto& [a, b] : interactions) out.push_back(a + ":" + b);
  return out;
}

void RegressionSpec::validate(const RegressionData& data) const {
  if (predictors.empty()) throw ContractViolation("regression: no predictors");
  std::set<std::string> seen;
  for (const auto& p : predictors) {
    if (!seen.insert(p).second) throw ContractViolation("regression: predictor '" + p + "' listed twice");
    if (!data.columns.contains(p)) throw ContractViolation("regression: unknown predictor '" + p + "'");
  }
  std::set<std::string> inter;
  for (const auto& [a, b] : interactions) {
    if (!seen.contains(a) || !seen.contains(b)) {
      throw ContractViolation("regression: interaction " + a + ":" + b + " uses an undeclared main effect");
    }
    if (a == b || !inter.insert(a < b ? a + ":" + b : b + ":" + a).second) {
      throw ContractViolation("regression: bad or repeated interaction " + a + ":" + b);
    }
  }
  for (const auto& [name, col] : data.columns) {
    if (col.size() != data.y.size()) throw ContractViolation("regression: column '" + name + "' has the wrong length");
  }
}

void from_json(const nlohmann::json& j, RegressionSpec& s) {
  s = RegressionSpec{};
  if (j.contains("predictors")) s.predictors = j.at("predictors").get<std::vector<std::string>>();
  if (j.contains("interactions")) {
    for (const auto& term : j.at("interactions")) {
      const auto parts = split_string(term.get<std::string>(), ':');
      if (parts.size() != 2) throw ContractViolation("regression: interaction must look like 'a:b'");
      s.interactions.emplace_back(parts[0], parts[1]);
    }
  }
  s.standardize = j.value("standardize", s.standardize);
  s.nn_column = j.value("nn_column", s.nn_column);
}

namespace {

struct Design {
  std::vector<std::string> terms;
  Eigen::MatrixXd x;  // n x terms, no intercept
};

std::vector<double> transform(const std::vector<double>& col, bool binary, bool standardize) {
  if (!standardize) return col;
  const double m = mean(col);
  std::vector<double> out(col.size());
  double ss = 0.0;
  for (std::size_t i = 0; i < col.size(); ++i) {
    out[i] = col[i] - m;
    ss += out[i] * out[i];
  }
  if (binary || col.size() < 2) return out;
  const double sd = std::sqrt(ss / static_cast<double>(col.size() - 1));
  if (sd > 0.0) {
    for (double& v : out) v /= sd;
  }
  return out;
}

Design build_design(const RegressionData& data, const RegressionSpec& spec, bool include_nn) {
  spec.validate(data);
  if (include_nn && !data.columns.contains(spec.nn_column)) {
    throw ContractViolation("regression: data has no '" + spec.nn_column + "' column");
  }
  std::map<std::string, std::vector<double>> main;
  auto add_main = [&](const std::string& name) {
    main[name] = transform(data.columns.at(name), data.binary.contains(name), spec.standardize);
  };
  for (const auto& p : spec.predictors) add_main(p);
  if (include_nn) add_main(spec.nn_column);

  Design d;
  d.terms = spec.term_names();
  if (include_nn) d.terms.push_back(spec.nn_column);
  const std::size_t n = data.y.size();
  d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d.terms.size()));
  Eigen::Index c = 0;
  for (const auto& p : spec.predictors) {
    for (std::size_t i = 0; i < n; ++i) d.x(static_cast<Eigen::Index>(i), c) = main.at(p)[i];
    ++c;
  }
  for (const auto& [a, b] : spec.interactions) {
    for (std::size_t i = 0; i < n; ++i) d.x(static_cast<Eigen::Index>(i), c) = main.at(a)[i] * main.at(b)[i];
    ++c;
  }
  if (include_nn) {
    for (std::size_t i = 0; i < n; ++i) d.x(static_cast<Eigen::Index>(i), c) = main.at(spec.nn_column)[i];
  }
  return d;
}

bool constant_column(const Eigen::MatrixXd& x, Eigen::Index c) {
  const double lo = x.col(c).minCoeff();
  const double hi = x.col(c).maxCoeff();
  return hi - lo <= 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
}

/// Returns [intercept, beta...] for the rows in `rows`. Constant columns get 0.
std::vector<double> solve(const Design& d, const std::vector<double>& y, const std::vector<std::size_t>& rows,
                          bool strict) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd xs(n, d.x.cols());
  Eigen::VectorXd ys(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    xs.row(i) = d.x.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]));
    ys(i) = y[rows[static_cast<std::size_t>(i)]];
  }
  std::vector<Eigen::Index> active;
  for (Eigen::Index c = 0; c < xs.cols(); ++c) {
    if (!constant_column(xs, c)) active.push_back(c);
  }
  Eigen::MatrixXd a(n, static_cast<Eigen::Index>(active.size()) + 1);
  a.col(0).setOnes();
  for (std::size_t k = 0; k < active.size(); ++k) a.col(static_cast<Eigen::Index>(k) + 1) = xs.col(active[k]);
  if (strict && a.rows() < a.cols()) {
    throw NumericError("regression: " + std::to_string(a.rows()) + " items for " + std::to_string(a.cols()) +
                       " coefficients");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (strict && qr.rank() < a.cols()) {
    std::vector<std::string> names;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < a.cols(); ++k) {
      const Eigen::Index col = perm(k);
      names.push_back(col == 0 ? "(intercept)" : d.terms[static_cast<std::size_t>(active[static_cast<std::size_t>(col - 1)])]);
    }
    throw NumericError("regression: singular design; collinear predictors: " + join(names, ", "));
  }
  const Eigen::VectorXd coef = qr.solve(ys);
  std::vector<double> out(static_cast<std::size_t>(d.x.cols()) + 1, 0.0);
  out[0] = coef(0);
  for (std::size_t k = 0; k < active.size(); ++k) {
    out[static_cast<std::size_t>(active[k]) + 1] = coef(static_cast<Eigen::Index>(k) + 1);
  }
  return out;
}

Interval percentile(std::vector<double> draws, double point) {
  Interval iv{point, point, point};
  if (draws.empty()) return iv;
  std::sort(draws.begin(), draws.end());
  iv.lo = sorted_quantile(draws, 0.025);
  iv.hi = sorted_quantile(draws, 0.975);
  return iv;
}

}  // namespace

OlsFit fit_ols(const RegressionData& data, const RegressionSpec& spec, bool include_nn) {
  const Design d = build_design(data, spec, include_nn);
  std::vector<std::size_t> rows(data.y.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto coef = solve(d, data.y, rows, true);
  OlsFit fit;
  fit.terms = d.terms;
  fit.intercept = coef[0];
  fit.beta.assign(coef.begin() + 1, coef.end());
  return fit;
}

std::string significance_stars(double p) {
  if (p > 0.999) return "***";
  if (p > 0.99) return "**";
  if (p > 0.95) return "*";
  return "";
}

RegressionComparison regression_compare(const RegressionData& data, const RegressionSpec& spec,
                                        std::size_t replicates, std::uint64_t seed, std::size_t workers) {
  const Design orig = build_design(data, spec, false);
  const Design ext = build_design(data, spec, true);
  const std::size_t n = data.y.size();
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto b_orig = solve(orig, data.y, all, true);
  const auto b_ext = solve(ext, data.y, all, true);

  const std::size_t k = orig.terms.size();
  std::vector<std::vector<double>> draws_orig(replicates), draws_ext(replicates);
  parallel_for(replicates, workers, [&](std::size_t b) {
    Rng rng(derive_seed(seed, "regress/" + std::to_string(b)));
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
    draws_orig[b] = solve(orig, data.y, rows, false);
    draws_ext[b] = solve(ext, data.y, rows, false);
  });

  RegressionComparison cmp;
  cmp.items = n;
  cmp.replicates = replicates;
  auto column = [&](const std::vector<std::vector<double>>& draws, std::size_t j) {
    std::vector<double> v;
    v.reserve(draws.size());
    for (const auto& d : draws) v.push_back(d[j + 1]);
    return v;
  };
  for (std::size_t j = 0; j < k; ++j) {
    CoefficientRow row;
    row.term = orig.terms[j];
    row.beta_original = b_orig[j + 1];
    row.beta_extended = b_ext[j + 1];
    const auto co = column(draws_orig, j);
    const auto ce = column(draws_ext, j);
    const auto io = percentile(co, b_orig[j + 1]);
    const auto ie = percentile(ce, b_ext[j + 1]);
    row.lo_original = io.lo;
    row.hi_original = io.hi;
    row.lo_extended = ie.lo;
    row.hi_extended = ie.hi;
    if (replicates > 0) {
      double shrink = 0.0;
      for (std::size_t b = 0; b < replicates; ++b) {
        const double e = std::abs(ce[b]), o = std::abs(co[b]);
        shrink += e < o ? 1.0 : (e == o ? 0.5 : 0.0);
      }
      row.p_shrink = shrink / static_cast<double>(replicates);
      row.stars = significance_stars(*row.p_shrink);
    }
    cmp.rows.push_back(row);
  }
  CoefficientRow nn;
  nn.term = ext.terms.back();
  nn.beta_extended = b_ext[k + 1];
  const auto inn = percentile(column(draws_ext, k), b_ext[k + 1]);
  nn.lo_extended = inn.lo;
  nn.hi_extended = inn.hi;
  cmp.rows.push_back(nn);
  return cmp;
}

std::string coefficient_csv(const RegressionComparison& cmp) {
  std::string out = "term,beta_original,lo_original,hi_original,beta_extended,lo_extended,hi_extended,p_shrink,stars\n";
  for (const auto& r : cmp.rows) {
    out += r.term + ",";
    if (r.beta_original) {
      out += format_double(*r.beta_original) + "," + format_double(r.lo_original) + "," + format_double(r.hi_original);
    } else {
      out += ",,";
    }
    out += "," + format_double(r.beta_extended) + "," + format_double(r.lo_extended) + "," +
           format_double(r.hi_extended) + "," + (r.p_shrink ? format_double(*r.p_shrink) : std::string()) + "," +
           r.stars + "\n";
  }
  return out;
}

}  // namespace sil
