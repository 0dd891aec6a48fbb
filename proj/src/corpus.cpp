#include "sil/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "sil/error.hpp"
#include "sil/rng.hpp"
#include "sil/util.hpp"

namespace sil {

namespace {

const std::vector<std::string> kRequired = {
    "id",          "tokens",       "context_tokens", "mean_rating",    "participant_ratings",
    "partitive",   "strength",     "mention",        "subjecthood",    "modification",
    "some_index",  "of_partitive_indices",           "of_other_indices"};

std::string row_context(std::size_t row, const std::string& id) {
  return "row " + std::to_string(row) + " (id '" + id + "')";
}

double field_double(const std::string& s, const std::string& column, const std::string& ctx) {
  auto v = parse_double(s);
  if (!v) throw ValidationError(ctx + ": column '" + column + "' is not a number: '" + s + "'");
  return *v;
}

int field_binary(const std::string& s, const std::string& column, const std::string& ctx) {
  auto v = parse_int(s);
  if (!v || (*v != 0 && *v != 1)) throw ValidationError(ctx + ": column '" + column + "' must be 0 or 1, got '" + s + "'");
  return static_cast<int>(*v);
}

std::vector<std::size_t> field_indices(const std::string& s, const std::string& column, const std::string& ctx) {
  std::vector<std::size_t> out;
  if (s.empty()) return out;
  for (const auto& part : split_string(s, ',')) {
    auto v = parse_int(part);
    if (!v || *v < 0) throw ValidationError(ctx + ": column '" + column + "' has a bad index '" + part + "'");
    out.push_back(static_cast<std::size_t>(*v));
  }
  return out;
}

std::vector<std::string> field_tokens(const std::string& s) {
  if (s.empty()) return {};
  return split_string(s, ' ');
}

std::string join_indices(const std::vector<std::size_t>& idx) {
  std::string out;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(idx[i]);
  }
  return out;
}

bool in_likert_range(double r) { return r >= 1.0 && r <= 7.0; }

std::vector<std::size_t> kept_indices(const std::vector<std::size_t>& idx, std::size_t limit) {
  std::vector<std::size_t> out;
  std::copy_if(idx.begin(), idx.end(), std::back_inserter(out), [limit](std::size_t i) { return i < limit; });
  return out;
}

}  // namespace

const std::vector<std::string>& corpus_columns() {
  static const std::vector<std::string> cols = {
      "id",          "tokens",         "context_tokens",   "mean_rating",          "participant_ratings",
      "no_context_mean_rating",        "partitive",        "strength",             "mention",
      "subjecthood", "modification",   "utterance_length", "some_index",           "of_partitive_indices",
      "of_other_indices"};
  return cols;
}

void validate_record(const UtteranceRecord& r, const std::string& ctx) {
  if (r.id.empty()) throw ValidationError(ctx + ": empty id");
  if (r.tokens.empty()) throw ValidationError(ctx + ": no tokens");
  if (!in_likert_range(r.mean_rating)) {
    throw ValidationError(ctx + ": mean_rating " + format_double(r.mean_rating) + " outside [1,7]");
  }
  for (double p : r.participant_ratings) {
    if (!in_likert_range(p)) throw ValidationError(ctx + ": participant rating " + format_double(p) + " outside [1,7]");
  }
  if (!r.participant_ratings.empty()) {
    const double mean = std::accumulate(r.participant_ratings.begin(), r.participant_ratings.end(), 0.0) /
                        static_cast<double>(r.participant_ratings.size());
    if (std::abs(mean - r.mean_rating) > 1e-6) {
      throw ValidationError(ctx + ": mean_rating " + format_double(r.mean_rating) +
                            " disagrees with participant mean " + format_double(mean));
    }
  }
  if (r.no_context_mean_rating && !in_likert_range(*r.no_context_mean_rating)) {
    throw ValidationError(ctx + ": no_context_mean_rating outside [1,7]");
  }
  const auto& f = r.features;
  if (!(f.determiner_strength >= 1.0 && f.determiner_strength <= 7.0)) {
    throw ValidationError(ctx + ": strength outside [1,7]");
  }
  if (f.utterance_length <= 0) throw ValidationError(ctx + ": utterance_length must be positive");

  const std::size_t n = r.tokens.size();
  std::set<std::size_t> seen;
  auto check = [&](std::size_t i, const char* what) {
    if (i >= n) throw ValidationError(ctx + ": " + what + " index " + std::to_string(i) + " >= token count " + std::to_string(n));
    if (!seen.insert(i).second) throw ValidationError(ctx + ": " + what + " index " + std::to_string(i) + " overlaps another marker");
  };
  if (r.some_index) check(*r.some_index, "some");
  for (auto i : r.of_partitive_indices) check(i, "partitive-of");
  for (auto i : r.of_other_indices) check(i, "other-of");
}

std::vector<UtteranceRecord> parse_corpus_text(const std::string& text) {
  auto lines = split_string(text, '\n');
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw SchemaError("corpus: missing header line");

  const auto header = split_string(lines.front(), '\t');
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const auto& name : kRequired) {
    if (!col.contains(name)) throw SchemaError("corpus: missing column '" + name + "'");
  }

  std::vector<UtteranceRecord> records;
  records.reserve(lines.size() - 1);
  std::set<std::string> ids;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t row = li;  // 1-based data row number
    const auto fields = split_string(lines[li], '\t');
    if (fields.size() != header.size()) {
      throw ValidationError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                            " fields, got " + std::to_string(fields.size()));
    }
    auto get = [&](const std::string& name) -> const std::string& { return fields[col.at(name)]; };

    UtteranceRecord r;
    r.id = get("id");
    const auto ctx = row_context(row, r.id);
    r.tokens = field_tokens(get("tokens"));
    r.context_tokens = field_tokens(get("context_tokens"));
    r.mean_rating = field_double(get("mean_rating"), "mean_rating", ctx);
    if (const auto& pr = get("participant_ratings"); !pr.empty()) {
      for (const auto& part : split_string(pr, ',')) {
        r.participant_ratings.push_back(field_double(part, "participant_ratings", ctx));
      }
    }
    if (col.contains("no_context_mean_rating")) {
      if (const auto& nc = get("no_context_mean_rating"); !nc.empty()) {
        r.no_context_mean_rating = field_double(nc, "no_context_mean_rating", ctx);
      }
    }
    r.features.partitive = field_binary(get("partitive"), "partitive", ctx);
    r.features.determiner_strength = field_double(get("strength"), "strength", ctx);
    r.features.linguistic_mention = field_binary(get("mention"), "mention", ctx);
    r.features.subjecthood = field_binary(get("subjecthood"), "subjecthood", ctx);
    r.features.modification = field_binary(get("modification"), "modification", ctx);
    r.features.utterance_length = static_cast<int>(r.tokens.size());
    if (col.contains("utterance_length") && !get("utterance_length").empty()) {
      auto v = parse_int(get("utterance_length"));
      if (!v) throw ValidationError(ctx + ": utterance_length is not an integer");
      r.features.utterance_length = static_cast<int>(*v);
    }
    if (const auto& si = get("some_index"); !si.empty()) {
      auto v = parse_int(si);
      if (!v || *v < 0) throw ValidationError(ctx + ": bad some_index '" + si + "'");
      r.some_index = static_cast<std::size_t>(*v);
    }
    r.of_partitive_indices = field_indices(get("of_partitive_indices"), "of_partitive_indices", ctx);
    r.of_other_indices = field_indices(get("of_other_indices"), "of_other_indices", ctx);

    validate_record(r, ctx);
    if (!ids.insert(r.id).second) throw ValidationError(ctx + ": duplicate id");
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<UtteranceRecord> parse_corpus(const std::filesystem::path& path) {
  return parse_corpus_text(read_file(path));
}

std::string serialize_corpus(const std::vector<UtteranceRecord>& records) {
  std::string out = join(corpus_columns(), "\t") + "\n";
  for (const auto& r : records) {
    std::vector<std::string> ratings;
    for (double p : r.participant_ratings) ratings.push_back(format_double(p));
    std::vector<std::string> fields = {
        r.id,
        join(r.tokens, " "),
        join(r.context_tokens, " "),
        format_double(r.mean_rating),
        join(ratings, ","),
        r.no_context_mean_rating ? format_double(*r.no_context_mean_rating) : std::string(),
        std::to_string(r.features.partitive),
        format_double(r.features.determiner_strength),
        std::to_string(r.features.linguistic_mention),
        std::to_string(r.features.subjecthood),
        std::to_string(r.features.modification),
        std::to_string(r.features.utterance_length),
        r.some_index ? std::to_string(*r.some_index) : std::string(),
        join_indices(r.of_partitive_indices),
        join_indices(r.of_other_indices),
    };
    out += join(fields, "\t");
    out += '\n';
  }
  return out;
}

void write_corpus(const std::vector<UtteranceRecord>& records, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_corpus(records));
}

double rescale_rating(double r) {
  if (!in_likert_range(r)) throw ContractViolation("rescale_rating: " + format_double(r) + " outside [1,7]");
  return (r - 1.0) / 6.0;
}

double unscale_rating(double score) { return score * 6.0 + 1.0; }

UtteranceRecord truncate(const UtteranceRecord& record, TruncationMode mode) {
  UtteranceRecord out = record;
  if (mode == TruncationMode::target_only) {
    if (out.tokens.size() > kMaxTargetTokens) {
      out.tokens.resize(kMaxTargetTokens);
      if (out.some_index && *out.some_index >= kMaxTargetTokens) out.some_index.reset();
      out.of_partitive_indices = kept_indices(out.of_partitive_indices, kMaxTargetTokens);
      out.of_other_indices = kept_indices(out.of_other_indices, kMaxTargetTokens);
    }
  } else if (out.context_tokens.size() > kMaxContextTokens) {
    const auto drop = static_cast<std::ptrdiff_t>(out.context_tokens.size() - kMaxContextTokens);
    out.context_tokens.erase(out.context_tokens.begin(), out.context_tokens.begin() + drop);
  }
  return out;
}

Split split(const std::vector<std::string>& ids, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ContractViolation("split: train_fraction must be in (0,1)");
  if (ids.empty()) throw ContractViolation("split: no records");
  std::vector<std::string> order = ids;
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(std::span<std::string>(order));
  // The small slack keeps exact products such as 10 * 0.7 from rounding up.
  const auto n_train = static_cast<std::size_t>(std::ceil(static_cast<double>(ids.size()) * train_fraction - 1e-9));
  Split s;
  s.seed = seed;
  s.train_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return s;
}

Split split(const std::vector<UtteranceRecord>& records, double train_fraction, std::uint64_t seed) {
  return split(record_ids(records), train_fraction, seed);
}

std::vector<Fold> kfold(const std::vector<std::string>& ids, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > ids.size()) {
    throw ContractViolation("kfold: k=" + std::to_string(k) + " invalid for " + std::to_string(ids.size()) + " records");
  }
  std::vector<std::string> order = ids;
  Rng rng(derive_seed(seed, "kfold"));
  rng.shuffle(std::span<std::string>(order));

  const std::size_t base = order.size() / k;
  const std::size_t extra = order.size() % k;
  std::vector<Fold> folds(k);
  std::size_t pos = 0;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    ranges.emplace_back(pos, pos + len);
    pos += len;
  }
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i >= ranges[f].first && i < ranges[f].second) {
        folds[f].heldout_ids.push_back(order[i]);
      } else {
        folds[f].train_ids.push_back(order[i]);
      }
    }
  }
  return folds;
}

std::vector<Fold> kfold(const std::vector<UtteranceRecord>& records, std::size_t k, std::uint64_t seed) {
  return kfold(record_ids(records), k, seed);
}

nlohmann::json split_manifest(const Split& s) {
  return {{"seed", s.seed}, {"train_ids", s.train_ids}, {"test_ids", s.test_ids}};
}

Split split_from_manifest(const nlohmann::json& j) {
  Split s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.train_ids = j.at("train_ids").get<std::vector<std::string>>();
  s.test_ids = j.at("test_ids").get<std::vector<std::string>>();
  return s;
}

std::vector<std::string> record_ids(const std::vector<UtteranceRecord>& records) {
  std::vector<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.id);
  return ids;
}

std::vector<UtteranceRecord> select(const std::vector<UtteranceRecord>& records, const std::vector<std::string>& ids) {
  std::unordered_map<std::string, const UtteranceRecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;
  std::vector<UtteranceRecord> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw LookupError("unknown record id '" + id + "'");
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace sil
