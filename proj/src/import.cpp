#include "sil/import.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <unordered_map>

#include "sil/error.hpp"
#include "sil/util.hpp"

namespace sil {

namespace {

const char* const kFeatureNames[] = {"partitive", "strength", "mention", "subjecthood", "modification"};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

struct Table {
  std::unordered_map<std::string, std::size_t> col;
  std::vector<std::vector<std::string>> rows;

  std::size_t index(const std::string& name, const std::string& what) const {
    auto it = col.find(name);
    if (it == col.end()) throw SchemaError("import: " + what + " column '" + name + "' not found");
    return it->second;
  }
};

Table read_table(const std::string& text, char delim) {
  auto rows = parse_csv(text, delim);
  if (rows.empty()) throw SchemaError("import: missing header line");
  Table t;
  for (std::size_t i = 0; i < rows[0].size(); ++i) t.col[trim(rows[0][i])] = i;
  t.rows.assign(rows.begin() + 1, rows.end());
  return t;
}

const std::string& cell(const std::vector<std::string>& row, std::size_t i, std::size_t line) {
  if (i >= row.size()) throw ValidationError("import: data row " + std::to_string(line) + " is too short");
  return row[i];
}

double number(const std::string& s, const std::string& what, std::size_t line) {
  auto v = parse_double(trim(s));
  if (!v) throw ValidationError("import: data row " + std::to_string(line) + ": " + what + " '" + s + "' is not a number");
  return *v;
}

}  // namespace

void from_json(const nlohmann::json& j, ImportMapping& m) {
  m = ImportMapping{};
  m.format = j.value("format", m.format);
  if (m.format != "long" && m.format != "wide") throw ContractViolation("import: format must be 'long' or 'wide'");
  const auto delim = j.value("delimiter", std::string(","));
  if (delim == "\\t" || delim == "tab") {
    m.delimiter = '\t';
  } else if (delim.size() == 1) {
    m.delimiter = delim[0];
  } else {
    throw ContractViolation("import: delimiter must be a single character");
  }
  const auto& cols = j.at("columns");
  m.id = cols.value("id", m.id);
  m.sentence = cols.value("sentence", m.sentence);
  m.context = cols.value("context", m.context);
  m.rating = cols.value("rating", m.rating);
  if (cols.contains("ratings")) m.rating_columns = cols.at("ratings").get<std::vector<std::string>>();
  for (const char* f : kFeatureNames) {
    if (cols.contains(f)) m.features[f] = cols.at(f).get<std::string>();
  }
  m.context_delimiter = j.value("context_delimiter", m.context_delimiter);
  if (j.contains("true_values")) {
    for (const auto& [k, v] : j.at("true_values").items()) {
      for (const auto& s : v) m.true_values[k].insert(lower(s.get<std::string>()));
    }
  }
  if (j.contains("no_context")) {
    m.no_context_id = j.at("no_context").value("id", m.no_context_id);
    m.no_context_rating = j.at("no_context").value("rating", m.no_context_rating);
  }
}

std::vector<UtteranceRecord> import_table(const std::string& text, const ImportMapping& m,
                                          const std::string* no_context_text, ImportStats* stats) {
  const Table t = read_table(text, m.delimiter);
  const std::size_t c_id = t.index(m.id, "id");
  const std::size_t c_sent = t.index(m.sentence, "sentence");
  const std::optional<std::size_t> c_ctx =
      m.context.empty() ? std::nullopt : std::optional<std::size_t>(t.index(m.context, "context"));
  std::map<std::string, std::size_t> c_feat;
  for (const char* f : kFeatureNames) {
    auto it = m.features.find(f);
    if (it == m.features.end()) throw SchemaError(std::string("import: mapping names no column for feature '") + f + "'");
    c_feat[f] = t.index(it->second, f);
  }
  std::vector<std::size_t> c_ratings;
  if (m.format == "long") {
    c_ratings.push_back(t.index(m.rating, "rating"));
  } else {
    if (m.rating_columns.empty()) throw SchemaError("import: wide format needs 'ratings' columns");
    for (const auto& r : m.rating_columns) c_ratings.push_back(t.index(r, "rating"));
  }

  auto binary = [&](const std::string& feature, const std::string& raw, std::size_t line) {
    const std::string v = lower(trim(raw));
    auto custom = m.true_values.find(feature);
    if (custom != m.true_values.end()) return custom->second.contains(v) ? 1 : 0;
    if (v == "1" || v == "yes" || v == "true" || v == "y") return 1;
    if (v == "0" || v == "no" || v == "false" || v == "n") return 0;
    throw ValidationError("import: data row " + std::to_string(line) + ": " + feature + " value '" + raw +
                          "' is not binary");
  };

  std::vector<UtteranceRecord> records;
  std::unordered_map<std::string, std::size_t> by_id;
  std::vector<std::string> sentences;
  for (std::size_t li = 0; li < t.rows.size(); ++li) {
    const auto& row = t.rows[li];
    const std::size_t line = li + 1;
    const std::string id = trim(cell(row, c_id, line));
    if (id.empty()) throw ValidationError("import: data row " + std::to_string(line) + " has an empty id");
    const std::string& sentence = cell(row, c_sent, line);

    auto [it, fresh] = by_id.try_emplace(id, records.size());
    if (fresh) {
      UtteranceRecord r;
      r.id = id;
      r.tokens = tokenize(sentence);
      if (c_ctx) {
        const std::string& ctx = cell(row, *c_ctx, line);
        std::size_t start = 0;
        bool first = true;
        while (start <= ctx.size()) {
          auto end = m.context_delimiter.empty() ? std::string::npos : ctx.find(m.context_delimiter, start);
          if (end == std::string::npos) end = ctx.size();
          auto toks = tokenize(std::string_view(ctx).substr(start, end - start));
          if (!toks.empty()) {
            if (!first) r.context_tokens.emplace_back(kContextSeparator);
            r.context_tokens.insert(r.context_tokens.end(), toks.begin(), toks.end());
            first = false;
          }
          if (end == ctx.size()) break;
          start = end + m.context_delimiter.size();
        }
      }
      r.features.partitive = binary("partitive", cell(row, c_feat["partitive"], line), line);
      r.features.determiner_strength = number(cell(row, c_feat["strength"], line), "strength", line);
      r.features.linguistic_mention = binary("mention", cell(row, c_feat["mention"], line), line);
      r.features.subjecthood = binary("subjecthood", cell(row, c_feat["subjecthood"], line), line);
      r.features.modification = binary("modification", cell(row, c_feat["modification"], line), line);
      r.features.utterance_length = static_cast<int>(r.tokens.size());
      for (std::size_t i = 0; i < r.tokens.size(); ++i) {
        if (r.tokens[i] != "some") continue;
        r.some_index = i;
        break;
      }
      for (std::size_t i = 0; i < r.tokens.size(); ++i) {
        if (r.tokens[i] != "of") continue;
        if (r.some_index && i == *r.some_index + 1) {
          r.of_partitive_indices.push_back(i);
        } else {
          r.of_other_indices.push_back(i);
        }
      }
      records.push_back(std::move(r));
      sentences.push_back(sentence);
    } else if (sentences[it->second] != sentence) {
      throw ValidationError("import: data row " + std::to_string(line) + ": item '" + id +
                            "' appears with two different sentences");
    }
    auto& rec = records[it->second];
    for (auto c : c_ratings) {
      const std::string v = trim(cell(row, c, line));
      if (v.empty()) continue;
      rec.participant_ratings.push_back(number(v, "rating", line));
    }
  }

  for (auto& r : records) {
    if (r.participant_ratings.empty()) throw ValidationError("import: item '" + r.id + "' has no ratings");
    r.mean_rating = std::accumulate(r.participant_ratings.begin(), r.participant_ratings.end(), 0.0) /
                    static_cast<double>(r.participant_ratings.size());
  }

  std::size_t attached = 0;
  if (no_context_text) {
    const Table nc = read_table(*no_context_text, m.delimiter);
    const std::size_t n_id = nc.index(m.no_context_id, "no-context id");
    const std::size_t n_r = nc.index(m.no_context_rating, "no-context rating");
    std::map<std::string, std::pair<double, std::size_t>> sums;
    for (std::size_t li = 0; li < nc.rows.size(); ++li) {
      const std::string id = trim(cell(nc.rows[li], n_id, li + 1));
      const std::string v = trim(cell(nc.rows[li], n_r, li + 1));
      if (v.empty()) continue;
      auto& [sum, n] = sums[id];
      sum += number(v, "no-context rating", li + 1);
      ++n;
    }
    for (auto& r : records) {
      auto it = sums.find(r.id);
      if (it == sums.end()) continue;
      r.no_context_mean_rating = it->second.first / static_cast<double>(it->second.second);
      ++attached;
    }
  }

  for (std::size_t i = 0; i < records.size(); ++i) validate_record(records[i], "item '" + records[i].id + "'");

  if (stats) {
    stats->rows = t.rows.size();
    stats->records = records.size();
    stats->without_some = static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const UtteranceRecord& r) { return !r.some_index; }));
    stats->with_no_context = attached;
  }
  return records;
}

}  // namespace sil
