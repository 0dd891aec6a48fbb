#include "sil/embeddings.hpp"

#include <algorithm>
#include <cctype>

#include "sil/error.hpp"
#include "sil/util.hpp"

namespace sil {

UnkPolicy parse_unk_policy(const std::string& name) {
  if (name == "zero_vector") return UnkPolicy::zero_vector;
  if (name == "unk_token") return UnkPolicy::unk_token;
  if (name == "mean_vector") return UnkPolicy::mean_vector;
  throw ContractViolation("unknown OOV policy '" + name + "'");
}

std::string to_string(UnkPolicy p) {
  switch (p) {
    case UnkPolicy::zero_vector: return "zero_vector";
    case UnkPolicy::unk_token: return "unk_token";
    case UnkPolicy::mean_vector: return "mean_vector";
  }
  return "zero_vector";
}

EmbeddingTable::EmbeddingTable(std::vector<std::string> tokens, Array matrix, UnkPolicy policy)
    : tokens_(std::move(tokens)), matrix_(std::move(matrix)), policy_(policy) {
  if (matrix_.rows() != tokens_.size() || matrix_.rank() != 2) {
    throw ContractViolation("EmbeddingTable: matrix rows must match vocabulary size");
  }
  if (matrix_.cols() == 0) throw ContractViolation("EmbeddingTable: zero-width vectors");
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.try_emplace(tokens_[i], i);

  fallback_.assign(dim(), 0.0);
  if (policy_ == UnkPolicy::mean_vector && !tokens_.empty()) {
    for (std::size_t r = 0; r < matrix_.rows(); ++r) {
      auto row = matrix_.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) fallback_[c] += row[c];
    }
    for (double& v : fallback_) v /= static_cast<double>(matrix_.rows());
  } else if (policy_ == UnkPolicy::unk_token) {
    for (const char* unk : {"<unk>", "<UNK>", "unk"}) {
      if (auto it = index_.find(unk); it != index_.end()) {
        auto row = matrix_.row(it->second);
        fallback_.assign(row.begin(), row.end());
        break;
      }
    }
  }
}

bool EmbeddingTable::contains(const std::string& token) const { return index_.contains(token); }

std::span<const double> EmbeddingTable::lookup(const std::string& token) const {
  if (auto it = index_.find(token); it != index_.end()) return matrix_.row(it->second);
  std::string lower = token;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (auto it = index_.find(lower); it != index_.end()) return matrix_.row(it->second);
  return fallback_;
}

Array EmbeddingTable::embed_tokens(const std::vector<std::string>& tokens) const {
  Array out = Array::zeros(tokens.size(), dim());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    auto v = lookup(tokens[t]);
    std::copy(v.begin(), v.end(), out.row(t).begin());
  }
  return out;
}

Array EmbeddingTable::embed(const UtteranceRecord& record, bool with_context) const {
  if (!with_context) return embed_tokens(record.tokens);
  std::vector<std::string> joined = record.context_tokens;
  joined.insert(joined.end(), record.tokens.begin(), record.tokens.end());
  return embed_tokens(joined);
}

EmbeddingTable parse_glove(const std::string& text, UnkPolicy policy) {
  std::vector<std::string> tokens;
  std::vector<double> values;
  std::unordered_map<std::string, bool> seen;
  std::size_t dim = 0;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + start, end - start);
    ++line_no;
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    auto fields = split_whitespace(line);
    if (fields.size() < 2) throw ParseError("glove: line has no vector", line_no);
    const std::size_t d = fields.size() - 1;
    if (dim == 0) {
      dim = d;
    } else if (d != dim) {
      throw ParseError("glove: expected " + std::to_string(dim) + " values, got " + std::to_string(d), line_no);
    }
    std::vector<double> row;
    row.reserve(d);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      auto v = parse_double(fields[i]);
      if (!v) throw ParseError("glove: bad number '" + fields[i] + "'", line_no);
      row.push_back(*v);
    }
    if (seen.try_emplace(fields[0], true).second) {
      tokens.push_back(fields[0]);
      values.insert(values.end(), row.begin(), row.end());
    }
    if (end == text.size()) break;
  }
  if (tokens.empty()) throw ParseError("glove: empty file");
  const std::size_t v = tokens.size();
  return EmbeddingTable(std::move(tokens), Array({v, dim}, std::move(values)), policy);
}

EmbeddingTable load_glove(const std::filesystem::path& path, UnkPolicy policy) {
  return parse_glove(read_file(path), policy);
}

std::string serialize_glove(const EmbeddingTable& table) {
  std::string out;
  for (std::size_t r = 0; r < table.vocab_size(); ++r) {
    out += table.tokens()[r];
    for (double v : table.matrix().row(r)) {
      out += ' ';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

Array PrecomputedEmbeddings::embed(const UtteranceRecord& record, bool /*with_context*/) const {
  auto it = vectors_.find(record.id);
  if (it == vectors_.end()) throw LookupError("precomputed embeddings: no vectors for id '" + record.id + "'");
  const Array& all = it->second;
  const auto expected = static_cast<std::size_t>(record.features.utterance_length);
  if (all.rows() != expected || record.tokens.size() > all.rows()) {
    throw IntegrityError("precomputed embeddings: id '" + record.id + "' has " + std::to_string(all.rows()) +
                         " vectors for " + std::to_string(expected) + " tokens");
  }
  Array out = Array::zeros(record.tokens.size(), dim_);
  for (std::size_t t = 0; t < record.tokens.size(); ++t) {
    std::copy(all.row(t).begin(), all.row(t).end(), out.row(t).begin());
  }
  return out;
}

PrecomputedEmbeddings parse_precomputed(const std::string& text) {
  PrecomputedEmbeddings pe;
  bool have_layer = false;
  std::size_t line_no = 0;
  for (const auto& raw : split_string(text, '\n')) {
    ++line_no;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("precomputed embeddings: invalid JSON: ") + e.what(), line_no);
    }
    if (j.contains("meta")) {
      pe.meta_ = j.at("meta");
      continue;
    }
    if (!j.contains("id") || !j.contains("layer") || !j.contains("vectors")) {
      throw ParseError("precomputed embeddings: object needs id, layer and vectors", line_no);
    }
    const auto id = j.at("id").get<std::string>();
    const int layer = j.at("layer").get<int>();
    if (!have_layer) {
      pe.layer_ = layer;
      have_layer = true;
    } else if (layer != pe.layer_) {
      throw IntegrityError("precomputed embeddings: id '" + id + "' uses layer " + std::to_string(layer) +
                           ", file uses " + std::to_string(pe.layer_));
    }
    const auto rows = j.at("vectors").get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw IntegrityError("precomputed embeddings: id '" + id + "' has no vectors");
    std::vector<double> flat;
    for (const auto& r : rows) {
      if (pe.dim_ == 0) pe.dim_ = r.size();
      if (r.size() != pe.dim_ || r.empty()) {
        throw IntegrityError("precomputed embeddings: id '" + id + "' has a vector of width " +
                             std::to_string(r.size()) + ", expected " + std::to_string(pe.dim_));
      }
      flat.insert(flat.end(), r.begin(), r.end());
    }
    Array a({rows.size(), pe.dim_}, std::move(flat));
    if (!pe.vectors_.try_emplace(id, std::move(a)).second) {
      throw IntegrityError("precomputed embeddings: duplicate id '" + id + "'");
    }
  }
  if (pe.vectors_.empty()) throw ParseError("precomputed embeddings: empty file");
  return pe;
}

PrecomputedEmbeddings load_precomputed(const std::filesystem::path& path) {
  return parse_precomputed(read_file(path));
}

}  // namespace sil
