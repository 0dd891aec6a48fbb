#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sil/array.hpp"
#include "sil/corpus.hpp"

namespace sil {

enum class UnkPolicy { zero_vector, unk_token, mean_vector };

UnkPolicy parse_unk_policy(const std::string& name);
std::string to_string(UnkPolicy p);

/// Anything that turns a corpus record into a [T x dim] input matrix.
class EmbeddingSource {
 public:
  virtual ~EmbeddingSource() = default;
  virtual std::size_t dim() const = 0;
  /// `record` must already be truncated by the caller.
  virtual Array embed(const UtteranceRecord& record, bool with_context) const = 0;
};

/// Static word vectors (GloVe text format). Immutable after load.
class EmbeddingTable final : public EmbeddingSource {
 public:
  EmbeddingTable(std::vector<std::string> tokens, Array matrix, UnkPolicy policy = UnkPolicy::zero_vector);

  std::size_t dim() const override { return matrix_.cols(); }
  std::size_t vocab_size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const Array& matrix() const { return matrix_; }
  UnkPolicy unk_policy() const { return policy_; }
  bool contains(const std::string& token) const;

  /// Never fails: unknown tokens fall back to the lowercased form, then to the unk policy.
  std::span<const double> lookup(const std::string& token) const;

  /// With context, context tokens are prepended to the target tokens.
  Array embed(const UtteranceRecord& record, bool with_context) const override;
  Array embed_tokens(const std::vector<std::string>& tokens) const;

 private:
  std::vector<std::string> tokens_;
  Array matrix_;
  UnkPolicy policy_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> fallback_;
};

/// Parses "token v1 ... vd" lines. Duplicate tokens keep their first vector.
/// Throws ParseError (with line number) on ragged or non-numeric lines and on empty input.
EmbeddingTable load_glove(const std::filesystem::path& path, UnkPolicy policy = UnkPolicy::zero_vector);
EmbeddingTable parse_glove(const std::string& text, UnkPolicy policy = UnkPolicy::zero_vector);
std::string serialize_glove(const EmbeddingTable& table);

/// Contextual vectors computed offline, one JSON object per line:
///   {"id": str, "layer": int, "vectors": [[...], ...]}
/// An optional first line {"meta": {...}} records how subword vectors were
/// aligned to corpus tokens. Only target-utterance vectors are stored.
class PrecomputedEmbeddings final : public EmbeddingSource {
 public:
  std::size_t dim() const override { return dim_; }
  int layer() const { return layer_; }
  const nlohmann::json& meta() const { return meta_; }
  bool contains(const std::string& id) const { return vectors_.contains(id); }

  /// Returns the rows for the (possibly truncated) target tokens. The file must
  /// hold exactly one vector per untruncated token. `with_context` is accepted
  /// for interface symmetry; context was already consumed offline.
  Array embed(const UtteranceRecord& record, bool with_context) const override;

  friend PrecomputedEmbeddings parse_precomputed(const std::string& text);

 private:
  std::size_t dim_ = 0;
  int layer_ = 0;
  nlohmann::json meta_ = nlohmann::json::object();
  std::unordered_map<std::string, Array> vectors_;
};

PrecomputedEmbeddings load_precomputed(const std::filesystem::path& path);
PrecomputedEmbeddings parse_precomputed(const std::string& text);

}  // namespace sil
