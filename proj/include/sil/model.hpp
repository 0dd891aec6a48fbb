#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sil/array.hpp"
#include "sil/rng.hpp"
#include "sil/tape.hpp"

namespace sil {

enum class Pooling { attention, final_state };

Pooling parse_pooling(const std::string& name);
std::string to_string(Pooling p);

struct ModelConfig {
  std::size_t input_dim = 100;
  std::size_t hidden_dim = 100;
  std::size_t num_layers = 2;
  double dropout = 0.1;
  Pooling pooling = Pooling::attention;
  /// Width of the attention scoring layer; 0 means "same as hidden_dim".
  std::size_t attention_dim = 0;
  /// Also drop out the pooled vector before the head.
  bool head_dropout = false;
  /// final_state pooling: concatenate both directions (true) or use the forward one only.
  bool final_state_both_directions = true;
  std::uint64_t seed = 0;

  std::size_t effective_attention_dim() const { return attention_dim ? attention_dim : hidden_dim; }
  std::size_t pooled_dim() const {
    return pooling == Pooling::final_state && !final_state_both_directions ? hidden_dim : 2 * hidden_dim;
  }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// All trainable tensors of the encoder, keyed by name:
///   lstm.<layer>.<fwd|bwd>.{W,U,b}  gates stacked in order i, f, g, o
///   attn.W [a x 2H], attn.v [1 x a]
///   head.w [1 x pooled], head.b [1]
struct ModelParams {
  ModelConfig config;
  ParamMap tensors;

  const Array& at(const std::string& name) const;
  bool operator==(const ModelParams&) const = default;
};

std::string lstm_name(std::size_t layer, bool backward, const char* what);

/// Xavier-uniform matrices, zero biases, forget-gate bias slice 1.0. Deterministic in config.seed.
ModelParams init_params(const ModelConfig& config);

/// Forward pass mode. Training mode carries the dropout RNG.
struct ForwardMode {
  Rng* rng = nullptr;
  bool training() const { return rng != nullptr; }
  static ForwardMode eval() { return {}; }
  static ForwardMode train(Rng& r) { return {&r}; }
};

struct ForwardResult {
  Var score;         // [1 x 1], in (0, 1)
  Var attention;     // [1 x T]; invalid for final_state pooling
  Var top_hidden;    // [T x 2H]
  Var pooled;        // [1 x pooled_dim]
  /// Output of each biLSTM layer as fed forward (after dropout, if any).
  std::vector<Var> layer_outputs;
};

/// Binds `params` onto `tape` (by reference) and builds the encoder graph for
/// one input of shape [T x input_dim].
ForwardResult forward(Tape& tape, const ModelParams& params, const Array& embedded, ForwardMode mode);

/// Self-attention pooling over top-layer states.
struct AttentionOutput {
  Var weights;  // [1 x T]
  Var pooled;   // [1 x 2H]
};
AttentionOutput attention_pool(Var hidden, Var attn_w, Var attn_v);

/// Forward direction's last state and backward direction's first state.
Var final_state_pool(Var top_hidden, std::size_t hidden_dim, bool both_directions = true);

struct PredictionReport {
  std::string id;
  double score = 0.5;
  std::vector<double> attention;
};

/// Eval-mode prediction.
PredictionReport predict(const ModelParams& params, const Array& embedded, std::string id = {});

/// Versioned binary checkpoint: magic "SILM", u32 version, u64 header length,
/// JSON header (config, tensors with shapes and offsets, metadata), then
/// little-endian float64 payload.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const nlohmann::json& metadata = nlohmann::json::object());
std::string serialize_checkpoint(const ModelParams& params, const nlohmann::json& metadata = nlohmann::json::object());

struct Checkpoint {
  ModelParams params;
  nlohmann::json metadata;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint parse_checkpoint(const std::string& bytes);

}  // namespace sil
