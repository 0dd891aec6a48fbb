#include "sil/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "sil/error.hpp"
#include "sil/util.hpp"

namespace sil {

Pooling parse_pooling(const std::string& name) {
  if (name == "attention") return Pooling::attention;
  if (name == "final_state") return Pooling::final_state;
  throw ContractViolation("unknown pooling '" + name + "'");
}

std::string to_string(Pooling p) { return p == Pooling::attention ? "attention" : "final_state"; }

void ModelConfig::validate() const {
  if (input_dim == 0 || hidden_dim == 0) throw ContractViolation("model config: dimensions must be positive");
  if (num_layers == 0) throw ContractViolation("model config: need at least one LSTM layer");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ContractViolation("model config: dropout must be in [0,1)");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"input_dim", c.input_dim},
       {"hidden_dim", c.hidden_dim},
       {"num_layers", c.num_layers},
       {"dropout", c.dropout},
       {"pooling", to_string(c.pooling)},
       {"attention_dim", c.attention_dim},
       {"head_dropout", c.head_dropout},
       {"final_state_both_directions", c.final_state_both_directions},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c = ModelConfig{};
  c.input_dim = j.value("input_dim", c.input_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.num_layers = j.value("num_layers", c.num_layers);
  c.dropout = j.value("dropout", c.dropout);
  c.pooling = parse_pooling(j.value("pooling", std::string("attention")));
  c.attention_dim = j.value("attention_dim", c.attention_dim);
  c.head_dropout = j.value("head_dropout", c.head_dropout);
  c.final_state_both_directions = j.value("final_state_both_directions", c.final_state_both_directions);
  c.seed = j.value("seed", c.seed);
}

const Array& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw LookupError("model has no tensor '" + name + "'");
  return it->second;
}

std::string lstm_name(std::size_t layer, bool backward, const char* what) {
  return "lstm." + std::to_string(layer) + (backward ? ".bwd." : ".fwd.") + what;
}

namespace {

Array xavier(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Array a = Array::zeros(rows, cols);
  for (double& v : a.data()) v = rng.uniform(-limit, limit);
  return a;
}

std::vector<Var> run_direction(Tape& tape, Var proj, Var recurrent, std::size_t hidden, bool reverse) {
  const std::size_t steps = proj.value().rows();
  std::vector<Var> states(steps);
  Var h = tape.constant(Array::zeros(1, hidden));
  Var c = tape.constant(Array::zeros(1, hidden));
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t t = reverse ? steps - 1 - k : k;
    Var z = ops::add(ops::row(proj, t), ops::matmul_nt(h, recurrent));
    Var in_gate = ops::sigmoid(ops::slice_cols(z, 0, hidden));
    Var forget = ops::sigmoid(ops::slice_cols(z, hidden, hidden));
    Var cand = ops::tanh(ops::slice_cols(z, 2 * hidden, hidden));
    Var out_gate = ops::sigmoid(ops::slice_cols(z, 3 * hidden, hidden));
    c = ops::add(ops::mul(forget, c), ops::mul(in_gate, cand));
    h = ops::mul(out_gate, ops::tanh(c));
    states[t] = h;
  }
  return states;
}

Var dropout(Tape& tape, Var x, double p, Rng& rng) {
  if (p <= 0.0) return x;
  Array mask(x.value().shape());
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& m : mask.data()) m = rng.bernoulli(p) ? 0.0 : keep_scale;
  return ops::mul(x, tape.constant(std::move(mask)));
}

}  // namespace

ModelParams init_params(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;
  Rng rng(derive_seed(config.seed, "init"));
  const std::size_t H = config.hidden_dim;
  for (std::size_t layer = 0; layer < config.num_layers; ++layer) {
    const std::size_t in = layer == 0 ? config.input_dim : 2 * H;
    for (bool backward : {false, true}) {
      p.tensors[lstm_name(layer, backward, "W")] = xavier(4 * H, in, rng);
      p.tensors[lstm_name(layer, backward, "U")] = xavier(4 * H, H, rng);
      Array b = Array::zeros(1, 4 * H);
      for (std::size_t k = H; k < 2 * H; ++k) b[k] = 1.0;
      p.tensors[lstm_name(layer, backward, "b")] = std::move(b);
    }
  }
  if (config.pooling == Pooling::attention) {
    const std::size_t a = config.effective_attention_dim();
    p.tensors["attn.W"] = xavier(a, 2 * H, rng);
    p.tensors["attn.v"] = xavier(1, a, rng);
  }
  p.tensors["head.w"] = xavier(1, config.pooled_dim(), rng);
  p.tensors["head.b"] = Array::zeros(1, 1);
  return p;
}

AttentionOutput attention_pool(Var hidden, Var attn_w, Var attn_v) {
  if (hidden.value().rows() == 0) throw ContractViolation("attention_pool: empty sequence");
  Var projected = ops::tanh(ops::matmul_nt(hidden, attn_w));  // [T x a]
  Var scores = ops::matmul_nt(attn_v, projected);             // [1 x T]
  Var weights = ops::softmax_rows(scores);
  Var pooled = ops::matmul(weights, hidden);  // [1 x 2H]
  return {weights, pooled};
}

Var final_state_pool(Var top_hidden, std::size_t hidden_dim, bool both_directions) {
  const std::size_t steps = top_hidden.value().rows();
  if (steps == 0) throw ContractViolation("final_state_pool: empty sequence");
  Var fwd_last = ops::slice_cols(ops::row(top_hidden, steps - 1), 0, hidden_dim);
  if (!both_directions) return fwd_last;
  Var bwd_first = ops::slice_cols(ops::row(top_hidden, 0), hidden_dim, hidden_dim);
  return ops::concat_cols(fwd_last, bwd_first);
}

ForwardResult forward(Tape& tape, const ModelParams& params, const Array& embedded, ForwardMode mode) {
  const ModelConfig& cfg = params.config;
  if (embedded.rows() == 0 || embedded.size() == 0) throw ContractViolation("forward: empty input sequence");
  if (embedded.cols() != cfg.input_dim) {
    throw ContractViolation("forward: input width " + std::to_string(embedded.cols()) + " != input_dim " +
                            std::to_string(cfg.input_dim));
  }
  const std::size_t H = cfg.hidden_dim;
  auto bind = [&](const std::string& name) { return tape.parameter(name, params.at(name)); };

  ForwardResult result;
  Var layer_input = tape.constant(embedded.rank() == 2 ? embedded : embedded.reshaped({1, embedded.size()}));
  for (std::size_t layer = 0; layer < cfg.num_layers; ++layer) {
    std::vector<Var> directions;
    for (bool backward : {false, true}) {
      Var W = bind(lstm_name(layer, backward, "W"));
      Var U = bind(lstm_name(layer, backward, "U"));
      Var b = bind(lstm_name(layer, backward, "b"));
      Var proj = ops::add_bias(ops::matmul_nt(layer_input, W), b);  // [T x 4H]
      auto states = run_direction(tape, proj, U, H, backward);
      directions.push_back(ops::stack_rows(states));
    }
    layer_input = ops::concat_cols(directions[0], directions[1]);  // [T x 2H]
    if (layer + 1 < cfg.num_layers && mode.training()) {
      layer_input = dropout(tape, layer_input, cfg.dropout, *mode.rng);
    }
    result.layer_outputs.push_back(layer_input);
  }

  result.top_hidden = layer_input;
  if (cfg.pooling == Pooling::attention) {
    auto att = attention_pool(layer_input, bind("attn.W"), bind("attn.v"));
    result.attention = att.weights;
    result.pooled = att.pooled;
  } else {
    result.pooled = final_state_pool(layer_input, H, cfg.final_state_both_directions);
  }
  Var pooled = result.pooled;
  if (cfg.head_dropout && mode.training()) pooled = dropout(tape, pooled, cfg.dropout, *mode.rng);
  Var logit = ops::add_bias(ops::matmul_nt(pooled, bind("head.w")), bind("head.b"));
  result.score = ops::sigmoid(logit);
  return result;
}

PredictionReport predict(const ModelParams& params, const Array& embedded, std::string id) {
  Tape tape;
  auto out = forward(tape, params, embedded, ForwardMode::eval());
  PredictionReport report;
  report.id = std::move(id);
  report.score = out.score.value()[0];
  if (out.attention.valid()) {
    const auto w = out.attention.value().data();
    report.attention.assign(w.begin(), w.end());
  }
  return report;
}

namespace {

constexpr char kMagic[4] = {'S', 'I', 'L', 'M'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ParseError("checkpoint: truncated file");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string serialize_checkpoint(const ModelParams& params, const nlohmann::json& metadata) {
  nlohmann::json header;
  header["config"] = params.config;
  header["metadata"] = metadata;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, a] : params.tensors) {
    header["tensors"].push_back({{"name", name}, {"shape", a.shape()}, {"offset", offset}});
    offset += a.size();
  }
  const std::string text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& [_, a] : params.tensors) {
    for (double v : a.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const nlohmann::json& metadata) {
  write_file_atomic(path, serialize_checkpoint(params, metadata));
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw ParseError("checkpoint: bad magic");
  }
  std::size_t pos = sizeof kMagic;
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  const auto header_len = get_le<std::uint64_t>(bytes, pos);
  if (pos + header_len > bytes.size()) throw ParseError("checkpoint: truncated header");
  const auto header = nlohmann::json::parse(bytes.substr(pos, header_len));
  pos += header_len;
  const std::size_t payload = pos;

  Checkpoint cp;
  cp.params.config = header.at("config").get<ModelConfig>();
  cp.metadata = header.value("metadata", nlohmann::json::object());
  for (const auto& t : header.at("tensors")) {
    auto shape = t.at("shape").get<Array::Shape>();
    std::size_t at = payload + t.at("offset").get<std::size_t>() * sizeof(double);
    std::vector<double> values(shape_size(shape));
    for (double& v : values) v = std::bit_cast<double>(get_le<std::uint64_t>(bytes, at));
    cp.params.tensors.emplace(t.at("name").get<std::string>(), Array(std::move(shape), std::move(values)));
  }
  return cp;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_file(path)); }

}  // namespace sil
