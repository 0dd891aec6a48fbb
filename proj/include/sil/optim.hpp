#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "sil/array.hpp"
#include "sil/tape.hpp"

namespace sil {

/// Adam moments for a set of named parameters. Defaults are Kingma & Ba's with lr = 0.001.
struct AdamState {
  ParamMap m;
  ParamMap v;
  std::uint64_t t = 0;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update, in place. A parameter without an entry in
/// `grads` is treated as having a zero gradient. Moments are created lazily.
void adam_step(ParamMap& params, const GradientMap& grads, AdamState& state);

/// Rescales all gradients together so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_global_norm(GradientMap& grads, double max_norm);

/// Builds the loss graph for a given parameter set. Must be deterministic.
using GraphBuilder = std::function<Var(Tape&, const ParamMap&)>;

/// Compares reverse-mode gradients against central differences at every
/// parameter entry. Returns max |analytic - numeric| / max(|numeric|, 1e-8).
/// Throws NumericError if two unperturbed builds disagree.
double finite_diff_check(const GraphBuilder& builder, const ParamMap& params, double eps = 1e-6);

}  // namespace sil
