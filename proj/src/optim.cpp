#include "sil/optim.hpp"

#include <algorithm>
#include <cmath>

#include "sil/error.hpp"

namespace sil {

void adam_step(ParamMap& params, const GradientMap& grads, AdamState& state) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw ContractViolation("adam_step: gradient for unknown parameter '" + name + "'");
    if (it->second.shape() != g.shape()) {
      throw ContractViolation("adam_step: shape mismatch for '" + name + "': " + shape_string(it->second.shape()) +
                              " vs " + shape_string(g.shape()));
    }
  }

  ++state.t;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);

  for (auto& [name, p] : params) {
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.shape() != p.shape()) m = Array::zeros_like(p);
    if (v.shape() != p.shape()) v = Array::zeros_like(p);
    const auto git = grads.find(name);
    const double* g = git == grads.end() ? nullptr : git->second.data().data();

    auto pd = p.data();
    auto md = m.data();
    auto vd = v.data();
    for (std::size_t i = 0; i < pd.size(); ++i) {
      const double gi = g ? g[i] : 0.0;
      md[i] = state.beta1 * md[i] + (1.0 - state.beta1) * gi;
      vd[i] = state.beta2 * vd[i] + (1.0 - state.beta2) * gi * gi;
      const double m_hat = md[i] / correction1;
      const double v_hat = vd[i] / correction2;
      pd[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

double clip_global_norm(GradientMap& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw ContractViolation("clip_global_norm: max_norm must be positive");
  double sq = 0.0;
  for (const auto& [_, g] : grads) {
    for (double x : g.data()) sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& [_, g] : grads) {
      for (double& x : g.data()) x *= f;
    }
  }
  return norm;
}

namespace {

double eval_loss(const GraphBuilder& builder, const ParamMap& params) {
  Tape tape;
  Var loss = builder(tape, params);
  if (loss.value().size() != 1) throw ContractViolation("finite_diff_check: builder returned a non-scalar loss");
  return loss.value()[0];
}

}  // namespace

double finite_diff_check(const GraphBuilder& builder, const ParamMap& params, double eps) {
  if (!(eps > 0.0)) throw ContractViolation("finite_diff_check: eps must be positive");
  if (params.empty()) return 0.0;

  GradientMap analytic;
  double base = 0.0;
  {
    Tape tape;
    Var loss = builder(tape, params);
    tape.backward(loss);
    analytic = tape.gradients();
    base = loss.value()[0];
  }
  if (eval_loss(builder, params) != base) {
    throw NumericError("finite_diff_check: builder is not deterministic (loss differs between identical builds)");
  }

  ParamMap probe = params;
  double worst = 0.0;
  for (auto& [name, array] : probe) {
    const auto ait = analytic.find(name);
    for (std::size_t i = 0; i < array.size(); ++i) {
      const double saved = array[i];
      array[i] = saved + eps;
      const double up = eval_loss(builder, probe);
      array[i] = saved - eps;
      const double down = eval_loss(builder, probe);
      array[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double exact = ait == analytic.end() ? 0.0 : ait->second[i];
      worst = std::max(worst, std::abs(exact - numeric) / std::max(std::abs(numeric), 1e-8));
    }
  }
  return worst;
}

}  // namespace sil
