#include "sil/tape.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "sil/error.hpp"

namespace sil {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Array& a) { return ConstMap(a.data().data(), a.rows(), a.cols()); }
MutMap as_matrix(Array& a) { return MutMap(a.data().data(), a.rows(), a.cols()); }

Tape& same_tape(Var a, Var b, std::string_view op) {
  if (!a.valid() || a.tape() != b.tape()) {
    throw ContractViolation(std::string(op) + ": operands live on different tapes");
  }
  return *a.tape();
}

void require_same_size(const Array& a, const Array& b, std::string_view op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractViolation(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                            shape_string(b.shape()));
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const Array& Var::value() const { return tape_->value(id_); }
const Array& Var::grad() const { return tape_->grad(id_); }

Var Tape::constant(Array value) {
  return record("constant", std::move(value), {}, nullptr);
}

Var Tape::parameter(const std::string& name, const Array& value) {
  if (!value.all_finite()) throw NumericError("parameter '" + name + "' holds non-finite values");
  Node node;
  node.op = "parameter";
  node.external = &value;
  node.requires_grad = true;
  node.param_name = name;
  nodes_.push_back(std::move(node));
  param_ids_.push_back(nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Array value, std::vector<std::size_t> parents, BackwardFn fn) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by op '" + std::string(op) + "'");
  }
  Node node;
  node.op = std::string(op);
  node.owned = std::move(value);
  node.requires_grad = std::any_of(parents.begin(), parents.end(),
                                   [this](std::size_t p) { return nodes_[p].requires_grad; });
  node.parents = std::move(parents);
  if (node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Array& Tape::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : n.owned;
}

const Array& Tape::grad(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (n.grad.size() != value(id).size()) {
    // Never touched by backward: expose zeros of the right shape.
    const_cast<Node&>(n).grad = Array::zeros_like(value(id));
  }
  return n.grad;
}

Array& Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != value(id).size()) n.grad = Array::zeros_like(value(id));
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ContractViolation("backward: loss belongs to another tape");
  if (value(loss.id()).size() != 1) {
    throw ContractViolation("backward: loss must be scalar, got shape " + shape_string(value(loss.id()).shape()));
  }
  for (auto& n : nodes_) n.grad = Array();
  grad_slot(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    if (!n.grad.all_finite()) {
      throw NumericError("non-finite gradient flowing into op '" + n.op + "'");
    }
    n.backward(*this, i);
  }
  for (std::size_t id : param_ids_) {
    const Node& n = nodes_[id];
    if (!n.grad.empty() && !n.grad.all_finite()) {
      throw NumericError("non-finite gradient for parameter '" + n.param_name + "'");
    }
  }
}

GradientMap Tape::gradients() const {
  GradientMap out;
  for (std::size_t id : param_ids_) {
    const Node& n = nodes_[id];
    auto [it, inserted] = out.try_emplace(n.param_name, grad(id));
    if (!inserted) {
      // Same parameter bound twice: gradients add up.
      auto dst = it->second.data();
      auto src = grad(id).data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
  return out;
}

Array softmax(const Array& x) {
  if (x.size() == 0 || x.cols() == 0) throw ContractViolation("softmax: empty axis");
  Array y(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto out = y.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      out[c] = std::exp(in[c] - mx);
      total += out[c];
    }
    for (double& v : out) v /= total;
  }
  return y;
}

namespace ops {

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  require_same_size(a.value(), b.value(), "add");
  Array out = a.value();
  auto od = out.data();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] += bd[i];
  const auto ia = a.id(), ib = b.id();
  return t.record("add", std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self).data();
    for (auto id : {ia, ib}) {
      if (!tp.requires_grad(id)) continue;
      auto d = tp.grad_slot(id).data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  require_same_size(a.value(), b.value(), "sub");
  Array out = a.value();
  auto od = out.data();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] -= bd[i];
  const auto ia = a.id(), ib = b.id();
  return t.record("sub", std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self).data();
    if (tp.requires_grad(ia)) {
      auto d = tp.grad_slot(ia).data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
    if (tp.requires_grad(ib)) {
      auto d = tp.grad_slot(ib).data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b, "mul");
  require_same_size(a.value(), b.value(), "mul");
  Array out = a.value();
  auto od = out.data();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] *= bd[i];
  const auto ia = a.id(), ib = b.id();
  return t.record("mul", std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self).data();
    const auto av = tp.value(ia).data();
    const auto bv = tp.value(ib).data();
    if (tp.requires_grad(ia)) {
      auto d = tp.grad_slot(ia).data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * bv[i];
    }
    if (tp.requires_grad(ib)) {
      auto d = tp.grad_slot(ib).data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tape& t = *a.tape();
  Array out = a.value();
  for (double& v : out.data()) v *= factor;
  const auto ia = a.id();
  return t.record("scale", std::move(out), {ia}, [ia, factor](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self).data();
    auto d = tp.grad_slot(ia).data();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * factor;
  });
}

Var add_bias(Var a, Var bias) {
  Tape& t = same_tape(a, bias, "add_bias");
  const Array& av = a.value();
  const Array& bv = bias.value();
  if (bv.size() != av.cols()) {
    throw ContractViolation("add_bias: bias of " + std::to_string(bv.size()) + " values for " +
                            std::to_string(av.cols()) + " columns");
  }
  Array out = av;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv[c];
  }
  const auto ia = a.id(), ib = bias.id();
  return t.record("add_bias", std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Array& g = tp.grad(self);
    if (tp.requires_grad(ia)) {
      auto d = tp.grad_slot(ia).data();
      const auto gd = g.data();
      for (std::size_t i = 0; i < gd.size(); ++i) d[i] += gd[i];
    }
    if (tp.requires_grad(ib)) {
      auto d = tp.grad_slot(ib).data();
      for (std::size_t r = 0; r < g.rows(); ++r) {
        auto gr = g.row(r);
        for (std::size_t c = 0; c < gr.size(); ++c) d[c] += gr[c];
      }
    }
  });
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  const Array& av = a.value();
  const Array& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ContractViolation("matmul: inner dimensions differ " + shape_string(av.shape()) + " * " +
                            shape_string(bv.shape()));
  }
  Array out = Array::zeros(av.rows(), bv.cols());
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
  const auto ia = a.id(), ib = b.id();
  return t.record("matmul", std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const auto g = as_matrix(tp.grad(self));
    if (tp.requires_grad(ia)) as_matrix(tp.grad_slot(ia)).noalias() += g * as_matrix(tp.value(ib)).transpose();
    if (tp.requires_grad(ib)) as_matrix(tp.grad_slot(ib)).noalias() += as_matrix(tp.value(ia)).transpose() * g;
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul_nt");
  const Array& av = a.value();
  const Array& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw ContractViolation("matmul_nt: inner dimensions differ " + shape_string(av.shape()) + " * " +
                            shape_string(bv.shape()) + "^T");
  }
  Array out = Array::zeros(av.rows(), bv.rows());
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv).transpose();
  const auto ia = a.id(), ib = b.id();
  return t.record("matmul_nt", std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const auto g = as_matrix(tp.grad(self));
    if (tp.requires_grad(ia)) as_matrix(tp.grad_slot(ia)).noalias() += g * as_matrix(tp.value(ib));
    if (tp.requires_grad(ib)) as_matrix(tp.grad_slot(ib)).noalias() += g.transpose() * as_matrix(tp.value(ia));
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape();
  Array out = a.value();
  for (double& v : out.data()) v = stable_sigmoid(v);
  const auto ia = a.id();
  return t.record("sigmoid", std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self).data();
    const auto y = tp.value(self).data();
    auto d = tp.grad_slot(ia).data();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh(Var a) {
  Tape& t = *a.tape();
  Array out = a.value();
  for (double& v : out.data()) v = std::tanh(v);
  const auto ia = a.id();
  return t.record("tanh", std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self).data();
    const auto y = tp.value(self).data();
    auto d = tp.grad_slot(ia).data();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var softmax_rows(Var a) {
  Tape& t = *a.tape();
  Array out = softmax(a.value());
  const auto ia = a.id();
  return t.record("softmax", std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
    const Array& g = tp.grad(self);
    const Array& y = tp.value(self);
    Array& d = tp.grad_slot(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto gr = g.row(r);
      auto yr = y.row(r);
      auto dr = d.row(r);
      double dot = 0.0;
      for (std::size_t c = 0; c < yr.size(); ++c) dot += gr[c] * yr[c];
      for (std::size_t c = 0; c < yr.size(); ++c) dr[c] += yr[c] * (gr[c] - dot);
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  Tape& t = *a.tape();
  const Array& av = a.value();
  if (begin + count > av.cols()) throw ContractViolation("slice_cols: range exceeds column count");
  Array out = Array::zeros(av.rows(), count);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto src = av.row(r).subspan(begin, count);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  const auto ia = a.id();
  return t.record("slice_cols", std::move(out), {ia}, [ia, begin, count](Tape& tp, std::size_t self) {
    const Array& g = tp.grad(self);
    Array& d = tp.grad_slot(ia);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto gr = g.row(r);
      auto dr = d.row(r).subspan(begin, count);
      for (std::size_t c = 0; c < count; ++c) dr[c] += gr[c];
    }
  });
}

Var row(Var a, std::size_t r) {
  Tape& t = *a.tape();
  const Array& av = a.value();
  if (r >= av.rows()) throw ContractViolation("row: index out of range");
  auto src = av.row(r);
  Array out = Array::row_vector(std::vector<double>(src.begin(), src.end()));
  const auto ia = a.id();
  return t.record("row", std::move(out), {ia}, [ia, r](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self).data();
    auto d = tp.grad_slot(ia).row(r);
    for (std::size_t c = 0; c < g.size(); ++c) d[c] += g[c];
  });
}

Var concat_cols(Var a, Var b) {
  Tape& t = same_tape(a, b, "concat_cols");
  const Array& av = a.value();
  const Array& bv = b.value();
  if (av.rows() != bv.rows()) throw ContractViolation("concat_cols: row counts differ");
  const std::size_t p = av.cols(), q = bv.cols();
  Array out = Array::zeros(av.rows(), p + q);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto dst = out.row(r);
    std::copy(av.row(r).begin(), av.row(r).end(), dst.begin());
    std::copy(bv.row(r).begin(), bv.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(p));
  }
  const auto ia = a.id(), ib = b.id();
  return t.record("concat_cols", std::move(out), {ia, ib}, [ia, ib, p, q](Tape& tp, std::size_t self) {
    const Array& g = tp.grad(self);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto gr = g.row(r);
      if (tp.requires_grad(ia)) {
        auto d = tp.grad_slot(ia).row(r);
        for (std::size_t c = 0; c < p; ++c) d[c] += gr[c];
      }
      if (tp.requires_grad(ib)) {
        auto d = tp.grad_slot(ib).row(r);
        for (std::size_t c = 0; c < q; ++c) d[c] += gr[p + c];
      }
    }
  });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ContractViolation("stack_rows: no rows");
  Tape& t = *rows.front().tape();
  const std::size_t n = rows.front().value().size();
  Array out = Array::zeros(rows.size(), n);
  std::vector<std::size_t> ids;
  ids.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Array& v = rows[r].value();
    if (rows[r].tape() != &t || v.size() != n) throw ContractViolation("stack_rows: ragged rows");
    std::copy(v.data().begin(), v.data().end(), out.row(r).begin());
    ids.push_back(rows[r].id());
  }
  auto parents = ids;
  return t.record("stack_rows", std::move(out), std::move(parents), [ids](Tape& tp, std::size_t self) {
    const Array& g = tp.grad(self);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (!tp.requires_grad(ids[r])) continue;
      auto d = tp.grad_slot(ids[r]).data();
      auto gr = g.row(r);
      for (std::size_t c = 0; c < gr.size(); ++c) d[c] += gr[c];
    }
  });
}

Var reshape(Var a, Array::Shape shape) {
  Tape& t = *a.tape();
  Array out = a.value().reshaped(std::move(shape));
  const auto ia = a.id();
  return t.record("reshape", std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self).data();
    auto d = tp.grad_slot(ia).data();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
  });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  const auto ia = a.id();
  return t.record("sum", Array::scalar(total), {ia}, [ia](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    for (double& d : tp.grad_slot(ia).data()) d += g;
  });
}

Var mse(Var prediction, const Array& target) {
  Tape& t = *prediction.tape();
  const Array& p = prediction.value();
  if (p.size() != target.size() || p.size() == 0) throw ContractViolation("mse: prediction/target size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double e = p[i] - target[i];
    total += e * e;
  }
  const auto n = static_cast<double>(p.size());
  const auto ip = prediction.id();
  return t.record("mse", Array::scalar(total / n), {ip}, [ip, target, n](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    const auto pv = tp.value(ip).data();
    auto d = tp.grad_slot(ip).data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g * 2.0 * (pv[i] - target[i]) / n;
  });
}

}  // namespace ops

}  // namespace sil
