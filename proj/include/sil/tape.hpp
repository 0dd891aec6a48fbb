#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sil/array.hpp"

namespace sil {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Array& value() const;
  const Array& grad() const;
  const Array::Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode differentiation tape. Nodes are appended in evaluation order,
/// so the node list is already a topological order of the graph.
///
/// Parameters are bound by name and referenced, not copied: the ParamMap passed
/// to `parameter()` must outlive the tape and must not change while it is used.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Array value);
  Var parameter(const std::string& name, const Array& value);

  /// Records an op result. `value` is checked for non-finite entries and a
  /// NumericError naming `op` is thrown if any are found.
  Var record(std::string_view op, Array value, std::vector<std::size_t> parents, BackwardFn fn);

  /// Seeds d(loss)/d(loss) = 1 and propagates. Throws ContractViolation for a
  /// non-scalar loss and NumericError when a gradient turns non-finite.
  void backward(Var loss);

  /// Accumulated gradient per bound parameter name. Parameters that the loss
  /// does not reach get zero gradients.
  GradientMap gradients() const;

  const Array& value(std::size_t id) const;
  const Array& grad(std::size_t id) const;
  /// Gradient slot of a node, allocated (zeroed) on first use. For op backward fns.
  Array& grad_slot(std::size_t id);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    std::string op;
    Array owned;
    const Array* external = nullptr;
    Array grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
    std::string param_name;
  };

  std::vector<Node> nodes_;
  std::vector<std::size_t> param_ids_;
};

/// Differentiable ops. All operate on rank-2 arrays (a rank-1 array is viewed
/// as one row) unless stated otherwise.
namespace ops {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// a [m x n] + bias broadcast over rows (bias holds n values).
Var add_bias(Var a, Var bias);
/// a [m x k] * b [k x n].
Var matmul(Var a, Var b);
/// a [m x k] * b^T where b is [n x k].
Var matmul_nt(Var a, Var b);
Var sigmoid(Var a);
Var tanh(Var a);
/// Softmax along the last axis, row by row.
Var softmax_rows(Var a);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var row(Var a, std::size_t r);
Var concat_cols(Var a, Var b);
/// Stacks [1 x n] rows into [T x n].
Var stack_rows(std::span<const Var> rows);
Var reshape(Var a, Array::Shape shape);
/// Sum of all entries, as a scalar.
Var sum(Var a);
/// Mean squared difference to a fixed target, as a scalar.
Var mse(Var prediction, const Array& target);

}  // namespace ops

/// Plain softmax on an Array (last axis). Throws ContractViolation on an empty axis.
Array softmax(const Array& x);

}  // namespace sil
