#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "drht/tensor.hpp"

namespace drht {

template <typename T>
class Tape;

/// Handle to a value recorded on a Tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Reverse-mode recorder. Every op appends one node holding its value and a
/// closure that pushes the node's gradient to its parents. Gradients are
/// accumulated additively, so a value used twice receives both contributions.
///
/// A tape holds a single scalar type; float and double graphs never mix.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers an input. Only leaves with `requires_grad` receive gradients.
  Var<T> leaf(Tensor<T> value, bool requires_grad = false);

  /// Records an op result. `backward` runs only when some parent needs a gradient.
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& parents, BackwardFn backward, const char* op_name);

  /// Propagates d(loss)/d(node) to every node that requires a gradient.
  /// Throws if `loss` is not a scalar op result recorded on this tape.
  void backward(Var<T> loss);

  const Tensor<T>& value(Var<T> v) const { return nodes_.at(v.id).value; }
  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(Var<T> v) const { return nodes_.at(v.id).requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  /// Gradient of a node after backward(); zero-filled if nothing flowed into it.
  const Tensor<T>& grad(Var<T> v);

  /// Mutable gradient buffer for backward closures (allocated on first use).
  Tensor<T>& grad_buffer(std::size_t id);

  std::size_t size() const noexcept { return nodes_.size(); }

  /// When enabled every recorded value is checked for NaN/Inf.
  void set_check_finite(bool enabled) noexcept { check_finite_ = enabled; }
  bool check_finite() const noexcept { return check_finite_; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    bool is_leaf = true;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool check_finite_ = false;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  if (!tape) throw InvalidArgument("use of an unbound Var");
  return tape->value(*this);
}

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace drht
