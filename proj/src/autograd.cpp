#include "drht/autograd.hpp"

#include <cstdlib>

namespace drht {

namespace {
bool env_check_finite() {
  static const bool enabled = [] {
    const char* env = std::getenv("DRHT_CHECK_FINITE");
    return env && *env && *env != '0';
  }();
  return enabled;
}
}  // namespace

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var<T>{this, nodes_.size() - 1};
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, const std::vector<Var<T>>& parents, BackwardFn backward,
                       const char* op_name) {
  if ((check_finite_ || env_check_finite()) && !all_finite<T>(value.values())) {
    throw NonFiniteError(std::string(op_name) + " produced a non-finite value");
  }
  Node node;
  node.value = std::move(value);
  node.is_leaf = false;
  for (const auto& p : parents) {
    if (p.tape != this) throw InvalidArgument(std::string(op_name) + ": operand recorded on a different tape");
    node.requires_grad = node.requires_grad || nodes_.at(p.id).requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var<T>{this, nodes_.size() - 1};
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(std::size_t id) {
  Node& node = nodes_.at(id);
  if (node.grad.empty()) node.grad = Tensor<T>(node.value.shape(), T{0});
  return node.grad;
}

template <typename T>
const Tensor<T>& Tape<T>::grad(Var<T> v) {
  return grad_buffer(v.id);
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (loss.tape != this || loss.id >= nodes_.size()) {
    throw InvalidArgument("backward: loss is not recorded on this tape");
  }
  Node& root = nodes_[loss.id];
  if (root.is_leaf) throw InvalidArgument("backward called before any forward op produced the loss");
  if (root.value.size() != 1) {
    throw ShapeError("backward requires a scalar loss, got shape " + to_string(root.value.shape()));
  }
  if (!root.requires_grad) return;
  grad_buffer(loss.id)[0] += T{1};
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.is_leaf || !node.backward || node.grad.empty()) continue;
    node.backward(*this, id);
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace drht
