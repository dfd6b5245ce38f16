#include "fanet/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "fanet/error.hpp"

namespace fanet {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : node_(std::make_shared<Node>()) {
  node_->data.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : node_(std::make_shared<Node>()) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor of shape " + shape_str(shape) + " cannot hold " +
                         std::to_string(values.size()) + " values");
  }
  node_->shape = std::move(shape);
  node_->data = std::move(values);
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(shape()));
  }
  return node_->shape[axis];
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (node_) node_->grad.clear();
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  node_->requires_grad = on;
  return *this;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

template <typename T>
T& Tensor<T>::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
  const auto& s = node_->shape;
  return node_->data[((n * s[1] + c) * s[2] + h) * s[3] + w];
}

template <typename T>
T Tensor<T>::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  const auto& s = node_->shape;
  return node_->data[((n * s[1] + c) * s[2] + h) * s[3] + w];
}

template <typename T>
void Tensor<T>::backward() {
  if (numel() != 1) {
    throw DimensionError("backward() needs a scalar, got shape " + shape_str(shape()));
  }
  // Post-order DFS gives a topological order with inputs before outputs.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
  for (Node* node : order) {
    if (node->backward_fn) {
      node->backward_fn = nullptr;
      node->parents.clear();
    }
  }
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(node_->shape, node_->data);
}

namespace {

template <typename T>
Tensor<T> make_result_impl(Shape shape, std::vector<T> values,
                           const std::vector<const Tensor<T>*>& inputs,
                           std::function<void(detail::TensorNode<T>&)> backward_fn) {
#ifndef NDEBUG
  for (const T v : values) {
    if (!std::isfinite(v)) throw NumericalError("non-finite value produced by forward op");
  }
#endif
  Tensor<T> out(std::move(shape), std::move(values));
  if (!grad_enabled()) return out;
  bool needs = false;
  for (const auto* in : inputs) needs = needs || in->requires_grad();
  if (!needs) return out;
  auto* node = out.node();
  node->requires_grad = true;
  for (const auto* in : inputs) {
    if (in->requires_grad()) node->parents.push_back(in->node_ptr());
  }
  node->backward_fn = std::move(backward_fn);
  return out;
}

}  // namespace

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> values,
                      std::initializer_list<const Tensor<T>*> inputs,
                      std::function<void(detail::TensorNode<T>&)> backward_fn) {
  return make_result_impl<T>(std::move(shape), std::move(values),
                             std::vector<const Tensor<T>*>(inputs), std::move(backward_fn));
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> values,
                      const std::vector<const Tensor<T>*>& inputs,
                      std::function<void(detail::TensorNode<T>&)> backward_fn) {
  return make_result_impl<T>(std::move(shape), std::move(values), inputs, std::move(backward_fn));
}

template <typename T>
void accumulate_grad(detail::TensorNode<T>& dst, std::span<const T> src) {
  if (!dst.requires_grad) return;
  dst.ensure_grad();
  for (std::size_t i = 0; i < src.size(); ++i) dst.grad[i] += src[i];
}

template class Tensor<float>;
template class Tensor<double>;

#define FANET_INSTANTIATE(T)                                                                  \
  template Tensor<T> make_result<T>(Shape, std::vector<T>,                                    \
                                    std::initializer_list<const Tensor<T>*>,                  \
                                    std::function<void(detail::TensorNode<T>&)>);             \
  template Tensor<T> make_result<T>(Shape, std::vector<T>, const std::vector<const Tensor<T>*>&, \
                                    std::function<void(detail::TensorNode<T>&)>);             \
  template void accumulate_grad<T>(detail::TensorNode<T>&, std::span<const T>);

FANET_INSTANTIATE(float)
FANET_INSTANTIATE(double)

#undef FANET_INSTANTIATE

}  // namespace fanet
