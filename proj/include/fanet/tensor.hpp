#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fanet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

/// One vertex of the autodiff tape. Leaves have no backward function;
/// recorded results keep their inputs alive until backward() releases them.
template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
};

}  // namespace detail

/// Whether newly created results are recorded on the tape (thread-local).
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Dense row-major tensor handle. Copies share storage; use detach() for a
/// deep copy. Activations use NCHW.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using Node = detail::TensorNode<T>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->data.size(); }

  std::span<T> data() { return node_->data; }
  std::span<const T> data() const { return node_->data; }

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> grad() { return node_->grad; }
  void zero_grad();

  bool requires_grad() const { return node_ && node_->requires_grad; }
  Tensor& set_requires_grad(bool on);

  T item() const;
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w);
  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

  /// Reverse-mode sweep from this scalar. Frees the recorded graph afterwards.
  void backward();

  /// Deep copy of the values with no grad history.
  Tensor detach() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }
  static Tensor from_node(std::shared_ptr<Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::shared_ptr<Node> node_;
};

/// Creates an op result. If grad mode is on and any input requires grad, the
/// result is attached to the tape with `backward_fn`, which reads the
/// output gradient from the node it is given.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> values,
                      std::initializer_list<const Tensor<T>*> inputs,
                      std::function<void(detail::TensorNode<T>&)> backward_fn);

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> values,
                      const std::vector<const Tensor<T>*>& inputs,
                      std::function<void(detail::TensorNode<T>&)> backward_fn);

/// Adds `src` into the gradient of `dst` if it takes gradients.
template <typename T>
void accumulate_grad(detail::TensorNode<T>& dst, std::span<const T> src);

/// Element-type conversion (no grad history).
template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& x) {
  std::vector<To> v(x.numel());
  auto src = x.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<To>(src[i]);
  return Tensor<To>(x.shape(), std::move(v));
}

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace fanet
