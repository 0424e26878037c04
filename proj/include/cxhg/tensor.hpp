#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cxhg {

/// Storage precision. f32 is the training precision; f64 is the verification
/// mode used by gradient checks.
enum class DType : std::uint8_t { f32, f64 };

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);
const char* dtype_name(DType dtype);

template <class F>
decltype(auto) dispatch(DType dtype, F&& f) {
  if (dtype == DType::f32) return f(float{});
  return f(double{});
}

namespace detail {

struct Buffer {
  std::variant<std::vector<float>, std::vector<double>> data;

  static Buffer zeros(DType dtype, std::size_t n);

  DType dtype() const { return data.index() == 0 ? DType::f32 : DType::f64; }
  std::size_t size() const;

  template <class T>
  std::span<T> as() {
    return std::get<std::vector<T>>(data);
  }
  template <class T>
  std::span<const T> as() const {
    return std::get<std::vector<T>>(data);
  }
};

struct Node;

struct TensorImpl {
  Shape shape;
  std::shared_ptr<Buffer> values;
  std::shared_ptr<Buffer> grad;
  bool requires_grad = false;
  std::shared_ptr<Node> grad_fn;
};

/// Receives the upstream gradient and one accumulation target per input
/// (nullptr where the input does not need a gradient).
using BackwardFn =
    std::function<void(const Buffer& grad_out, std::span<Buffer* const> grad_in)>;

struct Node {
  std::string_view op;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  BackwardFn backward;
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, DType dtype = DType::f32);
  static Tensor full(Shape shape, double value, DType dtype = DType::f32);
  static Tensor from_vector(Shape shape, std::vector<float> values);
  static Tensor from_vector(Shape shape, std::vector<double> values);
  static Tensor from_list(Shape shape, std::initializer_list<double> values,
                          DType dtype = DType::f32);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::size_t numel() const;
  DType dtype() const;

  template <class T>
  std::span<const T> values() const {
    return std::as_const(*impl_->values).template as<T>();
  }
  /// In-place access. Only meaningful for leaves (parameters, inputs).
  template <class T>
  std::span<T> mutable_values() {
    return impl_->values->template as<T>();
  }

  double item() const;
  double at(std::size_t flat_index) const;
  void set(std::size_t flat_index, double value);
  std::vector<double> to_vector() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const;

  bool has_grad() const;
  /// Gradient as a detached tensor sharing the gradient buffer; zeros if none.
  Tensor grad() const;
  std::vector<double> grad_vector() const;
  void zero_grad();

  /// Accumulates d(this)/d(leaf) into every reachable requires_grad leaf.
  void backward() const;

  Tensor detach() const;
  Tensor clone() const;
  Tensor to(DType dtype) const;

  /// Overwrites values (and dtype) from another tensor of equal shape.
  void assign(const Tensor& other);

  const void* id() const { return impl_.get(); }

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Builds an op result and, when gradients are being tracked, the node that
/// routes gradients back to `inputs`.
Tensor make_result(Shape shape, detail::Buffer values, std::string_view op,
                   std::vector<Tensor> inputs, detail::BackwardFn backward);

/// Thread-local switch that suppresses graph construction.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

struct RecordEntry {
  std::string_view op;
  std::vector<const void*> inputs;
  const void* output;
};

/// Executed differentiable operations reachable from a root, in topological
/// order (inputs before consumers).
struct ComputationRecord {
  std::vector<RecordEntry> entries;
};

ComputationRecord trace(const Tensor& root);

void backward(const Tensor& loss);

}  // namespace cxhg
