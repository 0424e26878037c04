#include "cxhg/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "cxhg/error.hpp"

namespace cxhg {

namespace {
thread_local bool tls_grad_enabled = true;

using detail::Buffer;
using detail::TensorImpl;

std::shared_ptr<TensorImpl> new_impl(Shape shape, Buffer values) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->values = std::make_shared<Buffer>(std::move(values));
  return impl;
}

void add_into(Buffer& dst, const Buffer& src) {
  dispatch(dst.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto d = dst.as<T>();
    auto s = src.as<T>();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
  });
}
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

const char* dtype_name(DType dtype) {
  return dtype == DType::f32 ? "f32" : "f64";
}

const char* to_string(FormatIssue issue) noexcept {
  switch (issue) {
    case FormatIssue::bad_magic: return "bad magic";
    case FormatIssue::bad_version: return "bad version";
    case FormatIssue::truncated: return "truncated payload";
    case FormatIssue::shape_mismatch: return "shape mismatch";
    case FormatIssue::bad_value: return "bad value";
  }
  return "unknown";
}

namespace detail {

Buffer Buffer::zeros(DType dtype, std::size_t n) {
  if (dtype == DType::f32) return Buffer{std::vector<float>(n, 0.0f)};
  return Buffer{std::vector<double>(n, 0.0)};
}

std::size_t Buffer::size() const {
  return std::visit([](const auto& v) { return v.size(); }, data);
}

}  // namespace detail

Tensor Tensor::zeros(Shape shape, DType dtype) {
  auto n = shape_numel(shape);
  return Tensor(new_impl(std::move(shape), Buffer::zeros(dtype, n)));
}

Tensor Tensor::full(Shape shape, double value, DType dtype) {
  Tensor t = zeros(std::move(shape), dtype);
  dispatch(dtype, [&](auto tag) {
    using T = decltype(tag);
    auto v = t.mutable_values<T>();
    std::fill(v.begin(), v.end(), static_cast<T>(value));
  });
  return t;
}

Tensor Tensor::from_vector(Shape shape, std::vector<float> values) {
  if (shape_numel(shape) != values.size()) {
    throw Error(ErrorCode::shape, "from_vector: " + std::to_string(values.size()) +
                                      " values for shape " + shape_str(shape));
  }
  return Tensor(new_impl(std::move(shape), Buffer{std::move(values)}));
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size()) {
    throw Error(ErrorCode::shape, "from_vector: " + std::to_string(values.size()) +
                                      " values for shape " + shape_str(shape));
  }
  return Tensor(new_impl(std::move(shape), Buffer{std::move(values)}));
}

Tensor Tensor::from_list(Shape shape, std::initializer_list<double> values,
                         DType dtype) {
  if (dtype == DType::f64) {
    return from_vector(std::move(shape), std::vector<double>(values));
  }
  std::vector<float> v(values.begin(), values.end());
  return from_vector(std::move(shape), std::move(v));
}

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::numel() const { return impl_->values->size(); }

DType Tensor::dtype() const { return impl_->values->dtype(); }

double Tensor::item() const {
  if (numel() != 1) {
    throw Error(ErrorCode::shape, "item() on tensor of shape " + shape_str(shape()));
  }
  return at(0);
}

double Tensor::at(std::size_t flat_index) const {
  return dispatch(dtype(), [&](auto tag) -> double {
    using T = decltype(tag);
    return values<T>()[flat_index];
  });
}

void Tensor::set(std::size_t flat_index, double value) {
  dispatch(dtype(), [&](auto tag) {
    using T = decltype(tag);
    mutable_values<T>()[flat_index] = static_cast<T>(value);
  });
}

std::vector<double> Tensor::to_vector() const {
  return dispatch(dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto v = values<T>();
    return std::vector<double>(v.begin(), v.end());
  });
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  if (!is_leaf()) {
    throw Error(ErrorCode::value, "set_requires_grad on a non-leaf tensor");
  }
  impl_->requires_grad = on;
  if (!on) impl_->grad.reset();
  return *this;
}

bool Tensor::is_leaf() const { return impl_->grad_fn == nullptr; }

bool Tensor::has_grad() const { return impl_->grad != nullptr; }

Tensor Tensor::grad() const {
  if (!impl_->grad) return zeros(shape(), dtype());
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->values = impl_->grad;
  return Tensor(impl);
}

std::vector<double> Tensor::grad_vector() const { return grad().to_vector(); }

void Tensor::zero_grad() { impl_->grad.reset(); }

void Tensor::backward() const { cxhg::backward(*this); }

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->values = impl_->values;
  return Tensor(impl);
}

Tensor Tensor::clone() const {
  return Tensor(new_impl(impl_->shape, *impl_->values));
}

Tensor Tensor::to(DType target) const {
  if (target == dtype()) return clone();
  if (target == DType::f64) {
    auto v = values<float>();
    return from_vector(shape(), std::vector<double>(v.begin(), v.end()));
  }
  auto v = values<double>();
  std::vector<float> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(),
                 [](double x) { return static_cast<float>(x); });
  return from_vector(shape(), std::move(out));
}

void Tensor::assign(const Tensor& other) {
  if (other.shape() != shape()) {
    throw Error(ErrorCode::shape, "assign: shape " + shape_str(other.shape()) +
                                      " into " + shape_str(shape()));
  }
  *impl_->values = *other.impl_->values;
  impl_->grad.reset();
}

bool grad_enabled() { return tls_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(tls_grad_enabled) {
  tls_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { tls_grad_enabled = previous_; }

Tensor make_result(Shape shape, Buffer values, std::string_view op,
                   std::vector<Tensor> inputs, detail::BackwardFn backward) {
  auto impl = new_impl(std::move(shape), std::move(values));
  if (!tls_grad_enabled) return Tensor(impl);
  bool needs = std::any_of(inputs.begin(), inputs.end(),
                           [](const Tensor& t) { return t.requires_grad(); });
  if (!needs) return Tensor(impl);
  auto node = std::make_shared<detail::Node>();
  node->op = op;
  node->inputs.reserve(inputs.size());
  for (auto& t : inputs) node->inputs.push_back(t.impl());
  node->backward = std::move(backward);
  impl->requires_grad = true;
  impl->grad_fn = std::move(node);
  return Tensor(impl);
}

namespace {

// Post-order DFS over grad_fn edges: every impl appears after its inputs.
std::vector<TensorImpl*> topo_order(TensorImpl* root) {
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  struct Frame {
    TensorImpl* impl;
    std::size_t next;
  };
  std::vector<Frame> stack;
  if (!root->grad_fn) return order;
  stack.push_back({root, 0});
  visited.insert(root);
  while (!stack.empty()) {
    auto& top = stack.back();
    auto& inputs = top.impl->grad_fn->inputs;
    if (top.next < inputs.size()) {
      TensorImpl* child = inputs[top.next++].get();
      if (child->grad_fn && visited.insert(child).second) {
        stack.push_back({child, 0});
      }
    } else {
      order.push_back(top.impl);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

ComputationRecord trace(const Tensor& root) {
  ComputationRecord record;
  for (TensorImpl* impl : topo_order(root.impl().get())) {
    RecordEntry entry;
    entry.op = impl->grad_fn->op;
    entry.output = impl;
    for (auto& in : impl->grad_fn->inputs) entry.inputs.push_back(in.get());
    record.entries.push_back(std::move(entry));
  }
  return record;
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw Error(ErrorCode::shape,
                "backward requires a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  TensorImpl* root = loss.impl().get();
  Buffer seed = Buffer::zeros(loss.dtype(), 1);
  dispatch(loss.dtype(), [&](auto tag) { seed.as<decltype(tag)>()[0] = 1; });

  if (!root->grad_fn) {  // leaf loss
    if (!root->grad) root->grad = std::make_shared<Buffer>(Buffer::zeros(loss.dtype(), 1));
    add_into(*root->grad, seed);
    return;
  }

  auto order = topo_order(root);
  // Gradients of interior nodes live here only while they are needed.
  std::unordered_map<TensorImpl*, Buffer> interior;
  interior.emplace(root, std::move(seed));

  std::vector<Buffer*> sinks;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* impl = *it;
    auto found = interior.find(impl);
    if (found == interior.end()) continue;  // not reached from the loss
    Buffer grad_out = std::move(found->second);
    interior.erase(found);

    auto& node = *impl->grad_fn;
    sinks.assign(node.inputs.size(), nullptr);
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      TensorImpl* in = node.inputs[i].get();
      if (!in->requires_grad) continue;
      if (in->grad_fn) {
        auto [slot, fresh] = interior.try_emplace(in);
        if (fresh) slot->second = Buffer::zeros(in->values->dtype(), in->values->size());
        sinks[i] = &slot->second;
      } else {
        if (!in->grad) {
          in->grad = std::make_shared<Buffer>(
              Buffer::zeros(in->values->dtype(), in->values->size()));
        }
        sinks[i] = in->grad.get();
      }
    }
    node.backward(grad_out, sinks);
  }
}

}  // namespace cxhg
