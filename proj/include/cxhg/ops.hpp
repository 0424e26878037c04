#pragma once

#include <vector>

#include "cxhg/tensor.hpp"

namespace cxhg {

enum class ElementwiseKind { add, sub, mul, relu, sigmoid, exp, square };

/// Unary kinds ignore `b`. Binary kinds broadcast numpy-style: axes align from
/// the last dimension and extent-1 axes stretch.
Tensor elementwise(ElementwiseKind kind, const Tensor& a, const Tensor& b = {});

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor square(const Tensor& a);

/// Multiplication by a constant.
Tensor scale(const Tensor& a, double factor);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

Shape broadcast_shape(const Shape& a, const Shape& b);

Tensor matmul(const Tensor& a, const Tensor& b);

enum class ReduceKind { sum, mean };

/// Reduces over `axes` with 64-bit accumulation. Reduced axes are dropped
/// unless `keep_dims` is set. An empty axis list reduces everything.
Tensor reduce(ReduceKind kind, const Tensor& a, const std::vector<int>& axes,
              bool keep_dims = false);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Same values under a new shape of equal element count.
Tensor reshape(const Tensor& a, Shape shape);

}  // namespace cxhg
