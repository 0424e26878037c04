#include "cxhg/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "cxhg/error.hpp"

namespace cxhg {

using detail::Buffer;

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dtype() != b.dtype()) {
    throw Error(ErrorCode::value, std::string(op) + ": mixed dtypes " +
                                      dtype_name(a.dtype()) + " and " +
                                      dtype_name(b.dtype()));
  }
}

// Per-output-axis strides into each operand; 0 where the operand broadcasts.
struct BroadcastPlan {
  Shape out;
  std::vector<std::size_t> a_stride;
  std::vector<std::size_t> b_stride;
};

std::vector<std::size_t> aligned_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  std::size_t offset = out.size() - in.size();
  for (std::size_t i = in.size(); i-- > 0;) {
    strides[offset + i] = in[i] == 1 ? 0 : stride;
    stride *= in[i];
  }
  return strides;
}

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b) {
  BroadcastPlan plan;
  plan.out = broadcast_shape(a, b);
  plan.a_stride = aligned_strides(a, plan.out);
  plan.b_stride = aligned_strides(b, plan.out);
  return plan;
}

// Calls f(out_index, a_index, b_index) over the broadcast iteration space.
template <class F>
void for_each_broadcast(const BroadcastPlan& plan, F&& f) {
  const std::size_t rank = plan.out.size();
  const std::size_t n = shape_numel(plan.out);
  std::vector<std::size_t> counter(rank, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t o = 0; o < n; ++o) {
    f(o, ia, ib);
    for (std::size_t d = rank; d-- > 0;) {
      ia += plan.a_stride[d];
      ib += plan.b_stride[d];
      if (++counter[d] < plan.out[d]) break;
      ia -= plan.a_stride[d] * plan.out[d];
      ib -= plan.b_stride[d] * plan.out[d];
      counter[d] = 0;
    }
  }
}

Tensor binary(ElementwiseKind kind, const Tensor& a, const Tensor& b) {
  require_same_dtype(a, b, "elementwise");
  BroadcastPlan plan = plan_broadcast(a.shape(), b.shape());
  const bool same = a.shape() == b.shape();
  return dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    Buffer out = Buffer::zeros(a.dtype(), shape_numel(plan.out));
    auto o = out.as<T>();
    auto av = a.values<T>();
    auto bv = b.values<T>();
    auto apply = [kind](T x, T y) -> T {
      switch (kind) {
        case ElementwiseKind::add: return x + y;
        case ElementwiseKind::sub: return x - y;
        default: return x * y;
      }
    };
    if (same) {
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = apply(av[i], bv[i]);
    } else {
      for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
        o[i] = apply(av[ia], bv[ib]);
      });
    }
    auto backward = [kind, plan, same, a, b](const Buffer& gout,
                                             std::span<Buffer* const> gin) {
      auto g = gout.as<T>();
      auto av = a.values<T>();
      auto bv = b.values<T>();
      const T b_sign = kind == ElementwiseKind::sub ? T(-1) : T(1);
      auto accumulate = [&](std::size_t i, std::size_t ia, std::size_t ib) {
        if (gin[0]) {
          T d = kind == ElementwiseKind::mul ? g[i] * bv[ib] : g[i];
          gin[0]->as<T>()[ia] += d;
        }
        if (gin[1]) {
          T d = kind == ElementwiseKind::mul ? g[i] * av[ia] : b_sign * g[i];
          gin[1]->as<T>()[ib] += d;
        }
      };
      if (same) {
        for (std::size_t i = 0; i < g.size(); ++i) accumulate(i, i, i);
      } else {
        for_each_broadcast(plan, accumulate);
      }
    };
    const char* name = kind == ElementwiseKind::add   ? "add"
                       : kind == ElementwiseKind::sub ? "sub"
                                                      : "mul";
    return make_result(plan.out, std::move(out), name, {a, b}, backward);
  });
}

Tensor unary(ElementwiseKind kind, const Tensor& a) {
  return dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    Buffer out = Buffer::zeros(a.dtype(), a.numel());
    auto o = out.as<T>();
    auto av = a.values<T>();
    for (std::size_t i = 0; i < o.size(); ++i) {
      T x = av[i];
      switch (kind) {
        case ElementwiseKind::relu: o[i] = x > T(0) ? x : T(0); break;
        case ElementwiseKind::sigmoid: o[i] = T(1) / (T(1) + std::exp(-x)); break;
        case ElementwiseKind::exp: o[i] = std::exp(x); break;
        default: o[i] = x * x; break;
      }
    }
    // Sigmoid and exp derive their partials from the output values.
    auto saved_out = std::make_shared<const Buffer>(out);
    auto backward = [kind, a, saved_out](const Buffer& gout,
                                         std::span<Buffer* const> gin) {
      if (!gin[0]) return;
      auto g = gout.as<T>();
      auto x = a.values<T>();
      auto y = saved_out->as<T>();
      auto d = gin[0]->as<T>();
      for (std::size_t i = 0; i < g.size(); ++i) {
        switch (kind) {
          case ElementwiseKind::relu: d[i] += x[i] > T(0) ? g[i] : T(0); break;
          case ElementwiseKind::sigmoid: d[i] += g[i] * y[i] * (T(1) - y[i]); break;
          case ElementwiseKind::exp: d[i] += g[i] * y[i]; break;
          default: d[i] += g[i] * T(2) * x[i]; break;
        }
      }
    };
    const char* name = kind == ElementwiseKind::relu      ? "relu"
                       : kind == ElementwiseKind::sigmoid ? "sigmoid"
                       : kind == ElementwiseKind::exp     ? "exp"
                                                          : "square";
    return make_result(a.shape(), std::move(out), name, {a}, backward);
  });
}

bool is_binary(ElementwiseKind kind) {
  return kind == ElementwiseKind::add || kind == ElementwiseKind::sub ||
         kind == ElementwiseKind::mul;
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    std::size_t ea = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    std::size_t eb = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (ea != eb && ea != 1 && eb != 1) {
      throw Error(ErrorCode::shape, "cannot broadcast shapes " + shape_str(a) +
                                        " and " + shape_str(b));
    }
    out[i] = std::max(ea, eb);
  }
  return out;
}

Tensor elementwise(ElementwiseKind kind, const Tensor& a, const Tensor& b) {
  if (is_binary(kind)) {
    if (!b.defined()) throw Error(ErrorCode::value, "binary elementwise op without rhs");
    return binary(kind, a, b);
  }
  return unary(kind, a);
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(ElementwiseKind::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(ElementwiseKind::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(ElementwiseKind::mul, a, b); }
Tensor relu(const Tensor& a) { return unary(ElementwiseKind::relu, a); }
Tensor sigmoid(const Tensor& a) { return unary(ElementwiseKind::sigmoid, a); }
Tensor exp(const Tensor& a) { return unary(ElementwiseKind::exp, a); }
Tensor square(const Tensor& a) { return unary(ElementwiseKind::square, a); }

Tensor scale(const Tensor& a, double factor) {
  return dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    Buffer out = Buffer::zeros(a.dtype(), a.numel());
    auto o = out.as<T>();
    auto av = a.values<T>();
    const T f = static_cast<T>(factor);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * f;
    auto backward = [f](const Buffer& gout, std::span<Buffer* const> gin) {
      if (!gin[0]) return;
      auto g = gout.as<T>();
      auto d = gin[0]->as<T>();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * f;
    };
    return make_result(a.shape(), std::move(out), "scale", {a}, backward);
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_same_dtype(a, b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw Error(ErrorCode::shape, "matmul: incompatible shapes " + shape_str(a.shape()) +
                                      " and " + shape_str(b.shape()));
  }
  const auto m = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto n = static_cast<Eigen::Index>(b.dim(1));
  return dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    using CMap = Eigen::Map<const RowMat<T>>;
    using MMap = Eigen::Map<RowMat<T>>;
    Buffer out = Buffer::zeros(a.dtype(), static_cast<std::size_t>(m * n));
    MMap(out.as<T>().data(), m, n).noalias() =
        CMap(a.values<T>().data(), m, k) * CMap(b.values<T>().data(), k, n);
    auto backward = [a, b, m, k, n](const Buffer& gout, std::span<Buffer* const> gin) {
      CMap g(gout.as<T>().data(), m, n);
      if (gin[0]) {
        MMap(gin[0]->as<T>().data(), m, k).noalias() +=
            g * CMap(b.values<T>().data(), k, n).transpose();
      }
      if (gin[1]) {
        MMap(gin[1]->as<T>().data(), k, n).noalias() +=
            CMap(a.values<T>().data(), m, k).transpose() * g;
      }
    };
    return make_result({a.dim(0), b.dim(1)}, std::move(out), "matmul", {a, b}, backward);
  });
}

Tensor reduce(ReduceKind kind, const Tensor& a, const std::vector<int>& axes,
              bool keep_dims) {
  const std::size_t rank = a.rank();
  std::vector<bool> reduced(rank, axes.empty());
  for (int axis : axes) {
    int resolved = axis < 0 ? axis + static_cast<int>(rank) : axis;
    if (resolved < 0 || resolved >= static_cast<int>(rank)) {
      throw Error(ErrorCode::shape, "reduce: axis " + std::to_string(axis) +
                                        " out of range for shape " + shape_str(a.shape()));
    }
    reduced[static_cast<std::size_t>(resolved)] = true;
  }
  Shape kept(rank);
  Shape out_shape;
  std::size_t count = 1;
  for (std::size_t d = 0; d < rank; ++d) {
    kept[d] = reduced[d] ? 1 : a.dim(d);
    if (reduced[d]) count *= a.dim(d);
    if (!reduced[d]) out_shape.push_back(a.dim(d));
    else if (keep_dims) out_shape.push_back(1);
  }
  // Input index -> output index via a broadcast plan from `kept` onto the input.
  BroadcastPlan plan;
  plan.out = a.shape();
  plan.a_stride = aligned_strides(kept, plan.out);
  plan.b_stride.assign(rank, 0);
  const double divisor = kind == ReduceKind::mean ? static_cast<double>(count) : 1.0;

  return dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const std::size_t n_out = shape_numel(kept);
    std::vector<double> acc(n_out, 0.0);
    auto av = a.values<T>();
    for_each_broadcast(plan, [&](std::size_t i, std::size_t io, std::size_t) {
      acc[io] += static_cast<double>(av[i]);
    });
    Buffer out = Buffer::zeros(a.dtype(), n_out);
    auto o = out.as<T>();
    for (std::size_t i = 0; i < n_out; ++i) o[i] = static_cast<T>(acc[i] / divisor);
    auto backward = [plan, divisor](const Buffer& gout, std::span<Buffer* const> gin) {
      if (!gin[0]) return;
      auto g = gout.as<T>();
      auto d = gin[0]->as<T>();
      const T inv = static_cast<T>(1.0 / divisor);
      for_each_broadcast(plan, [&](std::size_t i, std::size_t io, std::size_t) {
        d[i] += g[io] * inv;
      });
    };
    return make_result(out_shape, std::move(out),
                       kind == ReduceKind::sum ? "sum" : "mean", {a}, backward);
  });
}

Tensor sum(const Tensor& a) { return reduce(ReduceKind::sum, a, {}); }
Tensor mean(const Tensor& a) { return reduce(ReduceKind::mean, a, {}); }

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw Error(ErrorCode::shape, "reshape: " + shape_str(a.shape()) + " to " +
                                      shape_str(shape));
  }
  Buffer out = *a.impl()->values;
  auto backward = [](const Buffer& gout, std::span<Buffer* const> gin) {
    if (!gin[0]) return;
    dispatch(gout.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto g = gout.as<T>();
      auto d = gin[0]->as<T>();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    });
  };
  return make_result(std::move(shape), std::move(out), "reshape", {a}, backward);
}

}  // namespace cxhg
