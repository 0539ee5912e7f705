#include "rearrange/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace rearrange::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

std::size_t leading_rows(const Shape& s) {
  if (s.empty()) return 1;
  std::size_t r = 1;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) r *= s[i];
  return r;
}

std::size_t last_dim(const Shape& s) { return s.empty() ? 1 : s.back(); }

// Layout helpers for reductions over one axis: [outer, axis, inner].
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit out;
  for (std::size_t i = 0; i < axis; ++i) out.outer *= s[i];
  out.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) out.inner *= s[i];
  return out;
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

NumArray::NumArray(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

NumArray::NumArray(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("NumArray: shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

NumArray NumArray::vector(std::initializer_list<double> values) {
  return NumArray(Shape{values.size()}, std::vector<double>(values));
}

double NumArray::item() const {
  if (data_.size() != 1) throw ContractViolation("item() on array of shape " + shape_string(shape_));
  return data_[0];
}

bool NumArray::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

NumArray NumArray::reshaped(Shape shape) const { return NumArray(std::move(shape), data_); }

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Constant: return "constant";
    case Op::Affine: return "affine";
    case Op::MatMul: return "matmul";
    case Op::OuterContract: return "outer_contract";
    case Op::BatchedMatMul: return "batched_matmul";
    case Op::Relu: return "relu";
    case Op::Softplus: return "softplus";
    case Op::Sigmoid: return "sigmoid";
    case Op::Step: return "step";
    case Op::Softmax: return "softmax";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Square: return "square";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::SumAll: return "sum_all";
    case Op::MeanAll: return "mean_all";
    case Op::Fill: return "fill";
    case Op::Broadcast: return "broadcast";
    case Op::SumLeading: return "sum_leading";
    case Op::BroadcastLeading: return "broadcast_leading";
    case Op::Concat: return "concat";
    case Op::Slice: return "slice";
    case Op::Embed: return "embed";
    case Op::Transpose: return "transpose";
    case Op::Reshape: return "reshape";
    case Op::GatherRows: return "gather_rows";
    case Op::ScatterAddRows: return "scatter_add_rows";
    case Op::StopGradient: return "stop_gradient";
  }
  return "?";
}

const NumArray& Var::value() const { return graph->value(*this); }

// ---------------------------------------------------------------------------
// Construction

void Graph::check_owned(Var v) const {
  if (v.graph != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw ContractViolation("Var does not belong to this graph");
  }
}

std::string Graph::describe(int id) const {
  return "node #" + std::to_string(id) + " (" + op_name(nodes_[id].op) + ")";
}

Var Graph::push(Node node) {
  for (int in : node.inputs) {
    if (nodes_[in].requires_grad) node.requires_grad = true;
  }
  if (node.op == Op::StopGradient || node.op == Op::Step || node.op == Op::Constant) {
    node.requires_grad = false;
  }
  nodes_.push_back(std::move(node));
  const int id = static_cast<int>(nodes_.size()) - 1;
  try {
    compute(id);
  } catch (...) {
    nodes_.pop_back();
    throw;
  }
  return Var{this, id};
}

Var Graph::leaf(NumArray value, bool requires_grad) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Var Graph::constant(NumArray value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

namespace {
template <class... Vs>
std::vector<int> ids(Vs... vs) {
  return {vs.id...};
}
}  // namespace

#define REARRANGE_UNARY(fn, OP)          \
  Var Graph::fn(Var x) {                 \
    check_owned(x);                      \
    Node n;                              \
    n.op = Op::OP;                       \
    n.inputs = ids(x);                   \
    return push(std::move(n));           \
  }

REARRANGE_UNARY(relu, Relu)
REARRANGE_UNARY(softplus, Softplus)
REARRANGE_UNARY(sigmoid, Sigmoid)
REARRANGE_UNARY(step, Step)
REARRANGE_UNARY(softmax, Softmax)
REARRANGE_UNARY(square, Square)
REARRANGE_UNARY(sin, Sin)
REARRANGE_UNARY(cos, Cos)
REARRANGE_UNARY(sum_all, SumAll)
REARRANGE_UNARY(mean_all, MeanAll)
REARRANGE_UNARY(sum_leading, SumLeading)
REARRANGE_UNARY(transpose, Transpose)
REARRANGE_UNARY(stop_gradient, StopGradient)
#undef REARRANGE_UNARY

#define REARRANGE_BINARY(fn, OP)         \
  Var Graph::fn(Var a, Var b) {          \
    check_owned(a);                      \
    check_owned(b);                      \
    Node n;                              \
    n.op = Op::OP;                       \
    n.inputs = ids(a, b);                \
    return push(std::move(n));           \
  }

REARRANGE_BINARY(add, Add)
REARRANGE_BINARY(sub, Sub)
REARRANGE_BINARY(mul, Mul)
REARRANGE_BINARY(outer_contract, OuterContract)
#undef REARRANGE_BINARY

Var Graph::affine(Var x, Var weight, Var bias) {
  check_owned(x);
  check_owned(weight);
  check_owned(bias);
  Node n;
  n.op = Op::Affine;
  n.inputs = ids(x, weight, bias);
  return push(std::move(n));
}

Var Graph::matmul(Var a, Var weight, bool transpose_b) {
  check_owned(a);
  check_owned(weight);
  Node n;
  n.op = Op::MatMul;
  n.inputs = ids(a, weight);
  n.flag_b = transpose_b;
  return push(std::move(n));
}

Var Graph::batched_matmul(Var a, Var b, bool transpose_a, bool transpose_b) {
  check_owned(a);
  check_owned(b);
  Node n;
  n.op = Op::BatchedMatMul;
  n.inputs = ids(a, b);
  n.flag_a = transpose_a;
  n.flag_b = transpose_b;
  return push(std::move(n));
}

Var Graph::scale(Var x, double c) {
  check_owned(x);
  Node n;
  n.op = Op::Scale;
  n.inputs = ids(x);
  n.c = c;
  return push(std::move(n));
}

Var Graph::add_scalar(Var x, double c) {
  check_owned(x);
  Node n;
  n.op = Op::AddScalar;
  n.inputs = ids(x);
  n.c = c;
  return push(std::move(n));
}

Var Graph::sum(Var x, std::size_t axis) {
  check_owned(x);
  Node n;
  n.op = Op::Sum;
  n.inputs = ids(x);
  n.axis = axis;
  return push(std::move(n));
}

Var Graph::mean(Var x, std::size_t axis) {
  check_owned(x);
  Node n;
  n.op = Op::Mean;
  n.inputs = ids(x);
  n.axis = axis;
  return push(std::move(n));
}

Var Graph::fill(Var scalar, Shape shape) {
  check_owned(scalar);
  Node n;
  n.op = Op::Fill;
  n.inputs = ids(scalar);
  n.shape = std::move(shape);
  return push(std::move(n));
}

Var Graph::broadcast(Var x, std::size_t axis, std::size_t count) {
  check_owned(x);
  Node n;
  n.op = Op::Broadcast;
  n.inputs = ids(x);
  n.axis = axis;
  n.count = count;
  return push(std::move(n));
}

Var Graph::broadcast_leading(Var x, Shape shape) {
  check_owned(x);
  Node n;
  n.op = Op::BroadcastLeading;
  n.inputs = ids(x);
  n.shape = std::move(shape);
  return push(std::move(n));
}

Var Graph::concat(std::span<const Var> parts) {
  Node n;
  n.op = Op::Concat;
  for (Var p : parts) {
    check_owned(p);
    n.inputs.push_back(p.id);
  }
  return push(std::move(n));
}

Var Graph::concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var Graph::slice(Var x, std::size_t offset, std::size_t width) {
  check_owned(x);
  Node n;
  n.op = Op::Slice;
  n.inputs = ids(x);
  n.axis = offset;
  n.count = width;
  return push(std::move(n));
}

Var Graph::embed(Var x, std::size_t offset, std::size_t total_width) {
  check_owned(x);
  Node n;
  n.op = Op::Embed;
  n.inputs = ids(x);
  n.axis = offset;
  n.count = total_width;
  return push(std::move(n));
}

Var Graph::reshape(Var x, Shape shape) {
  check_owned(x);
  Node n;
  n.op = Op::Reshape;
  n.inputs = ids(x);
  n.shape = std::move(shape);
  return push(std::move(n));
}

Var Graph::gather_rows(Var x, std::vector<std::size_t> rows) {
  check_owned(x);
  Node n;
  n.op = Op::GatherRows;
  n.inputs = ids(x);
  n.rows = std::move(rows);
  return push(std::move(n));
}

Var Graph::scatter_add_rows(Var x, std::vector<std::size_t> rows, std::size_t total_rows) {
  check_owned(x);
  Node n;
  n.op = Op::ScatterAddRows;
  n.inputs = ids(x);
  n.rows = std::move(rows);
  n.count = total_rows;
  return push(std::move(n));
}

const NumArray& Graph::value(Var v) const {
  check_owned(v);
  return nodes_[v.id].value;
}

Op Graph::op_of(Var v) const {
  check_owned(v);
  return nodes_[v.id].op;
}

// ---------------------------------------------------------------------------
// Forward

void Graph::compute(int id) {
  Node& n = nodes_[id];
  auto in = [&](std::size_t k) -> const NumArray& { return nodes_[n.inputs[k]].value; };
  auto fail = [&](const std::string& why) { throw ShapeError(describe(id) + ": " + why); };
  auto same_shape = [&](const NumArray& a, const NumArray& b) {
    if (a.shape() != b.shape()) {
      fail("shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
  };
  auto map_unary = [&](auto f) {
    const NumArray& x = in(0);
    NumArray out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
    n.value = std::move(out);
  };

  switch (n.op) {
    case Op::Leaf:
    case Op::Constant:
      return;

    case Op::Affine:
    case Op::MatMul: {
      const NumArray& x = in(0);
      const NumArray& w = in(1);
      if (x.rank() < 1 || w.rank() != 2) fail("needs x[..., k] and a 2-D weight");
      const std::size_t k = last_dim(x.shape());
      const bool tb = n.op == Op::MatMul && n.flag_b;
      const std::size_t wk = tb ? w.dim(1) : w.dim(0);
      const std::size_t out_dim = tb ? w.dim(0) : w.dim(1);
      if (wk != k) {
        fail("inner dimension mismatch " + shape_string(x.shape()) + " x " + shape_string(w.shape()));
      }
      const std::size_t rows = leading_rows(x.shape());
      Shape out_shape = x.shape();
      out_shape.back() = out_dim;
      NumArray out(out_shape);
      MapC xm(x.data().data(), rows, k);
      MapC wm(w.data().data(), w.dim(0), w.dim(1));
      Map om(out.data().data(), rows, out_dim);
      if (tb) {
        om.noalias() = xm * wm.transpose();
      } else {
        om.noalias() = xm * wm;
      }
      if (n.op == Op::Affine) {
        const NumArray& b = in(2);
        if (b.rank() != 1 || b.dim(0) != out_dim) fail("bias shape " + shape_string(b.shape()));
        Eigen::Map<const Eigen::RowVectorXd> bv(b.data().data(), out_dim);
        om.rowwise() += bv;
      }
      n.value = std::move(out);
      return;
    }

    case Op::OuterContract: {
      const NumArray& a = in(0);
      const NumArray& b = in(1);
      if (a.rank() < 1 || b.rank() < 1 || leading_rows(a.shape()) != leading_rows(b.shape())) {
        fail("leading dims differ " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
      }
      const std::size_t rows = leading_rows(a.shape());
      const std::size_t m = last_dim(a.shape()), k = last_dim(b.shape());
      NumArray out(Shape{m, k});
      MapC am(a.data().data(), rows, m);
      MapC bm(b.data().data(), rows, k);
      Map om(out.data().data(), m, k);
      om.noalias() = am.transpose() * bm;
      n.value = std::move(out);
      return;
    }

    case Op::BatchedMatMul: {
      const NumArray& a = in(0);
      const NumArray& b = in(1);
      if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0)) fail("needs [B,m,k] x [B,k,n]");
      const std::size_t batch = a.dim(0);
      const std::size_t am = n.flag_a ? a.dim(2) : a.dim(1);
      const std::size_t ak = n.flag_a ? a.dim(1) : a.dim(2);
      const std::size_t bk = n.flag_b ? b.dim(2) : b.dim(1);
      const std::size_t bn = n.flag_b ? b.dim(1) : b.dim(2);
      if (ak != bk) fail("inner dimension mismatch " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
      NumArray out(Shape{batch, am, bn});
      const std::size_t a_stride = a.dim(1) * a.dim(2), b_stride = b.dim(1) * b.dim(2);
      const bool small = std::min({am, ak, bn}) <= 16;
      for (std::size_t i = 0; i < batch; ++i) {
        MapC amat(a.data().data() + i * a_stride, a.dim(1), a.dim(2));
        MapC bmat(b.data().data() + i * b_stride, b.dim(1), b.dim(2));
        Map om(out.data().data() + i * am * bn, am, bn);
        // Attention products are tiny per batch item, where the blocked GEMM
        // path costs more than it saves.
        if (small) {
          if (!n.flag_a && !n.flag_b) om.noalias() = amat.lazyProduct(bmat);
          else if (!n.flag_a && n.flag_b) om.noalias() = amat.lazyProduct(bmat.transpose());
          else if (n.flag_a && !n.flag_b) om.noalias() = amat.transpose().lazyProduct(bmat);
          else om.noalias() = amat.transpose().lazyProduct(bmat.transpose());
        } else if (!n.flag_a && !n.flag_b) {
          om.noalias() = amat * bmat;
        } else if (!n.flag_a && n.flag_b) {
          om.noalias() = amat * bmat.transpose();
        } else if (n.flag_a && !n.flag_b) {
          om.noalias() = amat.transpose() * bmat;
        } else {
          om.noalias() = amat.transpose() * bmat.transpose();
        }
      }
      n.value = std::move(out);
      return;
    }

    case Op::Relu: map_unary([](double v) { return v > 0.0 ? v : 0.0; }); return;
    case Op::Step: map_unary([](double v) { return v > 0.0 ? 1.0 : 0.0; }); return;
    case Op::Softplus:
      map_unary([](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); });
      return;
    case Op::Sigmoid:
      map_unary([](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      });
      return;
    case Op::Square: map_unary([](double v) { return v * v; }); return;
    case Op::Sin: map_unary([](double v) { return std::sin(v); }); return;
    case Op::Cos: map_unary([](double v) { return std::cos(v); }); return;
    case Op::Scale: {
      const double c = n.c;
      map_unary([c](double v) { return v * c; });
      return;
    }
    case Op::AddScalar: {
      const double c = n.c;
      map_unary([c](double v) { return v + c; });
      return;
    }
    case Op::StopGradient: n.value = in(0); return;

    case Op::Softmax: {
      const NumArray& x = in(0);
      if (x.rank() < 1) fail("softmax needs rank >= 1");
      const std::size_t w = last_dim(x.shape()), rows = leading_rows(x.shape());
      NumArray out(x.shape());
      for (std::size_t r = 0; r < rows; ++r) {
        const double* src = x.data().data() + r * w;
        double* dst = out.data().data() + r * w;
        const double mx = *std::max_element(src, src + w);
        double total = 0.0;
        for (std::size_t j = 0; j < w; ++j) total += (dst[j] = std::exp(src[j] - mx));
        for (std::size_t j = 0; j < w; ++j) dst[j] /= total;
      }
      n.value = std::move(out);
      return;
    }

    case Op::Add:
    case Op::Sub:
    case Op::Mul: {
      const NumArray& a = in(0);
      const NumArray& b = in(1);
      same_shape(a, b);
      NumArray out(a.shape());
      if (n.op == Op::Add) for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
      else if (n.op == Op::Sub) for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
      else for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
      n.value = std::move(out);
      return;
    }

    case Op::Sum:
    case Op::Mean: {
      const NumArray& x = in(0);
      if (n.axis >= x.rank()) fail("axis " + std::to_string(n.axis) + " out of range for " + shape_string(x.shape()));
      const AxisSplit s = split_at(x.shape(), n.axis);
      Shape out_shape = x.shape();
      out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(n.axis));
      NumArray out(out_shape);
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t e = 0; e < s.extent; ++e)
          for (std::size_t i = 0; i < s.inner; ++i)
            out[o * s.inner + i] += x[(o * s.extent + e) * s.inner + i];
      if (n.op == Op::Mean) {
        if (s.extent == 0) fail("mean over empty axis");
        const double inv = 1.0 / static_cast<double>(s.extent);
        for (auto& v : out.data()) v *= inv;
      }
      n.value = std::move(out);
      return;
    }

    case Op::SumAll:
    case Op::MeanAll: {
      const NumArray& x = in(0);
      double total = 0.0;
      for (double v : x.data()) total += v;
      if (n.op == Op::MeanAll) {
        if (x.size() == 0) fail("mean of empty array");
        total /= static_cast<double>(x.size());
      }
      n.value = NumArray::scalar(total);
      return;
    }

    case Op::Fill: {
      const NumArray& x = in(0);
      if (x.size() != 1) fail("fill needs a single-element input");
      n.value = NumArray(n.shape, x[0]);
      return;
    }

    case Op::Broadcast: {
      const NumArray& x = in(0);
      if (n.axis > x.rank()) fail("broadcast axis out of range");
      Shape out_shape = x.shape();
      out_shape.insert(out_shape.begin() + static_cast<std::ptrdiff_t>(n.axis), n.count);
      const AxisSplit s = split_at(out_shape, n.axis);
      NumArray out(out_shape);
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t e = 0; e < s.extent; ++e)
          for (std::size_t i = 0; i < s.inner; ++i)
            out[(o * s.extent + e) * s.inner + i] = x[o * s.inner + i];
      n.value = std::move(out);
      return;
    }

    case Op::SumLeading: {
      const NumArray& x = in(0);
      if (x.rank() < 1) fail("sum_leading needs rank >= 1");
      const std::size_t w = last_dim(x.shape()), rows = leading_rows(x.shape());
      NumArray out(Shape{w});
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < w; ++j) out[j] += x[r * w + j];
      n.value = std::move(out);
      return;
    }

    case Op::BroadcastLeading: {
      const NumArray& x = in(0);
      if (x.rank() != 1 || n.shape.empty() || n.shape.back() != x.dim(0)) {
        fail("cannot broadcast " + shape_string(x.shape()) + " to " + shape_string(n.shape));
      }
      const std::size_t w = x.dim(0), rows = leading_rows(n.shape);
      NumArray out(n.shape);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < w; ++j) out[r * w + j] = x[j];
      n.value = std::move(out);
      return;
    }

    case Op::Concat: {
      if (n.inputs.empty()) fail("concat of nothing");
      const Shape& first = in(0).shape();
      if (first.empty()) fail("concat needs rank >= 1");
      const std::size_t rows = leading_rows(first);
      std::size_t total = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const Shape& s = in(k).shape();
        if (s.size() != first.size() || leading_rows(s) != rows ||
            !std::equal(s.begin(), s.end() - 1, first.begin())) {
          fail("concat input " + std::to_string(k) + " has shape " + shape_string(s));
        }
        total += s.back();
      }
      Shape out_shape = first;
      out_shape.back() = total;
      NumArray out(out_shape);
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const NumArray& p = in(k);
        const std::size_t w = p.shape().back();
        for (std::size_t r = 0; r < rows; ++r)
          std::copy_n(p.data().data() + r * w, w, out.data().data() + r * total + offset);
        offset += w;
      }
      n.value = std::move(out);
      return;
    }

    case Op::Slice: {
      const NumArray& x = in(0);
      if (x.rank() < 1 || n.axis + n.count > x.shape().back()) {
        fail("slice [" + std::to_string(n.axis) + ", +" + std::to_string(n.count) + ") of " + shape_string(x.shape()));
      }
      const std::size_t w = x.shape().back(), rows = leading_rows(x.shape());
      Shape out_shape = x.shape();
      out_shape.back() = n.count;
      NumArray out(out_shape);
      for (std::size_t r = 0; r < rows; ++r)
        std::copy_n(x.data().data() + r * w + n.axis, n.count, out.data().data() + r * n.count);
      n.value = std::move(out);
      return;
    }

    case Op::Embed: {
      const NumArray& x = in(0);
      if (x.rank() < 1 || n.axis + x.shape().back() > n.count) fail("embed does not fit");
      const std::size_t w = x.shape().back(), rows = leading_rows(x.shape());
      Shape out_shape = x.shape();
      out_shape.back() = n.count;
      NumArray out(out_shape);
      for (std::size_t r = 0; r < rows; ++r)
        std::copy_n(x.data().data() + r * w, w, out.data().data() + r * n.count + n.axis);
      n.value = std::move(out);
      return;
    }

    case Op::Transpose: {
      const NumArray& x = in(0);
      if (x.rank() < 2) fail("transpose needs rank >= 2");
      const std::size_t rows = x.dim(x.rank() - 2), cols = x.dim(x.rank() - 1);
      const std::size_t batch = x.size() / std::max<std::size_t>(rows * cols, 1);
      Shape out_shape = x.shape();
      std::swap(out_shape[out_shape.size() - 2], out_shape[out_shape.size() - 1]);
      NumArray out(out_shape);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c)
            out[b * rows * cols + c * rows + r] = x[b * rows * cols + r * cols + c];
      n.value = std::move(out);
      return;
    }

    case Op::Reshape: {
      const NumArray& x = in(0);
      if (shape_size(n.shape) != x.size()) fail("cannot reshape " + shape_string(x.shape()) + " to " + shape_string(n.shape));
      n.value = x.reshaped(n.shape);
      return;
    }

    case Op::GatherRows: {
      const NumArray& x = in(0);
      if (x.rank() < 1) fail("gather needs rank >= 1");
      const std::size_t per = x.size() / std::max<std::size_t>(x.dim(0), 1);
      Shape out_shape = x.shape();
      out_shape[0] = n.rows.size();
      NumArray out(out_shape);
      for (std::size_t k = 0; k < n.rows.size(); ++k) {
        if (n.rows[k] >= x.dim(0)) fail("row index " + std::to_string(n.rows[k]) + " out of range");
        std::copy_n(x.data().data() + n.rows[k] * per, per, out.data().data() + k * per);
      }
      n.value = std::move(out);
      return;
    }

    case Op::ScatterAddRows: {
      const NumArray& x = in(0);
      if (x.rank() < 1 || x.dim(0) != n.rows.size()) fail("scatter rows mismatch");
      const std::size_t per = x.size() / std::max<std::size_t>(x.dim(0), 1);
      Shape out_shape = x.shape();
      out_shape[0] = n.count;
      NumArray out(out_shape);
      for (std::size_t k = 0; k < n.rows.size(); ++k) {
        if (n.rows[k] >= n.count) fail("row index out of range");
        for (std::size_t j = 0; j < per; ++j) out[n.rows[k] * per + j] += x[k * per + j];
      }
      n.value = std::move(out);
      return;
    }
  }
}

const NumArray& Graph::evaluate(Var root, const std::map<int, NumArray>& leaf_values) {
  check_owned(root);
  for (const auto& [id, value] : leaf_values) {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size() || nodes_[id].op != Op::Leaf) {
      throw ContractViolation("evaluate: id " + std::to_string(id) + " is not a leaf");
    }
    nodes_[id].value = value;
  }
  for (int id = 0; id <= root.id; ++id) compute(id);
  return nodes_[root.id].value;
}

// ---------------------------------------------------------------------------
// Backward

std::vector<Var> Graph::backward(int id, Var g, const std::vector<char>& relevant) {
  // Copy what we need: pushing new nodes may reallocate nodes_.
  const Node n = [&] {
    Node c;
    const Node& src = nodes_[id];
    c.op = src.op;
    c.inputs = src.inputs;
    c.axis = src.axis;
    c.count = src.count;
    c.c = src.c;
    c.flag_a = src.flag_a;
    c.flag_b = src.flag_b;
    c.shape = src.shape;
    c.rows = src.rows;
    return c;
  }();
  std::vector<Var> out(n.inputs.size());
  auto need = [&](std::size_t k) { return relevant[n.inputs[k]] != 0; };
  auto input = [&](std::size_t k) { return Var{this, n.inputs[k]}; };
  const Var self{this, id};
  auto input_shape = [&](std::size_t k) { return nodes_[n.inputs[k]].value.shape(); };

  switch (n.op) {
    case Op::Leaf:
    case Op::Constant:
    case Op::Step:
    case Op::StopGradient:
      break;

    case Op::Affine:
      if (need(0)) out[0] = matmul(g, input(1), true);
      if (need(1)) out[1] = outer_contract(input(0), g);
      if (need(2)) out[2] = sum_leading(g);
      break;

    case Op::MatMul:
      if (!n.flag_b) {
        if (need(0)) out[0] = matmul(g, input(1), true);
        if (need(1)) out[1] = outer_contract(input(0), g);
      } else {
        if (need(0)) out[0] = matmul(g, input(1), false);
        if (need(1)) out[1] = outer_contract(g, input(0));
      }
      break;

    case Op::OuterContract:
      if (need(0)) out[0] = matmul(input(1), g, true);
      if (need(1)) out[1] = matmul(input(0), g, false);
      break;

    case Op::BatchedMatMul: {
      const Var a = input(0), b = input(1);
      if (!n.flag_a && !n.flag_b) {
        if (need(0)) out[0] = batched_matmul(g, b, false, true);
        if (need(1)) out[1] = batched_matmul(a, g, true, false);
      } else if (!n.flag_a && n.flag_b) {
        if (need(0)) out[0] = batched_matmul(g, b, false, false);
        if (need(1)) out[1] = batched_matmul(g, a, true, false);
      } else if (n.flag_a && !n.flag_b) {
        if (need(0)) out[0] = batched_matmul(b, g, false, true);
        if (need(1)) out[1] = batched_matmul(a, g, false, false);
      } else {
        if (need(0)) out[0] = batched_matmul(b, g, true, true);
        if (need(1)) out[1] = batched_matmul(g, a, true, true);
      }
      break;
    }

    case Op::Relu: out[0] = mul(g, step(input(0))); break;
    case Op::Softplus: out[0] = mul(g, sigmoid(input(0))); break;
    case Op::Sigmoid: out[0] = mul(g, mul(self, add_scalar(scale(self, -1.0), 1.0))); break;
    case Op::Softmax: {
      const std::size_t axis = input_shape(0).size() - 1;
      const std::size_t w = input_shape(0).back();
      const Var dot = broadcast(sum(mul(g, self), axis), axis, w);
      out[0] = mul(self, sub(g, dot));
      break;
    }
    case Op::Add:
      if (need(0)) out[0] = g;
      if (need(1)) out[1] = g;
      break;
    case Op::Sub:
      if (need(0)) out[0] = g;
      if (need(1)) out[1] = scale(g, -1.0);
      break;
    case Op::Mul:
      if (need(0)) out[0] = mul(g, input(1));
      if (need(1)) out[1] = mul(g, input(0));
      break;
    case Op::Square: out[0] = scale(mul(g, input(0)), 2.0); break;
    case Op::Scale: out[0] = scale(g, n.c); break;
    case Op::AddScalar: out[0] = g; break;
    case Op::Sin: out[0] = mul(g, cos(input(0))); break;
    case Op::Cos: out[0] = scale(mul(g, sin(input(0))), -1.0); break;

    case Op::Sum: out[0] = broadcast(g, n.axis, input_shape(0)[n.axis]); break;
    case Op::Mean: {
      const std::size_t extent = input_shape(0)[n.axis];
      out[0] = broadcast(scale(g, 1.0 / static_cast<double>(extent)), n.axis, extent);
      break;
    }
    case Op::SumAll: out[0] = fill(g, input_shape(0)); break;
    case Op::MeanAll: {
      const Shape s = input_shape(0);
      out[0] = fill(scale(g, 1.0 / static_cast<double>(shape_size(s))), s);
      break;
    }
    case Op::Fill: out[0] = reshape(sum_all(g), input_shape(0)); break;
    case Op::Broadcast: out[0] = sum(g, n.axis); break;
    case Op::SumLeading: out[0] = broadcast_leading(g, input_shape(0)); break;
    case Op::BroadcastLeading: out[0] = sum_leading(g); break;

    case Op::Concat: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const std::size_t w = input_shape(k).back();
        if (need(k)) out[k] = slice(g, offset, w);
        offset += w;
      }
      break;
    }
    case Op::Slice: out[0] = embed(g, n.axis, input_shape(0).back()); break;
    case Op::Embed: out[0] = slice(g, n.axis, input_shape(0).back()); break;
    case Op::Transpose: out[0] = transpose(g); break;
    case Op::Reshape: out[0] = reshape(g, input_shape(0)); break;
    case Op::GatherRows: out[0] = scatter_add_rows(g, n.rows, input_shape(0)[0]); break;
    case Op::ScatterAddRows: out[0] = gather_rows(g, n.rows); break;
  }
  return out;
}

std::vector<Var> Graph::grad(Var root, std::span<const Var> wrt) {
  check_owned(root);
  if (nodes_[root.id].value.size() != 1) {
    throw ContractViolation("backprop: root " + describe(root.id) + " is not scalar, shape " +
                            shape_string(nodes_[root.id].value.shape()));
  }
  const int end = root.id + 1;
  // relevant[i]: a requested leaf is reachable backwards from node i.
  std::vector<char> relevant(nodes_.size(), 0);
  for (Var w : wrt) {
    check_owned(w);
    if (w.id < end) relevant[w.id] = 1;
  }
  for (int i = 0; i < end; ++i) {
    const Node& n = nodes_[i];
    if (relevant[i] || n.op == Op::StopGradient || n.op == Op::Step) continue;
    for (int in : n.inputs) {
      if (relevant[in]) {
        relevant[i] = 1;
        break;
      }
    }
  }

  std::vector<Var> grads(end);
  grads[root.id] = constant(NumArray(nodes_[root.id].value.shape(), 1.0));
  relevant.resize(nodes_.size(), 0);
  for (int i = root.id; i >= 0; --i) {
    if (!grads[i].valid() || !relevant[i]) continue;
    const std::vector<int> inputs = nodes_[i].inputs;
    std::vector<Var> contrib = backward(i, grads[i], relevant);
    // Nodes created by backward are never relevant to this pass.
    relevant.resize(nodes_.size(), 0);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      if (!contrib[k].valid()) continue;
      const int target = inputs[k];
      grads[target] = grads[target].valid() ? add(grads[target], contrib[k]) : contrib[k];
    }
  }

  std::vector<Var> result;
  result.reserve(wrt.size());
  for (Var w : wrt) {
    if (w.id < end && grads[w.id].valid()) {
      result.push_back(grads[w.id]);
    } else {
      result.push_back(constant(NumArray(nodes_[w.id].value.shape(), 0.0)));
    }
  }
  return result;
}

std::vector<Var> Graph::grad(Var root, std::initializer_list<Var> wrt) {
  return grad(root, std::span<const Var>(wrt.begin(), wrt.size()));
}

std::vector<NumArray> Graph::backprop(Var root, std::span<const Var> wrt) {
  const std::vector<Var> g = grad(root, wrt);
  std::vector<NumArray> out;
  out.reserve(g.size());
  for (Var v : g) out.push_back(nodes_[v.id].value);
  return out;
}

std::vector<NumArray> Graph::backprop(Var root, std::initializer_list<Var> wrt) {
  return backprop(root, std::span<const Var>(wrt.begin(), wrt.size()));
}

Var operator+(Var a, Var b) { return a.graph->add(a, b); }
Var operator-(Var a, Var b) { return a.graph->sub(a, b); }
Var operator*(Var a, Var b) { return a.graph->mul(a, b); }
Var operator*(double c, Var a) { return a.graph->scale(a, c); }
Var operator-(Var a) { return a.graph->scale(a, -1.0); }

// ---------------------------------------------------------------------------
// Adam

void adam_step(std::span<NumArray> params, std::span<const NumArray> grads, AdamState& state,
               double learning_rate) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape()) {
      throw ShapeError("adam_step: gradient " + std::to_string(i) + " has shape " +
                       shape_string(grads[i].shape()) + ", parameter has " + shape_string(params[i].shape()));
    }
    if (!grads[i].all_finite()) {
      throw NonFiniteError("adam_step: non-finite gradient for parameter " + std::to_string(i) +
                           " at step " + std::to_string(state.step + 1));
    }
  }
  if (state.first_moment.empty()) {
    for (const NumArray& p : params) {
      state.first_moment.emplace_back(p.shape());
      state.second_moment.emplace_back(p.shape());
    }
  }
  if (state.first_moment.size() != params.size()) throw ShapeError("adam_step: state does not match parameters");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = grads[i].data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      p[j] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace rearrange::ad
