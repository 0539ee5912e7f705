#pragma once

// Reverse-mode automatic differentiation over dense row-major arrays.
//
// A Graph is built define-by-run: every op is evaluated as it is appended,
// so values are available immediately. Backward rules are themselves
// expressed as graph ops, which makes gradients differentiable again
// (needed when a loss depends on a sampler step that used a gradient).
//
// A Graph is single-threaded. Distinct graphs share nothing.

#include <cstddef>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rearrange/errors.hpp"

namespace rearrange::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class NumArray {
 public:
  NumArray() = default;
  explicit NumArray(Shape shape, double fill = 0.0);
  NumArray(Shape shape, std::vector<double> data);

  static NumArray scalar(double v) { return NumArray(Shape{}, {v}); }
  static NumArray vector(std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Value of a single-element array.
  double item() const;
  bool all_finite() const;

  NumArray reshaped(Shape shape) const;

  friend bool operator==(const NumArray&, const NumArray&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

enum class Op {
  Leaf,
  Constant,
  Affine,           // x[..., in] * W[in, out] + b[out]
  MatMul,           // a[..., k] * W[k, n]  (or W^T when transpose_b)
  OuterContract,    // sum over leading rows of a^T b -> [m, n]
  BatchedMatMul,    // a[B, m, k] * b[B, k, n] with transpose flags
  Relu,
  Softplus,
  Sigmoid,
  Step,             // 1 where x > 0; no gradient
  Softmax,          // over the last axis
  Add,
  Sub,
  Mul,
  Square,
  Scale,            // x * constant
  AddScalar,        // x + constant
  Sin,
  Cos,
  Sum,              // over one axis, removing it
  Mean,             // over one axis, removing it
  SumAll,           // to a scalar
  MeanAll,          // to a scalar
  Fill,             // scalar broadcast to a shape
  Broadcast,        // insert an axis of a given size
  SumLeading,       // [..., n] -> [n]
  BroadcastLeading, // [n] -> [..., n]
  Concat,           // along the last axis
  Slice,            // columns [offset, offset + width) of the last axis
  Embed,            // inverse of Slice: zero-pad into a wider last axis
  Transpose,        // swap the last two axes
  Reshape,
  GatherRows,       // rows of axis 0 by index
  ScatterAddRows,   // inverse of GatherRows
  StopGradient,
};

const char* op_name(Op op);

class Graph;

// Lightweight handle to a node. Valid as long as its Graph lives.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
  const NumArray& value() const;
  const Shape& shape() const { return value().shape(); }
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  // A leaf is a bindable slot (parameter or input). Gradients may be
  // requested for leaves created with requires_grad.
  Var leaf(NumArray value, bool requires_grad = true);
  Var constant(NumArray value);

  Var affine(Var x, Var weight, Var bias);
  Var matmul(Var a, Var weight, bool transpose_b = false);
  Var outer_contract(Var a, Var b);
  Var batched_matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false);
  Var relu(Var x);
  Var softplus(Var x);
  Var sigmoid(Var x);
  Var step(Var x);
  Var softmax(Var x);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var square(Var x);
  Var scale(Var x, double c);
  Var add_scalar(Var x, double c);
  Var sin(Var x);
  Var cos(Var x);
  Var sum(Var x, std::size_t axis);
  Var mean(Var x, std::size_t axis);
  Var sum_all(Var x);
  Var mean_all(Var x);
  Var fill(Var scalar, Shape shape);
  Var broadcast(Var x, std::size_t axis, std::size_t count);
  Var sum_leading(Var x);
  Var broadcast_leading(Var x, Shape shape);
  Var concat(std::span<const Var> parts);
  Var concat(std::initializer_list<Var> parts);
  Var slice(Var x, std::size_t offset, std::size_t width);
  Var embed(Var x, std::size_t offset, std::size_t total_width);
  Var transpose(Var x);
  Var reshape(Var x, Shape shape);
  Var gather_rows(Var x, std::vector<std::size_t> rows);
  Var scatter_add_rows(Var x, std::vector<std::size_t> rows, std::size_t total_rows);
  Var stop_gradient(Var x);

  const NumArray& value(Var v) const;
  std::size_t node_count() const { return nodes_.size(); }
  Op op_of(Var v) const;

  // Re-binds the given leaves and recomputes every node in order.
  // Returns the value of root.
  const NumArray& evaluate(Var root, const std::map<int, NumArray>& leaf_values);

  // d(root)/d(leaf) for each requested leaf, as new graph nodes. The result
  // can be differentiated again.
  std::vector<Var> grad(Var root, std::span<const Var> wrt);
  std::vector<Var> grad(Var root, std::initializer_list<Var> wrt);

  // Numeric gradients. root must be a single-element array.
  std::vector<NumArray> backprop(Var root, std::span<const Var> wrt);
  std::vector<NumArray> backprop(Var root, std::initializer_list<Var> wrt);

 private:
  struct Node {
    Op op = Op::Leaf;
    std::vector<int> inputs;
    NumArray value;
    bool requires_grad = false;
    // Op attributes; unused fields stay default.
    std::size_t axis = 0;
    std::size_t count = 0;
    double c = 0.0;
    bool flag_a = false;
    bool flag_b = false;
    Shape shape;
    std::vector<std::size_t> rows;
  };

  Var push(Node node);
  void compute(int id);
  std::string describe(int id) const;
  void check_owned(Var v) const;
  std::vector<Var> backward(int id, Var g, const std::vector<char>& relevant);

  std::vector<Node> nodes_;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator*(double c, Var a);
Var operator-(Var a);

// Bias-corrected Adam over a list of parameter arrays.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<NumArray> first_moment;
  std::vector<NumArray> second_moment;
};

// Applies one update in place. Throws NonFiniteError (leaving params and
// state untouched) if any gradient is non-finite.
void adam_step(std::span<NumArray> params, std::span<const NumArray> grads, AdamState& state,
               double learning_rate);

// Keeps freed tensor buffers in the heap instead of returning them to the
// OS after every op. Process-wide; call once from main.
void tune_allocator();

}  // namespace rearrange::ad
