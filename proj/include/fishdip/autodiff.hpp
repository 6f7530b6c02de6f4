#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fishdip/errors.hpp"
#include "fishdip/param_store.hpp"

namespace fishdip {

enum class OpKind {
  leaf,
  param,
  matmul,
  add,
  mul,
  embedding_lookup,
  layer_norm,
  softmax,
  relu,
  concat,
  slice,
  transpose,
  cross_entropy_with_logits,
};

const char* op_name(OpKind kind);

using TensorId = int;

// Node value on the tape. Shapes are [n] or [rows, cols], row-major values.
// grad is allocated by backward; tape_id is the node's index on its tape.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;
  int tape_id = -1;

  int rows() const { return shape.size() == 2 ? shape[0] : 1; }
  int cols() const { return shape.empty() ? 0 : shape.back(); }
  std::size_t size() const { return values.size(); }
};

// Define-by-run reverse-mode tape. A tape records one forward pass and is
// consumed by exactly one backward() call; build a fresh tape per pass.
// All arithmetic is double precision and strictly sequential, so identical
// inputs give bit-identical values and gradients.
class Tape {
 public:
  // Constant/input node. Values must be finite.
  TensorId leaf(std::vector<int> shape, std::vector<double> values);

  // Parameter node viewing store.data[offset, offset+len). Gradients flow
  // back into store.grad on backward(). One node may feed several ops
  // (weight tying); contributions accumulate.
  TensorId param(const ParamStore& store, std::size_t offset, std::size_t length,
                 std::vector<int> shape);

  TensorId matmul(TensorId a, TensorId b);
  // add: identical shapes, or b broadcast across rows ([m,n] + [n]), or b scalar.
  TensorId add(TensorId a, TensorId b);
  // mul: elementwise with identical shapes, or b scalar.
  TensorId mul(TensorId a, TensorId b);
  TensorId embedding_lookup(TensorId table, std::span<const int> ids);
  // Normalizes each row of x, then scales/shifts with gain/bias (length = cols).
  TensorId layer_norm(TensorId x, TensorId gain, TensorId bias);
  TensorId softmax(TensorId x);  // per row, max-subtracted
  TensorId relu(TensorId x);
  TensorId concat_cols(std::span<const TensorId> parts);
  TensorId slice(TensorId x, int axis, int begin, int end);
  TensorId transpose(TensorId x);
  // Sum over rows of -log softmax(row)[target]; rows with target == ignore_index
  // contribute nothing. Uses max-subtracted log-sum-exp.
  TensorId cross_entropy_with_logits(TensorId logits, std::span<const int> targets,
                                     int ignore_index = -1);

  // Reverse pass from a scalar loss; accumulates parameter gradients into
  // store.grad. The tape is consumed afterwards.
  void backward(TensorId loss, ParamStore& store);

  Tensor& at(TensorId id);
  const Tensor& at(TensorId id) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    OpKind kind = OpKind::leaf;
    std::vector<TensorId> inputs;
    std::vector<int> iattrs;    // ids / targets / slice bounds / ignore_index
    std::vector<double> dattrs; // saved statistics for backward
    std::size_t param_offset = 0;
    Tensor t;
  };

  TensorId push(Node node);
  const Tensor& in(TensorId id) const { return at(id); }
  void check_finite(const std::vector<double>& values, const char* what) const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Runs one forward+backward closure and returns a copy of the resulting
// parameter gradient. store.grad is zeroed on entry and restored to zero
// before returning. The closure must perform its own backward() into store.
// Nested invocation is a state error.
std::vector<double> per_example_gradient(ParamStore& store,
                                         const std::function<double()>& forward_backward);

}  // namespace fishdip
