#include "fishdip/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

namespace fishdip {

namespace {

constexpr double kLayerNormEps = 1e-5;

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

// c (m x n) += a (m x k) * b (k x n)
void mm_acc(const double* a, int m, int k, const double* b, int n, double* c) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double aik = arow[kk];
      const double* brow = b + static_cast<std::size_t>(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

// c (m x k) += a (m x n) * b(k x n)^T   (dot products over rows)
void mm_nt_acc(const double* a, int m, int n, const double* b, int k, double* c) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * n;
    double* crow = c + static_cast<std::size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const double* brow = b + static_cast<std::size_t>(kk) * n;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += arow[j] * brow[j];
      crow[kk] += acc;
    }
  }
}

// c (k x n) += a (m x k)^T * b (m x n)
void mm_tn_acc(const double* a, int m, int k, const double* b, int n, double* c) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    const double* brow = b + static_cast<std::size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double aik = arow[kk];
      double* crow = c + static_cast<std::size_t>(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::param: return "param";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::embedding_lookup: return "embedding_lookup";
    case OpKind::layer_norm: return "layer_norm";
    case OpKind::softmax: return "softmax";
    case OpKind::relu: return "relu";
    case OpKind::concat: return "concat";
    case OpKind::slice: return "slice";
    case OpKind::transpose: return "transpose";
    case OpKind::cross_entropy_with_logits: return "cross_entropy_with_logits";
  }
  return "?";
}

Tensor& Tape::at(TensorId id) {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw contract_error("tensor id " + std::to_string(id) + " not on tape");
  return nodes_[id].t;
}

const Tensor& Tape::at(TensorId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw contract_error("tensor id " + std::to_string(id) + " not on tape");
  return nodes_[id].t;
}

TensorId Tape::push(Node node) {
  const TensorId id = static_cast<TensorId>(nodes_.size());
  node.t.tape_id = id;
  nodes_.push_back(std::move(node));
  return id;
}

void Tape::check_finite(const std::vector<double>& values, const char* what) const {
  for (double v : values) {
    if (!std::isfinite(v))
      throw numeric_error(std::string(what) + ": non-finite value");
  }
}

TensorId Tape::leaf(std::vector<int> shape, std::vector<double> values) {
  if (shape.empty() || shape.size() > 2)
    throw shape_error("leaf: shape must be 1-D or 2-D, got " + shape_str(shape));
  for (int d : shape) {
    if (d <= 0) throw shape_error("leaf: non-positive dimension in " + shape_str(shape));
  }
  if (shape_numel(shape) != values.size())
    throw shape_error("leaf: shape " + shape_str(shape) + " does not match " +
                      std::to_string(values.size()) + " values");
  check_finite(values, "leaf");
  Node n;
  n.kind = OpKind::leaf;
  n.t.shape = std::move(shape);
  n.t.values = std::move(values);
  return push(std::move(n));
}

TensorId Tape::param(const ParamStore& store, std::size_t offset, std::size_t length,
                     std::vector<int> shape) {
  if (offset + length > store.size())
    throw contract_error("param: segment out of store bounds");
  if (shape_numel(shape) != length)
    throw shape_error("param: shape " + shape_str(shape) + " does not match length " +
                      std::to_string(length));
  Node n;
  n.kind = OpKind::param;
  n.param_offset = offset;
  n.t.shape = std::move(shape);
  n.t.values.assign(store.data.begin() + offset, store.data.begin() + offset + length);
  return push(std::move(n));
}

TensorId Tape::matmul(TensorId a, TensorId b) {
  const Tensor& ta = in(a);
  const Tensor& tb = in(b);
  if (ta.shape.size() != 2 || tb.shape.size() != 2 || ta.shape[1] != tb.shape[0])
    throw shape_error(std::string("matmul: incompatible shapes ") + shape_str(ta.shape) +
                      " x " + shape_str(tb.shape));
  const int m = ta.shape[0], k = ta.shape[1], n = tb.shape[1];
  Node node;
  node.kind = OpKind::matmul;
  node.inputs = {a, b};
  node.t.shape = {m, n};
  node.t.values.assign(static_cast<std::size_t>(m) * n, 0.0);
  mm_acc(ta.values.data(), m, k, tb.values.data(), n, node.t.values.data());
  return push(std::move(node));
}

TensorId Tape::add(TensorId a, TensorId b) {
  const Tensor& ta = in(a);
  const Tensor& tb = in(b);
  Node node;
  node.kind = OpKind::add;
  node.inputs = {a, b};
  node.t.shape = ta.shape;
  node.t.values = ta.values;
  if (tb.size() == ta.size() && tb.shape == ta.shape) {
    for (std::size_t i = 0; i < ta.size(); ++i) node.t.values[i] += tb.values[i];
  } else if (tb.size() == 1) {
    for (double& v : node.t.values) v += tb.values[0];
  } else if (ta.shape.size() == 2 && tb.shape.size() == 1 && tb.shape[0] == ta.shape[1]) {
    const int m = ta.shape[0], n = ta.shape[1];
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) node.t.values[static_cast<std::size_t>(i) * n + j] += tb.values[j];
  } else {
    throw shape_error(std::string("add: incompatible shapes ") + shape_str(ta.shape) + " + " +
                      shape_str(tb.shape));
  }
  return push(std::move(node));
}

TensorId Tape::mul(TensorId a, TensorId b) {
  const Tensor& ta = in(a);
  const Tensor& tb = in(b);
  Node node;
  node.kind = OpKind::mul;
  node.inputs = {a, b};
  node.t.shape = ta.shape;
  node.t.values = ta.values;
  if (tb.shape == ta.shape) {
    for (std::size_t i = 0; i < ta.size(); ++i) node.t.values[i] *= tb.values[i];
  } else if (tb.size() == 1) {
    for (double& v : node.t.values) v *= tb.values[0];
  } else {
    throw shape_error(std::string("mul: incompatible shapes ") + shape_str(ta.shape) + " * " +
                      shape_str(tb.shape));
  }
  return push(std::move(node));
}

TensorId Tape::embedding_lookup(TensorId table, std::span<const int> ids) {
  const Tensor& tt = in(table);
  if (tt.shape.size() != 2)
    throw shape_error("embedding_lookup: table must be 2-D, got " + shape_str(tt.shape));
  if (ids.empty()) throw contract_error("embedding_lookup: empty id list");
  const int v = tt.shape[0], d = tt.shape[1];
  Node node;
  node.kind = OpKind::embedding_lookup;
  node.inputs = {table};
  node.iattrs.assign(ids.begin(), ids.end());
  node.t.shape = {static_cast<int>(ids.size()), d};
  node.t.values.resize(ids.size() * static_cast<std::size_t>(d));
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const int id = ids[t];
    if (id < 0 || id >= v)
      throw contract_error("embedding_lookup: id " + std::to_string(id) + " out of range [0," +
                           std::to_string(v) + ")");
    std::copy_n(tt.values.begin() + static_cast<std::size_t>(id) * d, d,
                node.t.values.begin() + t * d);
  }
  return push(std::move(node));
}

TensorId Tape::layer_norm(TensorId x, TensorId gain, TensorId bias) {
  const Tensor& tx = in(x);
  const Tensor& tg = in(gain);
  const Tensor& tb = in(bias);
  const int m = tx.rows(), n = tx.cols();
  if (tg.shape.size() != 1 || tb.shape.size() != 1 || tg.shape[0] != n || tb.shape[0] != n)
    throw shape_error(std::string("layer_norm: gain/bias must be [cols] for x ") +
                      shape_str(tx.shape) + ", got " + shape_str(tg.shape) + " and " +
                      shape_str(tb.shape));
  Node node;
  node.kind = OpKind::layer_norm;
  node.inputs = {x, gain, bias};
  node.t.shape = tx.shape;
  node.t.values.resize(tx.size());
  node.dattrs.resize(2 * static_cast<std::size_t>(m));  // per-row mean, inv-std
  for (int i = 0; i < m; ++i) {
    const double* row = tx.values.data() + static_cast<std::size_t>(i) * n;
    double* out = node.t.values.data() + static_cast<std::size_t>(i) * n;
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += row[j];
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      const double d = row[j] - mean;
      var += d * d;
    }
    var /= n;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    node.dattrs[2 * static_cast<std::size_t>(i)] = mean;
    node.dattrs[2 * static_cast<std::size_t>(i) + 1] = inv;
    for (int j = 0; j < n; ++j)
      out[j] = (row[j] - mean) * inv * tg.values[j] + tb.values[j];
  }
  return push(std::move(node));
}

TensorId Tape::softmax(TensorId x) {
  const Tensor& tx = in(x);
  const int m = tx.rows(), n = tx.cols();
  if (n == 0) throw shape_error("softmax: empty tensor");
  Node node;
  node.kind = OpKind::softmax;
  node.inputs = {x};
  node.t.shape = tx.shape;
  node.t.values.resize(tx.size());
  for (int i = 0; i < m; ++i) {
    const double* row = tx.values.data() + static_cast<std::size_t>(i) * n;
    double* out = node.t.values.data() + static_cast<std::size_t>(i) * n;
    double mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      out[j] = std::exp(row[j] - mx);
      sum += out[j];
    }
    for (int j = 0; j < n; ++j) out[j] /= sum;
  }
  return push(std::move(node));
}

TensorId Tape::relu(TensorId x) {
  const Tensor& tx = in(x);
  Node node;
  node.kind = OpKind::relu;
  node.inputs = {x};
  node.t.shape = tx.shape;
  node.t.values = tx.values;
  for (double& v : node.t.values) v = v > 0.0 ? v : 0.0;
  return push(std::move(node));
}

TensorId Tape::concat_cols(std::span<const TensorId> parts) {
  if (parts.empty()) throw contract_error("concat: no inputs");
  const Tensor& first = in(parts[0]);
  const bool two_d = first.shape.size() == 2;
  const int m = first.rows();
  int total = 0;
  for (TensorId p : parts) {
    const Tensor& tp = in(p);
    if (tp.shape.size() != first.shape.size() || tp.rows() != m)
      throw shape_error(std::string("concat: mismatched shapes ") + shape_str(first.shape) +
                        " vs " + shape_str(tp.shape));
    total += tp.cols();
  }
  Node node;
  node.kind = OpKind::concat;
  node.inputs.assign(parts.begin(), parts.end());
  node.t.shape = two_d ? std::vector<int>{m, total} : std::vector<int>{total};
  node.t.values.resize(static_cast<std::size_t>(m) * total);
  int col = 0;
  for (TensorId p : parts) {
    const Tensor& tp = in(p);
    const int n = tp.cols();
    for (int i = 0; i < m; ++i)
      std::copy_n(tp.values.begin() + static_cast<std::size_t>(i) * n, n,
                  node.t.values.begin() + static_cast<std::size_t>(i) * total + col);
    col += n;
  }
  return push(std::move(node));
}

TensorId Tape::slice(TensorId x, int axis, int begin, int end) {
  const Tensor& tx = in(x);
  const int dims = static_cast<int>(tx.shape.size());
  if (axis < 0 || axis >= dims)
    throw shape_error("slice: axis " + std::to_string(axis) + " invalid for " +
                      shape_str(tx.shape));
  const int extent = tx.shape[axis];
  if (begin < 0 || end > extent || begin >= end)
    throw shape_error("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                      ") invalid for axis of extent " + std::to_string(extent));
  Node node;
  node.kind = OpKind::slice;
  node.inputs = {x};
  node.iattrs = {axis, begin, end};
  if (dims == 1) {
    node.t.shape = {end - begin};
    node.t.values.assign(tx.values.begin() + begin, tx.values.begin() + end);
  } else {
    const int m = tx.shape[0], n = tx.shape[1];
    if (axis == 0) {
      node.t.shape = {end - begin, n};
      node.t.values.assign(tx.values.begin() + static_cast<std::size_t>(begin) * n,
                           tx.values.begin() + static_cast<std::size_t>(end) * n);
    } else {
      node.t.shape = {m, end - begin};
      node.t.values.resize(static_cast<std::size_t>(m) * (end - begin));
      for (int i = 0; i < m; ++i)
        std::copy_n(tx.values.begin() + static_cast<std::size_t>(i) * n + begin, end - begin,
                    node.t.values.begin() + static_cast<std::size_t>(i) * (end - begin));
    }
  }
  return push(std::move(node));
}

TensorId Tape::transpose(TensorId x) {
  const Tensor& tx = in(x);
  if (tx.shape.size() != 2)
    throw shape_error("transpose: expected 2-D tensor, got " + shape_str(tx.shape));
  const int m = tx.shape[0], n = tx.shape[1];
  Node node;
  node.kind = OpKind::transpose;
  node.inputs = {x};
  node.t.shape = {n, m};
  node.t.values.resize(tx.size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      node.t.values[static_cast<std::size_t>(j) * m + i] =
          tx.values[static_cast<std::size_t>(i) * n + j];
  return push(std::move(node));
}

TensorId Tape::cross_entropy_with_logits(TensorId logits, std::span<const int> targets,
                                         int ignore_index) {
  const Tensor& tl = in(logits);
  if (tl.shape.size() != 2)
    throw shape_error("cross_entropy_with_logits: logits must be 2-D, got " +
                      shape_str(tl.shape));
  const int m = tl.shape[0], v = tl.shape[1];
  if (static_cast<int>(targets.size()) != m)
    throw shape_error("cross_entropy_with_logits: " + std::to_string(targets.size()) +
                      " targets for " + std::to_string(m) + " rows");
  Node node;
  node.kind = OpKind::cross_entropy_with_logits;
  node.inputs = {logits};
  node.iattrs.assign(targets.begin(), targets.end());
  node.iattrs.push_back(ignore_index);
  node.dattrs.resize(m);  // per-row log-sum-exp
  double loss = 0.0;
  for (int i = 0; i < m; ++i) {
    const int y = targets[i];
    if (y == ignore_index) continue;
    if (y < 0 || y >= v)
      throw contract_error("cross_entropy_with_logits: target " + std::to_string(y) +
                           " out of range [0," + std::to_string(v) + ")");
    const double* row = tl.values.data() + static_cast<std::size_t>(i) * v;
    double mx = row[0];
    for (int j = 1; j < v; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < v; ++j) sum += std::exp(row[j] - mx);
    const double lse = mx + std::log(sum);
    node.dattrs[i] = lse;
    loss += lse - row[y];
  }
  node.t.shape = {1};
  node.t.values = {loss};
  return push(std::move(node));
}

void Tape::backward(TensorId loss, ParamStore& store) {
  if (consumed_) throw state_error("backward: tape already consumed");
  const Tensor& tl = at(loss);
  if (tl.size() != 1)
    throw contract_error("backward: loss must be scalar, got shape " + shape_str(tl.shape));
  consumed_ = true;

  for (Node& n : nodes_) n.t.grad.assign(n.t.values.size(), 0.0);
  nodes_[loss].t.grad[0] = 1.0;

  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    Node& node = nodes_[id];
    const std::vector<double>& g = node.t.grad;
    switch (node.kind) {
      case OpKind::leaf:
      case OpKind::param:
        break;
      case OpKind::matmul: {
        Tensor& ta = nodes_[node.inputs[0]].t;
        Tensor& tb = nodes_[node.inputs[1]].t;
        const int m = ta.shape[0], k = ta.shape[1], n = tb.shape[1];
        mm_nt_acc(g.data(), m, n, tb.values.data(), k, ta.grad.data());
        mm_tn_acc(ta.values.data(), m, k, g.data(), n, tb.grad.data());
        break;
      }
      case OpKind::add: {
        Tensor& ta = nodes_[node.inputs[0]].t;
        Tensor& tb = nodes_[node.inputs[1]].t;
        for (std::size_t i = 0; i < g.size(); ++i) ta.grad[i] += g[i];
        if (tb.size() == ta.size() && tb.shape == ta.shape) {
          for (std::size_t i = 0; i < g.size(); ++i) tb.grad[i] += g[i];
        } else if (tb.size() == 1) {
          double acc = 0.0;
          for (double gv : g) acc += gv;
          tb.grad[0] += acc;
        } else {  // row broadcast
          const int m = ta.shape[0], n = ta.shape[1];
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) tb.grad[j] += g[static_cast<std::size_t>(i) * n + j];
        }
        break;
      }
      case OpKind::mul: {
        Tensor& ta = nodes_[node.inputs[0]].t;
        Tensor& tb = nodes_[node.inputs[1]].t;
        if (tb.shape == ta.shape) {
          for (std::size_t i = 0; i < g.size(); ++i) {
            ta.grad[i] += g[i] * tb.values[i];
            tb.grad[i] += g[i] * ta.values[i];
          }
        } else {  // scalar
          double acc = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) {
            ta.grad[i] += g[i] * tb.values[0];
            acc += g[i] * ta.values[i];
          }
          tb.grad[0] += acc;
        }
        break;
      }
      case OpKind::embedding_lookup: {
        Tensor& tt = nodes_[node.inputs[0]].t;
        const int d = tt.shape[1];
        for (std::size_t t = 0; t < node.iattrs.size(); ++t) {
          const std::size_t dst = static_cast<std::size_t>(node.iattrs[t]) * d;
          const std::size_t src = t * d;
          for (int j = 0; j < d; ++j) tt.grad[dst + j] += g[src + j];
        }
        break;
      }
      case OpKind::layer_norm: {
        Tensor& tx = nodes_[node.inputs[0]].t;
        Tensor& tg = nodes_[node.inputs[1]].t;
        Tensor& tb = nodes_[node.inputs[2]].t;
        const int m = tx.rows(), n = tx.cols();
        for (int i = 0; i < m; ++i) {
          const double mean = node.dattrs[2 * static_cast<std::size_t>(i)];
          const double inv = node.dattrs[2 * static_cast<std::size_t>(i) + 1];
          const double* xrow = tx.values.data() + static_cast<std::size_t>(i) * n;
          const double* grow = g.data() + static_cast<std::size_t>(i) * n;
          double* dxrow = tx.grad.data() + static_cast<std::size_t>(i) * n;
          // dxhat_j = dy_j * gain_j ; dx = inv*(dxhat - mean(dxhat) - xhat*mean(dxhat*xhat))
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (int j = 0; j < n; ++j) {
            const double xhat = (xrow[j] - mean) * inv;
            const double dxhat = grow[j] * tg.values[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
            tg.grad[j] += grow[j] * xhat;
            tb.grad[j] += grow[j];
          }
          const double mean_dxhat = sum_dxhat / n;
          const double mean_dxhat_xhat = sum_dxhat_xhat / n;
          for (int j = 0; j < n; ++j) {
            const double xhat = (xrow[j] - mean) * inv;
            const double dxhat = grow[j] * tg.values[j];
            dxrow[j] += inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
          }
        }
        break;
      }
      case OpKind::softmax: {
        Tensor& tx = nodes_[node.inputs[0]].t;
        const int m = tx.rows(), n = tx.cols();
        for (int i = 0; i < m; ++i) {
          const double* yrow = node.t.values.data() + static_cast<std::size_t>(i) * n;
          const double* grow = g.data() + static_cast<std::size_t>(i) * n;
          double* dxrow = tx.grad.data() + static_cast<std::size_t>(i) * n;
          double dot = 0.0;
          for (int j = 0; j < n; ++j) dot += grow[j] * yrow[j];
          for (int j = 0; j < n; ++j) dxrow[j] += yrow[j] * (grow[j] - dot);
        }
        break;
      }
      case OpKind::relu: {
        Tensor& tx = nodes_[node.inputs[0]].t;
        for (std::size_t i = 0; i < g.size(); ++i)
          if (tx.values[i] > 0.0) tx.grad[i] += g[i];
        break;
      }
      case OpKind::concat: {
        const int m = node.t.rows();
        const int total = node.t.cols();
        int col = 0;
        for (TensorId p : node.inputs) {
          Tensor& tp = nodes_[p].t;
          const int n = tp.cols();
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
              tp.grad[static_cast<std::size_t>(i) * n + j] +=
                  g[static_cast<std::size_t>(i) * total + col + j];
          col += n;
        }
        break;
      }
      case OpKind::slice: {
        Tensor& tx = nodes_[node.inputs[0]].t;
        const int axis = node.iattrs[0], begin = node.iattrs[1], end = node.iattrs[2];
        if (tx.shape.size() == 1) {
          for (int j = begin; j < end; ++j) tx.grad[j] += g[j - begin];
        } else {
          const int n = tx.shape[1];
          if (axis == 0) {
            for (std::size_t i = 0; i < g.size(); ++i)
              tx.grad[static_cast<std::size_t>(begin) * n + i] += g[i];
          } else {
            const int w = end - begin;
            const int m = tx.shape[0];
            for (int i = 0; i < m; ++i)
              for (int j = 0; j < w; ++j)
                tx.grad[static_cast<std::size_t>(i) * n + begin + j] +=
                    g[static_cast<std::size_t>(i) * w + j];
          }
        }
        break;
      }
      case OpKind::transpose: {
        Tensor& tx = nodes_[node.inputs[0]].t;
        const int m = tx.shape[0], n = tx.shape[1];
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j)
            tx.grad[static_cast<std::size_t>(i) * n + j] +=
                g[static_cast<std::size_t>(j) * m + i];
        break;
      }
      case OpKind::cross_entropy_with_logits: {
        Tensor& tl2 = nodes_[node.inputs[0]].t;
        const int m = tl2.shape[0], v = tl2.shape[1];
        const int ignore = node.iattrs[m];
        const double gl = g[0];
        for (int i = 0; i < m; ++i) {
          const int y = node.iattrs[i];
          if (y == ignore) continue;
          const double lse = node.dattrs[i];
          const double* row = tl2.values.data() + static_cast<std::size_t>(i) * v;
          double* drow = tl2.grad.data() + static_cast<std::size_t>(i) * v;
          for (int j = 0; j < v; ++j) drow[j] += gl * std::exp(row[j] - lse);
          drow[y] -= gl;
        }
        break;
      }
    }
  }

  for (const Node& n : nodes_) {
    if (n.kind != OpKind::param) continue;
    if (n.param_offset + n.t.size() > store.size())
      throw contract_error("backward: param node does not fit the given store");
    for (std::size_t i = 0; i < n.t.size(); ++i) store.grad[n.param_offset + i] += n.t.grad[i];
  }
}

std::vector<double> per_example_gradient(ParamStore& store,
                                         const std::function<double()>& forward_backward) {
  static thread_local bool active = false;
  if (active) throw state_error("per_example_gradient: nested invocation");
  active = true;
  struct Reset {
    bool* flag;
    ~Reset() { *flag = false; }
  } reset{&active};

  store.zero_grad();
  forward_backward();
  std::vector<double> out = store.grad;
  store.zero_grad();
  return out;
}

}  // namespace fishdip
