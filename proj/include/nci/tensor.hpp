#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "nci/errors.hpp"
#include "nci/rng.hpp"

namespace nci {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <class S>
using ArrX = Eigen::Array<S, Eigen::Dynamic, 1>;
template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

inline Index shape_numel(const Shape& s) {
  Index n = 1;
  for (Index e : s) n *= e;
  return n;
}

namespace autograd {

inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}

inline bool grad_enabled() { return grad_enabled_flag(); }

// Scoped switch that disables graph construction (inference mode).
class NoGradGuard {
 public:
  NoGradGuard() : prev_(grad_enabled_flag()) { grad_enabled_flag() = false; }
  ~NoGradGuard() { grad_enabled_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

}  // namespace autograd

template <class S>
class GradTable;

// One record of the backward graph. `value` is the row-major flattened data;
// `grad` is filled by Tensor::backward() for every node it visits. Interior
// nodes drop their parent edges once backward has consumed them, so each
// forward pass owns exactly one disposable graph.
template <class S>
struct TensorNode {
  Shape shape;
  ArrX<S> value;
  ArrX<S> grad;  // empty until a backward pass writes it
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode<S>>> parents;
  std::function<void(const TensorNode<S>&, const ArrX<S>&, GradTable<S>&)> backward_fn;
};

// Per-backward-call gradient accumulator keyed by node. Keeping gradients out
// of the nodes during traversal lets several threads run backward over graphs
// that share parameter leaves without racing on a common buffer.
template <class S>
class GradTable {
 public:
  ArrX<S>& accum(const TensorNode<S>* n) {
    auto [it, inserted] = table_.try_emplace(n);
    if (inserted) it->second = ArrX<S>::Zero(n->value.size());
    return it->second;
  }
  const ArrX<S>* find(const TensorNode<S>* n) const {
    auto it = table_.find(n);
    return it == table_.end() ? nullptr : &it->second;
  }
  ArrX<S>* find(const TensorNode<S>* n) {
    auto it = table_.find(n);
    return it == table_.end() ? nullptr : &it->second;
  }

 private:
  std::unordered_map<const TensorNode<S>*, ArrX<S>> table_;
};

template <class S>
class Tensor {
 public:
  using Scalar = S;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode<S>> n) : node_(std::move(n)) {}

  static Tensor zeros(Shape shape) { return filled(std::move(shape), S(0)); }

  static Tensor filled(Shape shape, S v) {
    auto n = std::make_shared<TensorNode<S>>();
    n->value = ArrX<S>::Constant(shape_numel(shape), v);
    n->shape = std::move(shape);
    return Tensor(std::move(n));
  }

  static Tensor from_values(Shape shape, std::vector<S> vals) {
    if (static_cast<Index>(vals.size()) != shape_numel(shape))
      throw DimensionError("from_values: " + std::to_string(vals.size()) +
                           " values for shape " + shape_str(shape));
    auto n = std::make_shared<TensorNode<S>>();
    n->value = Eigen::Map<const ArrX<S>>(vals.data(), vals.size());
    n->shape = std::move(shape);
    return Tensor(std::move(n));
  }

  static Tensor scalar(S v) { return filled({}, v); }

  // Uniform in [lo, hi); the workhorse initializer (variance (hi-lo)^2 / 12).
  static Tensor uniform(Shape shape, S lo, S hi, RngStream& rng) {
    auto n = std::make_shared<TensorNode<S>>();
    Index numel = shape_numel(shape);
    n->value.resize(numel);
    for (Index i = 0; i < numel; ++i)
      n->value[i] = static_cast<S>(rng.uniform(lo, hi));
    n->shape = std::move(shape);
    return Tensor(std::move(n));
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Index rank() const { return static_cast<Index>(node_->shape.size()); }
  Index size() const { return node_->value.size(); }
  Index extent(Index axis) const { return node_->shape[static_cast<std::size_t>(axis)]; }

  Index rows() const {
    require_rank(2, "rows");
    return node_->shape[0];
  }
  Index cols() const {
    require_rank(2, "cols");
    return node_->shape[1];
  }

  const ArrX<S>& values() const { return node_->value; }
  ArrX<S>& values_mut() { return node_->value; }

  S item() const {
    if (size() != 1)
      throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }

  S operator()(Index i) const { return node_->value[i]; }
  S operator()(Index r, Index c) const {
    require_rank(2, "operator()(r,c)");
    return node_->value[r * node_->shape[1] + c];
  }

  Eigen::Map<const MatX<S>> mat() const {
    require_rank(2, "mat");
    return Eigen::Map<const MatX<S>>(node_->value.data(), node_->shape[0],
                                     node_->shape[1]);
  }
  Eigen::Map<MatX<S>> mat_mut() {
    require_rank(2, "mat");
    return Eigen::Map<MatX<S>>(node_->value.data(), node_->shape[0],
                               node_->shape[1]);
  }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool b = true) {
    node_->requires_grad = b;
    return *this;
  }

  bool has_grad() const { return node_->grad.size() == size() && size() >= 0 && node_->grad.size() > 0; }
  const ArrX<S>& grad() const { return node_->grad; }
  void zero_grad() { node_->grad = ArrX<S>::Zero(size()); }

  std::shared_ptr<TensorNode<S>> node() const { return node_; }
  TensorNode<S>* raw() const { return node_.get(); }

  // Reverse-mode sweep from a scalar. Gradients of every visited node are
  // accumulated into node.grad; interior graph edges are released afterwards.
  void backward() {
    GradTable<S> table;
    auto order = backward_into(table);
    for (TensorNode<S>* n : order) {
      if (const ArrX<S>* g = table.find(n)) {
        if (n->grad.size() != n->value.size()) n->grad = ArrX<S>::Zero(n->value.size());
        n->grad += *g;
      }
    }
    release_graph(order);
  }

  // Same sweep, but gradients stay in `table` and the graph is kept intact
  // for the caller to release. Used by the trainer to merge per-thread
  // gradients deterministically.
  std::vector<TensorNode<S>*> backward_into(GradTable<S>& table) const {
    if (size() != 1)
      throw DimensionError("backward() requires a scalar root, got " +
                           shape_str(shape()));
    std::vector<TensorNode<S>*> order = topo_order();
    table.accum(node_.get())[0] += S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      TensorNode<S>* n = *it;
      if (!n->backward_fn) continue;
      const ArrX<S>* g = table.find(n);
      if (!g) continue;
      n->backward_fn(*n, *g, table);
    }
    return order;
  }

  static void release_graph(const std::vector<TensorNode<S>*>& order) {
    for (TensorNode<S>* n : order) {
      if (!n->backward_fn) continue;  // leaves carry no edges
      n->backward_fn = nullptr;
      n->parents.clear();
    }
  }

 private:
  void require_rank(Index r, const char* what) const {
    if (rank() != r)
      throw DimensionError(std::string(what) + ": expected rank " +
                           std::to_string(r) + ", got shape " +
                           shape_str(shape()));
  }

  // Iterative post-order DFS over grad-requiring parents.
  std::vector<TensorNode<S>*> topo_order() const {
    std::vector<TensorNode<S>*> order;
    std::unordered_set<TensorNode<S>*> seen;
    struct Frame {
      TensorNode<S>* n;
      std::size_t next_parent;
    };
    std::vector<Frame> stack;
    if (!node_->requires_grad) return order;
    stack.push_back({node_.get(), 0});
    seen.insert(node_.get());
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next_parent < f.n->parents.size()) {
        TensorNode<S>* p = f.n->parents[f.next_parent++].get();
        if (p->requires_grad && seen.insert(p).second)
          stack.push_back({p, 0});
      } else {
        order.push_back(f.n);
        stack.pop_back();
      }
    }
    return order;
  }

  std::shared_ptr<TensorNode<S>> node_;
};

namespace detail {

// Builds the result node of an op: value is precomputed by the caller; the
// backward closure is attached only when the graph is live.
template <class S, class Backward>
Tensor<S> make_op(Shape shape, ArrX<S> value,
                  std::vector<Tensor<S>> parents, Backward bw) {
  auto n = std::make_shared<TensorNode<S>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  if (autograd::grad_enabled()) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || p.requires_grad();
    if (needs) {
      n->requires_grad = true;
      n->parents.reserve(parents.size());
      for (auto& p : parents) n->parents.push_back(p.node());
      n->backward_fn = std::move(bw);
    }
  }
  return Tensor<S>(std::move(n));
}

}  // namespace detail

}  // namespace nci
