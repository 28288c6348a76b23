#pragma once

// Differentiable primitives over Tensor<S>. Free functions, one backward
// closure each; anything the model computes is composed from these.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "nci/tensor.hpp"

namespace nci {

namespace detail {

template <class S>
Eigen::Map<const MatX<S>> as_mat(const ArrX<S>& v, Index r, Index c) {
  return Eigen::Map<const MatX<S>>(v.data(), r, c);
}

template <class S>
Eigen::Map<MatX<S>> as_mat(ArrX<S>& v, Index r, Index c) {
  return Eigen::Map<MatX<S>>(v.data(), r, c);
}

template <class S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// Rows/cols split treating the last axis as the "row" contents.
template <class S>
std::pair<Index, Index> rowwise_dims(const Tensor<S>& x, const char* op) {
  if (x.rank() < 1)
    throw DimensionError(std::string(op) + ": requires rank >= 1");
  Index cols = x.shape().back();
  if (cols < 1)
    throw DimensionError(std::string(op) + ": empty last axis in " +
                         shape_str(x.shape()));
  return {x.size() / cols, cols};
}

}  // namespace detail

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "add");
  return detail::make_op<S>(
      a.shape(), a.values() + b.values(), {a, b},
      [](const TensorNode<S>& self, const ArrX<S>& g, GradTable<S>& gt) {
        if (self.parents[0]->requires_grad) gt.accum(self.parents[0].get()) += g;
        if (self.parents[1]->requires_grad) gt.accum(self.parents[1].get()) += g;
      });
}

template <class S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "sub");
  return detail::make_op<S>(
      a.shape(), a.values() - b.values(), {a, b},
      [](const TensorNode<S>& self, const ArrX<S>& g, GradTable<S>& gt) {
        if (self.parents[0]->requires_grad) gt.accum(self.parents[0].get()) += g;
        if (self.parents[1]->requires_grad) gt.accum(self.parents[1].get()) -= g;
      });
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "mul");
  return detail::make_op<S>(
      a.shape(), a.values() * b.values(), {a, b},
      [](const TensorNode<S>& self, const ArrX<S>& g, GradTable<S>& gt) {
        if (self.parents[0]->requires_grad)
          gt.accum(self.parents[0].get()) += g * self.parents[1]->value;
        if (self.parents[1]->requires_grad)
          gt.accum(self.parents[1].get()) += g * self.parents[0]->value;
      });
}

template <class S>
Tensor<S> scale(const Tensor<S>& a, S s) {
  return detail::make_op<S>(
      a.shape(), ArrX<S>(a.values() * s), {a},
      [s](const TensorNode<S>& self, const ArrX<S>& g, GradTable<S>& gt) {
        if (self.parents[0]->requires_grad)
          gt.accum(self.parents[0].get()) += g * s;
      });
}

template <class S>
Tensor<S> neg(const Tensor<S>& a) {
  return scale(a, S(-1));
}

// Standard matrix product; backward: dA = G * B^T, dB = A^T * G.
template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
  Index m = a.rows(), k = a.cols(), n = b.cols();
  ArrX<S> out(m * n);
  detail::as_mat(out, m, n).noalias() = a.mat() * b.mat();
  return detail::make_op<S>(
      {m, n}, std::move(out), {a, b},
      [m, k, n](const TensorNode<S>& self, const ArrX<S>& g, GradTable<S>& gt) {
        auto gm = detail::as_mat(g, m, n);
        auto am = detail::as_mat(self.parents[0]->value, m, k);
        auto bm = detail::as_mat(self.parents[1]->value, k, n);
        if (self.parents[0]->requires_grad) {
          auto da = detail::as_mat(gt.accum(self.parents[0].get()), m, k);
          da.noalias() += gm * bm.transpose();
        }
        if (self.parents[1]->requires_grad) {
          auto db = detail::as_mat(gt.accum(self.parents[1].get()), k, n);
          db.noalias() += am.transpose() * gm;
        }
      });
}

template <class S>
Tensor<S> transpose(const Tensor<S>& a) {
  if (a.rank() != 2)
    throw DimensionError("transpose: requires rank 2, got " +
                         shape_str(a.shape()));
  Index m = a.rows(), n = a.cols();
  ArrX<S> out(m * n);
  detail::as_mat(out, n, m) = a.mat().transpose();
  return detail::make_op<S>(
      {n, m}, std::move(out), {a},
      [m, n](const TensorNode<S>& self, const ArrX<S>& g, GradTable<S>& gt) {
        if (!self.parents[0]->requires_grad) return;
        auto da = detail::as_mat(gt.accum(self.parents[0].get()), m, n);
        da += detail::as_mat(g, n, m).transpose();
      });
}

// Max-subtracted softmax along the last axis.
template <class S>
Tensor<S> softmax_rowwise(const Tensor<S>& x) {
  auto [rows, cols] = detail::rowwise_dims(x, "softmax_rowwise");
  ArrX<S> out(x.size());
  for (Index r = 0; r < rows; ++r) {
    auto row = x.values().segment(r * cols, cols);
    S m = row.maxCoeff();
    ArrX<S> e = (row - m).exp();
    out.segment(r * cols, cols) = e / e.sum();
  }
  return detail::make_op<S>(
      x.shape(), std::move(out), {x},
      [rows = rows, cols = cols](const TensorNode<S>& self, const ArrX<S>& g,
                                 GradTable<S>& gt) {
        if (!self.parents[0]->requires_grad) return;
        ArrX<S>& dx = gt.accum(self.parents[0].get());
        for (Index r = 0; r < rows; ++r) {
          auto y = self.value.segment(r * cols, cols);
          auto gr = g.segment(r * cols, cols);
          S dot = (gr * y).sum();
          dx.segment(r * cols, cols) += y * (gr - dot);
        }
      });
}

template <class S>
Tensor<S> log_softmax_rowwise(const Tensor<S>& x) {
  auto [rows, cols] = detail::rowwise_dims(x, "log_softmax_rowwise");
  ArrX<S> out(x.size());
  for (Index r = 0; r < rows; ++r) {
    auto row = x.values().segment(r * cols, cols);
    S m = row.maxCoeff();
    S lse = std::log((row - m).exp().sum()) + m;
    out.segment(r * cols, cols) = row - lse;
  }
  return detail::make_op<S>(
      x.shape(), std::move(out), {x},
      [rows = rows, cols = cols](const TensorNode<S>& self, const ArrX<S>& g,
                                 GradTable<S>& gt) {
        if (!self.parents[0]->requires_grad) return;
        ArrX<S>& dx = gt.accum(self.parents[0].get());
        for (Index r = 0; r < rows; ++r) {
          auto yr = self.value.segment(r * cols, cols);
          auto gr = g.segment(r * cols, cols);
          S gsum = gr.sum();
          dx.segment(r * cols, cols) += gr - yr.exp() * gsum;
        }
      });
}

// Log-sum-exp along the last axis; result drops that axis.
template <class S>
Tensor<S> logsumexp_rowwise(const Tensor<S>& x) {
  auto [rows, cols] = detail::rowwise_dims(x, "logsumexp_rowwise");
  ArrX<S> out(rows);
  for (Index r = 0; r < rows; ++r) {
    auto row = x.values().segment(r * cols, cols);
    S m = row.maxCoeff();
    out[r] = std::log((row - m).exp().sum()) + m;
  }
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  return detail::make_op<S>(
      std::move(out_shape), std::move(out), {x},
      [rows = rows, cols = cols](const TensorNode<S>& self, const ArrX<S>& g,
                                 GradTable<S>& gt) {
        if (!self.parents[0]->requires_grad) return;
        ArrX<S>& dx = gt.accum(self.parents[0].get());
        const ArrX<S>& xv = self.parents[0]->value;
        for (Index r = 0; r < rows; ++r)
          dx.segment(r * cols, cols) +=
              g[r] * (xv.segment(r * cols, cols) - self.value[r]).exp();
      });
}

template <class S>
Tensor<S> relu(const Tensor<S>& x) {
  return detail::make_op<S>(
      x.shape(), ArrX<S>(x.values().max(S(0))), {x},
      [](const TensorNode<S>& self, const ArrX<S>& g, GradTable<S>& gt) {
        if (!self.parents[0]->requires_grad) return;
        gt.accum(self.parents[0].get()) +=
            g * (self.parents[0]->value > S(0)).template cast<S>();
      });
}

// Per-row normalization over the last axis followed by the affine map
// y = gain * (x - mean) / sqrt(var + eps) + bias.
template <class S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gain,
                     const Tensor<S>& bias, S eps) {
  auto [rows, d] = detail::rowwise_dims(x, "layer_norm");
  if (gain.size() != d || bias.size() != d)
    throw DimensionError("layer_norm: gain/bias size " +
                         std::to_string(gain.size()) + "/" +
                         std::to_string(bias.size()) + " does not match last axis " +
                         std::to_string(d));
  if (eps <= S(0)) throw ParameterError("layer_norm: eps must be > 0");
  ArrX<S> out(x.size());
  ArrX<S> inv_std(rows);
  for (Index r = 0; r < rows; ++r) {
    auto row = x.values().segment(r * d, d);
    S mean = row.mean();
    S var = (row - mean).square().mean();
    S inv = S(1) / std::sqrt(var + eps);
    inv_std[r] = inv;
    out.segment(r * d, d) = (row - mean) * inv * gain.values() + bias.values();
  }
  return detail::make_op<S>(
      x.shape(), std::move(out), {x, gain, bias},
      [rows = rows, d = d, inv_std = std::move(inv_std)](
          const TensorNode<S>& self, const ArrX<S>& g, GradTable<S>& gt) {
        const ArrX<S>& xv = self.parents[0]->value;
        const ArrX<S>& gv = self.parents[1]->value;
        for (Index r = 0; r < rows; ++r) {
          auto xr = xv.segment(r * d, d);
          auto gr = g.segment(r * d, d);
          S mean = xr.mean();
          S inv = inv_std[r];
          ArrX<S> xhat = (xr - mean) * inv;
          if (self.parents[0]->requires_grad) {
            ArrX<S> gy = gr * gv;
            S m1 = gy.mean();
            S m2 = (gy * xhat).mean();
            gt.accum(self.parents[0].get()).segment(r * d, d) +=
                inv * (gy - m1 - xhat * m2);
          }
          if (self.parents[1]->requires_grad)
            gt.accum(self.parents[1].get()) += gr * xhat;
          if (self.parents[2]->requires_grad)
            gt.accum(self.parents[2].get()) += gr;
        }
      });
}

template <class S>
Tensor<S> slice_cols(const Tensor<S>& x, Index c0, Index w) {
  if (x.rank() != 2 || c0 < 0 || w < 1 || c0 + w > x.cols())
    throw DimensionError("slice_cols: [" + std::to_string(c0) + ", +" +
                         std::to_string(w) + ") out of " + shape_str(x.shape()));
  Index m = x.rows(), n = x.cols();
  ArrX<S> out(m * w);
  detail::as_mat(out, m, w) = x.mat().middleCols(c0, w);
  return detail::make_op<S>(
      {m, w}, std::move(out), {x},
      [m, n, c0, w](const TensorNode<S>& self, const ArrX<S>& g, GradTable<S>& gt) {
        if (!self.parents[0]->requires_grad) return;
        auto dx = detail::as_mat(gt.accum(self.parents[0].get()), m, n);
        dx.middleCols(c0, w) += detail::as_mat(g, m, w);
      });
}

template <class S>
Tensor<S> concat_cols(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  Index m = parts[0].rows(), total = 0;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.rows() != m)
      throw DimensionError("concat_cols: row mismatch");
    total += p.cols();
  }
  ArrX<S> out(m * total);
  auto om = detail::as_mat(out, m, total);
  Index at = 0;
  std::vector<Index> widths;
  for (const auto& p : parts) {
    om.middleCols(at, p.cols()) = p.mat();
    widths.push_back(p.cols());
    at += p.cols();
  }
  return detail::make_op<S>(
      {m, total}, std::move(out), parts,
      [m, total, widths = std::move(widths)](const TensorNode<S>& self,
                                             const ArrX<S>& g, GradTable<S>& gt) {
        auto gm = detail::as_mat(g, m, total);
        Index at = 0;
        for (std::size_t i = 0; i < widths.size(); ++i) {
          if (self.parents[i]->requires_grad) {
            auto dp = detail::as_mat(gt.accum(self.parents[i].get()), m, widths[i]);
            dp += gm.middleCols(at, widths[i]);
          }
          at += widths[i];
        }
      });
}

template <class S>
Tensor<S> concat_cols(std::initializer_list<Tensor<S>> parts) {
  return concat_cols(std::vector<Tensor<S>>(parts));
}

// Stacks equal-sized tensors (scalars, rank-1 [d], or [1 x d]) into [n x d].
template <class S>
Tensor<S> stack_rows(const std::vector<Tensor<S>>& rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no inputs");
  Index d = rows[0].size();
  ArrX<S> out(static_cast<Index>(rows.size()) * d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d)
      throw DimensionError("stack_rows: row size mismatch");
    out.segment(static_cast<Index>(i) * d, d) = rows[i].values();
  }
  return detail::make_op<S>(
      {static_cast<Index>(rows.size()), d}, std::move(out), rows,
      [d](const TensorNode<S>& self, const ArrX<S>& g, GradTable<S>& gt) {
        for (std::size_t i = 0; i < self.parents.size(); ++i)
          if (self.parents[i]->requires_grad)
            gt.accum(self.parents[i].get()) +=
                g.segment(static_cast<Index>(i) * d, d);
      });
}

template <class S>
Tensor<S> stack_rows(std::initializer_list<Tensor<S>> rows) {
  return stack_rows(std::vector<Tensor<S>>(rows));
}

// Vertical concatenation of rank-2 blocks with equal column counts.
template <class S>
Tensor<S> concat_rows(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  Index n = parts[0].cols(), total = 0;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.cols() != n)
      throw DimensionError("concat_rows: column mismatch");
    total += p.rows();
  }
  ArrX<S> out(total * n);
  Index at = 0;
  std::vector<Index> heights;
  for (const auto& p : parts) {
    out.segment(at * n, p.rows() * n) = p.values();
    heights.push_back(p.rows());
    at += p.rows();
  }
  return detail::make_op<S>(
      {total, n}, std::move(out), parts,
      [n, heights = std::move(heights)](const TensorNode<S>& self,
                                        const ArrX<S>& g, GradTable<S>& gt) {
        Index at = 0;
        for (std::size_t i = 0; i < heights.size(); ++i) {
          if (self.parents[i]->requires_grad)
            gt.accum(self.parents[i].get()) += g.segment(at * n, heights[i] * n);
          at += heights[i];
        }
      });
}

template <class S>
Tensor<S> concat_rows(std::initializer_list<Tensor<S>> parts) {
  return concat_rows(std::vector<Tensor<S>>(parts));
}

// Contiguous row block [r0, r0+h) as its own tensor.
template <class S>
Tensor<S> slice_rows(const Tensor<S>& x, Index r0, Index h) {
  if (x.rank() != 2 || r0 < 0 || h < 1 || r0 + h > x.rows())
    throw DimensionError("slice_rows: [" + std::to_string(r0) + ", +" +
                         std::to_string(h) + ") out of " + shape_str(x.shape()));
  Index n = x.cols();
  ArrX<S> out = x.values().segment(r0 * n, h * n);
  return detail::make_op<S>(
      {h, n}, std::move(out), {x},
      [r0, h, n](const TensorNode<S>& self, const ArrX<S>& g, GradTable<S>& gt) {
        if (self.parents[0]->requires_grad)
          gt.accum(self.parents[0].get()).segment(r0 * n, h * n) += g;
      });
}

// Row r as a [1 x n] tensor.
template <class S>
Tensor<S> select_row(const Tensor<S>& x, Index r) {
  if (x.rank() != 2 || r < 0 || r >= x.rows())
    throw DimensionError("select_row: row " + std::to_string(r) + " of " +
                         shape_str(x.shape()));
  Index n = x.cols();
  ArrX<S> out = x.values().segment(r * n, n);
  return detail::make_op<S>(
      {Index(1), n}, std::move(out), {x},
      [r, n](const TensorNode<S>& self, const ArrX<S>& g, GradTable<S>& gt) {
        if (self.parents[0]->requires_grad)
          gt.accum(self.parents[0].get()).segment(r * n, n) += g;
      });
}

// Single element by flat index, as a scalar tensor.
template <class S>
Tensor<S> select_item(const Tensor<S>& x, Index flat) {
  if (flat < 0 || flat >= x.size())
    throw DimensionError("select_item: index " + std::to_string(flat) +
                         " out of " + std::to_string(x.size()));
  ArrX<S> out(1);
  out[0] = x.values()[flat];
  return detail::make_op<S>(
      Shape{}, std::move(out), {x},
      [flat](const TensorNode<S>& self, const ArrX<S>& g, GradTable<S>& gt) {
        if (self.parents[0]->requires_grad)
          gt.accum(self.parents[0].get())[flat] += g[0];
      });
}

template <class S>
Tensor<S> mean_rows(const Tensor<S>& x) {
  if (x.rank() != 2)
    throw DimensionError("mean_rows: requires rank 2, got " +
                         shape_str(x.shape()));
  Index m = x.rows(), n = x.cols();
  ArrX<S> out(n);
  Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>>(out.data(), n) =
      x.mat().colwise().mean();
  return detail::make_op<S>(
      {Index(1), n}, std::move(out), {x},
      [m, n](const TensorNode<S>& self, const ArrX<S>& g, GradTable<S>& gt) {
        if (!self.parents[0]->requires_grad) return;
        auto dx = detail::as_mat(gt.accum(self.parents[0].get()), m, n);
        dx.rowwise() += Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(
                            g.data(), n) /
                        static_cast<S>(m);
      });
}

template <class S>
Tensor<S> sum(const Tensor<S>& x) {
  ArrX<S> out(1);
  out[0] = x.values().sum();
  return detail::make_op<S>(
      Shape{}, std::move(out), {x},
      [](const TensorNode<S>& self, const ArrX<S>& g, GradTable<S>& gt) {
        if (self.parents[0]->requires_grad)
          gt.accum(self.parents[0].get()) += g[0];
      });
}

template <class S>
Tensor<S> mean(const Tensor<S>& x) {
  return scale(sum(x), S(1) / static_cast<S>(x.size()));
}

// Adds a rank-1 bias to every row of x.
template <class S>
Tensor<S> add_rowwise(const Tensor<S>& x, const Tensor<S>& b) {
  auto [rows, n] = detail::rowwise_dims(x, "add_rowwise");
  if (b.size() != n)
    throw DimensionError("add_rowwise: bias size " + std::to_string(b.size()) +
                         " vs last axis " + std::to_string(n));
  ArrX<S> out(x.size());
  for (Index r = 0; r < rows; ++r)
    out.segment(r * n, n) = x.values().segment(r * n, n) + b.values();
  return detail::make_op<S>(
      x.shape(), std::move(out), {x, b},
      [rows = rows, n = n](const TensorNode<S>& self, const ArrX<S>& g,
                           GradTable<S>& gt) {
        if (self.parents[0]->requires_grad) gt.accum(self.parents[0].get()) += g;
        if (self.parents[1]->requires_grad) {
          ArrX<S>& db = gt.accum(self.parents[1].get());
          for (Index r = 0; r < rows; ++r) db += g.segment(r * n, n);
        }
      });
}

// Gathers table rows by token id into [len x d].
template <class S>
Tensor<S> embedding_lookup(const Tensor<S>& table, std::vector<std::int32_t> ids) {
  if (table.rank() != 2)
    throw DimensionError("embedding_lookup: table must be rank 2");
  Index v = table.rows(), d = table.cols();
  Index len = static_cast<Index>(ids.size());
  if (len == 0) throw DimensionError("embedding_lookup: empty id list");
  ArrX<S> out(len * d);
  for (Index i = 0; i < len; ++i) {
    Index id = ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= v)
      throw DimensionError("embedding_lookup: id " + std::to_string(id) +
                           " out of vocabulary " + std::to_string(v));
    out.segment(i * d, d) = table.values().segment(id * d, d);
  }
  return detail::make_op<S>(
      {len, d}, std::move(out), {table},
      [d, ids = std::move(ids)](const TensorNode<S>& self, const ArrX<S>& g,
                                GradTable<S>& gt) {
        if (!self.parents[0]->requires_grad) return;
        ArrX<S>& dt = gt.accum(self.parents[0].get());
        for (std::size_t i = 0; i < ids.size(); ++i)
          dt.segment(static_cast<Index>(ids[i]) * d, d) +=
              g.segment(static_cast<Index>(i) * d, d);
      });
}

template <class S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape) {
  if (shape_numel(shape) != x.size())
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " +
                         shape_str(shape));
  return detail::make_op<S>(
      std::move(shape), ArrX<S>(x.values()), {x},
      [](const TensorNode<S>& self, const ArrX<S>& g, GradTable<S>& gt) {
        if (self.parents[0]->requires_grad)
          gt.accum(self.parents[0].get()) += g;
      });
}

// Inverted dropout: elements dropped with probability p, survivors scaled by
// 1/(1-p). Mask generation consumes one rng draw per element.
template <class S>
Tensor<S> dropout(const Tensor<S>& x, double p, RngStream& rng) {
  if (p < 0.0 || p >= 1.0)
    throw ParameterError("dropout: p must be in [0, 1), got " + std::to_string(p));
  if (p == 0.0) return x;
  ArrX<S> mask(x.size());
  const S keep_scale = static_cast<S>(1.0 / (1.0 - p));
  for (Index i = 0; i < x.size(); ++i)
    mask[i] = rng.next_double() < p ? S(0) : keep_scale;
  ArrX<S> out = x.values() * mask;
  return detail::make_op<S>(
      x.shape(), std::move(out), {x},
      [mask = std::move(mask)](const TensorNode<S>& self, const ArrX<S>& g,
                               GradTable<S>& gt) {
        if (self.parents[0]->requires_grad)
          gt.accum(self.parents[0].get()) += g * mask;
      });
}

// Two forward samples of the same input under independent dropout masks.
template <class S>
std::pair<Tensor<S>, Tensor<S>> dropout_pair(const Tensor<S>& x, double p,
                                             RngStream& rng) {
  Tensor<S> first = dropout(x, p, rng);
  Tensor<S> second = dropout(x, p, rng);
  return {first, second};
}

// Additive causal mask: entry (i, j) = -1e9 for j > i, else 0.
template <class S>
Tensor<S> causal_mask(Index n) {
  Tensor<S> m = Tensor<S>::zeros({n, n});
  auto mm = m.mat_mut();
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) mm(i, j) = S(-1e9);
  return m;
}

// Fixed sinusoidal position table [len x d].
template <class S>
Tensor<S> sinusoidal_positions(Index len, Index d) {
  Tensor<S> p = Tensor<S>::zeros({len, d});
  auto pm = p.mat_mut();
  for (Index pos = 0; pos < len; ++pos)
    for (Index i = 0; i < d; ++i) {
      double angle = pos / std::pow(10000.0, 2.0 * (i / 2) / static_cast<double>(d));
      pm(pos, i) = static_cast<S>((i % 2 == 0) ? std::sin(angle) : std::cos(angle));
    }
  return p;
}

// Scaled dot-product attention with `heads` parallel heads, input/output
// projections, and an optional causal mask over the self-attention pattern.
// q: [lq x d], k/v: [lk x d], projections d x d.
template <class S>
Tensor<S> multi_head_attention(const Tensor<S>& q, const Tensor<S>& k,
                               const Tensor<S>& v, const Tensor<S>& wq,
                               const Tensor<S>& wk, const Tensor<S>& wv,
                               const Tensor<S>& wo, Index heads, bool causal) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2)
    throw DimensionError("multi_head_attention: q/k/v must be rank 2");
  Index d = q.cols();
  if (k.cols() != d || v.cols() != d)
    throw DimensionError("multi_head_attention: dimension mismatch q " +
                         shape_str(q.shape()) + " k " + shape_str(k.shape()) +
                         " v " + shape_str(v.shape()));
  if (k.rows() != v.rows())
    throw DimensionError("multi_head_attention: key/value length mismatch");
  if (heads < 1 || d % heads != 0)
    throw DimensionError("multi_head_attention: dimension " + std::to_string(d) +
                         " not divisible by heads " + std::to_string(heads));
  if (causal && q.rows() != k.rows())
    throw DimensionError("multi_head_attention: causal mask requires square attention");

  Index dh = d / heads;
  const S inv_sqrt = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
  Tensor<S> qp = matmul(q, wq), kp = matmul(k, wk), vp = matmul(v, wv);
  Tensor<S> mask;
  if (causal) mask = causal_mask<S>(q.rows());
  std::vector<Tensor<S>> ctx;
  ctx.reserve(static_cast<std::size_t>(heads));
  for (Index h = 0; h < heads; ++h) {
    Tensor<S> qh = slice_cols(qp, h * dh, dh);
    Tensor<S> kh = slice_cols(kp, h * dh, dh);
    Tensor<S> vh = slice_cols(vp, h * dh, dh);
    Tensor<S> scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    if (causal) scores = add(scores, mask);
    ctx.push_back(matmul(softmax_rowwise(scores), vh));
  }
  return matmul(concat_cols(ctx), wo);
}

}  // namespace nci
