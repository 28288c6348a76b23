#pragma once

// Objective terms: per-step contrastive consistency over two
// dropout-perturbed forward passes, and teacher-forced sequence negative
// log-likelihood.

#include <vector>

#include "nci/model.hpp"
#include "nci/ops.hpp"

namespace nci {

// InfoNCE over the 2Q step representations (two passes per query, adjacent
// rows). Dot-product similarity at temperature tau, self-similarity excluded
// and the positive pair in the denominator; averaged over the 2Q anchors.
// With literal_denominator the denominator instead keeps the anchor's
// self-similarity and drops the positive, reproducing the summation bounds as
// printed rather than the standard convention.
template <class S>
Tensor<S> consistency_loss(const std::vector<Tensor<S>>& z_first,
                           const std::vector<Tensor<S>>& z_second, double tau,
                           bool literal_denominator = false) {
  if (z_first.empty() || z_first.size() != z_second.size())
    throw DimensionError("consistency_loss: need matching non-empty pass lists");
  if (tau <= 0.0) throw ParameterError("consistency_loss: tau must be > 0");
  const Index q = static_cast<Index>(z_first.size());
  const Index rows = 2 * q;
  std::vector<Tensor<S>> parts;
  parts.reserve(static_cast<std::size_t>(rows));
  for (Index i = 0; i < q; ++i) {
    Tensor<S> a = z_first[static_cast<std::size_t>(i)];
    Tensor<S> b = z_second[static_cast<std::size_t>(i)];
    parts.push_back(a.rank() == 1 ? reshape(a, {Index(1), a.size()}) : a);
    parts.push_back(b.rank() == 1 ? reshape(b, {Index(1), b.size()}) : b);
  }
  Tensor<S> z = concat_rows(parts);
  Tensor<S> sim = scale(matmul(z, transpose(z)), static_cast<S>(1.0 / tau));

  Tensor<S> mask = Tensor<S>::zeros({rows, rows});
  auto mm = mask.mat_mut();
  for (Index j = 0; j < rows; ++j) {
    Index positive = j ^ 1;
    if (literal_denominator)
      mm(j, positive) = S(-1e9);  // keep self, drop the positive
    else
      mm(j, j) = S(-1e9);  // drop self, keep the positive
  }
  Tensor<S> masked = add(sim, mask);

  std::vector<Tensor<S>> per_anchor;
  per_anchor.reserve(static_cast<std::size_t>(rows));
  if (literal_denominator) {
    Tensor<S> lse = logsumexp_rowwise(masked);  // [rows]
    for (Index j = 0; j < rows; ++j) {
      Tensor<S> pos = select_item(sim, j * rows + (j ^ 1));
      per_anchor.push_back(sub(select_item(lse, j), pos));
    }
  } else {
    Tensor<S> logp = log_softmax_rowwise(masked);
    for (Index j = 0; j < rows; ++j)
      per_anchor.push_back(neg(select_item(logp, j * rows + (j ^ 1))));
  }
  return mean(stack_rows(per_anchor));
}

}  // namespace nci
