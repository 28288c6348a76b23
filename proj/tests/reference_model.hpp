#pragma once

// Plain-Eigen re-implementation of the model forward passes (dropout off),
// used as the independent oracle for the library's graph-based evaluation.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

#include "nci/model.hpp"
#include "reference_ops.hpp"

namespace refmodel {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Model = nci::NciModel<double>;

inline MatrixXd tmat(const nci::Tensor<double>& t) {
  MatrixXd m(t.rows(), t.cols());
  for (Eigen::Index r = 0; r < t.rows(); ++r)
    for (Eigen::Index c = 0; c < t.cols(); ++c) m(r, c) = t(r, c);
  return m;
}

inline VectorXd tvec(const nci::Tensor<double>& t) {
  VectorXd v(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) v(i) = t.values()[i];
  return v;
}

inline MatrixXd ffn(const MatrixXd& x, const nci::LinearP<double>& expand,
                    const nci::LinearP<double>& project) {
  MatrixXd h = (x * tmat(expand.w)).rowwise() + tvec(expand.b).transpose();
  h = h.cwiseMax(0.0);
  return (h * tmat(project.w)).rowwise() + tvec(project.b).transpose();
}

inline MatrixXd block(const nci::BlockP<double>& b, MatrixXd x, int heads,
                      bool causal) {
  MatrixXd n1 = refops::layer_norm_rows(x, tvec(b.ln1.gain), tvec(b.ln1.bias), 1e-5);
  x += refops::mha(n1, n1, n1, tmat(b.attn.wq), tmat(b.attn.wk), tmat(b.attn.wv),
                   tmat(b.attn.wo), heads, causal);
  MatrixXd n2 = refops::layer_norm_rows(x, tvec(b.ln2.gain), tvec(b.ln2.bias), 1e-5);
  return x + ffn(n2, b.ff_expand, b.ff_project);
}

inline MatrixXd decoder_layer(const nci::DecoderLayerP<double>& l, MatrixXd x,
                              const MatrixXd& memory, int heads) {
  MatrixXd n1 = refops::layer_norm_rows(x, tvec(l.ln1.gain), tvec(l.ln1.bias), 1e-5);
  x += refops::mha(n1, n1, n1, tmat(l.self_attn.wq), tmat(l.self_attn.wk),
                   tmat(l.self_attn.wv), tmat(l.self_attn.wo), heads, true);
  MatrixXd n2 = refops::layer_norm_rows(x, tvec(l.ln2.gain), tvec(l.ln2.bias), 1e-5);
  x += refops::mha(n2, memory, memory, tmat(l.cross_attn.wq), tmat(l.cross_attn.wk),
                   tmat(l.cross_attn.wv), tmat(l.cross_attn.wo), heads, false);
  MatrixXd n3 = refops::layer_norm_rows(x, tvec(l.ln3.gain), tvec(l.ln3.bias), 1e-5);
  return x + ffn(n3, l.ff_expand, l.ff_project);
}

inline MatrixXd encode(const Model& m, std::span<const std::int32_t> ids) {
  const auto& cfg = m.cfg;
  std::size_t len = std::min<std::size_t>(ids.size(), std::size_t(cfg.max_query_len));
  MatrixXd emb = tmat(m.enc_embed);
  MatrixXd x(len, cfg.d);
  for (std::size_t i = 0; i < len; ++i) x.row(Eigen::Index(i)) = emb.row(ids[i]);
  x *= std::sqrt(double(cfg.d));
  for (std::size_t pos = 0; pos < len; ++pos)
    for (int i = 0; i < cfg.d; ++i) {
      double angle = double(pos) / std::pow(10000.0, 2.0 * (i / 2) / double(cfg.d));
      x(Eigen::Index(pos), i) += (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  for (const auto& b : m.enc_layers) x = block(b, x, cfg.heads, false);
  return refops::layer_norm_rows(x, tvec(m.enc_final.gain), tvec(m.enc_final.bias), 1e-5);
}

inline MatrixXd decoder_states(const Model& m, const MatrixXd& x,
                               std::span<const int> prefix) {
  const auto& cfg = m.cfg;
  MatrixXd emb = tmat(m.dec_embed);
  MatrixXd h(prefix.size() + 1, cfg.d);
  h.row(0) = emb.row(nci::PositionTokenVocab::kBos);
  for (std::size_t i = 0; i < prefix.size(); ++i)
    h.row(Eigen::Index(i) + 1) = emb.row(m.dec_vocab.row(int(i) + 1, prefix[i]));
  h *= std::sqrt(double(cfg.d));
  for (const auto& l : m.dec_layers) h = decoder_layer(l, h, x, cfg.heads);
  return refops::layer_norm_rows(h, tvec(m.dec_final.gain), tvec(m.dec_final.bias), 1e-5);
}

inline MatrixXd adaptive_states(const Model& m, const VectorXd& e,
                                std::span<const int> prefix) {
  const auto& cfg = m.cfg;
  MatrixXd emb = tmat(m.dec_embed);
  MatrixXd a(prefix.size() + 1, cfg.d);
  a.row(0) = e.transpose();
  for (std::size_t i = 0; i < prefix.size(); ++i)
    a.row(Eigen::Index(i) + 1) = emb.row(m.dec_vocab.row(int(i) + 1, prefix[i]));
  for (const auto& b : m.ada_layers) a = block(b, a, cfg.heads, true);
  return refops::layer_norm_rows(a, tvec(m.ada_final.gain), tvec(m.ada_final.bias), 1e-5);
}

inline MatrixXd tied_w(const Model& m, int position) {
  MatrixXd emb = tmat(m.dec_embed);
  int v = m.cfg.alphabet(position);
  MatrixXd w(m.cfg.d, v);
  for (int t = 0; t < v; ++t)
    w.col(t) = emb.row(m.dec_vocab.row(position, t)).transpose();
  return w;
}

inline MatrixXd adaptive_weights(const Model& m, const VectorXd& e,
                                 std::span<const int> prefix, int position) {
  if (m.cfg.m3 == 0) return tied_w(m, position);
  MatrixXd a = adaptive_states(m, e, prefix);
  VectorXd a_i = a.row(a.rows() - 1).transpose();
  const auto& proj = m.pawa_proj[std::size_t(position - 1)];
  VectorXd flat = tmat(proj.w).transpose() * a_i + tvec(proj.b);
  MatrixXd mi(m.cfg.d, m.cfg.d);
  for (int r = 0; r < m.cfg.d; ++r)
    for (int c = 0; c < m.cfg.d; ++c) mi(r, c) = flat(r * m.cfg.d + c);
  return mi * tied_w(m, position);
}

inline double sequence_log_prob(const Model& m, std::span<const std::int32_t> ids,
                                const std::vector<int>& id_tokens) {
  MatrixXd x = encode(m, ids);
  VectorXd e = x.colwise().mean().transpose();
  int steps = int(id_tokens.size());
  std::span<const int> teacher(id_tokens.data(), std::size_t(steps - 1));
  MatrixXd h = decoder_states(m, x, teacher);
  double total = 0.0;
  for (int i = 1; i <= steps; ++i) {
    std::span<const int> prefix(id_tokens.data(), std::size_t(i - 1));
    MatrixXd w = adaptive_weights(m, e, prefix, i);
    Eigen::RowVectorXd logits = h.row(i - 1) * w;
    double mx = logits.maxCoeff();
    double lse = std::log((logits.array() - mx).exp().sum()) + mx;
    total += logits(id_tokens[std::size_t(i - 1)]) - lse;
  }
  return total;
}

}  // namespace refmodel
