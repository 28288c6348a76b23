#pragma once

// Implementation of model.hpp. Blocks are pre-norm residual:
//   x += dropout(attn(ln(x))); x += dropout(ffn(ln(x)))
// with a final LayerNorm after each stack.

#include <cmath>

namespace nci {

inline void ModelConfig::validate() const {
  if (d < 2 || heads < 1 || d % heads != 0)
    throw ConfigError("model.d=" + std::to_string(d) +
                      " must be positive and divisible by model.heads=" +
                      std::to_string(heads));
  if (m1 < 1 || m2 < 1)
    throw ConfigError("model.m1 and model.m2 must be >= 1");
  if (m3 < 0) throw ConfigError("model.m3 must be >= 0");
  if (k < 1 || c < 1 || l_max < 2)
    throw ConfigError("identifier geometry requires k >= 1, c >= 1, l_max >= 2");
  if (query_vocab_size < 2)
    throw ConfigError("model.query_vocab_size must be >= 2");
  if (max_query_len < 1) throw ConfigError("model.max_query_len must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError("model.dropout must be in [0, 1)");
}

inline void validate_identifier_tokens(const ModelConfig& cfg,
                                       const std::vector<int>& id_tokens) {
  if (id_tokens.size() < 2)
    throw ParameterError("identifier must have at least 2 tokens");
  if (static_cast<int>(id_tokens.size()) > cfg.l_max)
    throw ParameterError("identifier length " + std::to_string(id_tokens.size()) +
                         " exceeds l_max " + std::to_string(cfg.l_max));
  for (std::size_t i = 0; i < id_tokens.size(); ++i) {
    int pos = static_cast<int>(i) + 1;
    if (id_tokens[i] < 0 || id_tokens[i] >= cfg.alphabet(pos))
      throw ParameterError("identifier token " + std::to_string(id_tokens[i]) +
                           " at position " + std::to_string(pos) +
                           " outside alphabet " + std::to_string(cfg.alphabet(pos)));
  }
}

namespace detail {

template <class S>
Tensor<S> init_uniform(Shape shape, Index fan_in, RngStream& rng) {
  S bound = static_cast<S>(std::sqrt(3.0 / static_cast<double>(fan_in)));
  Tensor<S> t = Tensor<S>::uniform(std::move(shape), -bound, bound, rng);
  t.set_requires_grad(true);
  return t;
}

template <class S>
Tensor<S> init_zeros(Shape shape) {
  Tensor<S> t = Tensor<S>::zeros(std::move(shape));
  t.set_requires_grad(true);
  return t;
}

template <class S>
LinearP<S> init_linear(Index in, Index out, RngStream& rng) {
  return {init_uniform<S>({in, out}, in, rng), init_zeros<S>({out})};
}

template <class S>
NormP<S> init_norm(Index d) {
  Tensor<S> gain = Tensor<S>::filled({d}, S(1));
  gain.set_requires_grad(true);
  return {gain, init_zeros<S>({d})};
}

template <class S>
AttnP<S> init_attn(Index d, RngStream& rng) {
  return {init_uniform<S>({d, d}, d, rng), init_uniform<S>({d, d}, d, rng),
          init_uniform<S>({d, d}, d, rng), init_uniform<S>({d, d}, d, rng)};
}

template <class S>
BlockP<S> init_block(const ModelConfig& cfg, RngStream& rng) {
  BlockP<S> b;
  b.ln1 = init_norm<S>(cfg.d);
  b.attn = init_attn<S>(cfg.d, rng);
  b.ln2 = init_norm<S>(cfg.d);
  b.ff_expand = init_linear<S>(cfg.d, cfg.ff_dim(), rng);
  b.ff_project = init_linear<S>(cfg.ff_dim(), cfg.d, rng);
  return b;
}

template <class S>
DecoderLayerP<S> init_decoder_layer(const ModelConfig& cfg, RngStream& rng) {
  DecoderLayerP<S> l;
  l.ln1 = init_norm<S>(cfg.d);
  l.self_attn = init_attn<S>(cfg.d, rng);
  l.ln2 = init_norm<S>(cfg.d);
  l.cross_attn = init_attn<S>(cfg.d, rng);
  l.ln3 = init_norm<S>(cfg.d);
  l.ff_expand = init_linear<S>(cfg.d, cfg.ff_dim(), rng);
  l.ff_project = init_linear<S>(cfg.ff_dim(), cfg.d, rng);
  return l;
}

template <class S>
Tensor<S> maybe_dropout(const Tensor<S>& x, double p, RngStream* rng) {
  if (!rng || p == 0.0) return x;
  return dropout(x, p, *rng);
}

template <class S>
Tensor<S> apply_ffn(const Tensor<S>& x, const LinearP<S>& expand,
                    const LinearP<S>& project) {
  Tensor<S> h = relu(add_rowwise(matmul(x, expand.w), expand.b));
  return add_rowwise(matmul(h, project.w), project.b);
}

template <class S>
Tensor<S> apply_block(const BlockP<S>& blk, Tensor<S> x, int heads, bool causal,
                      double p, RngStream* rng) {
  Tensor<S> n1 = layer_norm(x, blk.ln1.gain, blk.ln1.bias, S(1e-5));
  Tensor<S> att = multi_head_attention(n1, n1, n1, blk.attn.wq, blk.attn.wk,
                                       blk.attn.wv, blk.attn.wo, heads, causal);
  x = add(x, maybe_dropout(att, p, rng));
  Tensor<S> n2 = layer_norm(x, blk.ln2.gain, blk.ln2.bias, S(1e-5));
  return add(x, maybe_dropout(apply_ffn(n2, blk.ff_expand, blk.ff_project), p, rng));
}

template <class S>
Tensor<S> apply_decoder_layer(const DecoderLayerP<S>& l, Tensor<S> x,
                              const Tensor<S>& memory, int heads, double p,
                              RngStream* rng) {
  Tensor<S> n1 = layer_norm(x, l.ln1.gain, l.ln1.bias, S(1e-5));
  Tensor<S> self_att =
      multi_head_attention(n1, n1, n1, l.self_attn.wq, l.self_attn.wk,
                           l.self_attn.wv, l.self_attn.wo, heads, true);
  x = add(x, maybe_dropout(self_att, p, rng));
  Tensor<S> n2 = layer_norm(x, l.ln2.gain, l.ln2.bias, S(1e-5));
  Tensor<S> cross_att =
      multi_head_attention(n2, memory, memory, l.cross_attn.wq, l.cross_attn.wk,
                           l.cross_attn.wv, l.cross_attn.wo, heads, false);
  x = add(x, maybe_dropout(cross_att, p, rng));
  Tensor<S> n3 = layer_norm(x, l.ln3.gain, l.ln3.bias, S(1e-5));
  return add(x, maybe_dropout(apply_ffn(n3, l.ff_expand, l.ff_project), p, rng));
}

}  // namespace detail

template <class S>
NciModel<S> NciModel<S>::init(const ModelConfig& cfg, RngStream& rng) {
  cfg.validate();
  NciModel<S> m;
  m.cfg = cfg;
  m.dec_vocab = PositionTokenVocab(cfg.l_max, cfg.k, cfg.c);
  m.enc_embed = detail::init_uniform<S>({cfg.query_vocab_size, cfg.d}, cfg.d, rng);
  for (int i = 0; i < cfg.m1; ++i)
    m.enc_layers.push_back(detail::init_block<S>(cfg, rng));
  m.enc_final = detail::init_norm<S>(cfg.d);
  m.dec_embed = detail::init_uniform<S>({m.dec_vocab.size(), cfg.d}, cfg.d, rng);
  for (int i = 0; i < cfg.m2; ++i)
    m.dec_layers.push_back(detail::init_decoder_layer<S>(cfg, rng));
  m.dec_final = detail::init_norm<S>(cfg.d);
  for (int i = 0; i < cfg.m3; ++i)
    m.ada_layers.push_back(detail::init_block<S>(cfg, rng));
  if (cfg.m3 > 0) {
    m.ada_final = detail::init_norm<S>(cfg.d);
    for (int p = 1; p <= cfg.l_max; ++p) {
      // weight zero, bias the flattened identity: adaptation starts as a no-op
      LinearP<S> proj{detail::init_zeros<S>({cfg.d, cfg.d * cfg.d}),
                      detail::init_zeros<S>({cfg.d * cfg.d})};
      for (int r = 0; r < cfg.d; ++r)
        proj.b.values_mut()[r * cfg.d + r] = S(1);
      m.pawa_proj.push_back(std::move(proj));
    }
  }
  return m;
}

template <class S>
EncodedQuery<S> encode_query(const NciModel<S>& model,
                             std::span<const std::int32_t> token_ids,
                             RngStream* rng) {
  const ModelConfig& cfg = model.cfg;
  std::size_t len = std::min<std::size_t>(token_ids.size(),
                                          static_cast<std::size_t>(cfg.max_query_len));
  if (len == 0) throw ParameterError("encode_query: empty query");
  std::vector<std::int32_t> ids(token_ids.begin(), token_ids.begin() + static_cast<long>(len));
  Tensor<S> x = embedding_lookup(model.enc_embed, std::move(ids));
  x = scale(x, static_cast<S>(std::sqrt(static_cast<double>(cfg.d))));
  x = add(x, sinusoidal_positions<S>(static_cast<Index>(len), cfg.d));
  x = detail::maybe_dropout(x, cfg.dropout, rng);
  for (const auto& blk : model.enc_layers)
    x = detail::apply_block(blk, x, cfg.heads, false, cfg.dropout, rng);
  x = layer_norm(x, model.enc_final.gain, model.enc_final.bias, S(1e-5));
  return {x, mean_rows(x)};
}

namespace detail {

template <class S>
Tensor<S> decoder_input_rows(const NciModel<S>& model,
                             std::span<const int> prefix) {
  std::vector<std::int32_t> rows;
  rows.push_back(PositionTokenVocab::kBos);
  for (std::size_t i = 0; i < prefix.size(); ++i)
    rows.push_back(static_cast<std::int32_t>(
        model.dec_vocab.row(static_cast<int>(i) + 1, prefix[i])));
  return embedding_lookup(model.dec_embed, std::move(rows));
}

}  // namespace detail

template <class S>
Tensor<S> decoder_hidden_states(const NciModel<S>& model, const Tensor<S>& x,
                                std::span<const int> prefix, RngStream* rng) {
  const ModelConfig& cfg = model.cfg;
  if (static_cast<int>(prefix.size()) >= cfg.l_max)
    throw ParameterError("decoder prefix of length " + std::to_string(prefix.size()) +
                         " leaves no position to predict (l_max " +
                         std::to_string(cfg.l_max) + ")");
  Tensor<S> h = detail::decoder_input_rows(model, prefix);
  h = scale(h, static_cast<S>(std::sqrt(static_cast<double>(cfg.d))));
  h = detail::maybe_dropout(h, cfg.dropout, rng);
  for (const auto& layer : model.dec_layers)
    h = detail::apply_decoder_layer(layer, h, x, cfg.heads, cfg.dropout, rng);
  return layer_norm(h, model.dec_final.gain, model.dec_final.bias, S(1e-5));
}

template <class S>
Tensor<S> decoder_hidden_step(const NciModel<S>& model, const Tensor<S>& x,
                              std::span<const int> prefix, RngStream* rng) {
  Tensor<S> all = decoder_hidden_states(model, x, prefix, rng);
  return select_row(all, all.rows() - 1);
}

template <class S>
Tensor<S> adaptive_states(const NciModel<S>& model, const Tensor<S>& e,
                          std::span<const int> prefix, RngStream* rng) {
  const ModelConfig& cfg = model.cfg;
  if (cfg.m3 == 0)
    throw ParameterError("adaptive_states: adaptive stack disabled (m3 = 0)");
  Tensor<S> input = e;
  if (!prefix.empty()) {
    Tensor<S> emb = detail::decoder_input_rows(model, prefix);
    // rows after BOS are the prefix token embeddings
    input = concat_rows<S>({e, slice_rows(emb, 1, static_cast<Index>(prefix.size()))});
  }
  Tensor<S> a = detail::maybe_dropout(input, cfg.dropout, rng);
  for (const auto& blk : model.ada_layers)
    a = detail::apply_block(blk, a, cfg.heads, true, cfg.dropout, rng);
  return layer_norm(a, model.ada_final.gain, model.ada_final.bias, S(1e-5));
}

template <class S>
Tensor<S> tied_weights(const NciModel<S>& model, int position) {
  const ModelConfig& cfg = model.cfg;
  if (position < 1 || position > cfg.l_max)
    throw ParameterError("position " + std::to_string(position) +
                         " outside [1, " + std::to_string(cfg.l_max) + "]");
  return transpose(slice_rows(model.dec_embed,
                              model.dec_vocab.block_start(position),
                              cfg.alphabet(position)));
}

namespace detail {

// W_ada at `position` from the adaptive output row a_i.
template <class S>
Tensor<S> adapt_from_state(const NciModel<S>& model, const Tensor<S>& a_i,
                           int position) {
  const ModelConfig& cfg = model.cfg;
  const LinearP<S>& proj = model.pawa_proj[static_cast<std::size_t>(position - 1)];
  Tensor<S> flat = add_rowwise(matmul(a_i, proj.w), proj.b);  // [1 x d*d]
  Tensor<S> m_i = reshape(flat, {cfg.d, cfg.d});
  return matmul(m_i, tied_weights(model, position));
}

}  // namespace detail

template <class S>
Tensor<S> adaptive_weights(const NciModel<S>& model, const Tensor<S>& e,
                           std::span<const int> prefix, int position,
                           RngStream* rng) {
  const ModelConfig& cfg = model.cfg;
  if (position < 1 || position > cfg.l_max)
    throw ParameterError("adaptive_weights: position " + std::to_string(position) +
                         " outside [1, " + std::to_string(cfg.l_max) + "]");
  if (cfg.m3 == 0) return tied_weights(model, position);
  if (static_cast<int>(prefix.size()) != position - 1)
    throw ParameterError("adaptive_weights: prefix length " +
                         std::to_string(prefix.size()) + " does not match position " +
                         std::to_string(position));
  Tensor<S> a = adaptive_states(model, e, prefix, rng);
  return detail::adapt_from_state(model, select_row(a, a.rows() - 1), position);
}

template <class S>
Tensor<S> token_distribution(const Tensor<S>& h_i, const Tensor<S>& w_ada) {
  Tensor<S> h = h_i.rank() == 1 ? reshape(h_i, {Index(1), h_i.size()}) : h_i;
  Tensor<S> logits = matmul(h, w_ada);
  return reshape(softmax_rowwise(logits), {w_ada.cols()});
}

template <class S>
SequenceForward<S> sequence_forward(const NciModel<S>& model,
                                    std::span<const std::int32_t> query_ids,
                                    const std::vector<int>& id_tokens,
                                    RngStream* rng, bool with_log_prob) {
  const ModelConfig& cfg = model.cfg;
  validate_identifier_tokens(cfg, id_tokens);
  EncodedQuery<S> enc = encode_query(model, query_ids, rng);
  const int m = static_cast<int>(id_tokens.size());
  std::span<const int> teacher(id_tokens.data(), static_cast<std::size_t>(m - 1));
  Tensor<S> h_all = decoder_hidden_states(model, enc.x, teacher, rng);

  SequenceForward<S> out;
  out.step_hidden.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i)
    out.step_hidden.push_back(select_row(h_all, i));
  if (!with_log_prob) return out;

  Tensor<S> a_all;
  if (cfg.m3 > 0) a_all = adaptive_states(model, enc.e, teacher, rng);
  Tensor<S> total = Tensor<S>::zeros({});
  for (int i = 1; i <= m; ++i) {
    Tensor<S> w = cfg.m3 > 0
                      ? detail::adapt_from_state(model, select_row(a_all, i - 1), i)
                      : tied_weights(model, i);
    Tensor<S> logits = matmul(out.step_hidden[static_cast<std::size_t>(i - 1)], w);
    Tensor<S> logp = log_softmax_rowwise(logits);
    total = add(total, select_item(logp, id_tokens[static_cast<std::size_t>(i - 1)]));
  }
  out.log_prob = total;
  return out;
}

template <class S>
Tensor<S> sequence_log_prob(const NciModel<S>& model, const Tensor<S>& x,
                            const Tensor<S>& e, const std::vector<int>& id_tokens,
                            RngStream* rng) {
  const ModelConfig& cfg = model.cfg;
  validate_identifier_tokens(cfg, id_tokens);
  const int m = static_cast<int>(id_tokens.size());
  std::span<const int> teacher(id_tokens.data(), static_cast<std::size_t>(m - 1));
  Tensor<S> h_all = decoder_hidden_states(model, x, teacher, rng);
  Tensor<S> a_all;
  if (cfg.m3 > 0) a_all = adaptive_states(model, e, teacher, rng);
  Tensor<S> total = Tensor<S>::zeros({});
  for (int i = 1; i <= m; ++i) {
    Tensor<S> w = cfg.m3 > 0
                      ? detail::adapt_from_state(model, select_row(a_all, i - 1), i)
                      : tied_weights(model, i);
    Tensor<S> logits = matmul(select_row(h_all, i - 1), w);
    Tensor<S> logp = log_softmax_rowwise(logits);
    total = add(total, select_item(logp, id_tokens[static_cast<std::size_t>(i - 1)]));
  }
  return total;
}

template <class S>
std::vector<Tensor<S>> NciModel<S>::encoder_params() const {
  std::vector<Tensor<S>> out;
  out.push_back(enc_embed);
  for (const auto& b : enc_layers) {
    for (const Tensor<S>& t : {b.ln1.gain, b.ln1.bias, b.attn.wq, b.attn.wk,
                               b.attn.wv, b.attn.wo, b.ln2.gain, b.ln2.bias,
                               b.ff_expand.w, b.ff_expand.b, b.ff_project.w,
                               b.ff_project.b})
      out.push_back(t);
  }
  out.push_back(enc_final.gain);
  out.push_back(enc_final.bias);
  return out;
}

template <class S>
std::vector<Tensor<S>> NciModel<S>::decoder_params() const {
  std::vector<Tensor<S>> out;
  out.push_back(dec_embed);
  for (const auto& l : dec_layers) {
    for (const Tensor<S>& t :
         {l.ln1.gain, l.ln1.bias, l.self_attn.wq, l.self_attn.wk, l.self_attn.wv,
          l.self_attn.wo, l.ln2.gain, l.ln2.bias, l.cross_attn.wq, l.cross_attn.wk,
          l.cross_attn.wv, l.cross_attn.wo, l.ln3.gain, l.ln3.bias, l.ff_expand.w,
          l.ff_expand.b, l.ff_project.w, l.ff_project.b})
      out.push_back(t);
  }
  out.push_back(dec_final.gain);
  out.push_back(dec_final.bias);
  for (const auto& b : ada_layers) {
    for (const Tensor<S>& t : {b.ln1.gain, b.ln1.bias, b.attn.wq, b.attn.wk,
                               b.attn.wv, b.attn.wo, b.ln2.gain, b.ln2.bias,
                               b.ff_expand.w, b.ff_expand.b, b.ff_project.w,
                               b.ff_project.b})
      out.push_back(t);
  }
  if (cfg.m3 > 0) {
    out.push_back(ada_final.gain);
    out.push_back(ada_final.bias);
    for (const auto& p : pawa_proj) {
      out.push_back(p.w);
      out.push_back(p.b);
    }
  }
  return out;
}

template <class S>
std::vector<std::pair<std::string, Tensor<S>>> NciModel<S>::named_params() const {
  std::vector<std::pair<std::string, Tensor<S>>> out;
  auto block_names = [&](const std::string& prefix, const BlockP<S>& b) {
    out.emplace_back(prefix + ".ln1.gain", b.ln1.gain);
    out.emplace_back(prefix + ".ln1.bias", b.ln1.bias);
    out.emplace_back(prefix + ".attn.wq", b.attn.wq);
    out.emplace_back(prefix + ".attn.wk", b.attn.wk);
    out.emplace_back(prefix + ".attn.wv", b.attn.wv);
    out.emplace_back(prefix + ".attn.wo", b.attn.wo);
    out.emplace_back(prefix + ".ln2.gain", b.ln2.gain);
    out.emplace_back(prefix + ".ln2.bias", b.ln2.bias);
    out.emplace_back(prefix + ".ff.expand.w", b.ff_expand.w);
    out.emplace_back(prefix + ".ff.expand.b", b.ff_expand.b);
    out.emplace_back(prefix + ".ff.project.w", b.ff_project.w);
    out.emplace_back(prefix + ".ff.project.b", b.ff_project.b);
  };
  out.emplace_back("enc.embed", enc_embed);
  for (std::size_t i = 0; i < enc_layers.size(); ++i)
    block_names("enc." + std::to_string(i), enc_layers[i]);
  out.emplace_back("enc.final.gain", enc_final.gain);
  out.emplace_back("enc.final.bias", enc_final.bias);
  out.emplace_back("dec.embed", dec_embed);
  for (std::size_t i = 0; i < dec_layers.size(); ++i) {
    const auto& l = dec_layers[i];
    std::string p = "dec." + std::to_string(i);
    out.emplace_back(p + ".ln1.gain", l.ln1.gain);
    out.emplace_back(p + ".ln1.bias", l.ln1.bias);
    out.emplace_back(p + ".self.wq", l.self_attn.wq);
    out.emplace_back(p + ".self.wk", l.self_attn.wk);
    out.emplace_back(p + ".self.wv", l.self_attn.wv);
    out.emplace_back(p + ".self.wo", l.self_attn.wo);
    out.emplace_back(p + ".ln2.gain", l.ln2.gain);
    out.emplace_back(p + ".ln2.bias", l.ln2.bias);
    out.emplace_back(p + ".cross.wq", l.cross_attn.wq);
    out.emplace_back(p + ".cross.wk", l.cross_attn.wk);
    out.emplace_back(p + ".cross.wv", l.cross_attn.wv);
    out.emplace_back(p + ".cross.wo", l.cross_attn.wo);
    out.emplace_back(p + ".ln3.gain", l.ln3.gain);
    out.emplace_back(p + ".ln3.bias", l.ln3.bias);
    out.emplace_back(p + ".ff.expand.w", l.ff_expand.w);
    out.emplace_back(p + ".ff.expand.b", l.ff_expand.b);
    out.emplace_back(p + ".ff.project.w", l.ff_project.w);
    out.emplace_back(p + ".ff.project.b", l.ff_project.b);
  }
  out.emplace_back("dec.final.gain", dec_final.gain);
  out.emplace_back("dec.final.bias", dec_final.bias);
  for (std::size_t i = 0; i < ada_layers.size(); ++i)
    block_names("ada." + std::to_string(i), ada_layers[i]);
  if (cfg.m3 > 0) {
    out.emplace_back("ada.final.gain", ada_final.gain);
    out.emplace_back("ada.final.bias", ada_final.bias);
    for (std::size_t i = 0; i < pawa_proj.size(); ++i) {
      out.emplace_back("pawa." + std::to_string(i + 1) + ".w", pawa_proj[i].w);
      out.emplace_back("pawa." + std::to_string(i + 1) + ".b", pawa_proj[i].b);
    }
  }
  return out;
}

}  // namespace nci
