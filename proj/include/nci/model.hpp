#pragma once

// Sequence-to-sequence identifier generator: transformer encoder over query
// tokens, causal decoder over position-token rows with cross-attention to the
// encoder states, and a weight-adaptation stack that derives each step's
// classification matrix from the query embedding and the decoded prefix.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nci/ops.hpp"
#include "nci/rng.hpp"
#include "nci/tensor.hpp"

namespace nci {

struct ModelConfig {
  int d = 64;
  int m1 = 2;      // encoder layers
  int m2 = 2;      // decoder layers
  int m3 = 1;      // adaptive stack depth; 0 falls back to the tied weights
  int heads = 4;
  int k = 30;      // internal token alphabet
  int c = 30;      // leaf token alphabet
  int l_max = 3;   // maximum identifier length
  int query_vocab_size = 2;  // incl. UNK
  int max_query_len = 32;
  double dropout = 0.1;

  int ff_dim() const { return 2 * d; }
  // Token alphabet at 1-based identifier position p.
  int alphabet(int position) const { return position == l_max ? c : k; }
  void validate() const;
};

// Decoder vocabulary keyed by (position, token value): the same value at two
// positions is two distinct rows, plus BOS and PAD specials.
struct PositionTokenVocab {
  int l_max = 0;
  int vmax = 0;  // max(k, c): row block width per position

  static constexpr int kBos = 0;
  static constexpr int kPad = 1;

  PositionTokenVocab() = default;
  PositionTokenVocab(int l_max_, int k, int c)
      : l_max(l_max_), vmax(k > c ? k : c) {}

  int size() const { return l_max * vmax + 2; }
  int row(int position, int token) const {
    if (position < 1 || position > l_max || token < 0 || token >= vmax)
      throw DimensionError("position-token (" + std::to_string(position) + ", " +
                           std::to_string(token) + ") outside vocabulary");
    return 2 + (position - 1) * vmax + token;
  }
  // First row of position p's block (the tied classifier slice starts here).
  int block_start(int position) const { return row(position, 0); }
};

template <class S>
struct LinearP {
  Tensor<S> w;  // [in x out]
  Tensor<S> b;  // [out]
};

template <class S>
struct NormP {
  Tensor<S> gain, bias;  // [d]
};

template <class S>
struct AttnP {
  Tensor<S> wq, wk, wv, wo;  // [d x d]
};

// Self-attention block (encoder layer; causal for the adaptive stack).
template <class S>
struct BlockP {
  NormP<S> ln1;
  AttnP<S> attn;
  NormP<S> ln2;
  LinearP<S> ff_expand, ff_project;
};

// Full decoder layer: causal self-attention, cross-attention, feed-forward.
template <class S>
struct DecoderLayerP {
  NormP<S> ln1;
  AttnP<S> self_attn;
  NormP<S> ln2;
  AttnP<S> cross_attn;
  NormP<S> ln3;
  LinearP<S> ff_expand, ff_project;
};

template <class S>
struct NciModel {
  ModelConfig cfg;
  PositionTokenVocab dec_vocab;

  Tensor<S> enc_embed;  // [query_vocab x d]
  std::vector<BlockP<S>> enc_layers;
  NormP<S> enc_final;

  Tensor<S> dec_embed;  // [dec_vocab.size() x d]; rows double as classifiers
  std::vector<DecoderLayerP<S>> dec_layers;
  NormP<S> dec_final;

  std::vector<BlockP<S>> ada_layers;  // causal, m3 of them
  NormP<S> ada_final;
  std::vector<LinearP<S>> pawa_proj;  // per position: d -> d*d, bias at identity

  static NciModel init(const ModelConfig& cfg, RngStream& rng);

  std::vector<Tensor<S>> encoder_params() const;
  std::vector<Tensor<S>> decoder_params() const;  // decoder + adaptive + projections
  std::vector<std::pair<std::string, Tensor<S>>> named_params() const;
};

template <class S>
struct EncodedQuery {
  Tensor<S> x;  // [len x d] token states
  Tensor<S> e;  // [1 x d] mean-pooled query embedding
};

// Training-time forward passes take an RngStream for dropout masks; pass
// nullptr for inference (dropout off, typically under NoGradGuard).
template <class S>
EncodedQuery<S> encode_query(const NciModel<S>& model,
                             std::span<const std::int32_t> token_ids,
                             RngStream* rng = nullptr);

// Hidden states h_1..h_{|prefix|+1} given teacher-forced prefix tokens; row i
// is the state that predicts identifier position i+1.
template <class S>
Tensor<S> decoder_hidden_states(const NciModel<S>& model, const Tensor<S>& x,
                                std::span<const int> prefix,
                                RngStream* rng = nullptr);

// Spec-level single-step view: h_i for position i = |prefix| + 1.
template <class S>
Tensor<S> decoder_hidden_step(const NciModel<S>& model, const Tensor<S>& x,
                              std::span<const int> prefix,
                              RngStream* rng = nullptr);

// Adaptive outputs a_1..a_{|prefix|+1} (query embedding first, then prefix
// token rows, causal stack). Only valid when cfg.m3 > 0.
template <class S>
Tensor<S> adaptive_states(const NciModel<S>& model, const Tensor<S>& e,
                          std::span<const int> prefix,
                          RngStream* rng = nullptr);

// Per-step classification weights W_ada[i] = reshape(P_i(a_i)) * W_i, where
// W_i is the transposed dec_embed block for position i. With m3 == 0 the tied
// W_i is returned unchanged.
template <class S>
Tensor<S> adaptive_weights(const NciModel<S>& model, const Tensor<S>& e,
                           std::span<const int> prefix, int position,
                           RngStream* rng = nullptr);

// Tied classifier for a position: [d x alphabet(position)].
template <class S>
Tensor<S> tied_weights(const NciModel<S>& model, int position);

// Softmax over h_i W_ada; returns a rank-1 probability vector.
template <class S>
Tensor<S> token_distribution(const Tensor<S>& h_i, const Tensor<S>& w_ada);

// Sum over identifier positions of log p(r_i | x, r_<i), teacher forced.
template <class S>
Tensor<S> sequence_log_prob(const NciModel<S>& model, const Tensor<S>& x,
                            const Tensor<S>& e, const std::vector<int>& id_tokens,
                            RngStream* rng = nullptr);

// Per-query forward pass artifacts used by training: the per-step hidden
// states (pre-softmax representations) and the summed log-likelihood.
template <class S>
struct SequenceForward {
  std::vector<Tensor<S>> step_hidden;  // h_i, each [1 x d]
  Tensor<S> log_prob;                  // scalar
};

template <class S>
SequenceForward<S> sequence_forward(const NciModel<S>& model,
                                    std::span<const std::int32_t> query_ids,
                                    const std::vector<int>& id_tokens,
                                    RngStream* rng, bool with_log_prob);

void validate_identifier_tokens(const ModelConfig& cfg,
                                const std::vector<int>& id_tokens);

}  // namespace nci

#include "nci/model_impl.hpp"
