#pragma once

// Teacher-forced optimization loop: Adam with per-group learning rates
// (encoder vs decoder+adaptive), shuffled mini-batches, two dropout passes
// per example feeding the consistency term. Worker threads process whole
// batches in parallel on private graphs; gradients merge in batch order, so
// results are bit-reproducible for a fixed configuration.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "nci/beam.hpp"
#include "nci/loss.hpp"
#include "nci/model.hpp"

namespace nci {

struct TrainConfig {
  double alpha = 0.15;  // consistency scale; 0 disables the second pass
  double tau = 1.0;
  double lr_encoder = 2e-4;
  double lr_decoder = 1e-4;
  int batch_size = 16;
  int epochs = 20;
  std::uint64_t seed = 1;
  double dropout = 0.1;
  int workers = 1;  // batches optimized together per step
  bool reg_literal_denominator = false;

  void validate() const {
    if (alpha < 0.0) throw ConfigError("train.alpha must be >= 0");
    if (tau <= 0.0) throw ConfigError("train.tau must be > 0");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
    if (workers < 1) throw ConfigError("train.workers must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ConfigError("train.dropout must be in [0, 1)");
    if (lr_encoder <= 0.0 || lr_decoder <= 0.0)
      throw ConfigError("learning rates must be > 0");
  }
};

struct TrainExample {
  std::vector<std::int32_t> query_ids;
  std::vector<int> id_tokens;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean combined objective per step
  double reg_loss = 0.0;    // mean raw consistency term (before alpha)
  std::optional<double> recall_at_1;
  std::optional<double> recall_at_10;
  double wall_seconds = 0.0;
};

// Optional per-epoch retrieval check over a held-out slice.
struct ValidationSet {
  std::vector<TrainExample> pairs;  // id_tokens = gold identifier
  const PrefixTrie* trie = nullptr;
  int beam_size = 10;
  double penalty_exp = 0.8;
};

template <class S>
class AdamOptimizer {
 public:
  AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void add_group(const std::vector<Tensor<S>>& params, double lr) {
    for (const Tensor<S>& p : params)
      slots_.push_back(Slot{p, ArrX<S>::Zero(p.size()), ArrX<S>::Zero(p.size()),
                            static_cast<S>(lr)});
  }

  // grad_of(node) returns the merged gradient or nullptr; grads are scaled by
  // grad_scale before the moment updates.
  void step(const std::function<const ArrX<S>*(const TensorNode<S>*)>& grad_of,
            S grad_scale) {
    ++t_;
    const S bc1 = static_cast<S>(1.0 - std::pow(static_cast<double>(beta1_), t_));
    const S bc2 = static_cast<S>(1.0 - std::pow(static_cast<double>(beta2_), t_));
    for (Slot& s : slots_) {
      const ArrX<S>* g = grad_of(s.param.raw());
      if (!g) continue;
      ArrX<S> grad = *g * grad_scale;
      s.m = static_cast<S>(beta1_) * s.m + static_cast<S>(1.0 - beta1_) * grad;
      s.v = static_cast<S>(beta2_) * s.v + static_cast<S>(1.0 - beta2_) * grad.square();
      s.param.values_mut() -=
          s.lr * (s.m / bc1) / ((s.v / bc2).sqrt() + static_cast<S>(eps_));
    }
  }

 private:
  struct Slot {
    Tensor<S> param;
    ArrX<S> m, v;
    S lr;
  };
  std::vector<Slot> slots_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

template <class S>
struct BatchLossParts {
  Tensor<S> total;
  double nll_value = 0.0;
  double reg_value = 0.0;  // raw consistency sum over steps
};

// Mean teacher-forced negative log-likelihood over a batch. Dropout applies
// only when rng is supplied.
template <class S>
Tensor<S> seq2seq_nll(const NciModel<S>& model,
                      std::span<const TrainExample> batch,
                      RngStream* rng = nullptr) {
  if (batch.empty()) throw ParameterError("seq2seq_nll: empty batch");
  Tensor<S> total = Tensor<S>::zeros({});
  for (const TrainExample& ex : batch) {
    EncodedQuery<S> enc = encode_query(model, ex.query_ids, rng);
    total = add(total, sequence_log_prob(model, enc.x, enc.e, ex.id_tokens, rng));
  }
  return scale(neg(total), static_cast<S>(1.0 / static_cast<double>(batch.size())));
}

template <class S>
std::pair<double, double> validate_recall(const NciModel<S>& model,
                                          const ValidationSet& val);

// Mean NLL over the batch (pass 1) plus alpha times the consistency term
// summed over decoding steps, contrasting within the batch at each step.
template <class S>
BatchLossParts<S> batch_total_loss(const NciModel<S>& model,
                                   std::span<const TrainExample> batch,
                                   const TrainConfig& cfg, RngStream batch_rng) {
  const std::size_t q = batch.size();
  std::vector<SequenceForward<S>> pass1(q), pass2;
  for (std::size_t i = 0; i < q; ++i) {
    RngStream rng = batch_rng.derive(2 * i);
    pass1[i] = sequence_forward<S>(model, batch[i].query_ids,
                                   batch[i].id_tokens, &rng, true);
  }
  Tensor<S> nll_sum = Tensor<S>::zeros({});
  for (std::size_t i = 0; i < q; ++i)
    nll_sum = add(nll_sum, pass1[i].log_prob);
  Tensor<S> nll = scale(neg(nll_sum), static_cast<S>(1.0 / static_cast<double>(q)));

  BatchLossParts<S> parts;
  parts.nll_value = static_cast<double>(nll.item());
  if (cfg.alpha > 0.0) {
    pass2.resize(q);
    for (std::size_t i = 0; i < q; ++i) {
      RngStream rng = batch_rng.derive(2 * i + 1);
      pass2[i] = sequence_forward<S>(model, batch[i].query_ids,
                                     batch[i].id_tokens, &rng, false);
    }
    std::size_t max_steps = 0;
    for (const auto& ex : batch) max_steps = std::max(max_steps, ex.id_tokens.size());
    Tensor<S> reg_sum = Tensor<S>::zeros({});
    for (std::size_t step = 0; step < max_steps; ++step) {
      std::vector<Tensor<S>> z1, z2;
      for (std::size_t i = 0; i < q; ++i) {
        if (step >= batch[i].id_tokens.size()) continue;
        z1.push_back(pass1[i].step_hidden[step]);
        z2.push_back(pass2[i].step_hidden[step]);
      }
      if (z1.empty()) continue;
      reg_sum = add(reg_sum, consistency_loss<S>(z1, z2, cfg.tau,
                                                 cfg.reg_literal_denominator));
    }
    parts.reg_value = static_cast<double>(reg_sum.item());
    parts.total = add(nll, scale(reg_sum, static_cast<S>(cfg.alpha)));
  } else {
    parts.total = nll;
  }
  return parts;
}

namespace detail {

template <class S>
struct WorkerResult {
  GradTable<S> grads;
  std::vector<TensorNode<S>*> order;
  double loss = 0.0;
  double nll = 0.0;
  double reg = 0.0;
};

}  // namespace detail

// Per-epoch records are returned and optionally streamed via on_epoch.
template <class S>
std::vector<EpochRecord> train(
    NciModel<S>& model, const std::vector<TrainExample>& pairs,
    const TrainConfig& cfg, const ValidationSet* validation = nullptr,
    const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  if (pairs.empty()) throw ParameterError("train: no training pairs");
  for (const TrainExample& ex : pairs)
    validate_identifier_tokens(model.cfg, ex.id_tokens);
  model.cfg.dropout = cfg.dropout;  // train-time dropout overrides

  AdamOptimizer<S> opt;
  opt.add_group(model.encoder_params(), cfg.lr_encoder);
  opt.add_group(model.decoder_params(), cfg.lr_decoder);

  std::vector<EpochRecord> records;
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    RngStream shuffle_rng = RngStream(cfg.seed).derive(0xE000ULL + static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    std::vector<std::vector<TrainExample>> batches;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<TrainExample> b;
      for (std::size_t i = at; i < std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size)); ++i)
        b.push_back(pairs[order[i]]);
      batches.push_back(std::move(b));
    }

    double loss_sum = 0.0, reg_sum = 0.0;
    long steps = 0;
    for (std::size_t at = 0; at < batches.size(); at += static_cast<std::size_t>(cfg.workers)) {
      std::size_t group = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers),
                                                batches.size() - at);
      std::vector<detail::WorkerResult<S>> results(group);
      auto run_one = [&](std::size_t w) {
        RngStream batch_rng = RngStream(cfg.seed)
                                  .derive(0xB000ULL + static_cast<std::uint64_t>(epoch))
                                  .derive(static_cast<std::uint64_t>(at + w));
        BatchLossParts<S> parts =
            batch_total_loss<S>(model, batches[at + w], cfg, batch_rng);
        results[w].loss = static_cast<double>(parts.total.item());
        results[w].nll = parts.nll_value;
        results[w].reg = parts.reg_value;
        results[w].order = parts.total.backward_into(results[w].grads);
      };
      if (group == 1) {
        run_one(0);
      } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < group; ++w) threads.emplace_back(run_one, w);
        for (auto& t : threads) t.join();
      }
      // merge in worker (= batch) order, then a single update
      S grad_scale = static_cast<S>(1.0 / static_cast<double>(group));
      ArrX<S> merged;
      opt.step(
          [&](const TensorNode<S>* node) -> const ArrX<S>* {
            bool any = false;
            for (std::size_t w = 0; w < group; ++w) {
              const ArrX<S>* g = results[w].grads.find(node);
              if (!g) continue;
              if (!any) {
                merged = *g;
                any = true;
              } else {
                merged += *g;
              }
            }
            return any ? &merged : nullptr;
          },
          grad_scale);
      for (std::size_t w = 0; w < group; ++w) {
        Tensor<S>::release_graph(results[w].order);
        loss_sum += results[w].loss;
        reg_sum += results[w].reg;
      }
      ++steps;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(1, batches.size()));
    rec.reg_loss = reg_sum / static_cast<double>(std::max<std::size_t>(1, batches.size()));
    if (validation && validation->trie && !validation->pairs.empty()) {
      auto [r1, r10] = validate_recall(model, *validation);
      rec.recall_at_1 = r1;
      rec.recall_at_10 = r10;
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    records.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return records;
}

// Recall@1/10 of the gold identifier over the validation slice.
template <class S>
std::pair<double, double> validate_recall(const NciModel<S>& model,
                                          const ValidationSet& val) {
  autograd::NoGradGuard ng;
  int hit1 = 0, hit10 = 0;
  for (const TrainExample& ex : val.pairs) {
    EncodedQuery<S> enc = encode_query(model, ex.query_ids, nullptr);
    StepScorer scorer = [&](std::span<const int> prefix) {
      int position = static_cast<int>(prefix.size()) + 1;
      Tensor<S> h = decoder_hidden_step(model, enc.x, prefix, nullptr);
      Tensor<S> w = adaptive_weights(model, enc.e, prefix, position, nullptr);
      Tensor<S> logp = log_softmax_rowwise(matmul(h, w));
      std::vector<double> out(static_cast<std::size_t>(logp.size()));
      for (Index i = 0; i < logp.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<double>(logp.values()[i]);
      return out;
    };
    auto ranked = constrained_beam_search(scorer, *val.trie, val.beam_size,
                                          val.penalty_exp);
    for (std::size_t r = 0; r < ranked.size() && r < 10; ++r) {
      if (ranked[r].id.tokens == ex.id_tokens) {
        if (r == 0) ++hit1;
        ++hit10;
        break;
      }
    }
  }
  double n = static_cast<double>(val.pairs.size());
  return {hit1 / n, hit10 / n};
}

}  // namespace nci
