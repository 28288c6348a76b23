#include "nci/beam.hpp"

#include <algorithm>
#include <cmath>

#include "nci/errors.hpp"

namespace nci {

double length_norm_score(double sum_log_prob, int length, double penalty_exp) {
  if (length < 1)
    throw ParameterError("length_norm_score: length must be >= 1");
  return sum_log_prob / std::pow(static_cast<double>(length), penalty_exp);
}

namespace {

struct Beam {
  int node;
  std::vector<int> tokens;
  double sum_log_prob;
};

void rank_candidates(std::vector<ScoredCandidate>& pool) {
  std::stable_sort(pool.begin(), pool.end(),
                   [](const ScoredCandidate& a, const ScoredCandidate& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return serialize_id(a.id) < serialize_id(b.id);
                   });
}

void prune_beams(std::vector<Beam>& beams, int beam_size) {
  if (static_cast<int>(beams.size()) <= beam_size) return;
  std::stable_sort(beams.begin(), beams.end(), [](const Beam& a, const Beam& b) {
    if (a.sum_log_prob != b.sum_log_prob) return a.sum_log_prob > b.sum_log_prob;
    return a.tokens < b.tokens;
  });
  beams.resize(static_cast<std::size_t>(beam_size));
}

}  // namespace

std::vector<ScoredCandidate> constrained_beam_search(const StepScorer& scorer,
                                                     const PrefixTrie& trie,
                                                     int beam_size,
                                                     double penalty_exp,
                                                     SearchStats* stats) {
  if (beam_size < 1)
    throw ParameterError("constrained_beam_search: beam size must be >= 1");
  if (trie.leaf_count() == 0)
    throw ParameterError("constrained_beam_search: empty trie");

  std::vector<ScoredCandidate> pool;
  std::vector<Beam> beams = {{trie.root(), {}, 0.0}};
  SearchStats local;
  while (!beams.empty()) {
    ++local.levels;
    std::vector<Beam> next;
    for (Beam& beam : beams) {
      if (trie.is_terminal(beam.node)) {
        ScoredCandidate cand;
        cand.id.tokens = beam.tokens;
        cand.doc_id = trie.doc_at(beam.node);
        cand.sum_log_prob = beam.sum_log_prob;
        cand.score = length_norm_score(beam.sum_log_prob,
                                       static_cast<int>(beam.tokens.size()),
                                       penalty_exp);
        pool.push_back(std::move(cand));
        continue;
      }
      std::vector<double> logp = scorer(beam.tokens);
      for (int tok : trie.node(beam.node).child_tokens) {
        if (tok >= static_cast<int>(logp.size()))
          throw ConfigError("beam search: trie token " + std::to_string(tok) +
                            " outside the model alphabet of size " +
                            std::to_string(logp.size()));
        ++local.expansions;
        Beam child;
        child.node = trie.child(beam.node, tok);
        child.tokens = beam.tokens;
        child.tokens.push_back(tok);
        child.sum_log_prob = beam.sum_log_prob + logp[static_cast<std::size_t>(tok)];
        next.push_back(std::move(child));
      }
    }
    prune_beams(next, beam_size);
    beams = std::move(next);
  }
  rank_candidates(pool);
  if (static_cast<int>(pool.size()) > beam_size)
    pool.resize(static_cast<std::size_t>(beam_size));
  if (stats) *stats = local;
  return pool;
}

std::vector<ScoredCandidate> unconstrained_beam_search(
    const StepScorer& scorer, const std::vector<int>& alphabet_sizes,
    int min_len, int max_len, const PrefixTrie& trie, int beam_size,
    double penalty_exp, SearchStats* stats) {
  if (beam_size < 1)
    throw ParameterError("unconstrained_beam_search: beam size must be >= 1");
  if (min_len < 1 || max_len < min_len ||
      max_len > static_cast<int>(alphabet_sizes.size()))
    throw ParameterError("unconstrained_beam_search: bad length bounds");

  std::vector<ScoredCandidate> pool;
  std::vector<Beam> beams = {{0, {}, 0.0}};
  SearchStats local;
  for (int level = 1; level <= max_len && !beams.empty(); ++level) {
    ++local.levels;
    std::vector<Beam> next;
    int alphabet = alphabet_sizes[static_cast<std::size_t>(level - 1)];
    for (Beam& beam : beams) {
      std::vector<double> logp = scorer(beam.tokens);
      if (static_cast<int>(logp.size()) < alphabet)
        throw ConfigError("beam search: scorer returned " +
                          std::to_string(logp.size()) + " scores for alphabet " +
                          std::to_string(alphabet));
      for (int tok = 0; tok < alphabet; ++tok) {
        ++local.expansions;
        Beam child;
        child.node = 0;
        child.tokens = beam.tokens;
        child.tokens.push_back(tok);
        child.sum_log_prob = beam.sum_log_prob + logp[static_cast<std::size_t>(tok)];
        next.push_back(std::move(child));
      }
    }
    prune_beams(next, beam_size);
    for (const Beam& b : next) {
      if (level < min_len) continue;
      ScoredCandidate cand;
      cand.id.tokens = b.tokens;
      cand.sum_log_prob = b.sum_log_prob;
      cand.score = length_norm_score(b.sum_log_prob, level, penalty_exp);
      int terminal = trie.find(cand.id);
      cand.valid = terminal >= 0;
      if (cand.valid) cand.doc_id = trie.doc_at(terminal);
      pool.push_back(std::move(cand));
    }
    beams = std::move(next);
  }
  rank_candidates(pool);
  if (stats) *stats = local;
  return pool;
}

}  // namespace nci
