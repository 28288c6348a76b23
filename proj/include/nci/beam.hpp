#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nci/trie.hpp"

namespace nci {

// sum_log_prob / length^penalty_exp. Exponent 1 is plain per-token
// normalization; 0 disables the penalty.
double length_norm_score(double sum_log_prob, int length, double penalty_exp);

struct ScoredCandidate {
  SemanticIdentifier id;
  std::string doc_id;        // empty when the identifier is not in the trie
  double sum_log_prob = 0.0;
  double score = 0.0;        // length-normalized
  bool valid = true;
};

struct SearchStats {
  long expansions = 0;  // child scorings performed
  int levels = 0;
};

// Log-probabilities over the full token alphabet of the next position, given
// the decoded prefix.
using StepScorer = std::function<std::vector<double>(std::span<const int>)>;

// Levelwise beam search expanding only trie children. Completed identifiers
// move to an unbounded result pool scored by length_norm_score; live beams
// are pruned to the top beam_size by accumulated log probability. The final
// ranking is the pool's top beam_size by normalized score, ties broken by
// serialized-identifier order.
std::vector<ScoredCandidate> constrained_beam_search(const StepScorer& scorer,
                                                     const PrefixTrie& trie,
                                                     int beam_size,
                                                     double penalty_exp,
                                                     SearchStats* stats = nullptr);

// Beam search over the full per-position alphabet, no trie constraint during
// expansion. Every beam whose length lands in [min_len, max_len] becomes a
// candidate; afterwards each candidate is checked against the trie and
// flagged. The returned list is ranked by normalized score and includes the
// invalid candidates (callers drop them from retrieval output).
std::vector<ScoredCandidate> unconstrained_beam_search(
    const StepScorer& scorer, const std::vector<int>& alphabet_sizes,
    int min_len, int max_len, const PrefixTrie& trie, int beam_size,
    double penalty_exp, SearchStats* stats = nullptr);

}  // namespace nci
