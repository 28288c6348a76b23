#pragma once

#include <cstdint>
#include <vector>

#include "nci/corpus.hpp"

namespace nci {

// Desk-scale synthetic retrieval substrate: a balanced topic tree whose
// leaves own disjoint vocabulary blocks, documents drawn from per-document
// sub-vocabularies of their leaf block, and held-out queries drawn from the
// same per-document process so they identify their source document.
struct SyntheticCorpusSpec {
  int n_docs = 1000;
  int n_topics = 25;
  int topic_tree_depth = 1;  // leaves = n_topics, balanced
  int vocab_size = 4000;
  int tokens_per_doc = 160;
  int queries_per_doc = 3;
  double noise_rate = 0.05;  // per token, drawn from the global distribution
  std::uint64_t seed = 42;
};

struct SyntheticCorpus {
  Corpus corpus;
  // Root-to-leaf path in the balanced topic tree, one per document.
  std::vector<std::vector<int>> topic_paths;
  // Leaf topic index per document (last path element composed to a flat id).
  std::vector<int> topic_of_doc;
  // Held-out evaluation queries, queries_per_doc per document.
  std::vector<QueryDocPair> eval_pairs;
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusSpec& spec);

}  // namespace nci
