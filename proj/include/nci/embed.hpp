#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>

#include "nci/corpus.hpp"

namespace nci {

// Document embeddings, one row per document in corpus order, L2-normalized.
using EmbeddingMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Bag-of-tokens feature hashing with signed buckets: every title/body token
// adds +-1 to bucket hash(token) % dim, then the row is L2-normalized.
// Deterministic in (corpus order, dim, seed).
EmbeddingMatrix hash_embed(const Corpus& corpus, int dim, std::uint64_t seed);

// JSON Lines with fields "doc_id" and "vector"; rows are L2-normalized on
// load and reordered to corpus order. Every corpus document must be covered.
EmbeddingMatrix load_embeddings(const std::string& path, const Corpus& corpus);

}  // namespace nci
