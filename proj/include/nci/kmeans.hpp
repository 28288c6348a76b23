#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nci/embed.hpp"

namespace nci {

struct KMeansResult {
  std::vector<int> assignments;   // one per input point
  EmbeddingMatrix centroids;      // k_eff rows
  std::vector<double> sse_history;  // SSE after each assignment pass
  int iterations = 0;
};

// Lloyd iteration with k-means++ seeding. k is clamped to the point count;
// empty clusters are repaired by reseeding with the point farthest from its
// centroid; nearest-centroid ties break toward the lowest cluster index.
// Deterministic in (points, k, seed).
KMeansResult lloyd_kmeans(const EmbeddingMatrix& points, int k,
                          std::uint64_t seed, int max_iter = 100,
                          double tol = 1e-9);

// Same, over a row subset of `points`; assignments follow `rows` order.
KMeansResult lloyd_kmeans(const EmbeddingMatrix& points,
                          std::span<const int> rows, int k, std::uint64_t seed,
                          int max_iter = 100, double tol = 1e-9);

}  // namespace nci
