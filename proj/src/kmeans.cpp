#include "nci/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nci/errors.hpp"
#include "nci/rng.hpp"

namespace nci {

namespace {

// Squared distances from every subset point to every centroid, via
// ||p||^2 - 2 p.c + ||c||^2 with a single product. Clamped at zero against
// cancellation.
Eigen::MatrixXd pairwise_sq(const EmbeddingMatrix& pts,
                            std::span<const int> rows,
                            const EmbeddingMatrix& centroids) {
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index k = centroids.rows();
  EmbeddingMatrix sub(n, pts.cols());
  for (Eigen::Index i = 0; i < n; ++i) sub.row(i) = pts.row(rows[static_cast<std::size_t>(i)]);
  Eigen::VectorXd pn = sub.rowwise().squaredNorm();
  Eigen::VectorXd cn = centroids.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = (-2.0 * sub * centroids.transpose());
  d2.colwise() += pn;
  d2.rowwise() += cn.transpose();
  return d2.cwiseMax(0.0);
}

}  // namespace

KMeansResult lloyd_kmeans(const EmbeddingMatrix& points,
                          std::span<const int> rows, int k, std::uint64_t seed,
                          int max_iter, double tol) {
  const int n = static_cast<int>(rows.size());
  if (n == 0) throw ParameterError("lloyd_kmeans: no points");
  if (k < 1) throw ParameterError("lloyd_kmeans: k must be >= 1");
  const int keff = std::min(k, n);
  const Eigen::Index dim = points.cols();
  RngStream rng(seed);

  // k-means++ seeding
  EmbeddingMatrix centroids(keff, dim);
  std::vector<double> best_d2(static_cast<std::size_t>(n),
                              std::numeric_limits<double>::infinity());
  {
    int first = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
    centroids.row(0) = points.row(rows[static_cast<std::size_t>(first)]);
    for (int c = 1; c < keff; ++c) {
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        double d = (points.row(rows[static_cast<std::size_t>(i)]) - centroids.row(c - 1))
                       .squaredNorm();
        best_d2[static_cast<std::size_t>(i)] = std::min(best_d2[static_cast<std::size_t>(i)], d);
        total += best_d2[static_cast<std::size_t>(i)];
      }
      int pick = -1;
      if (total > 0.0) {
        double u = rng.next_double() * total;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
          acc += best_d2[static_cast<std::size_t>(i)];
          if (u < acc) {
            pick = i;
            break;
          }
        }
        if (pick < 0) pick = n - 1;
      } else {
        // all remaining points coincide with a centroid
        pick = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
      }
      centroids.row(c) = points.row(rows[static_cast<std::size_t>(pick)]);
    }
  }

  KMeansResult res;
  res.assignments.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> prev(static_cast<std::size_t>(n), -2);
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(keff), 0);

  for (int iter = 0; iter < max_iter; ++iter) {
    Eigen::MatrixXd d2 = pairwise_sq(points, rows, centroids);
    double sse = 0.0;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bd = d2(i, 0);
      for (int c = 1; c < keff; ++c)
        if (d2(i, c) < bd) {  // strict: ties keep the lowest index
          bd = d2(i, c);
          best = c;
        }
      res.assignments[static_cast<std::size_t>(i)] = best;
      sse += bd;
    }
    res.sse_history.push_back(sse);
    res.iterations = iter + 1;
    if (res.assignments == prev) break;
    prev = res.assignments;

    EmbeddingMatrix next = EmbeddingMatrix::Zero(keff, dim);
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      next.row(res.assignments[static_cast<std::size_t>(i)]) +=
          points.row(rows[static_cast<std::size_t>(i)]);
      ++counts[static_cast<std::size_t>(res.assignments[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < keff; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0)
        next.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);

    // repair empty clusters: reseed each with the point currently farthest
    // from its own centroid, one point per empty cluster
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    for (int c = 0; c < keff; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      int far = -1;
      double fd = -1.0;
      for (int i = 0; i < n; ++i) {
        if (taken[static_cast<std::size_t>(i)]) continue;
        double d = d2(i, res.assignments[static_cast<std::size_t>(i)]);
        if (d > fd) {
          fd = d;
          far = i;
        }
      }
      next.row(c) = points.row(rows[static_cast<std::size_t>(far)]);
      taken[static_cast<std::size_t>(far)] = true;
    }

    double shift = (next - centroids).rowwise().norm().maxCoeff();
    centroids = next;
    if (shift < tol) {
      // final assignment against the settled centroids
      Eigen::MatrixXd fd2 = pairwise_sq(points, rows, centroids);
      double fsse = 0.0;
      for (int i = 0; i < n; ++i) {
        int best = 0;
        double bd = fd2(i, 0);
        for (int c = 1; c < keff; ++c)
          if (fd2(i, c) < bd) {
            bd = fd2(i, c);
            best = c;
          }
        res.assignments[static_cast<std::size_t>(i)] = best;
        fsse += bd;
      }
      res.sse_history.push_back(fsse);
      break;
    }
  }
  res.centroids = std::move(centroids);
  return res;
}

KMeansResult lloyd_kmeans(const EmbeddingMatrix& points, int k,
                          std::uint64_t seed, int max_iter, double tol) {
  std::vector<int> rows(static_cast<std::size_t>(points.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  return lloyd_kmeans(points, rows, k, seed, max_iter, tol);
}

}  // namespace nci
