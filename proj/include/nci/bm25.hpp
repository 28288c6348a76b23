#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "nci/corpus.hpp"

namespace nci {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

// Okapi BM25 over an inverted index. Per query term:
//   idf = ln((N - df + 0.5) / (df + 0.5) + 1)
//   r   = tf * (k1 + 1) / (tf + k1 * (1 - b + b * len/avgdl))
// Document text is title followed by body. Query tokens are scored as given,
// so a repeated token contributes once per occurrence.
class Bm25Index {
 public:
  explicit Bm25Index(const Corpus& corpus);

  // Ranked (doc_id, score), descending score, lexicographic doc_id
  // tie-break. Only documents matching at least one query term appear.
  std::vector<std::pair<std::string, double>> rank(
      const std::vector<std::string>& query, Bm25Params params = {}) const;

  double avg_doc_len() const { return avgdl_; }

 private:
  struct Posting {
    int doc;
    int tf;
  };
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::vector<int> doc_len_;
  std::vector<std::string> doc_ids_;
  double avgdl_ = 0.0;
};

std::vector<std::pair<std::string, double>> bm25_rank(
    const Corpus& corpus, const std::vector<std::string>& query,
    double k1 = 1.2, double b = 0.75);

}  // namespace nci
