#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "nci/errors.hpp"

namespace nci {

// Relevance judgments: query text -> relevant doc_ids (>= 1 per query;
// multiple answers per query supported).
struct QRels {
  std::map<std::string, std::set<std::string>> by_query;

  std::size_t query_count() const { return by_query.size(); }
};

// Tab-separated query-text / doc_id, one judgment per line.
QRels load_qrels(const std::string& path);
void save_qrels(const QRels& qrels, const std::string& path);

// One query's retrieval output, already ranked best-first.
struct RankedList {
  std::string query;
  std::vector<std::string> ranked_docs;
};

struct MetricOutcome {
  double value = 0.0;
  int evaluated = 0;          // queries contributing to the average
  int skipped_unknown = 0;    // result queries absent from the qrels
  int skipped_no_relevant = 0;  // qrels entries with an empty relevant set
};

// Fraction of queries with at least one relevant doc in the top n.
MetricOutcome recall_at_n(const std::vector<RankedList>& results,
                          const QRels& qrels, int n);

// Mean reciprocal rank of the first relevant doc within the top k (0 when
// none appears).
MetricOutcome mrr_at_k(const std::vector<RankedList>& results,
                       const QRels& qrels, int k);

// Precision at cutoff R, R = the query's relevant-doc count, averaged.
MetricOutcome r_precision(const std::vector<RankedList>& results,
                          const QRels& qrels);

struct EvalReport {
  std::vector<std::pair<int, double>> recall_at;  // (n, value)
  int mrr_cutoff = 100;
  double mrr = 0.0;
  double r_precision = 0.0;
  int evaluated = 0;
  int skipped_unknown = 0;
  int skipped_no_relevant = 0;
  bool empty_input = false;

  std::string to_json() const;
};

EvalReport evaluate(const std::vector<RankedList>& results, const QRels& qrels,
                    const std::vector<int>& recall_ns, int mrr_cutoff);

}  // namespace nci
