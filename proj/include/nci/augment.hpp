#pragma once

#include <unordered_set>
#include <vector>

#include "nci/corpus.hpp"
#include "nci/rng.hpp"

namespace nci {

// ~50 English function words suppressed by the pseudo-query sampler. Built-in
// so augmentation never depends on external resources.
const std::unordered_set<std::string>& stopwords();

// The first min(n_terms, |body|) body tokens as a query.
QueryDocPair doc_as_query_first(const Document& doc, int n_terms = 64);

// n_spans contiguous spans of span_len tokens at uniformly random start
// offsets; spans clip at the document end when the document is shorter.
std::vector<QueryDocPair> doc_as_query_spans(const Document& doc,
                                             int n_spans, int span_len,
                                             RngStream& rng);
inline std::vector<QueryDocPair> doc_as_query_spans(const Document& doc,
                                                    RngStream& rng) {
  return doc_as_query_spans(doc, 10, 64, rng);
}

// Query-like strings sampled from the document: token weights proportional to
// frequency within the first 512 body tokens, stopwords suppressed, random
// lengths, sampled with replacement so the query set is diverse.
std::vector<QueryDocPair> pseudo_queries(const Document& doc, int n_queries,
                                         int max_len, RngStream& rng);
inline std::vector<QueryDocPair> pseudo_queries(const Document& doc,
                                                RngStream& rng) {
  return pseudo_queries(doc, 15, 64, rng);
}

}  // namespace nci
