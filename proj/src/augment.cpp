#include "nci/augment.hpp"

#include <algorithm>
#include <unordered_map>

namespace nci {

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words = {
      "a",    "an",   "and",  "are",  "as",   "at",   "be",   "been", "but",
      "by",   "can",  "did",  "do",   "does", "for",  "from", "had",  "has",
      "have", "he",   "her",  "his",  "i",    "if",   "in",   "into", "is",
      "it",   "its",  "not",  "of",   "on",   "or",   "she",  "so",   "that",
      "the",  "their", "them", "then", "they", "this", "to",   "was",  "we",
      "were", "what", "when", "which", "who",  "will", "with", "you"};
  return words;
}

QueryDocPair doc_as_query_first(const Document& doc, int n_terms) {
  if (doc.body.empty())
    throw ParameterError("doc_as_query_first: document \"" + doc.doc_id +
                         "\" has empty body");
  if (n_terms < 1)
    throw ParameterError("doc_as_query_first: n_terms must be >= 1");
  QueryDocPair p;
  p.doc_id = doc.doc_id;
  p.source = PairSource::doc_first_terms;
  std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(n_terms),
                                        doc.body.size());
  p.query.assign(doc.body.begin(), doc.body.begin() + static_cast<long>(n));
  return p;
}

std::vector<QueryDocPair> doc_as_query_spans(const Document& doc, int n_spans,
                                             int span_len, RngStream& rng) {
  if (doc.body.empty())
    throw ParameterError("doc_as_query_spans: document \"" + doc.doc_id +
                         "\" has empty body");
  std::vector<QueryDocPair> out;
  out.reserve(static_cast<std::size_t>(n_spans));
  const std::size_t len = doc.body.size();
  const std::size_t max_start =
      len > static_cast<std::size_t>(span_len) ? len - static_cast<std::size_t>(span_len) : 0;
  for (int s = 0; s < n_spans; ++s) {
    std::size_t start = static_cast<std::size_t>(rng.next_below(max_start + 1));
    std::size_t stop = std::min(start + static_cast<std::size_t>(span_len), len);
    QueryDocPair p;
    p.doc_id = doc.doc_id;
    p.source = PairSource::doc_random_span;
    p.query.assign(doc.body.begin() + static_cast<long>(start),
                   doc.body.begin() + static_cast<long>(stop));
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<QueryDocPair> pseudo_queries(const Document& doc, int n_queries,
                                         int max_len, RngStream& rng) {
  if (doc.body.empty())
    throw ParameterError("pseudo_queries: document \"" + doc.doc_id +
                         "\" has empty body");
  constexpr std::size_t kSalientWindow = 512;  // leading body tokens considered
  const std::size_t window = std::min(kSalientWindow, doc.body.size());

  // Frequency-weighted candidate list over the window, stopwords suppressed.
  // If suppression empties the list (all function words), fall back to the
  // raw window so every document still yields queries.
  std::vector<std::string> vocab;
  std::vector<double> weight;
  {
    std::unordered_map<std::string, int> counts;
    std::vector<std::string> order;
    for (std::size_t i = 0; i < window; ++i) {
      const std::string& t = doc.body[i];
      if (stopwords().count(t)) continue;
      if (counts.emplace(t, 0).second) order.push_back(t);
      ++counts[t];
    }
    if (order.empty()) {
      for (std::size_t i = 0; i < window; ++i) {
        const std::string& t = doc.body[i];
        if (counts.emplace(t, 0).second) order.push_back(t);
        ++counts[t];
      }
    }
    for (const auto& t : order) {
      vocab.push_back(t);
      weight.push_back(static_cast<double>(counts[t]));
    }
  }
  std::vector<double> cumulative(weight.size());
  double total = 0.0;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    total += weight[i];
    cumulative[i] = total;
  }
  auto draw_token = [&]() -> const std::string& {
    double u = rng.next_double() * total;
    std::size_t lo = static_cast<std::size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), u) -
        cumulative.begin());
    if (lo >= vocab.size()) lo = vocab.size() - 1;
    return vocab[lo];
  };

  std::vector<QueryDocPair> out;
  out.reserve(static_cast<std::size_t>(n_queries));
  for (int q = 0; q < n_queries; ++q) {
    int len = 4 + static_cast<int>(rng.next_below(9));  // 4..12 tokens
    len = std::min(len, max_len);
    QueryDocPair p;
    p.doc_id = doc.doc_id;
    p.source = PairSource::pseudo_query;
    for (int i = 0; i < len; ++i) p.query.push_back(draw_token());
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace nci
