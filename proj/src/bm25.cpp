#include "nci/bm25.hpp"

#include <algorithm>
#include <cmath>

namespace nci {

Bm25Index::Bm25Index(const Corpus& corpus) {
  doc_len_.reserve(corpus.size());
  doc_ids_.reserve(corpus.size());
  long long total_len = 0;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const Document& doc = corpus.at(d);
    std::unordered_map<std::string, int> tf;
    for (const auto& t : doc.title) ++tf[t];
    for (const auto& t : doc.body) ++tf[t];
    int len = static_cast<int>(doc.title.size() + doc.body.size());
    doc_len_.push_back(len);
    doc_ids_.push_back(doc.doc_id);
    total_len += len;
    for (const auto& [term, count] : tf)
      postings_[term].push_back({static_cast<int>(d), count});
  }
  avgdl_ = corpus.size() ? static_cast<double>(total_len) / corpus.size() : 0.0;
  // each term's posting list is in corpus order: docs are scanned in order
  // and contribute at most one posting per term
}

std::vector<std::pair<std::string, double>> Bm25Index::rank(
    const std::vector<std::string>& query, Bm25Params params) const {
  std::vector<std::pair<std::string, double>> out;
  if (query.empty() || doc_ids_.empty()) return out;
  const double n_docs = static_cast<double>(doc_ids_.size());
  std::vector<double> score(doc_ids_.size(), 0.0);
  std::vector<char> touched(doc_ids_.size(), 0);
  for (const std::string& term : query) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;  // zero contribution
    const auto& list = it->second;
    double df = static_cast<double>(list.size());
    double idf = std::log((n_docs - df + 0.5) / (df + 0.5) + 1.0);
    for (const Posting& p : list) {
      double norm = 1.0 - params.b + params.b * doc_len_[static_cast<std::size_t>(p.doc)] / avgdl_;
      double r = p.tf * (params.k1 + 1.0) / (p.tf + params.k1 * norm);
      score[static_cast<std::size_t>(p.doc)] += idf * r;
      touched[static_cast<std::size_t>(p.doc)] = 1;
    }
  }
  for (std::size_t d = 0; d < doc_ids_.size(); ++d)
    if (touched[d]) out.emplace_back(doc_ids_[d], score[d]);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

std::vector<std::pair<std::string, double>> bm25_rank(
    const Corpus& corpus, const std::vector<std::string>& query, double k1,
    double b) {
  Bm25Index index(corpus);
  return index.rank(query, Bm25Params{k1, b});
}

}  // namespace nci
