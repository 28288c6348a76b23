#include "nci/metrics.hpp"

#include <fstream>
#include <unordered_set>

#include <json.hpp>

namespace nci {

QRels load_qrels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open qrels file: " + path);
  QRels q;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected query<TAB>doc_id");
    q.by_query[line.substr(0, tab)].insert(line.substr(tab + 1));
  }
  return q;
}

void save_qrels(const QRels& qrels, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write qrels file: " + path);
  for (const auto& [query, docs] : qrels.by_query)
    for (const auto& d : docs) out << query << '\t' << d << '\n';
}

namespace {

// Shared walk: calls scorer(relevant, ranked) for each usable query, in
// results order, deduplicating repeated query texts.
template <class Scorer>
MetricOutcome average_over_queries(const std::vector<RankedList>& results,
                                   const QRels& qrels, Scorer scorer) {
  MetricOutcome out;
  double total = 0.0;
  std::unordered_set<std::string> seen;
  for (const RankedList& r : results) {
    if (!seen.insert(r.query).second) continue;
    auto it = qrels.by_query.find(r.query);
    if (it == qrels.by_query.end()) {
      ++out.skipped_unknown;
      continue;
    }
    if (it->second.empty()) {
      ++out.skipped_no_relevant;
      continue;
    }
    total += scorer(it->second, r.ranked_docs);
    ++out.evaluated;
  }
  out.value = out.evaluated ? total / out.evaluated : 0.0;
  return out;
}

}  // namespace

MetricOutcome recall_at_n(const std::vector<RankedList>& results,
                          const QRels& qrels, int n) {
  if (n < 1) throw ParameterError("recall_at_n: n must be >= 1");
  return average_over_queries(
      results, qrels,
      [n](const std::set<std::string>& rel, const std::vector<std::string>& ranked) {
        int limit = std::min<int>(n, static_cast<int>(ranked.size()));
        for (int i = 0; i < limit; ++i)
          if (rel.count(ranked[static_cast<std::size_t>(i)])) return 1.0;
        return 0.0;
      });
}

MetricOutcome mrr_at_k(const std::vector<RankedList>& results,
                       const QRels& qrels, int k) {
  if (k < 1) throw ParameterError("mrr_at_k: k must be >= 1");
  return average_over_queries(
      results, qrels,
      [k](const std::set<std::string>& rel, const std::vector<std::string>& ranked) {
        int limit = std::min<int>(k, static_cast<int>(ranked.size()));
        for (int i = 0; i < limit; ++i)
          if (rel.count(ranked[static_cast<std::size_t>(i)]))
            return 1.0 / (i + 1);
        return 0.0;
      });
}

MetricOutcome r_precision(const std::vector<RankedList>& results,
                          const QRels& qrels) {
  return average_over_queries(
      results, qrels,
      [](const std::set<std::string>& rel, const std::vector<std::string>& ranked) {
        int r = static_cast<int>(rel.size());
        int limit = std::min<int>(r, static_cast<int>(ranked.size()));
        int hits = 0;
        for (int i = 0; i < limit; ++i)
          hits += rel.count(ranked[static_cast<std::size_t>(i)]) ? 1 : 0;
        return static_cast<double>(hits) / r;
      });
}

EvalReport evaluate(const std::vector<RankedList>& results, const QRels& qrels,
                    const std::vector<int>& recall_ns, int mrr_cutoff) {
  EvalReport rep;
  rep.mrr_cutoff = mrr_cutoff;
  rep.empty_input = results.empty();
  MetricOutcome last;
  for (int n : recall_ns) {
    MetricOutcome m = recall_at_n(results, qrels, n);
    rep.recall_at.emplace_back(n, m.value);
    last = m;
  }
  MetricOutcome mrr = mrr_at_k(results, qrels, mrr_cutoff);
  rep.mrr = mrr.value;
  MetricOutcome rp = r_precision(results, qrels);
  rep.r_precision = rp.value;
  rep.evaluated = rp.evaluated;
  rep.skipped_unknown = rp.skipped_unknown;
  rep.skipped_no_relevant = rp.skipped_no_relevant;
  return rep;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  nlohmann::json rec = nlohmann::json::object();
  for (const auto& [n, v] : recall_at) rec[std::to_string(n)] = v;
  j["recall"] = std::move(rec);
  j["mrr_cutoff"] = mrr_cutoff;
  j["mrr"] = mrr;
  j["r_precision"] = r_precision;
  j["evaluated"] = evaluated;
  j["skipped_unknown"] = skipped_unknown;
  j["skipped_no_relevant"] = skipped_no_relevant;
  j["empty_input"] = empty_input;
  return j.dump(2);
}

}  // namespace nci
