#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "nci/bm25.hpp"
#include "nci/corpus.hpp"
#include "nci/metrics.hpp"
#include "nci/rng.hpp"

using nci::QRels;
using nci::RankedList;

namespace {

std::vector<RankedList> one_query(const std::string& q,
                                  std::vector<std::string> docs) {
  return {{q, std::move(docs)}};
}

QRels qrels_for(const std::string& q, std::set<std::string> docs) {
  QRels r;
  r.by_query[q] = std::move(docs);
  return r;
}

// brute-force references, written independently of the library path
double ref_recall(const std::vector<RankedList>& results, const QRels& qrels, int n) {
  double hits = 0;
  int considered = 0;
  std::set<std::string> seen;
  for (const auto& r : results) {
    if (!seen.insert(r.query).second) continue;
    auto it = qrels.by_query.find(r.query);
    if (it == qrels.by_query.end() || it->second.empty()) continue;
    ++considered;
    bool hit = false;
    for (int i = 0; i < std::min<int>(n, int(r.ranked_docs.size())); ++i)
      if (it->second.count(r.ranked_docs[size_t(i)])) hit = true;
    hits += hit ? 1.0 : 0.0;
  }
  return considered ? hits / considered : 0.0;
}

double ref_mrr(const std::vector<RankedList>& results, const QRels& qrels, int k) {
  double total = 0;
  int considered = 0;
  std::set<std::string> seen;
  for (const auto& r : results) {
    if (!seen.insert(r.query).second) continue;
    auto it = qrels.by_query.find(r.query);
    if (it == qrels.by_query.end() || it->second.empty()) continue;
    ++considered;
    for (int i = 0; i < std::min<int>(k, int(r.ranked_docs.size())); ++i)
      if (it->second.count(r.ranked_docs[size_t(i)])) {
        total += 1.0 / (i + 1);
        break;
      }
  }
  return considered ? total / considered : 0.0;
}

double ref_rprec(const std::vector<RankedList>& results, const QRels& qrels) {
  double total = 0;
  int considered = 0;
  std::set<std::string> seen;
  for (const auto& r : results) {
    if (!seen.insert(r.query).second) continue;
    auto it = qrels.by_query.find(r.query);
    if (it == qrels.by_query.end() || it->second.empty()) continue;
    ++considered;
    int rr = int(it->second.size());
    int hits = 0;
    for (int i = 0; i < std::min<int>(rr, int(r.ranked_docs.size())); ++i)
      hits += it->second.count(r.ranked_docs[size_t(i)]) ? 1 : 0;
    total += double(hits) / rr;
  }
  return considered ? total / considered : 0.0;
}

}  // namespace

TEST_CASE("recall at n") {
  QRels q = qrels_for("q", {"rel"});
  CHECK(nci::recall_at_n(one_query("q", {"rel", "x"}), q, 1).value == 1.0);

  std::vector<std::string> eleven;
  for (int i = 0; i < 10; ++i) eleven.push_back("x" + std::to_string(i));
  eleven.push_back("rel");  // rank 11
  CHECK(nci::recall_at_n(one_query("q", eleven), q, 10).value == 0.0);
  CHECK(nci::recall_at_n(one_query("q", eleven), q, 11).value == 1.0);

  // ranks {1, 5, 20} at n=10 -> 2/3
  std::vector<RankedList> results;
  QRels multi;
  auto ranked_with_rel_at = [](int rank) {
    std::vector<std::string> docs;
    for (int i = 1; i <= 25; ++i)
      docs.push_back(i == rank ? "rel" : "f" + std::to_string(i));
    return docs;
  };
  results.push_back({"a", ranked_with_rel_at(1)});
  results.push_back({"b", ranked_with_rel_at(5)});
  results.push_back({"c", ranked_with_rel_at(20)});
  for (const char* name : {"a", "b", "c"}) multi.by_query[name] = {"rel"};
  CHECK(nci::recall_at_n(results, multi, 10).value == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("mrr at k") {
  QRels q = qrels_for("q", {"rel"});
  CHECK(nci::mrr_at_k(one_query("q", {"rel"}), q, 10).value == 1.0);

  QRels multi;
  multi.by_query["a"] = {"rel"};
  multi.by_query["b"] = {"rel"};
  std::vector<RankedList> results;
  results.push_back({"a", {"x", "rel", "y"}});
  results.push_back({"b", {"x", "y", "z", "w", "rel"}});
  CHECK(nci::mrr_at_k(results, multi, 10).value == doctest::Approx(0.35));

  // first relevant beyond the cutoff contributes zero
  std::vector<std::string> docs;
  for (int i = 0; i < 5; ++i) docs.push_back("x" + std::to_string(i));
  docs.push_back("rel");  // rank 6
  CHECK(nci::mrr_at_k(one_query("q", docs), q, 5).value == 0.0);
}

TEST_CASE("r-precision") {
  CHECK(nci::r_precision(one_query("q", {"rel"}), qrels_for("q", {"rel"})).value == 1.0);
  CHECK(nci::r_precision(one_query("q", {"r1", "x", "r2"}),
                         qrels_for("q", {"r1", "r2"})).value == doctest::Approx(0.5));
  CHECK(nci::r_precision(one_query("q", {"x", "y"}),
                         qrels_for("q", {"r1", "r2"})).value == 0.0);
}

TEST_CASE("unknown queries are skipped with warning counts") {
  QRels q = qrels_for("known", {"rel"});
  std::vector<RankedList> results;
  results.push_back({"known", {"rel"}});
  results.push_back({"mystery", {"rel"}});
  auto m = nci::recall_at_n(results, q, 5);
  CHECK(m.value == 1.0);
  CHECK(m.evaluated == 1);
  CHECK(m.skipped_unknown == 1);
}

TEST_CASE("metrics match brute-force references on 1000 random instances") {
  nci::RngStream rng(77);
  for (int inst = 0; inst < 1000; ++inst) {
    int n_queries = 1 + int(rng.next_below(6));
    int n_docs = 3 + int(rng.next_below(20));
    QRels qrels;
    std::vector<RankedList> results;
    for (int qi = 0; qi < n_queries; ++qi) {
      std::string qname = "q" + std::to_string(qi);
      std::vector<std::string> docs;
      for (int d = 0; d < n_docs; ++d) docs.push_back("d" + std::to_string(d));
      rng.shuffle(docs);
      int keep = 1 + int(rng.next_below(std::uint64_t(n_docs)));
      docs.resize(std::size_t(keep));
      results.push_back({qname, docs});
      if (rng.next_double() < 0.9) {  // 10% of queries stay unknown
        std::set<std::string> rel;
        int n_rel = 1 + int(rng.next_below(4));
        for (int r = 0; r < n_rel; ++r)
          rel.insert("d" + std::to_string(rng.next_below(std::uint64_t(n_docs))));
        qrels.by_query[qname] = rel;
      }
    }
    int n = 1 + int(rng.next_below(10));
    int k = 1 + int(rng.next_below(10));
    CHECK(nci::recall_at_n(results, qrels, n).value == ref_recall(results, qrels, n));
    CHECK(nci::mrr_at_k(results, qrels, k).value == ref_mrr(results, qrels, k));
    CHECK(nci::r_precision(results, qrels).value == ref_rprec(results, qrels));
  }
}

TEST_CASE("recall is non-decreasing in n and dominates mrr") {
  nci::RngStream rng(31);
  for (int inst = 0; inst < 50; ++inst) {
    QRels qrels;
    std::vector<RankedList> results;
    for (int qi = 0; qi < 5; ++qi) {
      std::string qname = "q" + std::to_string(qi);
      std::vector<std::string> docs;
      for (int d = 0; d < 12; ++d) docs.push_back("d" + std::to_string(d));
      rng.shuffle(docs);
      results.push_back({qname, docs});
      qrels.by_query[qname] = {"d" + std::to_string(rng.next_below(12))};
    }
    double prev = 0.0;
    for (int n = 1; n <= 12; ++n) {
      double r = nci::recall_at_n(results, qrels, n).value;
      CHECK(r >= prev);
      prev = r;
      CHECK(nci::mrr_at_k(results, qrels, n).value <= r + 1e-12);
    }
  }
}

TEST_CASE("bm25") {
  auto make_corpus = [](std::vector<std::pair<std::string, std::string>> docs) {
    nci::Corpus c;
    for (auto& [id, body] : docs) {
      nci::Document d;
      d.doc_id = id;
      d.body = nci::tokenize(body);
      c.add(std::move(d));
    }
    return c;
  };

  SUBCASE("absent terms contribute nothing; empty query ranks nothing") {
    nci::Corpus c = make_corpus({{"a", "cat dog"}, {"b", "fish bird"}});
    auto ranked = nci::bm25_rank(c, {"unicorn"});
    CHECK(ranked.empty());
    CHECK(nci::bm25_rank(c, {}).empty());
    auto some = nci::bm25_rank(c, {"cat", "unicorn"});
    REQUIRE(some.size() == 1);
    CHECK(some[0].first == "a");
  }

  SUBCASE("higher term frequency wins at equal length") {
    nci::Corpus c = make_corpus({{"a", "apple apple pear plum"},
                                 {"b", "apple pear plum fig"}});
    auto ranked = nci::bm25_rank(c, {"apple"});
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].first == "a");
    CHECK(ranked[0].second > ranked[1].second);
  }

  SUBCASE("three-document fixture matches the closed-form score") {
    nci::Corpus c = make_corpus({{"a", "x x y z"},
                                 {"b", "x y y y w"},
                                 {"c", "w w w z z q"}});
    const double k1 = 1.2, b = 0.75;
    auto ranked = nci::bm25_rank(c, {"x", "w"}, k1, b);
    // direct per-term evaluation
    const double n_docs = 3.0, avgdl = (4.0 + 5.0 + 6.0) / 3.0;
    auto idf = [&](double df) { return std::log((n_docs - df + 0.5) / (df + 0.5) + 1.0); };
    auto r_term = [&](double tf, double len) {
      return tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avgdl));
    };
    double score_a = idf(2) * r_term(2, 4);               // x twice, no w
    double score_b = idf(2) * r_term(1, 5) + idf(2) * r_term(1, 5);
    double score_c = idf(2) * r_term(3, 6);               // w three times
    std::map<std::string, double> got;
    for (auto& [id, s] : ranked) got[id] = s;
    CHECK(got["a"] == doctest::Approx(score_a).epsilon(1e-9));
    CHECK(got["b"] == doctest::Approx(score_b).epsilon(1e-9));
    CHECK(got["c"] == doctest::Approx(score_c).epsilon(1e-9));
  }

  SUBCASE("ranking is invariant to corpus order") {
    nci::Corpus c1 = make_corpus({{"a", "red green"}, {"b", "red red blue"},
                                  {"c", "green blue blue"}});
    nci::Corpus c2 = make_corpus({{"c", "green blue blue"}, {"a", "red green"},
                                  {"b", "red red blue"}});
    auto r1 = nci::bm25_rank(c1, {"red", "blue"});
    auto r2 = nci::bm25_rank(c2, {"red", "blue"});
    REQUIRE(r1.size() == r2.size());
    for (std::size_t i = 0; i < r1.size(); ++i) {
      CHECK(r1[i].first == r2[i].first);
      CHECK(r1[i].second == r2[i].second);
    }
  }

  SUBCASE("score ties break lexicographically") {
    nci::Corpus c = make_corpus({{"z", "same text"}, {"a", "same text"}});
    auto ranked = nci::bm25_rank(c, {"same"});
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].first == "a");
  }
}

TEST_CASE("qrels file round-trip and eval report") {
  QRels q;
  q.by_query["which doc"] = {"d1", "d2"};
  q.by_query["other"] = {"d3"};
  const std::string path = "/tmp/nci_test_qrels.tsv";
  nci::save_qrels(q, path);
  QRels back = nci::load_qrels(path);
  CHECK(back.by_query == q.by_query);
  std::remove(path.c_str());

  std::vector<RankedList> results;
  results.push_back({"which doc", {"d2", "x"}});
  results.push_back({"other", {"y", "d3"}});
  nci::EvalReport rep = nci::evaluate(results, q, {1, 10}, 100);
  CHECK(rep.recall_at[0].second == doctest::Approx(0.5));
  CHECK(rep.recall_at[1].second == doctest::Approx(1.0));
  CHECK(rep.mrr == doctest::Approx((1.0 + 0.5) / 2.0));
  CHECK(rep.evaluated == 2);
  CHECK(!rep.to_json().empty());
}
