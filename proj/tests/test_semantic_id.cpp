#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "nci/cluster_tree.hpp"
#include "nci/embed.hpp"
#include "nci/kmeans.hpp"
#include "nci/rng.hpp"
#include "nci/synth.hpp"
#include "nci/trie.hpp"

using nci::EmbeddingMatrix;
using nci::SemanticIdentifier;

namespace {

EmbeddingMatrix points_1d(std::vector<double> xs) {
  EmbeddingMatrix m(static_cast<Eigen::Index>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = xs[i];
  return m;
}

double partition_sse(const EmbeddingMatrix& pts, const std::vector<int>& assign,
                     int k) {
  double sse = 0.0;
  for (int c = 0; c < k; ++c) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(pts.cols());
    int count = 0;
    for (std::size_t i = 0; i < assign.size(); ++i)
      if (assign[i] == c) {
        mean += pts.row(static_cast<Eigen::Index>(i));
        ++count;
      }
    if (!count) continue;
    mean /= count;
    for (std::size_t i = 0; i < assign.size(); ++i)
      if (assign[i] == c)
        sse += (pts.row(static_cast<Eigen::Index>(i)) - mean).squaredNorm();
  }
  return sse;
}

// Exhaustive best 2-partition by SSE.
double best_two_partition_sse(const EmbeddingMatrix& pts,
                              std::vector<int>* best_assign = nullptr) {
  int n = static_cast<int>(pts.rows());
  double best = 1e300;
  for (int mask = 1; mask < (1 << n) - 1; ++mask) {
    std::vector<int> assign(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) assign[static_cast<std::size_t>(i)] = (mask >> i) & 1;
    double sse = partition_sse(pts, assign, 2);
    if (sse < best) {
      best = sse;
      if (best_assign) *best_assign = assign;
    }
  }
  return best;
}

// Groups doc indices by a token prefix of their identifier.
std::map<std::vector<int>, std::set<int>> group_by_prefix(
    const std::vector<SemanticIdentifier>& ids, std::size_t plen) {
  std::map<std::vector<int>, std::set<int>> groups;
  for (std::size_t d = 0; d < ids.size(); ++d) {
    if (ids[d].tokens.size() < plen) continue;
    std::vector<int> p(ids[d].tokens.begin(), ids[d].tokens.begin() + static_cast<long>(plen));
    groups[p].insert(static_cast<int>(d));
  }
  return groups;
}

}  // namespace

TEST_CASE("identifier serialization") {
  SemanticIdentifier id;
  id.tokens = {3, 5, 5};
  CHECK(nci::serialize_id(id) == "3-5-5");
  CHECK(nci::parse_id("3-5-5") == id);

  SemanticIdentifier minimal;
  minimal.tokens = {0, 0};
  CHECK(nci::serialize_id(minimal) == "0-0");

  CHECK_THROWS_AS(nci::parse_id("3--5"), nci::ParseError);
  CHECK_THROWS_AS(nci::parse_id(""), nci::ParseError);
  CHECK_THROWS_AS(nci::parse_id("3-5-"), nci::ParseError);
  CHECK_THROWS_AS(nci::parse_id("3-a"), nci::ParseError);
}

TEST_CASE("lloyd kmeans") {
  SUBCASE("two well-separated 1-d pairs recover the optimal partition") {
    EmbeddingMatrix pts = points_1d({0.0, 1.0, 10.0, 11.0});
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      nci::KMeansResult r = nci::lloyd_kmeans(pts, 2, seed);
      CHECK(r.assignments[0] == r.assignments[1]);
      CHECK(r.assignments[2] == r.assignments[3]);
      CHECK(r.assignments[0] != r.assignments[2]);
      double got_sse = partition_sse(pts, r.assignments, 2);
      CHECK(got_sse == doctest::Approx(best_two_partition_sse(pts)));
      std::set<double> cents{r.centroids(0, 0), r.centroids(1, 0)};
      CHECK(cents.count(0.5));
      CHECK(cents.count(10.5));
    }
  }

  SUBCASE("k=1 yields the mean") {
    EmbeddingMatrix pts = points_1d({1.0, 2.0, 6.0});
    nci::KMeansResult r = nci::lloyd_kmeans(pts, 1, 3);
    CHECK(r.centroids.rows() == 1);
    CHECK(r.centroids(0, 0) == doctest::Approx(3.0));
  }

  SUBCASE("n == k gives singleton clusters with zero SSE") {
    EmbeddingMatrix pts = points_1d({1.0, 5.0, 9.0, 14.0});
    nci::KMeansResult r = nci::lloyd_kmeans(pts, 4, 1);
    std::set<int> used(r.assignments.begin(), r.assignments.end());
    CHECK(used.size() == 4);
    CHECK(r.sse_history.back() == doctest::Approx(0.0));
  }

  SUBCASE("k larger than n clamps") {
    EmbeddingMatrix pts = points_1d({1.0, 2.0});
    nci::KMeansResult r = nci::lloyd_kmeans(pts, 30, 1);
    CHECK(r.centroids.rows() == 2);
  }

  SUBCASE("SSE history is non-increasing") {
    nci::RngStream rng(8);
    EmbeddingMatrix pts(60, 4);
    for (Eigen::Index i = 0; i < 60; ++i)
      for (Eigen::Index j = 0; j < 4; ++j) pts(i, j) = rng.uniform(-1, 1);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      nci::KMeansResult r = nci::lloyd_kmeans(pts, 7, seed);
      for (std::size_t i = 1; i < r.sse_history.size(); ++i)
        CHECK(r.sse_history[i] <= r.sse_history[i - 1] + 1e-9);
    }
  }

  SUBCASE("duplicate points do not break seeding") {
    EmbeddingMatrix pts = points_1d({2.0, 2.0, 2.0, 2.0});
    nci::KMeansResult r = nci::lloyd_kmeans(pts, 3, 0);
    CHECK(r.sse_history.back() == doctest::Approx(0.0));
  }
}

TEST_CASE("hierarchical kmeans") {
  SUBCASE("single document gets identifier 0-0") {
    EmbeddingMatrix one(1, 4);
    one << 0.5, 0.5, 0.5, 0.5;
    auto res = nci::hierarchical_kmeans(one, 30, 30, 7);
    REQUIRE(res.ids.size() == 1);
    CHECK(res.ids[0].tokens == std::vector<int>{0, 0});
  }

  SUBCASE("two separated pairs with k=c=2 split both levels") {
    EmbeddingMatrix pts(4, 2);
    pts << 0.0, 0.1, 0.1, 0.0, 10.0, 10.1, 10.1, 10.0;
    auto res = nci::hierarchical_kmeans(pts, 2, 2, 5);
    REQUIRE(res.ids.size() == 4);
    // ids form {[0,0],[0,1],[1,0],[1,1]} with pair members sharing the top token
    std::set<std::vector<int>> got;
    for (const auto& id : res.ids) got.insert(id.tokens);
    std::set<std::vector<int>> want = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    CHECK(got == want);
    CHECK(res.ids[0].tokens[0] == res.ids[1].tokens[0]);
    CHECK(res.ids[2].tokens[0] == res.ids[3].tokens[0]);
    CHECK(res.ids[0].tokens[0] != res.ids[2].tokens[0]);
  }

  SUBCASE("structural invariants on synthetic corpora") {
    nci::SyntheticCorpusSpec spec;
    spec.n_docs = 300;
    spec.n_topics = 10;
    spec.vocab_size = 1000;
    spec.tokens_per_doc = 60;
    spec.seed = 17;
    nci::SyntheticCorpus sc = nci::generate_synthetic_corpus(spec);
    EmbeddingMatrix emb = nci::hash_embed(sc.corpus, 128, 3);
    const int k = 8, c = 12;
    auto res = nci::hierarchical_kmeans(emb, k, c, 11);

    // uniqueness
    std::set<std::vector<int>> seen;
    for (const auto& id : res.ids) {
      CHECK(id.tokens.size() >= 2);
      CHECK(seen.insert(id.tokens).second);
    }
    // token bounds: internal < k, final < c
    for (const auto& id : res.ids) {
      for (std::size_t i = 0; i + 1 < id.tokens.size(); ++i)
        CHECK(id.tokens[i] < k);
      CHECK(id.tokens.back() < c);
    }
    // strict recursion rule: every leaf holds at most c docs
    for (std::size_t n = 0; n < res.tree.node_count(); ++n) {
      const auto& node = res.tree.node(static_cast<int>(n));
      if (node.is_leaf) CHECK(node.doc_indices.size() <= static_cast<std::size_t>(c));
      else CHECK(node.children.size() <= static_cast<std::size_t>(k));
    }
    // prefix property: shared prefix of length p <=> same tree node at depth p
    for (std::size_t plen = 1; plen <= 2; ++plen) {
      auto groups = group_by_prefix(res.ids, plen);
      for (const auto& [prefix, members] : groups) {
        std::vector<int> node_prefix(prefix.begin(), prefix.end());
        int node_id = res.tree.descend(node_prefix);
        if (node_id < 0) continue;  // prefix ends inside a leaf numbering
        // collect docs under that node
        std::set<int> under;
        auto collect = [&](auto&& self, int id) -> void {
          const auto& nd = res.tree.node(id);
          if (nd.is_leaf) {
            for (int d : nd.doc_indices) under.insert(d);
            return;
          }
          for (int ch : nd.children) self(self, ch);
        };
        collect(collect, node_id);
        CHECK(under == members);
      }
    }
    // determinism
    auto res2 = nci::hierarchical_kmeans(emb, k, c, 11);
    for (std::size_t i = 0; i < res.ids.size(); ++i)
      CHECK(res.ids[i] == res2.ids[i]);
  }
}

TEST_CASE("random identifiers") {
  nci::SyntheticCorpusSpec spec;
  spec.n_docs = 120;
  spec.n_topics = 6;
  spec.vocab_size = 600;
  spec.tokens_per_doc = 50;
  spec.noise_rate = 0.0;
  spec.seed = 23;
  nci::SyntheticCorpus sc = nci::generate_synthetic_corpus(spec);
  EmbeddingMatrix emb = nci::hash_embed(sc.corpus, 128, 3);
  auto res = nci::hierarchical_kmeans(emb, 6, 10, 29);

  SUBCASE("permutation is a bijection over leaf slots") {
    auto random_ids = nci::random_identifiers(res.tree, 5);
    std::multiset<std::vector<int>> orig, shuffled;
    for (const auto& id : res.ids) orig.insert(id.tokens);
    for (const auto& id : random_ids) shuffled.insert(id.tokens);
    CHECK(orig == shuffled);
  }

  SUBCASE("identity permutation keeps identifiers") {
    std::vector<int> identity(sc.corpus.size());
    std::iota(identity.begin(), identity.end(), 0);
    auto same = nci::permute_identifiers(res.tree, identity);
    for (std::size_t i = 0; i < same.size(); ++i) CHECK(same[i] == res.ids[i]);
  }

  SUBCASE("random ids lose intra-topic prefix overlap") {
    auto random_ids = nci::random_identifiers(res.tree, 5);
    auto mean_intra_overlap = [&](const std::vector<SemanticIdentifier>& ids) {
      double total = 0.0;
      long count = 0;
      for (std::size_t a = 0; a < ids.size(); ++a)
        for (std::size_t b = a + 1; b < ids.size(); ++b) {
          if (sc.topic_of_doc[a] != sc.topic_of_doc[b]) continue;
          std::size_t shared = 0;
          while (shared < ids[a].tokens.size() && shared < ids[b].tokens.size() &&
                 ids[a].tokens[shared] == ids[b].tokens[shared])
            ++shared;
          total += static_cast<double>(shared);
          ++count;
        }
      return total / static_cast<double>(count);
    };
    CHECK(mean_intra_overlap(random_ids) < mean_intra_overlap(res.ids));
  }
}

TEST_CASE("identifier map file round-trips") {
  std::vector<std::string> doc_ids = {"a", "b"};
  std::vector<SemanticIdentifier> ids(2);
  ids[0].tokens = {1, 2, 3};
  ids[1].tokens = {0, 4};
  const std::string path = "/tmp/nci_test_idmap.tsv";
  nci::save_identifier_map(doc_ids, ids, path);
  auto loaded = nci::load_identifier_map(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].first == "a");
  CHECK(loaded[0].second == ids[0]);
  CHECK(loaded[1].second == ids[1]);
  std::remove(path.c_str());
}

TEST_CASE("cluster tree json round-trips") {
  EmbeddingMatrix pts(6, 3);
  nci::RngStream rng(3);
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) pts(i, j) = rng.uniform(-1, 1);
  auto res = nci::hierarchical_kmeans(pts, 2, 2, 13);
  nci::ClusterTree back = nci::ClusterTree::from_json(res.tree.to_json());
  CHECK(back.doc_count() == res.tree.doc_count());
  auto ids = back.identifiers();
  for (std::size_t i = 0; i < ids.size(); ++i) CHECK(ids[i] == res.ids[i]);
}

TEST_CASE("prefix trie") {
  SUBCASE("single path builds three nodes") {
    std::vector<SemanticIdentifier> ids(1);
    ids[0].tokens = {0, 0};
    nci::PrefixTrie t = nci::PrefixTrie::from_identifiers(ids, {"doc"});
    CHECK(t.node_count() == 3);
    CHECK(t.leaf_count() == 1);
    int mid = t.child(t.root(), 0);
    CHECK(t.is_terminal(t.child(mid, 0)));
    CHECK(t.doc_at(t.child(mid, 0)) == "doc");
  }

  SUBCASE("child sets match direct enumeration") {
    std::vector<SemanticIdentifier> ids(3);
    ids[0].tokens = {0, 0};
    ids[1].tokens = {0, 1};
    ids[2].tokens = {1, 0};
    nci::PrefixTrie t = nci::PrefixTrie::from_identifiers(ids, {"a", "b", "c"});
    CHECK(t.node(t.root()).child_tokens == std::vector<int>{0, 1});
    int n0 = t.child(t.root(), 0);
    int n1 = t.child(t.root(), 1);
    CHECK(t.node(n0).child_tokens == std::vector<int>{0, 1});
    CHECK(t.node(n1).child_tokens == std::vector<int>{0});
    CHECK(t.valid_child(t.root(), 0));
    CHECK(!t.valid_child(t.root(), 2));
    CHECK(t.max_fanout() == 2);
    CHECK(t.max_depth() == 2);
  }

  SUBCASE("paths equal the identifiers on random trees") {
    nci::RngStream rng(21);
    for (int trial = 0; trial < 20; ++trial) {
      std::set<std::vector<int>> idset;
      int count = 2 + static_cast<int>(rng.next_below(40));
      for (int i = 0; i < count; ++i) {
        std::vector<int> toks;
        int len = 2 + static_cast<int>(rng.next_below(3));
        for (int j = 0; j < len; ++j)
          toks.push_back(static_cast<int>(rng.next_below(4)));
        idset.insert(toks);
      }
      // drop ids that are prefixes of others to keep the set trie-valid
      std::vector<SemanticIdentifier> ids;
      for (const auto& toks : idset) {
        bool is_prefix = false;
        for (const auto& other : idset) {
          if (other.size() <= toks.size()) continue;
          if (std::equal(toks.begin(), toks.end(), other.begin())) {
            is_prefix = true;
            break;
          }
        }
        if (!is_prefix) {
          SemanticIdentifier id;
          id.tokens = toks;
          ids.push_back(id);
        }
      }
      std::vector<std::string> names;
      for (std::size_t i = 0; i < ids.size(); ++i) names.push_back("d" + std::to_string(i));
      nci::PrefixTrie t = nci::PrefixTrie::from_identifiers(ids, names);
      auto paths = t.paths();
      std::set<std::vector<int>> got;
      for (const auto& p : paths) got.insert(p.tokens);
      std::set<std::vector<int>> want;
      for (const auto& id : ids) want.insert(id.tokens);
      CHECK(got == want);
      CHECK(t.leaf_count() == ids.size());
    }
  }

  SUBCASE("duplicate identifiers rejected") {
    std::vector<SemanticIdentifier> ids(2);
    ids[0].tokens = {0, 1};
    ids[1].tokens = {0, 1};
    CHECK_THROWS_AS(nci::PrefixTrie::from_identifiers(ids, {"a", "b"}),
                    nci::ParameterError);
  }

  SUBCASE("trie from cluster tree covers every document") {
    EmbeddingMatrix pts(20, 3);
    nci::RngStream rng(31);
    for (Eigen::Index i = 0; i < 20; ++i)
      for (Eigen::Index j = 0; j < 3; ++j) pts(i, j) = rng.uniform(-1, 1);
    auto res = nci::hierarchical_kmeans(pts, 3, 4, 17);
    std::vector<std::string> names;
    for (int i = 0; i < 20; ++i) names.push_back("d" + std::to_string(i));
    nci::PrefixTrie t = nci::build_trie(res.tree, names);
    CHECK(t.leaf_count() == 20);
    for (std::size_t i = 0; i < res.ids.size(); ++i) {
      int node = t.find(res.ids[i]);
      REQUIRE(node >= 0);
      CHECK(t.doc_at(node) == names[i]);
    }
  }
}
