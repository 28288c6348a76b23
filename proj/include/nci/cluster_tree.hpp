#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nci/embed.hpp"

namespace nci {

// Root-to-leaf path in the cluster tree: internal cluster labels followed by
// the member number inside the final (leaf) cluster. Always length >= 2.
struct SemanticIdentifier {
  std::vector<int> tokens;

  bool operator==(const SemanticIdentifier&) const = default;
  bool operator<(const SemanticIdentifier& o) const { return tokens < o.tokens; }
  std::size_t length() const { return tokens.size(); }
};

// Hyphen-joined decimal tokens, e.g. "3-5-5".
std::string serialize_id(const SemanticIdentifier& id);
// Exact inverse of serialize_id; rejects anything else.
SemanticIdentifier parse_id(const std::string& s);

struct ClusterTreeNode {
  bool is_leaf = false;
  int depth = 0;
  Eigen::VectorXd centroid;        // cluster centroid (mean of member docs)
  std::vector<int> children;       // internal: child node ids, cluster order
  std::vector<int> doc_indices;    // leaf: member docs, numbered 0..|C|-1
};

class ClusterTree {
 public:
  ClusterTree() = default;
  explicit ClusterTree(int k, int c) : k_(k), c_(c) {}

  int k() const { return k_; }
  int c() const { return c_; }
  int root() const { return root_; }
  const ClusterTreeNode& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t doc_count() const { return doc_count_; }

  int add_node(ClusterTreeNode n);
  ClusterTreeNode& node_mut(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  void set_root(int id) { root_ = id; }
  void set_doc_count(std::size_t n) { doc_count_ = n; }

  // Identifier of every document, in original document order.
  std::vector<SemanticIdentifier> identifiers() const;

  // Node id at the end of an identifier prefix; -1 when the prefix leaves the
  // tree. Full identifiers resolve to -1 (the final token names a member, not
  // a node).
  int descend(const std::vector<int>& prefix) const;

  std::string to_json() const;
  static ClusterTree from_json(const std::string& text);

 private:
  int k_ = 0, c_ = 0;
  int root_ = -1;
  std::size_t doc_count_ = 0;
  std::vector<ClusterTreeNode> nodes_;
};

struct HierarchicalKMeansResult {
  std::vector<SemanticIdentifier> ids;  // document order
  ClusterTree tree;
};

// Recursive k-means identifier assignment: split into min(k, n) clusters,
// recurse into any cluster with more than c members, number the members of
// clusters with at most c members 0..|C|-1. Sibling subtrees draw from
// rng substreams derived from (seed, cluster path), so the result does not
// depend on traversal order.
HierarchicalKMeansResult hierarchical_kmeans(const EmbeddingMatrix& embeddings,
                                             int k = 30, int c = 30,
                                             std::uint64_t seed = 0);

// Identifier shape statistics preserved, semantic locality destroyed:
// documents are permuted across the tree's existing leaf slots.
std::vector<SemanticIdentifier> random_identifiers(const ClusterTree& tree,
                                                   std::uint64_t seed);
// Deterministic core of random_identifiers: doc i receives the slot of
// perm[i] under the tree's original assignment.
std::vector<SemanticIdentifier> permute_identifiers(const ClusterTree& tree,
                                                    const std::vector<int>& perm);

// Tab-separated doc_id / serialized identifier, corpus order.
void save_identifier_map(const std::vector<std::string>& doc_ids,
                         const std::vector<SemanticIdentifier>& ids,
                         const std::string& path);
std::vector<std::pair<std::string, SemanticIdentifier>> load_identifier_map(
    const std::string& path);

}  // namespace nci
