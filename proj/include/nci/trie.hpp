#pragma once

#include <string>
#include <vector>

#include "nci/cluster_tree.hpp"

namespace nci {

// Read-only prefix trie over the assigned identifiers. Each root-to-terminal
// path is exactly one identifier and maps to one doc_id. Child lookup is a
// direct per-node token table, O(1) per (node, token).
class PrefixTrie {
 public:
  struct Node {
    std::vector<std::int32_t> next;       // token -> child node id, -1 invalid
    std::vector<int> child_tokens;        // valid tokens, ascending
    std::int32_t doc = -1;                // terminal: document slot
    std::int32_t depth = 0;
  };

  static PrefixTrie from_identifiers(const std::vector<SemanticIdentifier>& ids,
                                     const std::vector<std::string>& doc_ids);

  int root() const { return 0; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  bool valid_child(int id, int token) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return token >= 0 && token < static_cast<int>(n.next.size()) &&
           n.next[static_cast<std::size_t>(token)] >= 0;
  }
  int child(int id, int token) const {
    return nodes_[static_cast<std::size_t>(id)].next[static_cast<std::size_t>(token)];
  }
  bool is_terminal(int id) const { return nodes_[static_cast<std::size_t>(id)].doc >= 0; }
  const std::string& doc_at(int id) const {
    return doc_ids_[static_cast<std::size_t>(nodes_[static_cast<std::size_t>(id)].doc)];
  }

  // Walks a complete identifier; returns the terminal node id or -1.
  int find(const SemanticIdentifier& id) const;

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t leaf_count() const { return leaf_count_; }
  int max_depth() const { return max_depth_; }
  int min_depth() const { return min_depth_; }
  int max_fanout() const { return max_fanout_; }

  // All root-to-terminal paths, in identifier order.
  std::vector<SemanticIdentifier> paths() const;

 private:
  std::vector<Node> nodes_;
  std::vector<std::string> doc_ids_;
  std::size_t leaf_count_ = 0;
  int max_depth_ = 0;
  int min_depth_ = 0;
  int max_fanout_ = 0;
};

// Compiles the cluster tree into its decoding constraint. doc_ids are in
// corpus order, matching the tree's document indices.
PrefixTrie build_trie(const ClusterTree& tree,
                      const std::vector<std::string>& doc_ids);

}  // namespace nci
