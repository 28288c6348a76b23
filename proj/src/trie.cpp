#include "nci/trie.hpp"

#include <algorithm>

#include "nci/errors.hpp"

namespace nci {

PrefixTrie PrefixTrie::from_identifiers(const std::vector<SemanticIdentifier>& ids,
                                        const std::vector<std::string>& doc_ids) {
  if (ids.size() != doc_ids.size())
    throw ParameterError("trie: identifier/doc count mismatch");
  PrefixTrie t;
  t.doc_ids_ = doc_ids;
  t.nodes_.push_back(Node{});
  t.min_depth_ = ids.empty() ? 0 : 1 << 30;
  for (std::size_t d = 0; d < ids.size(); ++d) {
    const SemanticIdentifier& id = ids[d];
    if (id.tokens.size() < 2)
      throw ParameterError("trie: identifier \"" + serialize_id(id) +
                           "\" shorter than 2 tokens");
    int at = 0;
    for (std::size_t i = 0; i < id.tokens.size(); ++i) {
      int tok = id.tokens[i];
      if (tok < 0)
        throw ParameterError("trie: negative token in \"" + serialize_id(id) + "\"");
      Node& n = t.nodes_[static_cast<std::size_t>(at)];
      if (n.doc >= 0)
        throw ParameterError("trie: identifier \"" + serialize_id(id) +
                             "\" extends the identifier of \"" +
                             t.doc_ids_[static_cast<std::size_t>(n.doc)] + "\"");
      if (tok >= static_cast<int>(n.next.size()))
        n.next.resize(static_cast<std::size_t>(tok) + 1, -1);
      if (n.next[static_cast<std::size_t>(tok)] < 0) {
        Node child;
        child.depth = static_cast<std::int32_t>(i) + 1;
        // n may dangle after push_back; re-index below
        int child_id = static_cast<int>(t.nodes_.size());
        t.nodes_[static_cast<std::size_t>(at)].next[static_cast<std::size_t>(tok)] =
            child_id;
        t.nodes_[static_cast<std::size_t>(at)].child_tokens.push_back(tok);
        t.nodes_.push_back(std::move(child));
      }
      at = t.nodes_[static_cast<std::size_t>(at)].next[static_cast<std::size_t>(tok)];
    }
    Node& leaf = t.nodes_[static_cast<std::size_t>(at)];
    if (leaf.doc >= 0)
      throw ParameterError("trie: duplicate identifier \"" + serialize_id(id) +
                           "\" for \"" + doc_ids[d] + "\" and \"" +
                           t.doc_ids_[static_cast<std::size_t>(leaf.doc)] + "\"");
    if (!leaf.child_tokens.empty())
      throw ParameterError("trie: identifier \"" + serialize_id(id) +
                           "\" is a prefix of another identifier");
    leaf.doc = static_cast<std::int32_t>(d);
  }
  t.leaf_count_ = ids.size();
  for (const Node& n : t.nodes_) {
    if (n.doc >= 0) {
      t.max_depth_ = std::max(t.max_depth_, static_cast<int>(n.depth));
      t.min_depth_ = std::min(t.min_depth_, static_cast<int>(n.depth));
    }
    t.max_fanout_ = std::max(t.max_fanout_, static_cast<int>(n.child_tokens.size()));
  }
  for (Node& n : t.nodes_) std::sort(n.child_tokens.begin(), n.child_tokens.end());
  return t;
}

int PrefixTrie::find(const SemanticIdentifier& id) const {
  int at = 0;
  for (int tok : id.tokens) {
    if (!valid_child(at, tok)) return -1;
    at = child(at, tok);
  }
  return is_terminal(at) ? at : -1;
}

std::vector<SemanticIdentifier> PrefixTrie::paths() const {
  std::vector<SemanticIdentifier> out;
  std::vector<int> prefix;
  auto walk = [&](auto&& self, int at) -> void {
    const Node& n = node(at);
    if (n.doc >= 0) {
      SemanticIdentifier id;
      id.tokens = prefix;
      out.push_back(std::move(id));
      return;
    }
    for (int tok : n.child_tokens) {
      prefix.push_back(tok);
      self(self, n.next[static_cast<std::size_t>(tok)]);
      prefix.pop_back();
    }
  };
  walk(walk, 0);
  return out;
}

PrefixTrie build_trie(const ClusterTree& tree,
                      const std::vector<std::string>& doc_ids) {
  if (tree.doc_count() != doc_ids.size())
    throw ParameterError("build_trie: tree covers " +
                         std::to_string(tree.doc_count()) + " docs, got " +
                         std::to_string(doc_ids.size()) + " doc ids");
  return PrefixTrie::from_identifiers(tree.identifiers(), doc_ids);
}

}  // namespace nci
