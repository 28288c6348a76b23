#include "nci/cluster_tree.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "nci/errors.hpp"
#include "nci/kmeans.hpp"
#include "nci/rng.hpp"

namespace nci {

std::string serialize_id(const SemanticIdentifier& id) {
  std::string s;
  for (std::size_t i = 0; i < id.tokens.size(); ++i) {
    if (i) s.push_back('-');
    s += std::to_string(id.tokens[i]);
  }
  return s;
}

SemanticIdentifier parse_id(const std::string& s) {
  SemanticIdentifier id;
  if (s.empty()) throw ParseError("parse_id: empty string");
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t dash = s.find('-', pos);
    std::size_t end = dash == std::string::npos ? s.size() : dash;
    if (end == pos)
      throw ParseError("parse_id: empty token in \"" + s + "\"");
    int value = 0;
    for (std::size_t i = pos; i < end; ++i) {
      char c = s[i];
      if (c < '0' || c > '9')
        throw ParseError("parse_id: invalid character '" + std::string(1, c) +
                         "' in \"" + s + "\"");
      value = value * 10 + (c - '0');
      if (value > 1'000'000)
        throw ParseError("parse_id: token out of range in \"" + s + "\"");
    }
    id.tokens.push_back(value);
    if (dash == std::string::npos) break;
    pos = dash + 1;
    if (pos == s.size())
      throw ParseError("parse_id: trailing '-' in \"" + s + "\"");
  }
  return id;
}

int ClusterTree::add_node(ClusterTreeNode n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

std::vector<SemanticIdentifier> ClusterTree::identifiers() const {
  std::vector<SemanticIdentifier> ids(doc_count_);
  std::vector<int> prefix;
  auto walk = [&](auto&& self, int node_id) -> void {
    const ClusterTreeNode& n = node(node_id);
    if (n.is_leaf) {
      for (std::size_t j = 0; j < n.doc_indices.size(); ++j) {
        SemanticIdentifier id;
        id.tokens = prefix;
        id.tokens.push_back(static_cast<int>(j));
        ids[static_cast<std::size_t>(n.doc_indices[j])] = std::move(id);
      }
      return;
    }
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      prefix.push_back(static_cast<int>(i));
      self(self, n.children[i]);
      prefix.pop_back();
    }
  };
  if (root_ >= 0) walk(walk, root_);
  return ids;
}

int ClusterTree::descend(const std::vector<int>& prefix) const {
  int at = root_;
  for (int tok : prefix) {
    if (at < 0) return -1;
    const ClusterTreeNode& n = node(at);
    if (n.is_leaf) return -1;
    if (tok < 0 || tok >= static_cast<int>(n.children.size())) return -1;
    at = n.children[static_cast<std::size_t>(tok)];
  }
  return at;
}

namespace {

struct HkmBuilder {
  const EmbeddingMatrix& emb;
  int k, c;
  ClusterTree tree;

  int build(std::vector<int> rows, int depth, RngStream rng) {
    KMeansResult km =
        lloyd_kmeans(emb, std::span<const int>(rows), k, rng.next_u64());
    const int keff = static_cast<int>(km.centroids.rows());
    std::vector<std::vector<int>> members(static_cast<std::size_t>(keff));
    for (std::size_t i = 0; i < rows.size(); ++i)
      members[static_cast<std::size_t>(km.assignments[i])].push_back(rows[i]);

    ClusterTreeNode node;
    node.is_leaf = false;
    node.depth = depth;
    node.centroid = Eigen::VectorXd::Zero(emb.cols());
    for (int r : rows) node.centroid += emb.row(r).transpose();
    node.centroid /= static_cast<double>(rows.size());
    int node_id = tree.add_node(std::move(node));

    std::vector<int> children;
    for (int i = 0; i < keff; ++i) {
      std::vector<int>& part = members[static_cast<std::size_t>(i)];
      int child;
      if (static_cast<int>(part.size()) > c) {
        child = build(std::move(part), depth + 1,
                      rng.derive(static_cast<std::uint64_t>(i)));
      } else {
        ClusterTreeNode leaf;
        leaf.is_leaf = true;
        leaf.depth = depth + 1;
        leaf.centroid = km.centroids.row(i).transpose();
        leaf.doc_indices = std::move(part);
        child = tree.add_node(std::move(leaf));
      }
      children.push_back(child);
    }
    tree.node_mut(node_id).children = std::move(children);
    return node_id;
  }
};

}  // namespace

HierarchicalKMeansResult hierarchical_kmeans(const EmbeddingMatrix& embeddings,
                                             int k, int c, std::uint64_t seed) {
  if (embeddings.rows() == 0)
    throw ParameterError("hierarchical_kmeans: empty embedding matrix");
  if (k < 1 || c < 1)
    throw ParameterError("hierarchical_kmeans: k and c must be >= 1");
  HkmBuilder builder{embeddings, k, c, ClusterTree(k, c)};
  std::vector<int> all(static_cast<std::size_t>(embeddings.rows()));
  std::iota(all.begin(), all.end(), 0);
  int root = builder.build(std::move(all), 0, RngStream(seed));
  builder.tree.set_root(root);
  builder.tree.set_doc_count(static_cast<std::size_t>(embeddings.rows()));
  HierarchicalKMeansResult res;
  res.tree = std::move(builder.tree);
  res.ids = res.tree.identifiers();
  return res;
}

std::vector<SemanticIdentifier> permute_identifiers(const ClusterTree& tree,
                                                    const std::vector<int>& perm) {
  std::vector<SemanticIdentifier> ids = tree.identifiers();
  if (perm.size() != ids.size())
    throw ParameterError("permute_identifiers: permutation size mismatch");
  std::vector<SemanticIdentifier> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    out[i] = ids[static_cast<std::size_t>(perm[i])];
  return out;
}

std::vector<SemanticIdentifier> random_identifiers(const ClusterTree& tree,
                                                   std::uint64_t seed) {
  std::vector<int> perm(tree.doc_count());
  std::iota(perm.begin(), perm.end(), 0);
  RngStream rng(seed);
  rng.shuffle(perm);
  return permute_identifiers(tree, perm);
}

std::string ClusterTree::to_json() const {
  nlohmann::json j;
  j["k"] = k_;
  j["c"] = c_;
  j["root"] = root_;
  j["doc_count"] = doc_count_;
  nlohmann::json nodes = nlohmann::json::array();
  for (const ClusterTreeNode& n : nodes_) {
    nlohmann::json jn;
    jn["type"] = n.is_leaf ? "leaf" : "internal";
    jn["depth"] = n.depth;
    jn["centroid"] = std::vector<double>(n.centroid.data(),
                                         n.centroid.data() + n.centroid.size());
    if (n.is_leaf)
      jn["doc_indices"] = n.doc_indices;
    else
      jn["children"] = n.children;
    nodes.push_back(std::move(jn));
  }
  j["nodes"] = std::move(nodes);
  return j.dump();
}

ClusterTree ClusterTree::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("cluster tree: invalid JSON: ") + e.what());
  }
  ClusterTree t(j.at("k").get<int>(), j.at("c").get<int>());
  t.root_ = j.at("root").get<int>();
  t.doc_count_ = j.at("doc_count").get<std::size_t>();
  for (const auto& jn : j.at("nodes")) {
    ClusterTreeNode n;
    n.is_leaf = jn.at("type").get<std::string>() == "leaf";
    n.depth = jn.at("depth").get<int>();
    std::vector<double> cen = jn.at("centroid").get<std::vector<double>>();
    n.centroid = Eigen::Map<const Eigen::VectorXd>(cen.data(),
                                                   static_cast<Eigen::Index>(cen.size()));
    if (n.is_leaf)
      n.doc_indices = jn.at("doc_indices").get<std::vector<int>>();
    else
      n.children = jn.at("children").get<std::vector<int>>();
    t.nodes_.push_back(std::move(n));
  }
  return t;
}

void save_identifier_map(const std::vector<std::string>& doc_ids,
                         const std::vector<SemanticIdentifier>& ids,
                         const std::string& path) {
  if (doc_ids.size() != ids.size())
    throw ParameterError("identifier map: doc/id count mismatch");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write identifier map: " + path);
  for (std::size_t i = 0; i < ids.size(); ++i)
    out << doc_ids[i] << '\t' << serialize_id(ids[i]) << '\n';
}

std::vector<std::pair<std::string, SemanticIdentifier>> load_identifier_map(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open identifier map: " + path);
  std::vector<std::pair<std::string, SemanticIdentifier>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected doc_id<TAB>identifier");
    out.emplace_back(line.substr(0, tab), parse_id(line.substr(tab + 1)));
  }
  return out;
}

}  // namespace nci
