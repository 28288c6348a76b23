#include "nci/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nci/rng.hpp"

namespace nci {

namespace {

std::string token_name(int i) { return "w" + std::to_string(i); }

// Balanced branching factor b with b^depth == n_topics.
int tree_branching(int n_topics, int depth) {
  if (depth == 1) return n_topics;
  int b = static_cast<int>(std::llround(std::pow(double(n_topics), 1.0 / depth)));
  for (int cand : {b - 1, b, b + 1}) {
    if (cand < 2) continue;
    long long p = 1;
    for (int i = 0; i < depth; ++i) p *= cand;
    if (p == n_topics) return cand;
  }
  throw ParameterError("n_topics=" + std::to_string(n_topics) +
                       " is not a perfect power for topic_tree_depth=" +
                       std::to_string(depth));
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusSpec& spec) {
  if (spec.n_topics < 2)
    throw ParameterError("n_topics must be >= 2, got " + std::to_string(spec.n_topics));
  if (spec.noise_rate < 0.0 || spec.noise_rate >= 1.0)
    throw ParameterError("noise_rate must be in [0, 1), got " +
                         std::to_string(spec.noise_rate));
  if (spec.topic_tree_depth < 1)
    throw ParameterError("topic_tree_depth must be >= 1");
  if (spec.n_docs < 1 || spec.n_docs % spec.n_topics != 0)
    throw ParameterError("n_docs=" + std::to_string(spec.n_docs) +
                         " not representable over " + std::to_string(spec.n_topics) +
                         " topics (must divide evenly)");
  if (spec.tokens_per_doc < 4)
    throw ParameterError("tokens_per_doc must be >= 4");
  const int block = spec.vocab_size / spec.n_topics;
  if (block < 8)
    throw ParameterError("vocab_size=" + std::to_string(spec.vocab_size) +
                         " leaves fewer than 8 tokens per topic");
  const int branching = tree_branching(spec.n_topics, spec.topic_tree_depth);
  const int docs_per_topic = spec.n_docs / spec.n_topics;
  // Per-document sub-vocabulary: small enough that same-topic documents stay
  // distinguishable, large enough to look like text.
  const int subset_size = std::max(8, block / 5);

  SyntheticCorpus out;
  RngStream root_rng(spec.seed);
  for (int d = 0; d < spec.n_docs; ++d) {
    const int topic = d / docs_per_topic;
    RngStream rng = root_rng.derive(0x10000ULL + static_cast<std::uint64_t>(d));

    // sample the document's sub-vocabulary from its topic block
    std::vector<int> block_tokens(static_cast<std::size_t>(block));
    for (int i = 0; i < block; ++i) block_tokens[static_cast<std::size_t>(i)] = topic * block + i;
    for (int i = 0; i < subset_size; ++i) {
      int j = i + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(block - i)));
      std::swap(block_tokens[static_cast<std::size_t>(i)], block_tokens[static_cast<std::size_t>(j)]);
    }
    auto draw = [&](RngStream& r) {
      if (r.next_double() < spec.noise_rate)
        return static_cast<int>(r.next_below(static_cast<std::uint64_t>(spec.vocab_size)));
      return block_tokens[static_cast<std::size_t>(r.next_below(static_cast<std::uint64_t>(subset_size)))];
    };

    Document doc;
    doc.doc_id = "d" + std::to_string(d);
    doc.title = {token_name(draw(rng)), token_name(draw(rng))};
    doc.body.reserve(static_cast<std::size_t>(spec.tokens_per_doc));
    for (int t = 0; t < spec.tokens_per_doc; ++t)
      doc.body.push_back(token_name(draw(rng)));
    out.corpus.add(std::move(doc));

    std::vector<int> path(static_cast<std::size_t>(spec.topic_tree_depth));
    int rest = topic;
    for (int level = spec.topic_tree_depth - 1; level >= 0; --level) {
      path[static_cast<std::size_t>(level)] = rest % branching;
      rest /= branching;
    }
    out.topic_paths.push_back(std::move(path));
    out.topic_of_doc.push_back(topic);

    RngStream qrng = root_rng.derive(0x20000000ULL + static_cast<std::uint64_t>(d));
    for (int q = 0; q < spec.queries_per_doc; ++q) {
      QueryDocPair p;
      p.doc_id = out.corpus.at(static_cast<std::size_t>(d)).doc_id;
      p.source = PairSource::ground_truth;
      int qlen = 8 + static_cast<int>(qrng.next_below(9));  // 8..16 tokens
      for (int t = 0; t < qlen; ++t) p.query.push_back(token_name(draw(qrng)));
      out.eval_pairs.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace nci
