#include "nci/embed.hpp"

#include <cmath>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "nci/rng.hpp"

namespace nci {

EmbeddingMatrix hash_embed(const Corpus& corpus, int dim, std::uint64_t seed) {
  if (dim < 8)
    throw ParameterError("hash_embed: dim must be >= 8, got " + std::to_string(dim));
  EmbeddingMatrix m = EmbeddingMatrix::Zero(static_cast<Eigen::Index>(corpus.size()), dim);
  const std::uint64_t sign_seed = seed ^ 0x5851f42d4c957f2dULL;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Document& doc = corpus.at(i);
    if (doc.body.empty())
      throw EmbeddingError("document \"" + doc.doc_id + "\" has empty body");
    auto bump = [&](const std::string& tok) {
      std::uint64_t bucket = fnv1a64(tok, seed) % static_cast<std::uint64_t>(dim);
      double sign = (fnv1a64(tok, sign_seed) & 1ULL) ? 1.0 : -1.0;
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(bucket)) += sign;
    };
    for (const auto& t : doc.title) bump(t);
    for (const auto& t : doc.body) bump(t);
    double norm = m.row(static_cast<Eigen::Index>(i)).norm();
    if (norm == 0.0)
      throw EmbeddingError("document \"" + doc.doc_id + "\" hashed to the zero vector");
    m.row(static_cast<Eigen::Index>(i)) /= norm;
  }
  return m;
}

EmbeddingMatrix load_embeddings(const std::string& path, const Corpus& corpus) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file: " + path);
  EmbeddingMatrix m;
  std::vector<bool> seen(corpus.size(), false);
  std::string line;
  std::size_t lineno = 0;
  int dim = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": invalid JSON: " + e.what());
    }
    if (!rec.contains("doc_id") || !rec["doc_id"].is_string() ||
        !rec.contains("vector") || !rec["vector"].is_array())
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected fields \"doc_id\" and \"vector\"");
    std::string doc_id = rec["doc_id"].get<std::string>();
    if (!corpus.contains(doc_id))
      throw IngestionError(path + ":" + std::to_string(lineno) +
                           ": embedding for unknown doc_id \"" + doc_id + "\"");
    std::size_t row = corpus.index_of(doc_id);
    std::vector<double> v = rec["vector"].get<std::vector<double>>();
    if (dim < 0) {
      dim = static_cast<int>(v.size());
      if (dim < 1)
        throw ParseError(path + ":" + std::to_string(lineno) + ": empty vector");
      m = EmbeddingMatrix::Zero(static_cast<Eigen::Index>(corpus.size()), dim);
    } else if (static_cast<int>(v.size()) != dim) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": vector length " + std::to_string(v.size()) +
                       " differs from " + std::to_string(dim));
    }
    if (seen[row])
      throw IngestionError(path + ":" + std::to_string(lineno) +
                           ": duplicate embedding for \"" + doc_id + "\"");
    seen[row] = true;
    for (int j = 0; j < dim; ++j) m(static_cast<Eigen::Index>(row), j) = v[static_cast<std::size_t>(j)];
    double norm = m.row(static_cast<Eigen::Index>(row)).norm();
    if (norm == 0.0)
      throw EmbeddingError("zero vector for doc_id \"" + doc_id + "\"");
    m.row(static_cast<Eigen::Index>(row)) /= norm;
  }
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (!seen[i])
      throw IngestionError("no embedding for doc_id \"" + corpus.at(i).doc_id + "\"");
  return m;
}

}  // namespace nci
