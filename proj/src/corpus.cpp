#include "nci/corpus.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace nci {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isspace(c)) {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    } else if (c < 0x80 && std::ispunct(c)) {
      // stripped
    } else if (c < 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s.push_back(' ');
    s += tokens[i];
  }
  return s;
}

const char* pair_source_name(PairSource s) {
  switch (s) {
    case PairSource::ground_truth: return "ground_truth";
    case PairSource::doc_first_terms: return "doc_first_terms";
    case PairSource::doc_random_span: return "doc_random_span";
    case PairSource::pseudo_query: return "pseudo_query";
  }
  return "unknown";
}

void Corpus::add(Document doc) {
  if (index_.count(doc.doc_id))
    throw IngestionError("duplicate doc_id \"" + doc.doc_id + "\"");
  index_.emplace(doc.doc_id, docs_.size());
  docs_.push_back(std::move(doc));
}

std::size_t Corpus::index_of(const std::string& doc_id) const {
  auto it = index_.find(doc_id);
  if (it == index_.end())
    throw IngestionError("unknown doc_id \"" + doc_id + "\"");
  return it->second;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path);
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
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
    auto field = [&](const char* name) -> std::string {
      if (!rec.contains(name) || !rec[name].is_string())
        throw ParseError(path + ":" + std::to_string(lineno) +
                         ": missing or non-string field \"" + name + "\"");
      return rec[name].get<std::string>();
    };
    Document doc;
    doc.doc_id = field("doc_id");
    doc.title = tokenize(field("title"));
    doc.body = tokenize(field("body"));
    if (doc.body.empty())
      throw ParseError(path + ":" + std::to_string(lineno) + ": empty body");
    corpus.add(std::move(doc));
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus file: " + path);
  for (const Document& d : corpus.docs()) {
    nlohmann::json rec = {{"doc_id", d.doc_id},
                          {"title", join_tokens(d.title)},
                          {"body", join_tokens(d.body)}};
    out << rec.dump() << '\n';
  }
}

std::vector<QueryDocPair> load_query_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open query-pair file: " + path);
  std::vector<QueryDocPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected query<TAB>doc_id");
    QueryDocPair p;
    p.query = tokenize(line.substr(0, tab));
    p.doc_id = line.substr(tab + 1);
    if (p.query.empty())
      throw ParseError(path + ":" + std::to_string(lineno) + ": empty query");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void save_query_pairs(const std::vector<QueryDocPair>& pairs,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write query-pair file: " + path);
  for (const QueryDocPair& p : pairs)
    out << join_tokens(p.query) << '\t' << p.doc_id << '\n';
}

}  // namespace nci
