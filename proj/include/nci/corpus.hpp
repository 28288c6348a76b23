#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nci/errors.hpp"

namespace nci {

// Whitespace split + ASCII lowercasing + punctuation stripping. Tokens that
// consist solely of punctuation disappear. Bytes outside ASCII pass through
// untouched, so UTF-8 content survives.
std::vector<std::string> tokenize(std::string_view text);

std::string join_tokens(const std::vector<std::string>& tokens);

struct Document {
  std::string doc_id;
  std::vector<std::string> title;
  std::vector<std::string> body;
};

enum class PairSource { ground_truth, doc_first_terms, doc_random_span, pseudo_query };

const char* pair_source_name(PairSource s);

struct QueryDocPair {
  std::vector<std::string> query;
  std::string doc_id;
  PairSource source = PairSource::ground_truth;
};

class Corpus {
 public:
  // Rejects duplicate doc_ids.
  void add(Document doc);

  std::size_t size() const { return docs_.size(); }
  const Document& at(std::size_t i) const { return docs_[i]; }
  const std::vector<Document>& docs() const { return docs_; }

  bool contains(const std::string& doc_id) const {
    return index_.count(doc_id) != 0;
  }
  // Index of doc_id in corpus order; throws IngestionError when absent.
  std::size_t index_of(const std::string& doc_id) const;

 private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> index_;
};

// JSON Lines, one object per line with string fields "doc_id", "title",
// "body". Title and body are tokenized on load.
Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

// Tab-separated query-text / doc_id. Loaded pairs carry ground_truth source.
std::vector<QueryDocPair> load_query_pairs(const std::string& path);
void save_query_pairs(const std::vector<QueryDocPair>& pairs,
                      const std::string& path);

}  // namespace nci
