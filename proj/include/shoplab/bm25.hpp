#pragma once
// BM25 inverted index. Tokenization: lowercase, split on non-alphanumeric
// runs, no stemming, no stopwords. IDF: ln(1 + (N - df + 0.5) / (df + 0.5)),
// non-negative for every df <= N.

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "shoplab/model.hpp"

namespace shoplab {

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;
};

std::vector<std::string> tokenize(std::string_view text);

class Bm25Index {
public:
    struct Posting {
        int doc_ordinal = 0;
        int term_frequency = 0;
    };

    struct Hit {
        int doc_ordinal = 0;
        double score = 0.0;
    };

    Bm25Index() = default;

    // docs are (doc_id, text) pairs in ingest order; ordinals follow it.
    static Bm25Index build(const std::vector<std::pair<std::string, std::string>>& docs,
                           Bm25Params params = {});

    // All documents with positive score, sorted by score descending, ties
    // broken by doc_id ascending. Query tokens are scored per occurrence.
    std::vector<Hit> search(const std::string& query) const;

    double score_document(int doc_ordinal, const std::vector<std::string>& query_tokens) const;

    int doc_count() const { return static_cast<int>(doc_lengths_.size()); }
    double average_doc_length() const { return average_doc_length_; }
    const std::string& doc_id(int ordinal) const { return doc_ids_[ordinal]; }
    int doc_length(int ordinal) const { return doc_lengths_[ordinal]; }
    const Bm25Params& params() const { return params_; }

    json to_json() const;
    static Bm25Index from_json(const json& j);

private:
    Bm25Params params_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::vector<int> doc_lengths_;
    std::vector<std::string> doc_ids_;
    double average_doc_length_ = 0.0;
};

}  // namespace shoplab
