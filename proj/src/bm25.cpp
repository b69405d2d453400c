#include "shoplab/bm25.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

namespace shoplab {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

Bm25Index Bm25Index::build(const std::vector<std::pair<std::string, std::string>>& docs,
                           Bm25Params params) {
    Bm25Index idx;
    idx.params_ = params;
    long long total_len = 0;
    for (int ord = 0; ord < static_cast<int>(docs.size()); ++ord) {
        const auto& [id, text] = docs[ord];
        idx.doc_ids_.push_back(id);
        auto tokens = tokenize(text);
        idx.doc_lengths_.push_back(static_cast<int>(tokens.size()));
        total_len += static_cast<long long>(tokens.size());
        std::map<std::string, int> tf;
        for (const auto& t : tokens) ++tf[t];
        for (const auto& [term, count] : tf) {
            idx.postings_[term].push_back({ord, count});
        }
    }
    idx.average_doc_length_ =
        docs.empty() ? 0.0 : static_cast<double>(total_len) / static_cast<double>(docs.size());
    return idx;
}

namespace {

double idf(int doc_count, int df) {
    return std::log(1.0 + (doc_count - df + 0.5) / (df + 0.5));
}

}  // namespace

double Bm25Index::score_document(int doc_ordinal,
                                 const std::vector<std::string>& query_tokens) const {
    double score = 0.0;
    for (const auto& term : query_tokens) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        int tf = 0;
        for (const auto& p : it->second) {
            if (p.doc_ordinal == doc_ordinal) {
                tf = p.term_frequency;
                break;
            }
        }
        if (tf == 0) continue;
        const double df = static_cast<double>(it->second.size());
        const double norm =
            tf + params_.k1 * (1.0 - params_.b +
                               params_.b * doc_length(doc_ordinal) / average_doc_length_);
        score += idf(doc_count(), static_cast<int>(df)) * (tf * (params_.k1 + 1.0)) / norm;
    }
    return score;
}

std::vector<Bm25Index::Hit> Bm25Index::search(const std::string& query) const {
    const auto tokens = tokenize(query);
    std::unordered_map<int, double> scores;
    for (const auto& term : tokens) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const double term_idf = idf(doc_count(), static_cast<int>(it->second.size()));
        for (const auto& p : it->second) {
            const double norm =
                p.term_frequency +
                params_.k1 * (1.0 - params_.b +
                              params_.b * doc_length(p.doc_ordinal) / average_doc_length_);
            scores[p.doc_ordinal] +=
                term_idf * (p.term_frequency * (params_.k1 + 1.0)) / norm;
        }
    }
    std::vector<Hit> hits;
    hits.reserve(scores.size());
    for (const auto& [ord, score] : scores) {
        if (score > 0.0) hits.push_back({ord, score});
    }
    std::sort(hits.begin(), hits.end(), [this](const Hit& a, const Hit& b) {
        if (a.score != b.score) return a.score > b.score;
        return doc_ids_[a.doc_ordinal] < doc_ids_[b.doc_ordinal];
    });
    return hits;
}

json Bm25Index::to_json() const {
    json postings = json::object();
    // sort terms for stable output
    std::map<std::string, const std::vector<Posting>*> sorted;
    for (const auto& [term, plist] : postings_) sorted[term] = &plist;
    for (const auto& [term, plist] : sorted) {
        json arr = json::array();
        for (const auto& p : *plist) arr.push_back(json::array({p.doc_ordinal, p.term_frequency}));
        postings[term] = arr;
    }
    return json{{"k1", params_.k1},
                {"b", params_.b},
                {"doc_ids", doc_ids_},
                {"doc_lengths", doc_lengths_},
                {"average_doc_length", average_doc_length_},
                {"postings", postings}};
}

Bm25Index Bm25Index::from_json(const json& j) {
    Bm25Index idx;
    idx.params_.k1 = j.at("k1").get<double>();
    idx.params_.b = j.at("b").get<double>();
    idx.doc_ids_ = j.at("doc_ids").get<std::vector<std::string>>();
    idx.doc_lengths_ = j.at("doc_lengths").get<std::vector<int>>();
    idx.average_doc_length_ = j.at("average_doc_length").get<double>();
    for (auto it = j.at("postings").begin(); it != j.at("postings").end(); ++it) {
        std::vector<Posting> plist;
        for (const auto& p : it.value()) {
            plist.push_back({p[0].get<int>(), p[1].get<int>()});
        }
        idx.postings_[it.key()] = std::move(plist);
    }
    return idx;
}

}  // namespace shoplab
