#pragma once
// Product catalog: one JSON record per line. Unknown fields are preserved
// in `extra` so corpora with richer schemas survive a round trip.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shoplab/model.hpp"

namespace shoplab {

struct ProductReview {
    int rating = 0;  // 1..5
    std::string text;

    bool operator==(const ProductReview&) const = default;
};

struct ProductRecord {
    std::string product_id;  // unique corpus-wide
    std::string shop_id;
    std::string product_name;
    double price = 0.0;  // >= 0
    int number_of_reviews = 0;
    std::string category;
    std::map<std::string, std::string> attributes;
    std::vector<std::string> options;
    std::string description;
    std::vector<ProductReview> reviews;
    std::vector<double> price_history;  // stored but unsearched
    json extra = json::object();

    bool operator==(const ProductRecord&) const = default;
};

json to_json(const ProductRecord& p);
ProductRecord product_from_json(const json& j);

// Text fed to the search index: product_name + category + attribute values
// (sorted by key) + description.
std::string index_text(const ProductRecord& p);

// Full rendering used as extractor input for view_product_details.
std::string render_product_record(const ProductRecord& p);

class Catalog {
public:
    // Throws DuplicateProductIdError / MalformedRecordError with line numbers.
    static Catalog from_jsonl_file(const std::string& path);
    static Catalog from_lines(const std::vector<std::string>& lines);

    void add(ProductRecord record);  // throws on duplicate id (line = -1)

    const ProductRecord* find(const std::string& product_id) const;
    bool contains(const std::string& product_id) const { return find(product_id) != nullptr; }

    const std::vector<ProductRecord>& records() const { return records_; }
    size_t size() const { return records_.size(); }

private:
    std::vector<ProductRecord> records_;           // ingest order
    std::map<std::string, size_t> by_id_;
};

}  // namespace shoplab
