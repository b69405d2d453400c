#include "shoplab/catalog.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "shoplab/errors.hpp"

namespace shoplab {

namespace {

const std::set<std::string>& known_fields() {
    static const std::set<std::string> fields = {
        "product_id", "shop_id",    "product_name", "price",   "number_of_reviews",
        "category",   "attributes", "options",      "description", "reviews",
        "price_history"};
    return fields;
}

}  // namespace

json to_json(const ProductRecord& p) {
    json j{{"product_id", p.product_id},
           {"shop_id", p.shop_id},
           {"product_name", p.product_name},
           {"price", p.price},
           {"number_of_reviews", p.number_of_reviews},
           {"category", p.category},
           {"description", p.description}};
    json attrs = json::object();
    for (const auto& [k, v] : p.attributes) attrs[k] = v;
    j["attributes"] = attrs;
    j["options"] = p.options;
    json reviews = json::array();
    for (const auto& r : p.reviews) reviews.push_back(json{{"rating", r.rating}, {"text", r.text}});
    j["reviews"] = reviews;
    if (!p.price_history.empty()) j["price_history"] = p.price_history;
    for (auto it = p.extra.begin(); it != p.extra.end(); ++it) j[it.key()] = it.value();
    return j;
}

ProductRecord product_from_json(const json& j) {
    if (!j.is_object()) throw Error("product record must be a JSON object");
    ProductRecord p;
    if (!j.contains("product_id") || !j["product_id"].is_string() ||
        j["product_id"].get<std::string>().empty()) {
        throw Error("product record needs a non-empty string product_id");
    }
    p.product_id = j["product_id"].get<std::string>();
    p.shop_id = j.value("shop_id", "");
    p.product_name = j.value("product_name", "");
    p.price = j.value("price", 0.0);
    if (p.price < 0) throw Error("price must be >= 0");
    p.number_of_reviews = j.value("number_of_reviews", 0);
    if (p.number_of_reviews < 0) throw Error("number_of_reviews must be >= 0");
    p.category = j.value("category", "");
    p.description = j.value("description", "");
    if (j.contains("attributes")) {
        for (auto it = j["attributes"].begin(); it != j["attributes"].end(); ++it) {
            p.attributes[it.key()] =
                it.value().is_string() ? it.value().get<std::string>() : it.value().dump();
        }
    }
    if (j.contains("options")) {
        for (const auto& o : j["options"]) p.options.push_back(o.get<std::string>());
    }
    if (j.contains("reviews")) {
        for (const auto& r : j["reviews"]) {
            ProductReview rev;
            rev.rating = r.value("rating", 0);
            rev.text = r.value("text", "");
            if (rev.rating < 1 || rev.rating > 5) throw Error("review rating must be 1..5");
            p.reviews.push_back(std::move(rev));
        }
    }
    if (j.contains("price_history")) {
        for (const auto& v : j["price_history"]) p.price_history.push_back(v.get<double>());
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known_fields().count(it.key())) p.extra[it.key()] = it.value();
    }
    return p;
}

std::string index_text(const ProductRecord& p) {
    std::string out = p.product_name;
    out += " ";
    out += p.category;
    for (const auto& [k, v] : p.attributes) {  // std::map: sorted by key
        out += " ";
        out += v;
    }
    out += " ";
    out += p.description;
    return out;
}

std::string render_product_record(const ProductRecord& p) {
    std::ostringstream out;
    out << "product_id: " << p.product_id << "\n";
    out << "name: " << p.product_name << "\n";
    out << "shop_id: " << p.shop_id << "\n";
    out << "price: " << json(p.price).dump() << "\n";
    out << "category: " << p.category << "\n";
    out << "number_of_reviews: " << p.number_of_reviews << "\n";
    if (!p.attributes.empty()) {
        out << "attributes:\n";
        for (const auto& [k, v] : p.attributes) out << "  " << k << ": " << v << "\n";
    }
    if (!p.options.empty()) {
        out << "options:\n";
        for (const auto& o : p.options) out << "- " << o << "\n";
    }
    out << "description: " << p.description << "\n";
    if (!p.reviews.empty()) {
        out << "reviews:\n";
        for (const auto& r : p.reviews) out << "- [" << r.rating << "/5] " << r.text << "\n";
    }
    return out.str();
}

void Catalog::add(ProductRecord record) {
    if (by_id_.count(record.product_id)) {
        throw DuplicateProductIdError(record.product_id, -1);
    }
    by_id_[record.product_id] = records_.size();
    records_.push_back(std::move(record));
}

const ProductRecord* Catalog::find(const std::string& product_id) const {
    auto it = by_id_.find(product_id);
    return it == by_id_.end() ? nullptr : &records_[it->second];
}

Catalog Catalog::from_lines(const std::vector<std::string>& lines) {
    Catalog c;
    int line_no = 0;
    for (const auto& line : lines) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw MalformedRecordError("invalid JSON", line_no);
        ProductRecord rec;
        try {
            rec = product_from_json(j);
        } catch (const Error& e) {
            throw MalformedRecordError(e.what(), line_no);
        }
        if (c.by_id_.count(rec.product_id)) {
            throw DuplicateProductIdError(rec.product_id, line_no);
        }
        c.add(std::move(rec));
    }
    return c;
}

Catalog Catalog::from_jsonl_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return from_lines(lines);
}

}  // namespace shoplab
