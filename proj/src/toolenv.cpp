#include "shoplab/toolenv.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <sstream>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "shoplab/errors.hpp"
#include "shoplab/html_text.hpp"

namespace shoplab {

// ---------------------------------------------------------------------------
// PriceFilter
// ---------------------------------------------------------------------------

PriceFilter PriceFilter::parse(const std::string& text) {
    const size_t dash = text.find('-');
    if (dash == std::string::npos || dash == 0) throw BadPriceFilterError(text);
    auto parse_number = [&](const std::string& part) -> double {
        size_t consumed = 0;
        double value = 0.0;
        try {
            value = std::stod(part, &consumed);
        } catch (...) {
            throw BadPriceFilterError(text);
        }
        if (consumed != part.size() || value < 0.0) throw BadPriceFilterError(text);
        return value;
    };
    PriceFilter f;
    f.min = parse_number(text.substr(0, dash));
    const std::string rest = text.substr(dash + 1);
    if (!rest.empty()) {
        f.max = parse_number(rest);
        if (*f.max < f.min) throw BadPriceFilterError(text);
    }
    return f;
}

// ---------------------------------------------------------------------------
// Web backends
// ---------------------------------------------------------------------------

namespace {

bool url_is_valid(const std::string& url) {
    if (url.rfind("http://", 0) != 0 && url.rfind("https://", 0) != 0) return false;
    const size_t host_start = url.find("//") + 2;
    return host_start < url.size() && url[host_start] != '/';
}

WebResult web_result_from_json(const json& j) {
    WebResult r;
    r.title = j.value("title", "");
    r.snippet = j.value("snippet", "");
    r.url = j.value("url", j.value("link", ""));
    if (!url_is_valid(r.url)) throw Error("invalid result url: " + r.url);
    return r;
}

}  // namespace

std::unique_ptr<FixtureWebBackend> FixtureWebBackend::from_lines(
    const std::vector<std::string>& lines) {
    auto backend = std::make_unique<FixtureWebBackend>();
    int line_no = 0;
    for (const auto& line : lines) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw MalformedRecordError("invalid web fixture line", line_no);
        }
        if (j.contains("query")) {
            std::vector<WebResult> results;
            for (const auto& rj : j.value("results", json::array())) {
                results.push_back(web_result_from_json(rj));
            }
            backend->add_query(j["query"].get<std::string>(), std::move(results));
        } else if (j.contains("url")) {
            backend->add_page(j["url"].get<std::string>(), j.value("page_text", ""));
        } else {
            throw MalformedRecordError("web fixture line needs \"query\" or \"url\"", line_no);
        }
    }
    return backend;
}

std::unique_ptr<FixtureWebBackend> FixtureWebBackend::from_jsonl_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open web fixture: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return from_lines(lines);
}

void FixtureWebBackend::add_query(const std::string& query, std::vector<WebResult> results) {
    queries_[query] = std::move(results);
}

void FixtureWebBackend::add_page(const std::string& url, std::string page_text) {
    pages_[url] = std::move(page_text);
}

std::vector<WebResult> FixtureWebBackend::search(const std::string& query) {
    auto it = queries_.find(query);
    if (it == queries_.end()) {
        std::cerr << "[web-fixture] miss for query: " << query << "\n";
        return {};
    }
    return it->second;
}

std::optional<std::string> FixtureWebBackend::fetch(const std::string& url) {
    auto it = pages_.find(url);
    if (it == pages_.end()) return std::nullopt;
    return it->second;
}

LiveWebBackend::LiveWebBackend(LiveWebConfig config) : config_(std::move(config)) {}

std::vector<WebResult> LiveWebBackend::search(const std::string& query) {
    httplib::Client client(config_.search_base_url);
    client.set_connection_timeout(config_.timeout_seconds);
    client.set_read_timeout(config_.timeout_seconds);
    httplib::Headers headers{{"X-API-KEY", config_.api_key}};
    auto res = client.Post(config_.search_path, headers, json{{"q", query}}.dump(),
                           "application/json");
    if (!res) throw TransportError("web search: " + httplib::to_string(res.error()), true);
    if (res->status != 200) {
        throw TransportError("web search http " + std::to_string(res->status),
                             res->status == 429 || res->status >= 500);
    }
    json doc = json::parse(res->body, nullptr, false);
    if (doc.is_discarded()) throw TransportError("web search: unparsable body", false);
    std::vector<WebResult> out;
    for (const auto& rj : doc.value("organic", json::array())) {
        try {
            out.push_back(web_result_from_json(rj));
        } catch (const Error&) {
            continue;  // skip results with broken urls
        }
    }
    return out;
}

std::optional<std::string> LiveWebBackend::fetch(const std::string& url) {
    if (!url_is_valid(url)) return std::nullopt;
    const size_t scheme_end = url.find("//") + 2;
    size_t path_start = url.find('/', scheme_end);
    std::string base = url.substr(0, path_start == std::string::npos ? url.size() : path_start);
    std::string path =
        path_start == std::string::npos ? "/" : url.substr(path_start);
    httplib::Client client(base);
    client.set_connection_timeout(config_.timeout_seconds);
    client.set_read_timeout(config_.timeout_seconds);
    client.set_follow_location(true);
    auto res = client.Get(path);
    if (!res || res->status != 200) return std::nullopt;
    return html_to_text(res->body);
}

// ---------------------------------------------------------------------------
// ToolEnvironment
// ---------------------------------------------------------------------------

ToolEnvironment::ToolEnvironment(Catalog catalog, Bm25Index index,
                                 std::unique_ptr<WebBackend> web, std::shared_ptr<Gateway> gateway,
                                 std::string extractor_template, ToolEnvConfig config)
    : catalog_(std::move(catalog)),
      index_(std::move(index)),
      web_(std::move(web)),
      gateway_(std::move(gateway)),
      extractor_template_(std::move(extractor_template)),
      config_(config) {}

std::vector<SearchHit> ToolEnvironment::product_search(
    const std::string& query, const std::optional<std::string>& shop_id,
    const std::optional<PriceFilter>& price) const {
    std::vector<SearchHit> out;
    for (const auto& hit : index_.search(query)) {
        const ProductRecord* rec = catalog_.find(index_.doc_id(hit.doc_ordinal));
        if (!rec) continue;
        if (shop_id && rec->shop_id != *shop_id) continue;
        if (price && !price->matches(rec->price)) continue;
        out.push_back({rec->product_id, rec->shop_id, rec->product_name, rec->price,
                       rec->number_of_reviews, hit.score});
        if (static_cast<int>(out.size()) >= config_.max_search_hits) break;
    }
    return out;
}

ExtractorResult ToolEnvironment::run_extractor(const std::string& content,
                                               const std::string& goal, bool& ok) {
    ChatRequest req;
    req.agent_tag = AgentTag::Extractor;
    req.params = default_params(AgentTag::Extractor);
    req.messages.push_back({Role::System, "You are a precise content extraction assistant."});
    req.messages.push_back(
        {Role::User,
         render_template(extractor_template_, {{"webpage_content", content}, {"goal", goal}})});

    for (int attempt = 0; attempt <= config_.extractor_reprompts; ++attempt) {
        ChatResponse resp = gateway_->complete(req);
        auto parsed = parse_extractor(resp.text);
        if (parsed.ok()) {
            ok = true;
            return parsed.value();
        }
        Message reply{Role::Assistant, resp.text};
        Message correction{Role::User,
                           "Your reply could not be parsed (" + parsed.error().message() +
                               "). Respond with a single JSON object containing the fields "
                               "\"rational\", \"evidence\" and \"summary\"."};
        req.messages.push_back(reply);
        req.messages.push_back(correction);
    }
    ok = false;
    return {};
}

std::vector<DetailResult> ToolEnvironment::view_product_details(
    const std::vector<std::string>& product_ids, const std::string& goal) {
    if (product_ids.empty()) throw EmptyIdListError();
    if (goal.empty()) throw EmptyGoalError();
    std::vector<DetailResult> out;
    out.reserve(product_ids.size());
    for (const auto& id : product_ids) {
        DetailResult r;
        r.product_id = id;
        const ProductRecord* rec = catalog_.find(id);
        if (!rec) {
            r.status = "not_found";
        } else {
            bool ok = false;
            r.extract = run_extractor(render_product_record(*rec), goal, ok);
            r.status = ok ? "found" : "extract_error";
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<WebSearchGroup> ToolEnvironment::web_search(const std::vector<std::string>& queries) {
    if (queries.empty()) throw EmptyQueryListError();
    std::vector<WebSearchGroup> out;
    out.reserve(queries.size());
    for (const auto& q : queries) {
        WebSearchGroup group;
        group.query = q;
        group.results = web_->search(q);
        if (static_cast<int>(group.results.size()) > config_.max_web_results) {
            group.results.resize(config_.max_web_results);
        }
        out.push_back(std::move(group));
    }
    return out;
}

std::vector<VisitResult> ToolEnvironment::web_visit(const std::vector<std::string>& urls,
                                                    const std::string& goal) {
    if (urls.empty()) throw EmptyUrlListError();
    if (goal.empty()) throw EmptyGoalError();
    std::vector<VisitResult> out;
    out.reserve(urls.size());
    for (const auto& url : urls) {
        VisitResult r;
        r.url = url;
        auto page = web_->fetch(url);
        if (!page) {
            r.status = "fetch_error";
        } else {
            std::string content = *page;
            if (static_cast<int>(content.size()) > config_.content_window) {
                content.resize(config_.content_window);
            }
            bool ok = false;
            r.extract = run_extractor(content, goal, ok);
            r.status = ok ? "ok" : "extract_error";
        }
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Renderings
// ---------------------------------------------------------------------------

std::string render_search_hits(const std::vector<SearchHit>& hits) {
    std::ostringstream out;
    out << "Found " << hits.size() << " products:";
    int i = 0;
    for (const auto& h : hits) {
        out << "\n" << ++i << ". product_id: " << h.product_id << " | shop_id: " << h.shop_id
            << " | name: " << h.product_name << " | price: " << json(h.price).dump()
            << " | reviews: " << h.number_of_reviews;
    }
    return out.str();
}

std::string render_detail_results(const std::vector<DetailResult>& results) {
    std::ostringstream out;
    bool first = true;
    for (const auto& r : results) {
        if (!first) out << "\n\n";
        first = false;
        out << "product_id: " << r.product_id;
        if (r.status == "found") {
            out << "\nEvidence: " << r.extract.evidence << "\nSummary: " << r.extract.summary;
        } else {
            out << "\nstatus: " << r.status;
        }
    }
    return out.str();
}

std::string render_web_search_groups(const std::vector<WebSearchGroup>& groups) {
    std::ostringstream out;
    bool first = true;
    for (const auto& g : groups) {
        if (!first) out << "\n\n";
        first = false;
        out << "Results for \"" << g.query << "\":";
        if (g.results.empty()) out << " (no results)";
        int i = 0;
        for (const auto& r : g.results) {
            out << "\n" << ++i << ". " << r.title << "\n   URL: " << r.url << "\n   " << r.snippet;
        }
    }
    return out.str();
}

std::string render_visit_results(const std::vector<VisitResult>& results) {
    std::ostringstream out;
    bool first = true;
    for (const auto& r : results) {
        if (!first) out << "\n\n";
        first = false;
        out << "url: " << r.url;
        if (r.status == "ok") {
            out << "\nEvidence: " << r.extract.evidence << "\nSummary: " << r.extract.summary;
        } else {
            out << "\nstatus: " << r.status;
        }
    }
    return out.str();
}

std::string ToolEnvironment::execute(const ToolCallRecord& call) {
    try {
        const json& args = call.arguments;
        if (call.tool_name == "web_search") {
            return render_web_search_groups(
                web_search(args.at("queries").get<std::vector<std::string>>()));
        }
        if (call.tool_name == "web_visit") {
            return render_visit_results(web_visit(args.at("urls").get<std::vector<std::string>>(),
                                                  args.at("goal").get<std::string>()));
        }
        if (call.tool_name == "product_search") {
            std::optional<std::string> shop_id;
            if (args.contains("shop_id")) shop_id = args["shop_id"].get<std::string>();
            std::optional<PriceFilter> price;
            if (args.contains("price")) price = PriceFilter::parse(args["price"].get<std::string>());
            return render_search_hits(
                product_search(args.at("query").get<std::string>(), shop_id, price));
        }
        if (call.tool_name == "view_product_details") {
            return render_detail_results(
                view_product_details(args.at("product_ids").get<std::vector<std::string>>(),
                                     args.at("goal").get<std::string>()));
        }
        return "Error: unknown tool \"" + call.tool_name + "\"";
    } catch (const Error& e) {
        return std::string("Error: ") + e.what();
    } catch (const json::exception& e) {
        return std::string("Error: bad tool arguments: ") + e.what();
    }
}

}  // namespace shoplab
