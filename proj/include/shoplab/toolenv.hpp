#pragma once
// The dual-environment toolset: web search/visit (live adapter or fixture)
// and catalog search/detail lookup over the BM25 index. Tool output is
// rendered to deterministic plain text for tool-role messages.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "shoplab/bm25.hpp"
#include "shoplab/catalog.hpp"
#include "shoplab/gateway.hpp"
#include "shoplab/parsers.hpp"
#include "shoplab/templates.hpp"

namespace shoplab {

struct SearchHit {
    std::string product_id;
    std::string shop_id;
    std::string product_name;
    double price = 0.0;
    int number_of_reviews = 0;
    double score = 0.0;

    bool operator==(const SearchHit&) const = default;
};

struct PriceFilter {
    double min = 0.0;
    std::optional<double> max;  // absent = unbounded above

    // "min-max" or "min-"; throws BadPriceFilterError otherwise.
    static PriceFilter parse(const std::string& text);

    bool matches(double price) const { return price >= min && (!max || price <= *max); }
};

struct WebResult {
    std::string title;
    std::string snippet;
    std::string url;

    bool operator==(const WebResult&) const = default;
};

// ---------------------------------------------------------------------------
// Web backends
// ---------------------------------------------------------------------------

class WebBackend {
public:
    virtual ~WebBackend() = default;
    virtual std::vector<WebResult> search(const std::string& query) = 0;
    // nullopt = fetch failure
    virtual std::optional<std::string> fetch(const std::string& url) = 0;
};

// Line-delimited fixture: {"query": ..., "results": [...]} and
// {"url": ..., "page_text": ...} records. Unknown queries return empty
// result lists (the miss is logged); unknown urls are fetch failures.
class FixtureWebBackend : public WebBackend {
public:
    static std::unique_ptr<FixtureWebBackend> from_jsonl_file(const std::string& path);
    static std::unique_ptr<FixtureWebBackend> from_lines(const std::vector<std::string>& lines);

    std::vector<WebResult> search(const std::string& query) override;
    std::optional<std::string> fetch(const std::string& url) override;

    void add_query(const std::string& query, std::vector<WebResult> results);
    void add_page(const std::string& url, std::string page_text);

private:
    std::map<std::string, std::vector<WebResult>> queries_;
    std::map<std::string, std::string> pages_;
};

// Live adapter: JSON search API (Serper-style) + plain HTTP GET with
// HTML-to-text reduction. Off by default; fixtures drive all tests.
struct LiveWebConfig {
    std::string search_base_url;  // e.g. https://google.serper.dev
    std::string search_path = "/search";
    std::string api_key;
    int timeout_seconds = 30;
};

class LiveWebBackend : public WebBackend {
public:
    explicit LiveWebBackend(LiveWebConfig config);
    std::vector<WebResult> search(const std::string& query) override;
    std::optional<std::string> fetch(const std::string& url) override;

private:
    LiveWebConfig config_;
};

// ---------------------------------------------------------------------------
// Tool environment
// ---------------------------------------------------------------------------

struct ToolEnvConfig {
    int max_search_hits = 50;
    int max_web_results = 10;
    int content_window = 40000;  // chars of page text handed to the extractor
    int extractor_reprompts = 2;
};

struct DetailResult {
    std::string product_id;
    std::string status;  // found | not_found | extract_error
    ExtractorResult extract;
};

struct WebSearchGroup {
    std::string query;
    std::vector<WebResult> results;
};

struct VisitResult {
    std::string url;
    std::string status;  // ok | fetch_error | extract_error
    ExtractorResult extract;
};

class ToolEnvironment {
public:
    ToolEnvironment(Catalog catalog, Bm25Index index, std::unique_ptr<WebBackend> web,
                    std::shared_ptr<Gateway> gateway, std::string extractor_template,
                    ToolEnvConfig config = {});

    std::vector<SearchHit> product_search(const std::string& query,
                                          const std::optional<std::string>& shop_id = {},
                                          const std::optional<PriceFilter>& price = {}) const;

    // Output order matches input order; unknown ids get status not_found.
    std::vector<DetailResult> view_product_details(const std::vector<std::string>& product_ids,
                                                   const std::string& goal);

    std::vector<WebSearchGroup> web_search(const std::vector<std::string>& queries);

    std::vector<VisitResult> web_visit(const std::vector<std::string>& urls,
                                       const std::string& goal);

    // Dispatches a parsed tool call and renders the tool-role message text.
    // Tool-level argument errors are rendered into the text (the researcher
    // sees them as a tool response), not thrown.
    std::string execute(const ToolCallRecord& call);

    const Catalog& catalog() const { return catalog_; }
    const Bm25Index& index() const { return index_; }
    const ToolEnvConfig& config() const { return config_; }

private:
    ExtractorResult run_extractor(const std::string& content, const std::string& goal,
                                  bool& ok);

    Catalog catalog_;
    Bm25Index index_;
    std::unique_ptr<WebBackend> web_;
    std::shared_ptr<Gateway> gateway_;
    std::string extractor_template_;
    ToolEnvConfig config_;
};

// Deterministic tool-response renderings (frozen formats, golden-tested).
std::string render_search_hits(const std::vector<SearchHit>& hits);
std::string render_detail_results(const std::vector<DetailResult>& results);
std::string render_web_search_groups(const std::vector<WebSearchGroup>& groups);
std::string render_visit_results(const std::vector<VisitResult>& results);

}  // namespace shoplab
