#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "shoplab/errors.hpp"
#include "shoplab/html_text.hpp"
#include "shoplab/toolenv.hpp"
#include "support.hpp"

using namespace shoplab;

TEST_CASE("tokenize: lowercase, split on non-alphanumeric runs") {
    CHECK(tokenize("Red-Dog  Bowl! 20oz") ==
          std::vector<std::string>{"red", "dog", "bowl", "20oz"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("...").empty());
}

TEST_CASE("ingest: doc_count and average doc length match hand-tokenized fixture") {
    std::vector<std::string> lines = {
        R"({"product_id":"r1","product_name":"Red Dog Bowl","category":"bowls","description":"ceramic bowl"})",
        R"({"product_id":"r2","product_name":"Blue Cat Bed","category":"beds","description":"soft bed"})",
        R"({"product_id":"r3","product_name":"Fish Tank","category":"aquarium","description":"glass tank 20 gallons"})",
    };
    Catalog c = Catalog::from_lines(lines);
    Bm25Index idx = testsup::make_index(c);
    CHECK(idx.doc_count() == 3);
    // hand-tokenized: 6 + 6 + 7 tokens
    CHECK(idx.doc_length(0) == 6);
    CHECK(idx.doc_length(1) == 6);
    CHECK(idx.doc_length(2) == 7);
    CHECK(idx.average_doc_length() == doctest::Approx(19.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("ingest: duplicate product_id names the line") {
    std::vector<std::string> lines = {
        R"({"product_id":"p1","product_name":"a"})",
        R"({"product_id":"p1","product_name":"b"})",
    };
    try {
        Catalog::from_lines(lines);
        FAIL("expected DuplicateProductIdError");
    } catch (const DuplicateProductIdError& e) {
        CHECK(e.product_id == "p1");
        CHECK(e.line == 2);
    }
}

TEST_CASE("ingest: malformed record names the line") {
    std::vector<std::string> lines = {R"({"product_id":"p1"})", "not json"};
    try {
        Catalog::from_lines(lines);
        FAIL("expected MalformedRecordError");
    } catch (const MalformedRecordError& e) {
        CHECK(e.line == 2);
    }
}

TEST_CASE("ingest: empty corpus yields empty index, searches return nothing") {
    Catalog c = Catalog::from_lines({});
    Bm25Index idx = testsup::make_index(c);
    CHECK(idx.doc_count() == 0);
    CHECK(idx.search("anything").empty());
}

TEST_CASE("product record: unknown fields survive a round trip in extra") {
    json j = json::parse(
        R"({"product_id":"x","product_name":"n","brand":"Acme","popularity":0.9})");
    ProductRecord p = product_from_json(j);
    CHECK(p.extra["brand"] == "Acme");
    json back = to_json(p);
    CHECK(back["brand"] == "Acme");
    CHECK(back["popularity"] == 0.9);
}

// --- independent BM25 oracle (own tokenizer, own formula) ---

namespace {

std::vector<std::string> oracle_tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

struct OracleHit {
    std::string id;
    double score;
};

std::vector<OracleHit> oracle_bm25(const std::vector<std::pair<std::string, std::string>>& docs,
                                   const std::string& query, double k1 = 0.9, double b = 0.4) {
    const int n = static_cast<int>(docs.size());
    std::vector<std::vector<std::string>> toks(n);
    double total = 0;
    for (int i = 0; i < n; ++i) {
        toks[i] = oracle_tokenize(docs[i].second);
        total += static_cast<double>(toks[i].size());
    }
    const double avgdl = n ? total / n : 0;
    const auto qtoks = oracle_tokenize(query);

    std::vector<OracleHit> hits;
    for (int i = 0; i < n; ++i) {
        double score = 0;
        for (const auto& qt : qtoks) {
            int tf = 0;
            for (const auto& t : toks[i]) {
                if (t == qt) ++tf;
            }
            if (tf == 0) continue;
            int df = 0;
            for (int d = 0; d < n; ++d) {
                for (const auto& t : toks[d]) {
                    if (t == qt) {
                        ++df;
                        break;
                    }
                }
            }
            const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
            const double dl = static_cast<double>(toks[i].size());
            score += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * dl / avgdl));
        }
        if (score > 0) hits.push_back({docs[i].first, score});
    }
    std::sort(hits.begin(), hits.end(), [](const OracleHit& a, const OracleHit& b2) {
        if (a.score != b2.score) return a.score > b2.score;
        return a.id < b2.id;
    });
    return hits;
}

}  // namespace

TEST_CASE("bm25: five-doc ranking equals the brute-force oracle") {
    std::vector<std::pair<std::string, std::string>> docs = {
        {"d1", "wireless mouse with silent clicks"},
        {"d2", "wired mouse for gaming"},
        {"d3", "wireless mechanical keyboard"},
        {"d4", "mouse pad extra large"},
        {"d5", "bluetooth wireless mouse and keyboard combo"},
    };
    Bm25Index idx = Bm25Index::build(docs);
    auto hits = idx.search("wireless mouse");
    auto expected = oracle_bm25(docs, "wireless mouse");
    REQUIRE(hits.size() == expected.size());
    for (size_t i = 0; i < hits.size(); ++i) {
        CHECK(idx.doc_id(hits[i].doc_ordinal) == expected[i].id);
        CHECK(hits[i].score == doctest::Approx(expected[i].score).epsilon(1e-9));
    }
}

TEST_CASE("bm25: term absent from every document yields no hits") {
    Catalog c = testsup::make_test_catalog();
    Bm25Index idx = testsup::make_index(c);
    CHECK(idx.search("zzzunknownterm").empty());
}

TEST_CASE("price filter parsing") {
    PriceFilter f1 = PriceFilter::parse("0-100");
    CHECK(f1.min == 0);
    CHECK(*f1.max == 100);
    PriceFilter f2 = PriceFilter::parse("1000-");
    CHECK(f2.min == 1000);
    CHECK(!f2.max.has_value());
    PriceFilter f3 = PriceFilter::parse("19.5-29.5");
    CHECK(f3.min == 19.5);
    CHECK(*f3.max == 29.5);

    for (const std::string bad : {"abc", "-100", "10-5", "10", "", "5-x", "5--10"}) {
        CHECK_THROWS_AS(PriceFilter::parse(bad), BadPriceFilterError);
    }
}

TEST_CASE("product_search: filters are sound, min- means no upper bound") {
    auto gw = testsup::scripted_gateway(Script{});
    ToolEnvironment env = testsup::make_env(gw);

    // "wireless keyboard" matches p1 (wireless) and p2 (keyboard)
    auto no_filter = env.product_search("wireless keyboard");
    CHECK(no_filter.size() == 2);

    auto priced =
        env.product_search("wireless keyboard", std::nullopt, PriceFilter::parse("1000-"));
    REQUIRE(priced.size() == 1);
    CHECK(priced[0].product_id == "p2");
    CHECK(priced[0].price == 1500);

    auto shop = env.product_search("wireless keyboard dock", std::string("s2"));
    REQUIRE(shop.size() == 1);
    CHECK(shop[0].product_id == "p3");

    for (const auto& hit :
         env.product_search("usb dock", std::nullopt, PriceFilter{50.0, 100.0})) {
        CHECK(hit.price >= 50.0);
        CHECK(hit.price <= 100.0);
    }
}

TEST_CASE("product_search: zero-match query returns empty list") {
    auto gw = testsup::scripted_gateway(Script{});
    ToolEnvironment env = testsup::make_env(gw);
    CHECK(env.product_search("nonexistent gadget qqq").empty());
}

TEST_CASE("view_product_details: order preserved, misses marked not_found") {
    testsup::ScriptBuilder sb;
    sb.add(AgentTag::Extractor, testsup::extractor_json("battery is 160h", "long battery"));
    auto gw = testsup::scripted_gateway(sb.script);
    ToolEnvironment env = testsup::make_env(gw);

    auto results = env.view_product_details({"p1", "zzz"}, "battery life");
    REQUIRE(results.size() == 2);
    CHECK(results[0].product_id == "p1");
    CHECK(results[0].status == "found");
    CHECK(results[0].extract.evidence == "battery is 160h");
    CHECK(results[1].product_id == "zzz");
    CHECK(results[1].status == "not_found");

    CHECK_THROWS_AS(env.view_product_details({}, "goal"), EmptyIdListError);
    CHECK_THROWS_AS(env.view_product_details({"p1"}, ""), EmptyGoalError);
}

TEST_CASE("view_product_details: extractor reprompts then extract_error") {
    SUBCASE("two bad replies then a good one succeeds") {
        testsup::ScriptBuilder sb;
        sb.add(AgentTag::Extractor, "not json at all")
            .add(AgentTag::Extractor, "{\"evidence\":\"e\"}")
            .add(AgentTag::Extractor, testsup::extractor_json("e", "s"));
        auto gw = testsup::scripted_gateway(sb.script);
        ToolEnvironment env = testsup::make_env(gw);
        auto results = env.view_product_details({"p1"}, "goal");
        CHECK(results[0].status == "found");
        CHECK(results[0].extract.summary == "s");
    }
    SUBCASE("three bad replies exhaust the reprompts") {
        testsup::ScriptBuilder sb;
        for (int i = 0; i < 3; ++i) sb.add(AgentTag::Extractor, "still not json");
        auto gw = testsup::scripted_gateway(sb.script);
        ToolEnvironment env = testsup::make_env(gw);
        auto results = env.view_product_details({"p1"}, "goal");
        CHECK(results[0].status == "extract_error");
    }
}

TEST_CASE("web_search: fixture echo, order, cap at 10") {
    auto gw = testsup::scripted_gateway(Script{});
    Catalog c = testsup::make_test_catalog();
    auto web = std::make_unique<FixtureWebBackend>();
    web->add_query("best ssd 2025", {{"a", "s1", "https://x.com/a"},
                                     {"b", "s2", "https://x.com/b"},
                                     {"c", "s3", "https://x.com/c"}});
    std::vector<WebResult> many;
    for (int i = 0; i < 12; ++i) {
        many.push_back({"t" + std::to_string(i), "s", "https://x.com/" + std::to_string(i)});
    }
    web->add_query("huge", many);
    TemplateSet templates = TemplateSet::load(testsup::templates_dir());
    ToolEnvironment env(std::move(c), testsup::make_index(testsup::make_test_catalog()),
                        std::move(web), gw, templates.text(TemplateId::Extractor));

    auto groups = env.web_search({"best ssd 2025", "huge", "unknown query"});
    REQUIRE(groups.size() == 3);
    CHECK(groups[0].query == "best ssd 2025");
    REQUIRE(groups[0].results.size() == 3);
    CHECK(groups[0].results[0].title == "a");
    CHECK(groups[1].results.size() == 10);  // truncated from 12
    CHECK(groups[2].results.empty());       // fixture miss -> empty with logged miss

    CHECK_THROWS_AS(env.web_search({}), EmptyQueryListError);
}

TEST_CASE("web_visit: per-url isolation and content window") {
    SUBCASE("one bad and one good url") {
        testsup::ScriptBuilder sb;
        sb.add(AgentTag::Extractor, testsup::extractor_json("dock evidence", "dock summary"));
        auto gw = testsup::scripted_gateway(sb.script);
        ToolEnvironment env = testsup::make_env(gw);
        auto results = env.web_visit({"https://example.com/docks", "https://example.com/missing"},
                                     "port count");
        REQUIRE(results.size() == 2);
        CHECK(results[0].status == "ok");
        CHECK(results[0].extract.summary == "dock summary");
        CHECK(results[1].status == "fetch_error");
        CHECK_THROWS_AS(env.web_visit({}, "goal"), EmptyUrlListError);
        CHECK_THROWS_AS(env.web_visit({"https://example.com/docks"}, ""), EmptyGoalError);
    }
    SUBCASE("page text is truncated to content_window before the extractor sees it") {
        std::string captured;
        auto backend = std::make_shared<testsup::FnBackend>([&](const ChatRequest& req) {
            captured = req.messages.back().content;
            return testsup::extractor_json("e", "s");
        });
        auto gw = std::make_shared<Gateway>(backend, RetryPolicy{0, 0});
        Catalog c = testsup::make_test_catalog();
        auto web = std::make_unique<FixtureWebBackend>();
        web->add_page("https://example.com/long", std::string(100000, 'a'));
        TemplateSet templates = TemplateSet::load(testsup::templates_dir());
        ToolEnvConfig config;
        config.content_window = 40000;
        ToolEnvironment env(std::move(c), testsup::make_index(testsup::make_test_catalog()),
                            std::move(web), gw, templates.text(TemplateId::Extractor), config);

        auto results = env.web_visit({"https://example.com/long"}, "anything");
        CHECK(results[0].status == "ok");
        // the longest run of 'a' in the rendered prompt is exactly the window
        size_t longest = 0;
        size_t run = 0;
        for (char ch : captured) {
            run = ch == 'a' ? run + 1 : 0;
            longest = std::max(longest, run);
        }
        CHECK(longest == 40000);
    }
}

TEST_CASE("execute: renders tool output and tool-level errors as text") {
    testsup::ScriptBuilder sb;
    sb.add(AgentTag::Extractor, testsup::extractor_json("e", "s"));
    auto gw = testsup::scripted_gateway(sb.script);
    ToolEnvironment env = testsup::make_env(gw);

    ToolCallRecord search{"c1", "product_search",
                          json{{"query", "usb dock"}, {"price", "50-100"}}};
    std::string text = env.execute(search);
    CHECK(text.find("Found 1 products:") == 0);
    CHECK(text.find("product_id: p3") != std::string::npos);
    CHECK(text.find("price: 79.5") != std::string::npos);

    ToolCallRecord bad_price{"c2", "product_search", json{{"query", "x"}, {"price", "oops"}}};
    CHECK(env.execute(bad_price).rfind("Error: bad price filter", 0) == 0);

    ToolCallRecord details{"c3", "view_product_details",
                           json{{"product_ids", json::array({"p1"})}, {"goal", "g"}}};
    std::string details_text = env.execute(details);
    CHECK(details_text.find("Evidence: e") != std::string::npos);
    CHECK(details_text.find("Summary: s") != std::string::npos);
}

TEST_CASE("html_to_text: tags, scripts, entities, whitespace") {
    const std::string html =
        "<html><head><title>x</title><style>p{color:red}</style></head><body>"
        "<h1>Quiet &amp; Comfy</h1><script>var a=1;</script>"
        "<p>First   paragraph.</p><p>Second &lt;b&gt; paragraph.</p>"
        "<!-- a comment --><div>End</div></body></html>";
    const std::string text = html_to_text(html);
    CHECK(text.find("Quiet & Comfy") != std::string::npos);
    CHECK(text.find("First paragraph.") != std::string::npos);
    CHECK(text.find("Second <b> paragraph.") != std::string::npos);
    CHECK(text.find("var a=1") == std::string::npos);
    CHECK(text.find("color:red") == std::string::npos);
    CHECK(text.find("a comment") == std::string::npos);
}

TEST_CASE("bm25: identical corpus and query give a bitwise-identical hit list") {
    Catalog c = testsup::make_test_catalog();
    Bm25Index a = testsup::make_index(c);
    Bm25Index b = testsup::make_index(c);
    auto ha = a.search("silent wireless keyboard dock");
    auto hb = b.search("silent wireless keyboard dock");
    REQUIRE(ha.size() == hb.size());
    for (size_t i = 0; i < ha.size(); ++i) {
        CHECK(ha[i].doc_ordinal == hb[i].doc_ordinal);
        CHECK(ha[i].score == hb[i].score);  // bitwise
    }
}

TEST_CASE("bm25 index: persisted form round-trips") {
    Catalog c = testsup::make_test_catalog();
    Bm25Index idx = testsup::make_index(c);
    Bm25Index back = Bm25Index::from_json(idx.to_json());
    auto a = idx.search("wireless keyboard dock");
    auto b = back.search("wireless keyboard dock");
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].doc_ordinal == b[i].doc_ordinal);
        CHECK(a[i].score == b[i].score);
    }
}
