#pragma once
// Shared helpers for the test suites: script building, canned agent output
// texts, a tiny in-memory catalog, and temp directories.

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "shoplab/gateway.hpp"
#include "shoplab/model.hpp"
#include "shoplab/synthesis.hpp"
#include "shoplab/toolenv.hpp"

#ifndef SHOPLAB_REPO_DIR
#define SHOPLAB_REPO_DIR "."
#endif

namespace testsup {

using namespace shoplab;

inline std::string repo_dir() { return SHOPLAB_REPO_DIR; }
inline std::string templates_dir() { return repo_dir() + "/templates"; }
inline std::string fixtures_dir() { return repo_dir() + "/fixtures"; }

inline std::string make_temp_dir(const std::string& hint) {
    std::string tmpl = (std::filesystem::temp_directory_path() / (hint + ".XXXXXX")).string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
    return std::string(buf.data());
}

// Backend driven by a function; useful for fault injection and request capture.
class FnBackend : public LlmBackend {
public:
    using Fn = std::function<std::string(const ChatRequest&)>;
    explicit FnBackend(Fn fn) : fn_(std::move(fn)) {}
    ChatResponse complete(const ChatRequest& req) override {
        ChatResponse r;
        r.text = fn_(req);
        r.backend_id = "fn";
        r.usage.prompt_tokens = 1;
        r.usage.completion_tokens = 1;
        return r;
    }
    std::string id() const override { return "fn"; }

private:
    Fn fn_;
};

struct ScriptBuilder {
    Script script;
    std::map<AgentTag, int> next;

    ScriptBuilder& add(AgentTag tag, std::string text) {
        ScriptEntry e;
        e.agent_tag = tag;
        e.sequence_index = next[tag]++;
        e.response_text = std::move(text);
        script.entries.push_back(std::move(e));
        return *this;
    }
};

// --- canned agent outputs ---

inline std::string plan_text(const std::string& think) { return "<think>" + think + "</think>"; }

inline std::string tool_text(const std::string& think, const std::string& name,
                             const std::string& args_json) {
    return "<think>" + think + "</think>\n<tool_call>\n{\"name\": \"" + name +
           "\", \"arguments\": " + args_json + "}\n</tool_call>";
}

inline std::string answer_text(const std::string& think, const std::string& answer) {
    return "<think>" + think + "</think>\n<answer>" + answer + "</answer>";
}

inline std::string verdict_xml(bool approved, const std::string& feedback,
                               const std::string& reason) {
    return std::string("<supervisor_response>\n<approved>") + (approved ? "true" : "false") +
           "</approved>\n<feedback>" + feedback + "</feedback>\n<reason>" + reason +
           "</reason>\n</supervisor_response>";
}

inline std::string approve_xml() { return verdict_xml(true, "looks good", "ok"); }
inline std::string reject_xml(const std::string& feedback) {
    return verdict_xml(false, feedback, "needs work");
}

inline std::string extractor_json(const std::string& evidence, const std::string& summary) {
    json j{{"rational", "matches the goal"}, {"evidence", evidence}, {"summary", summary}};
    return j.dump();
}

// --- tiny catalog: p1 mouse / p2 keyboard / p3 dock ---

inline Catalog make_test_catalog() {
    Catalog c;
    ProductRecord p1;
    p1.product_id = "p1";
    p1.shop_id = "s1";
    p1.product_name = "silent wireless mouse";
    p1.price = 500;
    p1.number_of_reviews = 10;
    p1.category = "mice";
    p1.description = "a quiet wireless mouse";
    ProductRecord p2;
    p2.product_id = "p2";
    p2.shop_id = "s1";
    p2.product_name = "wired keyboard";
    p2.price = 1500;
    p2.number_of_reviews = 5;
    p2.category = "keyboards";
    p2.description = "a sturdy wired keyboard";
    ProductRecord p3;
    p3.product_id = "p3";
    p3.shop_id = "s2";
    p3.product_name = "usb dock";
    p3.price = 79.5;
    p3.number_of_reviews = 3;
    p3.category = "docks";
    p3.description = "a compact usb dock";
    c.add(p1);
    c.add(p2);
    c.add(p3);
    return c;
}

inline Bm25Index make_index(const Catalog& c) {
    std::vector<std::pair<std::string, std::string>> docs;
    for (const auto& rec : c.records()) docs.emplace_back(rec.product_id, index_text(rec));
    return Bm25Index::build(docs);
}

inline std::unique_ptr<FixtureWebBackend> make_web_fixture() {
    auto web = std::make_unique<FixtureWebBackend>();
    web->add_query("docks", {{"Dock roundup", "the best usb docks", "https://example.com/docks"}});
    web->add_page("https://example.com/docks", "A long page about docks and ports.");
    return web;
}

inline ToolEnvironment make_env(std::shared_ptr<Gateway> gateway, ToolEnvConfig config = {}) {
    Catalog c = make_test_catalog();
    Bm25Index idx = make_index(c);
    TemplateSet templates = TemplateSet::load(templates_dir());
    return ToolEnvironment(std::move(c), std::move(idx), make_web_fixture(), std::move(gateway),
                           templates.text(TemplateId::Extractor), config);
}

inline std::shared_ptr<Gateway> scripted_gateway(Script script) {
    RetryPolicy retry;
    retry.backoff_base_ms = 0;
    return std::make_shared<Gateway>(std::make_shared<ScriptedBackend>(std::move(script)), retry);
}

// A minimal normalized rubric with two criteria per dimension.
inline Rubric make_test_rubric() {
    Rubric r;
    for (RaceDimension d : kAllDimensions) {
        RubricDimension dim;
        dim.weight = 0.25;
        dim.raw_weight = 0.25;
        const std::string key = dimension_key(d);
        dim.criteria.push_back({key + " a", "first aspect", 0.5, 0.5});
        dim.criteria.push_back({key + " b", "second aspect", 0.5, 0.5});
        r[d] = dim;
    }
    return r;
}

// Well-formed completed trajectory with the requested number of assistant
// turns (plan + tool calls + answer), no supervisor messages.
inline RawTrajectory make_basic_trajectory(int assistant_turns, const std::string& id = "q-test") {
    RawTrajectory t;
    t.query = {id, "which dock should I buy for my laptop within a 100 dollar budget please", "u"};
    t.persona = {"test persona", {}};
    t.rubric = make_test_rubric();
    t.run_id = "run-test";
    t.messages.push_back({Role::System, "system prompt"});
    t.messages.push_back({Role::User, t.query.text});
    for (int i = 0; i < assistant_turns; ++i) {
        Message a;
        a.role = Role::Assistant;
        a.round = 0;
        if (i == 0) {
            a.content = plan_text("plan the research");
            a.state_tag = ResearchState::Plan;
        } else if (i + 1 < assistant_turns) {
            a.content = tool_text("look up docks", "product_search", "{\"query\": \"dock\"}");
            a.state_tag = ResearchState::Toolcall;
            a.tool_calls.push_back(
                {"call_" + std::to_string(i), "product_search", json{{"query", "dock"}}});
        } else {
            a.content = answer_text("summarize", "buy the p3 dock");
            a.state_tag = ResearchState::Report;
        }
        t.messages.push_back(a);
        if (i > 0 && i + 1 < assistant_turns) {
            Message tool;
            tool.role = Role::Tool;
            tool.tool_call_id = "call_" + std::to_string(i);
            tool.content = "Found 1 products:...";
            t.messages.push_back(tool);
        }
    }
    t.status = TrajectoryStatus::Completed;
    return t;
}

}  // namespace testsup
