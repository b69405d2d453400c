#include "shoplab/gateway.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "shoplab/errors.hpp"

namespace shoplab {

namespace {

const char* kAgentTagNames[] = {"user_agent", "research_agent", "supervisor",
                                "extractor",  "judge",          "internalizer"};

std::string rtrim(std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    return s;
}

}  // namespace

std::string to_string(AgentTag t) { return kAgentTagNames[static_cast<int>(t)]; }

std::optional<AgentTag> agent_tag_from_string(const std::string& s) {
    for (int i = 0; i < 6; ++i) {
        if (s == kAgentTagNames[i]) return static_cast<AgentTag>(i);
    }
    return std::nullopt;
}

ChatParams default_params(AgentTag tag) {
    ChatParams p;
    if (tag == AgentTag::ResearchAgent || tag == AgentTag::UserAgent) p.temperature = 0.7;
    return p;
}

std::string prompt_digest(const ChatRequest& req) {
    // FNV-1a 64-bit over role/content pairs; stable across platforms.
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
    };
    for (const auto& m : req.messages) {
        mix(to_string(m.role));
        mix("\x1f");
        mix(m.content);
        mix("\x1e");
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Script loading
// ---------------------------------------------------------------------------

Script script_from_lines(const std::vector<std::string>& lines) {
    Script s;
    int line_no = 0;
    for (const auto& line : lines) {
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw MalformedScriptError("not a JSON object", line_no);
        }
        ScriptEntry e;
        auto tag = agent_tag_from_string(j.value("agent_tag", ""));
        if (!tag) throw MalformedScriptError("unknown agent_tag", line_no);
        e.agent_tag = *tag;
        if (j.contains("sequence_index")) e.sequence_index = j["sequence_index"].get<int>();
        if (j.contains("prompt_digest")) e.prompt_digest = j["prompt_digest"].get<std::string>();
        if (e.sequence_index.has_value() == e.prompt_digest.has_value()) {
            throw MalformedScriptError("need exactly one of sequence_index / prompt_digest",
                                       line_no);
        }
        if (!j.contains("response_text") || !j["response_text"].is_string()) {
            throw MalformedScriptError("missing response_text", line_no);
        }
        e.response_text = j["response_text"].get<std::string>();
        s.entries.push_back(std::move(e));
    }

    // uniqueness of match keys
    std::map<std::pair<AgentTag, int>, int> seq_seen;
    std::map<std::pair<AgentTag, std::string>, int> digest_seen;
    int idx = 0;
    for (const auto& e : s.entries) {
        ++idx;
        if (e.sequence_index) {
            auto key = std::make_pair(e.agent_tag, *e.sequence_index);
            if (seq_seen.count(key)) {
                throw MalformedScriptError("duplicate (agent_tag, sequence_index)", idx);
            }
            seq_seen[key] = idx;
        } else {
            auto key = std::make_pair(e.agent_tag, *e.prompt_digest);
            if (digest_seen.count(key)) {
                throw MalformedScriptError("duplicate (agent_tag, prompt_digest)", idx);
            }
            digest_seen[key] = idx;
        }
    }
    return s;
}

Script load_script(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open script file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return script_from_lines(lines);
}

// ---------------------------------------------------------------------------
// ScriptedBackend
// ---------------------------------------------------------------------------

ScriptedBackend::ScriptedBackend(Script script) : script_(std::move(script)) {
    for (const auto& e : script_.entries) {
        if (e.sequence_index) {
            by_sequence_[{e.agent_tag, *e.sequence_index}] = &e;
        } else {
            by_digest_[{e.agent_tag, *e.prompt_digest}] = &e;
        }
    }
}

void ScriptedBackend::reset_counters() {
    std::lock_guard<std::mutex> lock(mu_);
    counters_.clear();
}

ChatResponse ScriptedBackend::complete(const ChatRequest& req) {
    const ScriptEntry* entry = nullptr;
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto dit = by_digest_.find({req.agent_tag, prompt_digest(req)});
        if (dit != by_digest_.end()) {
            entry = dit->second;
        } else {
            int& counter = counters_[req.agent_tag];
            auto sit = by_sequence_.find({req.agent_tag, counter});
            if (sit != by_sequence_.end()) {
                entry = sit->second;
                ++counter;
            }
        }
    }
    if (!entry) {
        throw ScriptExhaustedError("no entry for agent " + to_string(req.agent_tag));
    }

    ChatResponse resp;
    resp.text = entry->response_text;
    resp.backend_id = id();
    // synthetic usage: character counts / 4
    std::int64_t prompt_chars = 0;
    for (const auto& m : req.messages) prompt_chars += static_cast<std::int64_t>(m.content.size());
    resp.usage.prompt_tokens = prompt_chars / 4;
    resp.usage.completion_tokens = static_cast<std::int64_t>(resp.text.size()) / 4;
    return resp;
}

// ---------------------------------------------------------------------------
// RemoteBackend
// ---------------------------------------------------------------------------

RemoteBackend::RemoteBackend(RemoteBackendConfig config) : config_(std::move(config)) {}

std::string RemoteBackend::id() const { return "remote:" + config_.model; }

ChatResponse RemoteBackend::complete(const ChatRequest& req) {
    json body{{"model", config_.model}, {"temperature", req.params.temperature},
              {"max_tokens", req.params.max_output_tokens}};
    if (req.params.seed) body["seed"] = *req.params.seed;
    json messages = json::array();
    for (const auto& m : req.messages) {
        messages.push_back(json{{"role", to_string(m.role)}, {"content", m.content}});
    }
    body["messages"] = messages;

    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_seconds);
    client.set_read_timeout(config_.timeout_seconds);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    auto res = client.Post(config_.path, headers, body.dump(), "application/json");
    if (!res) {
        throw TransportError("connection failure: " + httplib::to_string(res.error()), true);
    }
    if (res->status == 429 || res->status >= 500) {
        throw TransportError("http status " + std::to_string(res->status), true);
    }
    if (res->status != 200) {
        throw TransportError("http status " + std::to_string(res->status), false);
    }

    json doc = json::parse(res->body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty()) {
        throw TransportError("unparsable completion response", false);
    }
    const json& choice = doc["choices"][0];

    ChatResponse out;
    out.text = choice.at("message").value("content", "");
    out.backend_id = id();
    out.truncated = choice.value("finish_reason", "") == "length";
    if (doc.contains("usage")) {
        out.usage.prompt_tokens = doc["usage"].value("prompt_tokens", std::int64_t{0});
        out.usage.completion_tokens = doc["usage"].value("completion_tokens", std::int64_t{0});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<LlmBackend> backend, RetryPolicy retry, std::int64_t token_budget)
    : backend_(std::move(backend)), retry_(retry), token_budget_(token_budget) {}

ChatResponse Gateway::complete(const ChatRequest& req) {
    if (req.messages.empty()) throw Error("chat request needs at least one message");
    if (req.messages.front().role != Role::System) {
        throw Error("chat request must start with a system message");
    }
    for (const auto& m : req.messages) {
        if (m.role == Role::Supervisor) {
            throw Error("supervisor role is not a wire role; map it before sending");
        }
    }
    {
        std::lock_guard<std::mutex> lock(mu_);
        if (token_budget_ > 0 &&
            totals_.prompt_tokens + totals_.completion_tokens >= token_budget_) {
            throw BudgetExceededError(std::to_string(token_budget_) + " tokens");
        }
    }

    ChatResponse resp;
    int attempt = 0;
    for (;;) {
        ++attempt;
        try {
            resp = backend_->complete(req);
            break;
        } catch (const TransportError& e) {
            if (!e.retryable || attempt > retry_.retry_max) throw;
            if (retry_.backoff_base_ms > 0) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(retry_.backoff_base_ms << (attempt - 1)));
            }
        }
    }

    resp.text = rtrim(resp.text);
    if (resp.text.empty() && !resp.truncated) {
        throw TransportError("backend returned empty text without truncation flag", false);
    }
    {
        std::lock_guard<std::mutex> lock(mu_);
        totals_.prompt_tokens += resp.usage.prompt_tokens;
        totals_.completion_tokens += resp.usage.completion_tokens;
        totals_.calls += 1;
    }
    return resp;
}

UsageTotals Gateway::usage() const {
    std::lock_guard<std::mutex> lock(mu_);
    return totals_;
}

}  // namespace shoplab
