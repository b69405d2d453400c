#pragma once
// Uniform chat-completion access for every agent role. Two backends: a
// deterministic scripted backend replaying canned responses (tests, demo)
// and a remote backend speaking the standard chat-completions protocol.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "shoplab/model.hpp"

namespace shoplab {

enum class AgentTag { UserAgent, ResearchAgent, Supervisor, Extractor, Judge, Internalizer };

std::string to_string(AgentTag t);
std::optional<AgentTag> agent_tag_from_string(const std::string& s);

struct ChatParams {
    double temperature = 0.0;
    int max_output_tokens = 8192;
    std::optional<std::uint64_t> seed;
};

// temperature 0.7 for research_agent/user_agent (diversity), 0.0 elsewhere
// (stable verdicts and judgments).
ChatParams default_params(AgentTag tag);

struct ChatRequest {
    AgentTag agent_tag = AgentTag::ResearchAgent;
    std::vector<Message> messages;  // wire roles only: system/user/assistant/tool
    ChatParams params;
};

struct ChatUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

struct ChatResponse {
    std::string text;
    ChatUsage usage;
    std::string backend_id;
    bool truncated = false;
};

// Stable FNV-1a digest of the request messages, usable as a script match key.
std::string prompt_digest(const ChatRequest& req);

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual ChatResponse complete(const ChatRequest& req) = 0;
    virtual std::string id() const = 0;
};

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

struct ScriptEntry {
    AgentTag agent_tag = AgentTag::ResearchAgent;
    std::optional<int> sequence_index;      // exactly one of sequence_index /
    std::optional<std::string> prompt_digest;  // prompt_digest is set
    std::string response_text;
};

struct Script {
    std::vector<ScriptEntry> entries;
};

// Line-delimited JSON: {agent_tag, sequence_index | prompt_digest, response_text}.
// Throws MalformedScriptError (with line number) on parse or uniqueness failure.
Script load_script(const std::string& path);
Script script_from_lines(const std::vector<std::string>& lines);

// Replays script entries. Digest matches take priority; otherwise the
// per-agent sequence counter selects the next entry. Synthetic usage counts
// are character counts / 4. Thread-safe; counters serialize internally.
class ScriptedBackend : public LlmBackend {
public:
    explicit ScriptedBackend(Script script);

    ChatResponse complete(const ChatRequest& req) override;
    std::string id() const override { return "scripted"; }

    void reset_counters();

private:
    Script script_;
    std::map<std::pair<AgentTag, int>, const ScriptEntry*> by_sequence_;
    std::map<std::pair<AgentTag, std::string>, const ScriptEntry*> by_digest_;
    std::map<AgentTag, int> counters_;
    std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Remote backend (chat-completions wire protocol)
// ---------------------------------------------------------------------------

struct RemoteBackendConfig {
    std::string base_url;                       // e.g. https://api.example.com
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string api_key;  // read from env LLM_API_KEY by the CLI; never persisted
    int timeout_seconds = 120;
};

class RemoteBackend : public LlmBackend {
public:
    explicit RemoteBackend(RemoteBackendConfig config);

    ChatResponse complete(const ChatRequest& req) override;
    std::string id() const override;

private:
    RemoteBackendConfig config_;
};

// ---------------------------------------------------------------------------
// Gateway: retry, budget, token accounting
// ---------------------------------------------------------------------------

struct RetryPolicy {
    int retry_max = 3;
    int backoff_base_ms = 500;  // doubled per attempt; 0 disables sleeping
};

class Gateway {
public:
    // token_budget 0 = unlimited. The call after the ceiling is crossed
    // throws BudgetExceededError.
    explicit Gateway(std::shared_ptr<LlmBackend> backend, RetryPolicy retry = {},
                     std::int64_t token_budget = 0);

    // Returns backend text with trailing whitespace trimmed. Retries
    // retryable TransportErrors up to retry_max times (total attempts
    // <= retry_max + 1); non-retryable errors propagate immediately.
    ChatResponse complete(const ChatRequest& req);

    UsageTotals usage() const;
    LlmBackend& backend() { return *backend_; }

private:
    std::shared_ptr<LlmBackend> backend_;
    RetryPolicy retry_;
    std::int64_t token_budget_;
    mutable std::mutex mu_;
    UsageTotals totals_;
};

}  // namespace shoplab
