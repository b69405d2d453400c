#include "shoplab/model.hpp"

#include <cmath>

#include "shoplab/errors.hpp"

namespace shoplab {

namespace {

const char* kRoleNames[] = {"system", "user", "assistant", "tool", "supervisor"};
const char* kStateNames[] = {"Plan", "Toolcall", "Report"};
const char* kPhaseNames[] = {"CheckPlan", "CheckToolcall", "FinalAnswerGate", "CheckReport"};
const char* kStatusNames[] = {"completed", "failed_revision_cap", "failed_step_cap",
                              "failed_parse"};
const char* kEventKindNames[] = {"purchase", "review", "dialogue"};
const char* kDimensionKeys[] = {"comprehensiveness", "depth", "instruction_following",
                                "readability"};

std::string require_string(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string()) {
        throw Error(std::string("expected string field \"") + key + "\"");
    }
    return j[key].get<std::string>();
}

double require_number(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number()) {
        throw Error(std::string("expected numeric field \"") + key + "\"");
    }
    return j[key].get<double>();
}

}  // namespace

std::string to_string(Role role) { return kRoleNames[static_cast<int>(role)]; }

std::optional<Role> role_from_string(const std::string& s) {
    for (int i = 0; i < 5; ++i) {
        if (s == kRoleNames[i]) return static_cast<Role>(i);
    }
    return std::nullopt;
}

std::string to_string(ResearchState s) { return kStateNames[static_cast<int>(s)]; }

std::optional<ResearchState> research_state_from_string(const std::string& s) {
    for (int i = 0; i < 3; ++i) {
        if (s == kStateNames[i]) return static_cast<ResearchState>(i);
    }
    return std::nullopt;
}

bool is_legal_transition(ResearchState from, ResearchState to) {
    switch (from) {
        case ResearchState::Plan:
            return to == ResearchState::Plan || to == ResearchState::Toolcall;
        case ResearchState::Toolcall:
            return to == ResearchState::Toolcall || to == ResearchState::Report;
        case ResearchState::Report:
            return to == ResearchState::Report;
    }
    return false;
}

const std::vector<std::string>& registered_tool_names() {
    static const std::vector<std::string> names = {"web_search", "web_visit", "product_search",
                                                   "view_product_details"};
    return names;
}

bool is_registered_tool(const std::string& name) {
    for (const auto& n : registered_tool_names()) {
        if (n == name) return true;
    }
    return false;
}

std::string to_string(EventKind k) { return kEventKindNames[static_cast<int>(k)]; }

std::optional<EventKind> event_kind_from_string(const std::string& s) {
    for (int i = 0; i < 3; ++i) {
        if (s == kEventKindNames[i]) return static_cast<EventKind>(i);
    }
    return std::nullopt;
}

std::string dimension_key(RaceDimension d) { return kDimensionKeys[static_cast<int>(d)]; }

std::optional<RaceDimension> dimension_from_key(const std::string& key) {
    for (int i = 0; i < 4; ++i) {
        if (key == kDimensionKeys[i]) return static_cast<RaceDimension>(i);
    }
    if (key == "insight") return RaceDimension::Depth;
    return std::nullopt;
}

std::string to_string(SupervisorPhase p) { return kPhaseNames[static_cast<int>(p)]; }

std::optional<SupervisorPhase> supervisor_phase_from_string(const std::string& s) {
    for (int i = 0; i < 4; ++i) {
        if (s == kPhaseNames[i]) return static_cast<SupervisorPhase>(i);
    }
    return std::nullopt;
}

std::string to_string(TrajectoryStatus s) { return kStatusNames[static_cast<int>(s)]; }

std::optional<TrajectoryStatus> trajectory_status_from_string(const std::string& s) {
    for (int i = 0; i < 4; ++i) {
        if (s == kStatusNames[i]) return static_cast<TrajectoryStatus>(i);
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// normalize_rubric
// ---------------------------------------------------------------------------

namespace {

constexpr double kNormTolerance = 1e-9;

// Scales values so they sum to 1. A level already summing to 1 within
// tolerance is left untouched, so repeated normalization is a fixpoint.
void normalize_level(std::vector<double*> weights, const std::string& level) {
    double sum = 0.0;
    for (const double* w : weights) sum += *w;
    if (sum <= 0.0) throw AllZeroWeightsError(level);
    if (std::fabs(sum - 1.0) <= kNormTolerance) return;
    for (double* w : weights) *w /= sum;
}

}  // namespace

Rubric normalize_rubric(const Rubric& r) {
    Rubric out = r;
    std::vector<double*> dim_weights;
    for (auto& dim : out.dimensions) dim_weights.push_back(&dim.weight);
    normalize_level(dim_weights, "dimensions");
    for (int i = 0; i < 4; ++i) {
        auto& dim = out.dimensions[i];
        std::vector<double*> crit_weights;
        for (auto& c : dim.criteria) crit_weights.push_back(&c.weight);
        if (crit_weights.empty()) throw AllZeroWeightsError(kDimensionKeys[i]);
        normalize_level(crit_weights, kDimensionKeys[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// validate_raw_trajectory
// ---------------------------------------------------------------------------

std::string to_string(const Violation& v) { return v.rule + "@" + std::to_string(v.index); }

std::vector<Violation> validate_raw_trajectory(const RawTrajectory& t) {
    std::vector<Violation> out;
    const auto& ms = t.messages;

    if (ms.empty() || ms[0].role != Role::System) out.push_back({"FirstMessageNotSystem", 0});
    if (ms.size() < 2 || ms[1].role != Role::User) out.push_back({"SecondMessageNotUser", 1});

    for (int i = 0; i < static_cast<int>(ms.size()); ++i) {
        const Message& m = ms[i];
        if (m.role == Role::Supervisor) {
            bool before_ok = i > 0 && ms[i - 1].role == Role::Assistant;
            bool after_ok =
                i + 1 < static_cast<int>(ms.size()) && ms[i + 1].role == Role::Assistant;
            if (!before_ok || !after_ok) out.push_back({"SupervisorNotFlanked", i});
        }
        if (m.role == Role::Assistant) {
            if (m.tool_calls.size() > 1) out.push_back({"TooManyToolCalls", i});
        } else if (!m.tool_calls.empty()) {
            out.push_back({"ToolCallsOnNonAssistant", i});
        }
        if (m.role == Role::Tool) {
            bool referenced = false;
            for (int k = 0; k < i; ++k) {
                if (ms[k].role != Role::Assistant) continue;
                for (const auto& tc : ms[k].tool_calls) {
                    if (tc.call_id == m.tool_call_id) referenced = true;
                }
            }
            if (m.tool_call_id.empty() || !referenced) out.push_back({"OrphanToolMessage", i});
        }
        if (m.role == Role::Assistant && !m.tool_calls.empty() &&
            !is_registered_tool(m.tool_calls[0].tool_name)) {
            out.push_back({"UnknownToolName", i});
        }
    }

    for (int i = 0; i < static_cast<int>(t.intermediate_reports.size()); ++i) {
        if (t.intermediate_reports[i].round != i + 1) {
            out.push_back({"BadReportRound", i});
        }
    }

    return out;
}

// ---------------------------------------------------------------------------
// JSON mapping
// ---------------------------------------------------------------------------

json to_json(const ToolCallRecord& t) {
    return json{{"call_id", t.call_id}, {"tool_name", t.tool_name}, {"arguments", t.arguments}};
}

ToolCallRecord tool_call_from_json(const json& j) {
    ToolCallRecord t;
    t.call_id = require_string(j, "call_id");
    t.tool_name = require_string(j, "tool_name");
    t.arguments = j.value("arguments", json::object());
    return t;
}

json to_json(const Message& m) {
    json j{{"role", to_string(m.role)}, {"content", m.content}};
    if (!m.tool_calls.empty()) {
        json calls = json::array();
        for (const auto& c : m.tool_calls) calls.push_back(to_json(c));
        j["tool_calls"] = calls;
    }
    if (!m.tool_call_id.empty()) j["tool_call_id"] = m.tool_call_id;
    if (m.state_tag) j["state_tag"] = to_string(*m.state_tag);
    if (m.round) j["round"] = *m.round;
    return j;
}

Message message_from_json(const json& j) {
    Message m;
    auto role = role_from_string(require_string(j, "role"));
    if (!role) throw Error("unknown role: " + j["role"].get<std::string>());
    m.role = *role;
    m.content = require_string(j, "content");
    if (j.contains("tool_calls")) {
        for (const auto& c : j["tool_calls"]) m.tool_calls.push_back(tool_call_from_json(c));
    }
    m.tool_call_id = j.value("tool_call_id", "");
    if (j.contains("state_tag")) {
        auto st = research_state_from_string(j["state_tag"].get<std::string>());
        if (!st) throw Error("unknown state_tag: " + j["state_tag"].get<std::string>());
        m.state_tag = *st;
    }
    if (j.contains("round")) m.round = j["round"].get<int>();
    return m;
}

json to_json(const Persona& p) {
    json facets = json::object();
    for (const auto& [k, v] : p.facets) facets[k] = v;
    return json{{"profile_text", p.profile_text}, {"facets", facets}};
}

Persona persona_from_json(const json& j) {
    Persona p;
    p.profile_text = require_string(j, "profile_text");
    if (p.profile_text.empty()) throw Error("persona profile_text must be non-empty");
    if (j.contains("facets")) {
        for (auto it = j["facets"].begin(); it != j["facets"].end(); ++it) {
            p.facets[it.key()] =
                it.value().is_string() ? it.value().get<std::string>() : it.value().dump();
        }
    }
    return p;
}

json to_json(const ResearchQuery& q) {
    return json{{"query_id", q.query_id}, {"text", q.text}, {"source_user_id", q.source_user_id}};
}

ResearchQuery query_from_json(const json& j) {
    ResearchQuery q;
    q.query_id = require_string(j, "query_id");
    q.text = require_string(j, "text");
    if (q.text.empty()) throw Error("query text must be non-empty");
    q.source_user_id = j.value("source_user_id", "");
    return q;
}

json to_json(const BehaviorLog& b) {
    json events = json::array();
    for (const auto& e : b.events) {
        events.push_back(
            json{{"kind", to_string(e.kind)}, {"timestamp", e.timestamp}, {"payload", e.payload}});
    }
    return json{{"user_id", b.user_id}, {"events", events}};
}

BehaviorLog behavior_log_from_json(const json& j) {
    BehaviorLog b;
    b.user_id = require_string(j, "user_id");
    std::int64_t last_ts = INT64_MIN;
    if (j.contains("events")) {
        for (const auto& e : j["events"]) {
            BehaviorEvent ev;
            auto kind = event_kind_from_string(require_string(e, "kind"));
            if (!kind) throw Error("unknown event kind: " + e["kind"].get<std::string>());
            ev.kind = *kind;
            ev.timestamp = static_cast<std::int64_t>(require_number(e, "timestamp"));
            ev.payload = require_string(e, "payload");
            if (ev.timestamp < last_ts) throw Error("behavior events not ordered by timestamp");
            last_ts = ev.timestamp;
            b.events.push_back(std::move(ev));
        }
    }
    return b;
}

json to_json(const Rubric& r) {
    json dims = json::object();
    for (RaceDimension d : kAllDimensions) {
        const auto& dim = r[d];
        json criteria = json::array();
        for (const auto& c : dim.criteria) {
            criteria.push_back(json{{"name", c.name},
                                    {"explanation", c.explanation},
                                    {"weight", c.weight},
                                    {"raw_weight", c.raw_weight}});
        }
        dims[dimension_key(d)] =
            json{{"weight", dim.weight}, {"raw_weight", dim.raw_weight}, {"criteria", criteria}};
    }
    return json{{"dimensions", dims}};
}

Rubric rubric_from_json(const json& j) {
    const json& dims = j.contains("dimensions") ? j["dimensions"] : j;
    if (!dims.is_object()) throw Error("rubric: expected \"dimensions\" object");
    Rubric r;
    std::array<bool, 4> seen{false, false, false, false};
    for (auto it = dims.begin(); it != dims.end(); ++it) {
        auto d = dimension_from_key(it.key());
        if (!d) throw Error("rubric: unknown dimension key \"" + it.key() + "\"");
        if (seen[static_cast<int>(*d)]) throw Error("rubric: duplicate dimension " + it.key());
        seen[static_cast<int>(*d)] = true;
        RubricDimension dim;
        dim.weight = require_number(it.value(), "weight");
        dim.raw_weight = it.value().contains("raw_weight")
                             ? it.value()["raw_weight"].get<double>()
                             : dim.weight;
        if (dim.weight < 0) throw Error("rubric: negative dimension weight");
        if (!it.value().contains("criteria") || !it.value()["criteria"].is_array() ||
            it.value()["criteria"].empty()) {
            throw Error("rubric: dimension " + it.key() + " needs a non-empty criteria list");
        }
        for (const auto& cj : it.value()["criteria"]) {
            Criterion c;
            // "criterion" accepted as alias of "name" (rubric-generation replies use it)
            if (cj.contains("name")) {
                c.name = cj["name"].get<std::string>();
            } else if (cj.contains("criterion")) {
                c.name = cj["criterion"].get<std::string>();
            } else {
                throw Error("rubric: criterion missing name");
            }
            c.explanation = cj.value("explanation", "");
            c.weight = require_number(cj, "weight");
            c.raw_weight = cj.contains("raw_weight") ? cj["raw_weight"].get<double>() : c.weight;
            if (c.weight < 0) throw Error("rubric: negative criterion weight");
            dim.criteria.push_back(std::move(c));
        }
        r[*d] = std::move(dim);
    }
    for (int i = 0; i < 4; ++i) {
        if (!seen[i]) throw DimensionMissingError(kDimensionKeys[i]);
    }
    return r;
}

json to_json(const SupervisorVerdict& v) {
    return json{{"approved", v.approved},
                {"feedback", v.feedback},
                {"reason", v.reason},
                {"phase", to_string(v.phase)}};
}

namespace {

json state_log_to_json(const std::vector<StateLogEntry>& log) {
    json out = json::array();
    for (const auto& e : log) {
        out.push_back(json{{"step", e.step_index},
                           {"state", to_string(e.state)},
                           {"phase", to_string(e.phase)},
                           {"approved", e.approved},
                           {"synthetic", e.synthetic},
                           {"reason", e.reason}});
    }
    return out;
}

std::vector<StateLogEntry> state_log_from_json(const json& j) {
    std::vector<StateLogEntry> out;
    for (const auto& ej : j) {
        StateLogEntry e;
        e.step_index = ej.at("step").get<int>();
        e.state = *research_state_from_string(ej.at("state").get<std::string>());
        e.phase = *supervisor_phase_from_string(ej.at("phase").get<std::string>());
        e.approved = ej.at("approved").get<bool>();
        e.synthetic = ej.value("synthetic", false);
        e.reason = ej.value("reason", "");
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace

json to_json(const RawTrajectory& t) {
    json messages = json::array();
    for (const auto& m : t.messages) messages.push_back(to_json(m));
    json reports = json::array();
    for (const auto& r : t.intermediate_reports) {
        reports.push_back(json{{"round", r.round}, {"report_text", r.report_text}});
    }
    return json{{"schema_version", kTrajectorySchemaVersion},
                {"query", to_json(t.query)},
                {"persona", to_json(t.persona)},
                {"rubric", to_json(t.rubric)},
                {"messages", messages},
                {"intermediate_reports", reports},
                {"status", to_string(t.status)},
                {"state_log", state_log_to_json(t.state_log)},
                {"provenance", json{{"run_id", t.run_id}}}};
}

RawTrajectory raw_trajectory_from_json(const json& j) {
    RawTrajectory t;
    t.query = query_from_json(j.at("query"));
    t.persona = persona_from_json(j.at("persona"));
    t.rubric = rubric_from_json(j.at("rubric"));
    for (const auto& mj : j.at("messages")) t.messages.push_back(message_from_json(mj));
    if (j.contains("intermediate_reports")) {
        for (const auto& rj : j["intermediate_reports"]) {
            t.intermediate_reports.push_back(
                {rj.at("round").get<int>(), rj.at("report_text").get<std::string>()});
        }
    }
    auto status = trajectory_status_from_string(j.value("status", "completed"));
    if (!status) throw Error("unknown trajectory status");
    t.status = *status;
    if (j.contains("state_log")) t.state_log = state_log_from_json(j["state_log"]);
    if (j.contains("provenance")) t.run_id = j["provenance"].value("run_id", "");
    return t;
}

json to_json(const RefinedTrajectory& t) {
    json messages = json::array();
    for (const auto& m : t.messages) messages.push_back(to_json(m));
    return json{{"schema_version", kTrajectorySchemaVersion},
                {"query", to_json(t.query)},
                {"persona", to_json(t.persona)},
                {"rubric", to_json(t.rubric)},
                {"messages", messages},
                {"provenance", json{{"raw_id", t.provenance.raw_id},
                                    {"run_id", t.provenance.run_id},
                                    {"consolidated_segments", t.provenance.consolidated_segments},
                                    {"fallback_segments", t.provenance.fallback_segments}}}};
}

RefinedTrajectory refined_trajectory_from_json(const json& j) {
    RefinedTrajectory t;
    t.query = query_from_json(j.at("query"));
    t.persona = persona_from_json(j.at("persona"));
    t.rubric = rubric_from_json(j.at("rubric"));
    for (const auto& mj : j.at("messages")) t.messages.push_back(message_from_json(mj));
    if (j.contains("provenance")) {
        const auto& p = j["provenance"];
        t.provenance.raw_id = p.value("raw_id", "");
        t.provenance.run_id = p.value("run_id", "");
        t.provenance.consolidated_segments = p.value("consolidated_segments", 0);
        t.provenance.fallback_segments = p.value("fallback_segments", 0);
    }
    return t;
}

json to_json(const RunManifest& m) {
    return json{{"run_id", m.run_id},
                {"config", m.config_snapshot},
                {"seed", m.seed},
                {"counts", json{{"attempted", m.counts.attempted},
                                {"completed", m.counts.completed},
                                {"filtered_by_length", m.counts.filtered_by_length},
                                {"failed", m.counts.failed}}},
                {"timing", json{{"elapsed_ms", m.elapsed_ms}}},
                {"usage", json{{"prompt_tokens", m.usage.prompt_tokens},
                               {"completion_tokens", m.usage.completion_tokens},
                               {"calls", m.usage.calls}}}};
}

RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.config_snapshot = j.value("config", json::object());
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto& c = j.at("counts");
    m.counts.attempted = c.at("attempted").get<int>();
    m.counts.completed = c.at("completed").get<int>();
    m.counts.filtered_by_length = c.at("filtered_by_length").get<int>();
    m.counts.failed = c.at("failed").get<int>();
    if (j.contains("timing")) m.elapsed_ms = j["timing"].value("elapsed_ms", std::int64_t{0});
    if (j.contains("usage")) {
        m.usage.prompt_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
        m.usage.completion_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
        m.usage.calls = j["usage"].value("calls", std::int64_t{0});
    }
    return m;
}

}  // namespace shoplab
