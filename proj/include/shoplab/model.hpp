#pragma once
// Shared domain types and on-disk schemas for trajectories, rubrics and
// personas. All types are immutable value objects once constructed; the
// JSON mapping below is the single source of truth for the file formats.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace shoplab {

using json = nlohmann::json;

inline constexpr int kTrajectorySchemaVersion = 1;

// ---------------------------------------------------------------------------
// Roles and states
// ---------------------------------------------------------------------------

enum class Role { System, User, Assistant, Tool, Supervisor };

std::string to_string(Role role);
std::optional<Role> role_from_string(const std::string& s);

// Research session states. Legal transitions: Plan->Plan, Plan->Toolcall,
// Toolcall->Toolcall, Toolcall->Report, Report->Report, Report->Done.
enum class ResearchState { Plan, Toolcall, Report };

std::string to_string(ResearchState s);
std::optional<ResearchState> research_state_from_string(const std::string& s);

bool is_legal_transition(ResearchState from, ResearchState to);

// ---------------------------------------------------------------------------
// Messages
// ---------------------------------------------------------------------------

struct ToolCallRecord {
    std::string call_id;
    std::string tool_name;  // one of the four registered tools
    json arguments = json::object();

    bool operator==(const ToolCallRecord&) const = default;
};

// Registered tool names, in canonical order.
const std::vector<std::string>& registered_tool_names();
bool is_registered_tool(const std::string& name);

struct Message {
    Role role = Role::User;
    std::string content;
    std::vector<ToolCallRecord> tool_calls;  // assistant only, length <= 1
    std::string tool_call_id;                // tool role only; empty = absent
    std::optional<ResearchState> state_tag;
    std::optional<int> round;  // revision round within a step

    bool operator==(const Message&) const = default;
};

// ---------------------------------------------------------------------------
// Personas, queries, behavior logs
// ---------------------------------------------------------------------------

struct Persona {
    std::string profile_text;  // non-empty
    std::map<std::string, std::string> facets;

    bool operator==(const Persona&) const = default;
};

struct ResearchQuery {
    std::string query_id;
    std::string text;  // non-empty
    std::string source_user_id;

    bool operator==(const ResearchQuery&) const = default;
};

enum class EventKind { Purchase, Review, Dialogue };

std::string to_string(EventKind k);
std::optional<EventKind> event_kind_from_string(const std::string& s);

struct BehaviorEvent {
    EventKind kind = EventKind::Purchase;
    std::int64_t timestamp = 0;  // epoch seconds; non-decreasing within a log
    std::string payload;

    bool operator==(const BehaviorEvent&) const = default;
};

struct BehaviorLog {
    std::string user_id;
    std::vector<BehaviorEvent> events;

    bool operator==(const BehaviorLog&) const = default;
};

// ---------------------------------------------------------------------------
// Rubrics
// ---------------------------------------------------------------------------

enum class RaceDimension { Comprehensiveness = 0, Depth = 1, InstructionFollowing = 2, Readability = 3 };

inline constexpr std::array<RaceDimension, 4> kAllDimensions = {
    RaceDimension::Comprehensiveness, RaceDimension::Depth,
    RaceDimension::InstructionFollowing, RaceDimension::Readability};

// Canonical storage key. The second dimension is stored as "depth"; the
// loader accepts "insight" as an alias and supervisor-facing rendering
// emits "insight" (see render_evaluation_criteria).
std::string dimension_key(RaceDimension d);
std::optional<RaceDimension> dimension_from_key(const std::string& key);

struct Criterion {
    std::string name;
    std::string explanation;
    double weight = 0.0;      // normalized by normalize_rubric
    double raw_weight = 0.0;  // as loaded, retained for provenance

    bool operator==(const Criterion&) const = default;
};

struct RubricDimension {
    double weight = 0.0;      // W_d, normalized
    double raw_weight = 0.0;  // as loaded
    std::vector<Criterion> criteria;  // non-empty

    bool operator==(const RubricDimension&) const = default;
};

struct Rubric {
    std::array<RubricDimension, 4> dimensions;  // indexed by RaceDimension

    RubricDimension& operator[](RaceDimension d) { return dimensions[static_cast<int>(d)]; }
    const RubricDimension& operator[](RaceDimension d) const {
        return dimensions[static_cast<int>(d)];
    }

    bool operator==(const Rubric&) const = default;
};

// Scales dimension weights to sum to 1 and, within each dimension, criterion
// weights to sum to 1. Ratios are preserved; raw_weight fields are left
// untouched. Levels whose weights already sum to 1 within 1e-9 are returned
// unchanged, which makes the operation exactly idempotent.
// Throws AllZeroWeightsError when a level has no positive weight.
Rubric normalize_rubric(const Rubric& r);

// ---------------------------------------------------------------------------
// Supervisor verdicts
// ---------------------------------------------------------------------------

enum class SupervisorPhase { CheckPlan, CheckToolcall, FinalAnswerGate, CheckReport };

std::string to_string(SupervisorPhase p);
std::optional<SupervisorPhase> supervisor_phase_from_string(const std::string& s);

struct SupervisorVerdict {
    bool approved = false;
    std::string feedback;  // non-empty when approved = false
    std::string reason;
    SupervisorPhase phase = SupervisorPhase::CheckPlan;

    bool operator==(const SupervisorVerdict&) const = default;
};

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

enum class TrajectoryStatus { Completed, FailedRevisionCap, FailedStepCap, FailedParse };

std::string to_string(TrajectoryStatus s);
std::optional<TrajectoryStatus> trajectory_status_from_string(const std::string& s);

struct IntermediateReport {
    int round = 0;  // 1 = first submitted report draft
    std::string report_text;

    bool operator==(const IntermediateReport&) const = default;
};

struct StateLogEntry {
    int step_index = 0;
    ResearchState state = ResearchState::Plan;
    SupervisorPhase phase = SupervisorPhase::CheckPlan;
    bool approved = false;
    bool synthetic = false;  // verdict issued by the state machine, not the LLM
    std::string reason;

    bool operator==(const StateLogEntry&) const = default;
};

struct RawTrajectory {
    ResearchQuery query;
    Persona persona;
    Rubric rubric;
    std::vector<Message> messages;
    std::vector<IntermediateReport> intermediate_reports;
    TrajectoryStatus status = TrajectoryStatus::Completed;
    std::vector<StateLogEntry> state_log;
    std::string run_id;

    bool operator==(const RawTrajectory&) const = default;
};

struct RefinedProvenance {
    std::string raw_id;  // query_id of the source RawTrajectory
    std::string run_id;
    int consolidated_segments = 0;
    int fallback_segments = 0;

    bool operator==(const RefinedProvenance&) const = default;
};

struct RefinedTrajectory {
    ResearchQuery query;
    Persona persona;
    Rubric rubric;
    std::vector<Message> messages;  // no supervisor role
    RefinedProvenance provenance;

    bool operator==(const RefinedTrajectory&) const = default;
};

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

struct UsageTotals {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::int64_t calls = 0;

    bool operator==(const UsageTotals&) const = default;
};

struct RunManifest {
    std::string run_id;
    json config_snapshot = json::object();
    std::uint64_t seed = 0;
    struct Counts {
        int attempted = 0;
        int completed = 0;
        int filtered_by_length = 0;  // refinement-stage count, 0 at synthesis
        int failed = 0;

        bool operator==(const Counts&) const = default;
    } counts;
    std::int64_t elapsed_ms = 0;  // 0 under scripted backends (reproducible output)
    UsageTotals usage;

    bool operator==(const RunManifest&) const = default;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
    std::string rule;
    int index = 0;  // offending message index (or list position for round rules)

    bool operator==(const Violation&) const = default;
};

std::string to_string(const Violation& v);  // "Rule@index"

// Checks every RawTrajectory invariant; empty result means the trajectory is
// well-formed. Violations are data, not errors.
std::vector<Violation> validate_raw_trajectory(const RawTrajectory& t);

// ---------------------------------------------------------------------------
// JSON mapping (on-disk schemas)
// ---------------------------------------------------------------------------

json to_json(const ToolCallRecord& t);
json to_json(const Message& m);
json to_json(const Persona& p);
json to_json(const ResearchQuery& q);
json to_json(const BehaviorLog& b);
json to_json(const Rubric& r);
json to_json(const SupervisorVerdict& v);
json to_json(const RawTrajectory& t);
json to_json(const RefinedTrajectory& t);
json to_json(const RunManifest& m);

ToolCallRecord tool_call_from_json(const json& j);
Message message_from_json(const json& j);
Persona persona_from_json(const json& j);
ResearchQuery query_from_json(const json& j);
BehaviorLog behavior_log_from_json(const json& j);
Rubric rubric_from_json(const json& j);  // accepts alias "insight" for "depth"
RawTrajectory raw_trajectory_from_json(const json& j);
RefinedTrajectory refined_trajectory_from_json(const json& j);
RunManifest manifest_from_json(const json& j);

}  // namespace shoplab
