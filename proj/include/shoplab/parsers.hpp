#pragma once
// Grammar-strict parsers for the three structured agent output formats:
// researcher tag grammar, supervisor XML, and extractor JSON. Parsers are
// total: every input maps to a value or a typed ParseError, never a crash.

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "shoplab/model.hpp"

namespace shoplab {

enum class ParseErrorKind {
    MissingThink,
    BothActionsPresent,
    MalformedToolCallJson,
    UnknownToolName,
    ExtraneousContent,
    MissingTag,
    UnparsableApproved,
    NotJson,
    MissingField,
};

std::string to_string(ParseErrorKind k);

struct ParseError {
    ParseErrorKind kind;
    std::string detail;  // tag name, field name, or diagnostic text

    std::string message() const { return to_string(kind) + ": " + detail; }
};

// Minimal result type: either a value or a ParseError.
template <class T>
class Parsed {
public:
    Parsed(T value) : v_(std::move(value)) {}              // NOLINT(google-explicit-constructor)
    Parsed(ParseError error) : v_(std::move(error)) {}     // NOLINT(google-explicit-constructor)

    bool ok() const { return std::holds_alternative<T>(v_); }
    explicit operator bool() const { return ok(); }

    const T& value() const { return std::get<T>(v_); }
    T& value() { return std::get<T>(v_); }
    const ParseError& error() const { return std::get<ParseError>(v_); }

private:
    std::variant<T, ParseError> v_;
};

// ---------------------------------------------------------------------------
// Researcher output grammar:  <think>..</think> + at most one of
// <tool_call>..</tool_call> / <answer>..</answer>
// ---------------------------------------------------------------------------

enum class ActionKind { PlanOnly, ToolCall, Answer };

std::string to_string(ActionKind k);

struct ResearcherOutput {
    std::string think;
    ActionKind kind = ActionKind::PlanOnly;
    ToolCallRecord tool_call;  // kind == ToolCall only (call_id assigned by the session)
    std::string answer;        // kind == Answer only

    bool operator==(const ResearcherOutput&) const = default;
};

// strict=true rejects non-whitespace content outside the recognized tag pairs
// (including duplicate tags beyond the first); lenient mode ignores it.
// First-match-wins when duplicate tags appear.
Parsed<ResearcherOutput> parse_researcher(std::string_view text, bool strict = true);

// Renders back to tag form; parse_researcher(render_researcher(o)) == o.
std::string render_researcher(const ResearcherOutput& o);

// Returns a diagnostic when `args` does not satisfy the named tool's
// parameter schema, std::nullopt when valid.
std::optional<std::string> validate_tool_arguments(const std::string& tool_name, const json& args);

// ---------------------------------------------------------------------------
// Supervisor XML
// ---------------------------------------------------------------------------

// Tolerant of prose surrounding <supervisor_response>; `approved` parsed
// case-insensitively from true/false; feedback and reason taken verbatim.
Parsed<SupervisorVerdict> parse_supervisor(std::string_view text, SupervisorPhase phase);

std::string render_supervisor_response(const SupervisorVerdict& v);

// ---------------------------------------------------------------------------
// Extractor JSON
// ---------------------------------------------------------------------------

struct ExtractorResult {
    std::string rational;
    std::string evidence;
    std::string summary;

    bool operator==(const ExtractorResult&) const = default;
};

json to_json(const ExtractorResult& r);

// Accepts a bare JSON object or one wrapped in a fenced code block; key
// "rationale" is accepted as an alias of "rational"; extra keys are ignored.
Parsed<ExtractorResult> parse_extractor(std::string_view text);

std::string render_extractor_result(const ExtractorResult& r);

}  // namespace shoplab
