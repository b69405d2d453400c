#pragma once
// Phases 1 and 2: persona/query/rubric generation from behavior logs, and
// the state-machine-supervised research session. Every researcher step is
// gated by a supervisor verdict; rejected steps carry feedback (stored with
// role=supervisor) and are revised in place. Approval messages are never
// stored.

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shoplab/gateway.hpp"
#include "shoplab/model.hpp"
#include "shoplab/parsers.hpp"
#include "shoplab/templates.hpp"
#include "shoplab/toolenv.hpp"

namespace shoplab {

struct SessionLimits {
    int max_steps = 40;
    int max_revisions_per_step = 3;
    int max_total_revisions = 10;
};

struct StepOutcome {
    ResearchState state = ResearchState::Plan;
    ResearcherOutput output;                  // the stored (final) output of the step
    std::vector<SupervisorVerdict> verdicts;  // last one approved unless the session failed
    int revisions_used = 0;                   // count of approved=false verdicts
};

// ---------------------------------------------------------------------------
// Phase 1
// ---------------------------------------------------------------------------

std::string render_behavior_log(const BehaviorLog& log);
std::string render_persona(const Persona& p);

// Single LLM call over the rendered event history; the reply must be a JSON
// object {persona, query}. The query is checked structurally: at least 15
// words and at least one constraint marker (budget/limit phrasing), a
// documented heuristic for "not answerable by a single lookup".
std::pair<Persona, ResearchQuery> generate_persona_query(const BehaviorLog& log, Gateway& gateway,
                                                         const TemplateSet& templates,
                                                         const std::string& query_id);

// Rubric generation with one reprompt on malformed replies; the result is
// normalized. Each dimension must carry at least two criteria.
Rubric generate_rubric(const Persona& persona, const ResearchQuery& query, Gateway& gateway,
                       const TemplateSet& templates);

// ---------------------------------------------------------------------------
// Phase 2
// ---------------------------------------------------------------------------

// Deterministic "ROLE: content" rendering used for {history_str}.
std::string render_history(const std::vector<Message>& messages);

// Rubric rendered for supervisor prompts with raw (un-normalized) weights;
// the depth dimension is presented under the prompt vocabulary key
// "insight".
std::string render_evaluation_criteria(const Rubric& rubric);

// Wire mapping: supervisor-role messages travel as user-role messages
// prefixed "SUPERVISOR FEEDBACK:"; all other roles pass through.
std::vector<Message> to_wire_messages(const std::vector<Message>& messages);

struct SessionConfig {
    SessionLimits limits;
    int grammar_reprompts = 2;  // outside the approve/revise accounting
    std::string run_id;
};

// Runs the supervised research session. Never throws: parse failures,
// exhausted budgets/scripts and cap overruns all land in the returned
// trajectory's status.
RawTrajectory run_research_session(const ResearchQuery& query, const Persona& persona,
                                   const Rubric& rubric, ToolEnvironment& env, Gateway& gateway,
                                   const TemplateSet& templates, const SessionConfig& config);

// Body of the <answer> block of the last assistant message, if any.
std::optional<std::string> final_report_text(const std::vector<Message>& messages);

}  // namespace shoplab
