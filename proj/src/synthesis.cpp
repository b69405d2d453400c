#include "shoplab/synthesis.hpp"

#include <sstream>

#include "shoplab/errors.hpp"

namespace shoplab {

// ---------------------------------------------------------------------------
// Renderings
// ---------------------------------------------------------------------------

std::string render_behavior_log(const BehaviorLog& log) {
    std::ostringstream out;
    int i = 0;
    for (const auto& e : log.events) {
        if (i) out << "\n";
        out << ++i << ". [" << to_string(e.kind) << " @ " << e.timestamp << "] " << e.payload;
    }
    return out.str();
}

std::string render_persona(const Persona& p) {
    std::ostringstream out;
    out << p.profile_text;
    if (!p.facets.empty()) {
        out << "\n\nFacets:";
        for (const auto& [k, v] : p.facets) out << "\n- " << k << ": " << v;
    }
    return out.str();
}

std::string render_history(const std::vector<Message>& messages) {
    std::ostringstream out;
    bool first = true;
    for (const auto& m : messages) {
        if (!first) out << "\n\n";
        first = false;
        std::string role = to_string(m.role);
        for (auto& c : role) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        out << role << ": " << m.content;
    }
    return out.str();
}

std::string render_evaluation_criteria(const Rubric& rubric) {
    nlohmann::ordered_json dims;
    static const char* kPromptKeys[] = {"comprehensiveness", "insight", "instruction_following",
                                        "readability"};
    for (RaceDimension d : kAllDimensions) {
        const auto& dim = rubric[d];
        nlohmann::ordered_json criteria = nlohmann::ordered_json::array();
        for (const auto& c : dim.criteria) {
            criteria.push_back(nlohmann::ordered_json{
                {"criterion", c.name}, {"explanation", c.explanation}, {"weight", c.raw_weight}});
        }
        dims[kPromptKeys[static_cast<int>(d)]] =
            nlohmann::ordered_json{{"weight", dim.raw_weight}, {"criteria", criteria}};
    }
    return dims.dump(2);
}

std::vector<Message> to_wire_messages(const std::vector<Message>& messages) {
    std::vector<Message> out;
    out.reserve(messages.size());
    for (const auto& m : messages) {
        if (m.role == Role::Supervisor) {
            Message w;
            w.role = Role::User;
            w.content = "SUPERVISOR FEEDBACK:\n" + m.content;
            out.push_back(std::move(w));
        } else {
            Message w = m;
            w.state_tag.reset();
            w.round.reset();
            out.push_back(std::move(w));
        }
    }
    return out;
}

std::optional<std::string> final_report_text(const std::vector<Message>& messages) {
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if (it->role != Role::Assistant) continue;
        auto parsed = parse_researcher(it->content, /*strict=*/false);
        if (parsed.ok() && parsed.value().kind == ActionKind::Answer) {
            return parsed.value().answer;
        }
        return std::nullopt;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Phase 1
// ---------------------------------------------------------------------------

namespace {

// Strips an optional markdown fence and parses a JSON object.
json parse_json_reply(const std::string& text) {
    std::string body = text;
    size_t b = body.find_first_not_of(" \t\r\n");
    if (b != std::string::npos && body.compare(b, 3, "```") == 0) {
        size_t nl = body.find('\n', b);
        size_t close = body.rfind("```");
        if (nl != std::string::npos && close > nl) body = body.substr(nl + 1, close - nl - 1);
    }
    return json::parse(body, nullptr, false);
}

int word_count(const std::string& text) {
    std::istringstream in(text);
    std::string w;
    int n = 0;
    while (in >> w) ++n;
    return n;
}

// Heuristic markers for "contains at least one constraint phrase".
bool has_constraint_phrase(const std::string& text) {
    static const std::vector<std::string> markers = {
        "under",  "at least", "at most", "budget", "within",    "less than", "more than",
        "no more", "between", "must",    "need",   "require",   "prefer",    "maximum",
        "minimum", "up to",   "below",   "cheap",  "compatible", "deadline"};
    std::string lower = text;
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (const auto& m : markers) {
        if (lower.find(m) != std::string::npos) return true;
    }
    return false;
}

ChatRequest agent_request(AgentTag tag, const std::string& system_line,
                          const std::string& user_text) {
    ChatRequest req;
    req.agent_tag = tag;
    req.params = default_params(tag);
    req.messages.push_back({Role::System, system_line});
    req.messages.push_back({Role::User, user_text});
    return req;
}

}  // namespace

std::pair<Persona, ResearchQuery> generate_persona_query(const BehaviorLog& log, Gateway& gateway,
                                                         const TemplateSet& templates,
                                                         const std::string& query_id) {
    if (log.events.empty()) throw EmptyBehaviorLogError();

    auto req = agent_request(
        AgentTag::UserAgent, "You simulate shoppers for an e-commerce research platform.",
        templates.render(TemplateId::UserAgentPersona, {{"history_str", render_behavior_log(log)}}));
    ChatResponse resp = gateway.complete(req);

    json doc = parse_json_reply(resp.text);
    if (doc.is_discarded() || !doc.is_object()) {
        throw MalformedUserAgentReplyError("not a JSON object");
    }
    if (!doc.contains("persona")) throw MalformedUserAgentReplyError("missing \"persona\"");
    if (!doc.contains("query") || !doc["query"].is_string()) {
        throw MalformedUserAgentReplyError("missing \"query\"");
    }

    Persona persona;
    if (doc["persona"].is_string()) {
        persona.profile_text = doc["persona"].get<std::string>();
    } else {
        try {
            persona = persona_from_json(doc["persona"]);
        } catch (const Error& e) {
            throw MalformedUserAgentReplyError(e.what());
        }
    }
    if (persona.profile_text.empty()) throw MalformedUserAgentReplyError("empty persona");

    ResearchQuery query;
    query.query_id = query_id;
    query.text = doc["query"].get<std::string>();
    query.source_user_id = log.user_id;
    if (query.text.empty()) throw MalformedUserAgentReplyError("empty query");
    if (word_count(query.text) < 15) {
        throw MalformedUserAgentReplyError("query too short (needs >= 15 words)");
    }
    if (!has_constraint_phrase(query.text)) {
        throw MalformedUserAgentReplyError("query lacks a constraint phrase");
    }
    return {persona, query};
}

namespace {

Rubric parse_rubric_reply(const std::string& text) {
    json doc = parse_json_reply(text);
    if (doc.is_discarded() || !doc.is_object()) throw MalformedRubricError("not a JSON object");
    Rubric r;
    try {
        r = rubric_from_json(doc);
    } catch (const DimensionMissingError&) {
        throw;
    } catch (const Error& e) {
        throw MalformedRubricError(e.what());
    }
    for (RaceDimension d : kAllDimensions) {
        if (r[d].criteria.size() < 2) {
            throw MalformedRubricError("dimension " + dimension_key(d) +
                                       " needs at least 2 criteria");
        }
    }
    return r;
}

}  // namespace

Rubric generate_rubric(const Persona& persona, const ResearchQuery& query, Gateway& gateway,
                       const TemplateSet& templates) {
    auto req = agent_request(
        AgentTag::UserAgent, "You simulate shoppers for an e-commerce research platform.",
        templates.render(TemplateId::UserAgentRubric,
                         {{"question", query.text}, {"history_str", render_persona(persona)}}));
    ChatResponse resp = gateway.complete(req);
    try {
        return normalize_rubric(parse_rubric_reply(resp.text));
    } catch (const Error& e) {
        // one reprompt before giving up
        req.messages.push_back({Role::Assistant, resp.text});
        req.messages.push_back(
            {Role::User, std::string("Your reply was rejected (") + e.what() +
                             "). Respond with a single JSON object holding the four dimensions "
                             "(comprehensiveness, insight, instruction_following, readability), "
                             "each with a weight and at least two weighted criteria."});
        ChatResponse retry = gateway.complete(req);
        return normalize_rubric(parse_rubric_reply(retry.text));
    }
}

// ---------------------------------------------------------------------------
// Phase 2: the supervised session
// ---------------------------------------------------------------------------

namespace {

struct SessionState {
    std::vector<Message> messages;
    std::vector<IntermediateReport> intermediate_reports;
    std::vector<StateLogEntry> state_log;
    ResearchState state = ResearchState::Plan;
    int steps_used = 0;
    int total_revisions = 0;
    int report_round = 0;  // next rejected report draft gets round report_round+1
    int approved_plans = 0;
    std::map<std::string, int> approved_calls;  // per tool
    int next_call_id = 0;
};

std::string render_status_digest(const SessionState& s, const SessionLimits& limits) {
    std::ostringstream out;
    out << "Current state: " << to_string(s.state) << "\n";
    out << "Approved plans: " << s.approved_plans << "\n";
    out << "Approved tool calls:";
    bool first = true;
    for (const auto& name : registered_tool_names()) {
        auto it = s.approved_calls.find(name);
        out << (first ? " " : ", ") << name << "=" << (it == s.approved_calls.end() ? 0 : it->second);
        first = false;
    }
    out << "\n";
    out << "Steps used: " << s.steps_used << "/" << limits.max_steps << "\n";
    out << "Revisions used: " << s.total_revisions << "/" << limits.max_total_revisions;
    return out.str();
}

class SessionRunner {
public:
    SessionRunner(const ResearchQuery& query, const Persona& persona, const Rubric& rubric,
                  ToolEnvironment& env, Gateway& gateway, const TemplateSet& templates,
                  const SessionConfig& config)
        : query_(query),
          persona_(persona),
          rubric_(rubric),
          env_(env),
          gateway_(gateway),
          templates_(templates),
          config_(config),
          criteria_text_(render_evaluation_criteria(rubric)) {}

    RawTrajectory run() {
        RawTrajectory t;
        t.query = query_;
        t.persona = persona_;
        t.rubric = rubric_;
        t.run_id = config_.run_id;

        s_.messages.push_back({Role::System, templates_.text(TemplateId::ResearcherSystem)});
        s_.messages.push_back({Role::User, query_.text});

        TrajectoryStatus status = TrajectoryStatus::Completed;
        try {
            status = run_steps();
        } catch (const Error&) {
            // backend failures (script exhausted, budget, transport) abort the
            // session but not the run
            status = TrajectoryStatus::FailedParse;
        }

        // a failure right after a rejection would leave the feedback message
        // trailing; drop it so the flanking invariant holds (the verdict is
        // still in the state log)
        if (!s_.messages.empty() && s_.messages.back().role == Role::Supervisor) {
            s_.messages.pop_back();
        }

        t.messages = std::move(s_.messages);
        t.intermediate_reports = std::move(s_.intermediate_reports);
        t.state_log = std::move(s_.state_log);
        t.status = status;
        return t;
    }

private:
    // Emits one researcher output, re-prompting on grammar violations up to
    // config_.grammar_reprompts times. Returns nullopt on persistent failure.
    std::optional<std::pair<std::string, ResearcherOutput>> emit() {
        ChatRequest req;
        req.agent_tag = AgentTag::ResearchAgent;
        req.params = default_params(AgentTag::ResearchAgent);
        req.messages = to_wire_messages(s_.messages);
        for (int attempt = 0; attempt <= config_.grammar_reprompts; ++attempt) {
            ChatResponse resp = gateway_.complete(req);
            auto parsed = parse_researcher(resp.text, /*strict=*/true);
            if (parsed.ok()) return std::make_pair(resp.text, parsed.value());
            // transient correction exchange; never stored in the trajectory
            req.messages.push_back({Role::Assistant, resp.text});
            req.messages.push_back(
                {Role::User, "FORMAT ERROR: " + parsed.error().message() +
                                 ". Re-emit the step following the required format: a "
                                 "<think>...</think> block followed by at most one of "
                                 "<tool_call>...</tool_call> or <answer>...</answer>."});
        }
        return std::nullopt;
    }

    SupervisorVerdict evaluate(SupervisorPhase phase, const std::string& latte_response) {
        TemplateId tmpl = TemplateId::PlanEval;
        switch (phase) {
            case SupervisorPhase::CheckPlan: tmpl = TemplateId::PlanEval; break;
            case SupervisorPhase::CheckToolcall: tmpl = TemplateId::ToolcallEval; break;
            case SupervisorPhase::FinalAnswerGate: tmpl = TemplateId::FinalAnswerGate; break;
            case SupervisorPhase::CheckReport: tmpl = TemplateId::FinalReportEval; break;
        }
        const std::string digest = render_status_digest(s_, config_.limits);
        Bindings bindings{{"question", query_.text},
                          {"history_str", render_history(s_.messages)},
                          {"latte_response", latte_response},
                          {"evaluation_criteria", criteria_text_},
                          {"checklist_summary", digest},
                          {"status_summary", digest}};

        ChatRequest req;
        req.agent_tag = AgentTag::Supervisor;
        req.params = default_params(AgentTag::Supervisor);
        req.messages.push_back(
            {Role::System, templates_.render(TemplateId::SupervisorSystem, bindings)});
        req.messages.push_back({Role::User, templates_.render(tmpl, bindings)});

        ChatResponse resp = gateway_.complete(req);
        auto parsed = parse_supervisor(resp.text, phase);
        if (!parsed.ok()) {
            // a supervisor that cannot speak its own grammar ends the session
            throw Error("unparsable supervisor reply: " + parsed.error().message());
        }
        SupervisorVerdict v = parsed.value();
        if (!v.approved && v.feedback.empty()) v.feedback = v.reason.empty() ? "(rejected)" : v.reason;
        return v;
    }

    void log_verdict(SupervisorPhase phase, const SupervisorVerdict& v, bool synthetic) {
        s_.state_log.push_back(
            {s_.steps_used, s_.state, phase, v.approved, synthetic, v.reason});
    }

    Message make_assistant(const std::string& text, const ResearcherOutput& out, int round) {
        Message m;
        m.role = Role::Assistant;
        m.content = text;
        m.state_tag = s_.state;
        m.round = round;
        if (out.kind == ActionKind::ToolCall) {
            ToolCallRecord call = out.tool_call;
            call.call_id = "call_" + std::to_string(s_.next_call_id++);
            m.tool_calls.push_back(std::move(call));
        }
        return m;
    }

    void execute_tool(const Message& assistant_msg) {
        const ToolCallRecord& call = assistant_msg.tool_calls.front();
        Message tool_msg;
        tool_msg.role = Role::Tool;
        tool_msg.tool_call_id = call.call_id;
        tool_msg.content = env_.execute(call);
        s_.messages.push_back(std::move(tool_msg));
    }

    // One full step: emit, evaluate, revise until approval or a cap trips.
    // Returns the session status when the session must stop, nullopt to
    // continue with the next step.
    std::optional<TrajectoryStatus> run_step() {
        auto emitted = emit();
        if (!emitted) return TrajectoryStatus::FailedParse;
        std::string text = emitted->first;
        ResearcherOutput output = emitted->second;
        int rejections = 0;

        for (;;) {
            // classify the output in the current state
            SupervisorPhase phase = SupervisorPhase::CheckPlan;
            std::optional<std::string> synthetic_feedback;
            switch (s_.state) {
                case ResearchState::Plan:
                    phase = SupervisorPhase::CheckPlan;
                    if (output.kind == ActionKind::Answer) {
                        synthetic_feedback =
                            "A final answer is premature: no research has been performed yet. "
                            "Produce a research plan first, then gather evidence with the "
                            "available tools.";
                    }
                    break;
                case ResearchState::Toolcall:
                    if (output.kind == ActionKind::PlanOnly) {
                        phase = SupervisorPhase::CheckToolcall;
                        synthetic_feedback =
                            "This step contains no action. While researching, each step must "
                            "either make exactly one tool call or provide the final answer "
                            "inside <answer></answer> tags.";
                    } else if (output.kind == ActionKind::ToolCall) {
                        phase = SupervisorPhase::CheckToolcall;
                    } else {
                        phase = SupervisorPhase::FinalAnswerGate;
                    }
                    break;
                case ResearchState::Report:
                    phase = SupervisorPhase::CheckReport;
                    if (output.kind != ActionKind::Answer) {
                        synthetic_feedback =
                            "The final report phase has been reached; submit the revised final "
                            "report inside <answer></answer> tags.";
                    }
                    break;
            }

            SupervisorVerdict verdict;
            if (synthetic_feedback) {
                verdict.approved = false;
                verdict.feedback = *synthetic_feedback;
                verdict.reason = "state machine rule";
                verdict.phase = phase;
                log_verdict(phase, verdict, /*synthetic=*/true);
            } else {
                verdict = evaluate(phase, text);
                log_verdict(phase, verdict, /*synthetic=*/false);
            }

            if (verdict.approved) {
                if (phase == SupervisorPhase::FinalAnswerGate) {
                    // enter the report phase and re-evaluate the same draft
                    // against the rubric; the message is committed with its
                    // Report tag by the CheckReport branch below
                    s_.state = ResearchState::Report;
                    continue;
                }
                Message msg = make_assistant(text, output, rejections);
                if (s_.state == ResearchState::Plan && output.kind == ActionKind::ToolCall) {
                    // a plan-phase tool call approved by the plan gate starts
                    // the toolcall phase directly
                    s_.state = ResearchState::Toolcall;
                    msg.state_tag = s_.state;
                }
                s_.messages.push_back(msg);
                if (output.kind == ActionKind::ToolCall) {
                    execute_tool(s_.messages.back());
                    s_.state = ResearchState::Toolcall;
                    ++s_.approved_calls[output.tool_call.tool_name];
                } else if (output.kind == ActionKind::PlanOnly) {
                    ++s_.approved_plans;
                    s_.state = ResearchState::Toolcall;
                }
                ++s_.steps_used;
                if (phase == SupervisorPhase::CheckReport) return TrajectoryStatus::Completed;
                return std::nullopt;  // next step
            }

            // rejection
            ++rejections;
            ++s_.total_revisions;
            if (phase == SupervisorPhase::CheckReport && output.kind == ActionKind::Answer) {
                s_.intermediate_reports.push_back({++s_.report_round, output.answer});
            }
            if (rejections > config_.limits.max_revisions_per_step ||
                s_.total_revisions > config_.limits.max_total_revisions) {
                // terminal rejection: the draft and its verdict are logged but
                // the feedback is not appended (a trailing supervisor message
                // would violate the flanking invariant)
                s_.messages.push_back(make_assistant(text, output, rejections - 1));
                return TrajectoryStatus::FailedRevisionCap;
            }

            s_.messages.push_back(make_assistant(text, output, rejections - 1));
            Message feedback;
            feedback.role = Role::Supervisor;
            feedback.content = verdict.feedback;
            feedback.round = rejections;
            s_.messages.push_back(std::move(feedback));

            auto revised = emit();
            if (!revised) return TrajectoryStatus::FailedParse;
            text = revised->first;
            output = revised->second;
        }
    }

    TrajectoryStatus run_steps() {
        for (;;) {
            if (s_.steps_used >= config_.limits.max_steps) {
                return TrajectoryStatus::FailedStepCap;
            }
            auto stop = run_step();
            if (stop) return *stop;
        }
    }

    const ResearchQuery& query_;
    const Persona& persona_;
    const Rubric& rubric_;
    ToolEnvironment& env_;
    Gateway& gateway_;
    const TemplateSet& templates_;
    SessionConfig config_;
    std::string criteria_text_;
    SessionState s_;
};

}  // namespace

RawTrajectory run_research_session(const ResearchQuery& query, const Persona& persona,
                                   const Rubric& rubric, ToolEnvironment& env, Gateway& gateway,
                                   const TemplateSet& templates, const SessionConfig& config) {
    SessionRunner runner(query, persona, rubric, env, gateway, templates, config);
    return runner.run();
}

}  // namespace shoplab
