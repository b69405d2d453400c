#include "shoplab/refine.hpp"

#include <fstream>

#include "shoplab/errors.hpp"
#include "shoplab/parsers.hpp"
#include "shoplab/synthesis.hpp"

namespace shoplab {

int assistant_turn_count(const std::vector<Message>& messages) {
    int n = 0;
    for (const auto& m : messages) {
        if (m.role == Role::Assistant) ++n;
    }
    return n;
}

bool filter_by_length(const RawTrajectory& t, const FilterPolicy& policy) {
    return assistant_turn_count(t.messages) >= policy.tau;
}

std::vector<Segment> find_segments(const RawTrajectory& t) {
    const auto& ms = t.messages;
    const int n = static_cast<int>(ms.size());
    for (int i = 0; i < n; ++i) {
        if (ms[i].role != Role::Supervisor) continue;
        if (i == 0 || ms[i - 1].role != Role::Assistant || i + 1 >= n ||
            ms[i + 1].role != Role::Assistant) {
            throw MalformedInterleavingError(i);
        }
    }
    std::vector<Segment> out;
    int i = 0;
    while (i < n) {
        if (ms[i].role == Role::Assistant && i + 1 < n && ms[i + 1].role == Role::Supervisor) {
            int j = i;
            while (j + 2 < n && ms[j + 1].role == Role::Supervisor &&
                   ms[j + 2].role == Role::Assistant) {
                j += 2;
            }
            out.push_back({i, j});
            i = j + 1;
        } else {
            ++i;
        }
    }
    return out;
}

namespace {

// The internalized reply must keep the final action of the segment: same
// kind, and for tool calls the same tool and structurally equal arguments.
bool action_matches(const ResearcherOutput& candidate, const Message& final_msg) {
    auto final_parsed = parse_researcher(final_msg.content, /*strict=*/false);
    if (!final_parsed.ok()) return false;
    const ResearcherOutput& target = final_parsed.value();
    if (candidate.kind != target.kind) return false;
    if (candidate.kind == ActionKind::ToolCall) {
        return candidate.tool_call.tool_name == target.tool_call.tool_name &&
               candidate.tool_call.arguments == target.tool_call.arguments;
    }
    return true;
}

}  // namespace

RefinedTrajectory internalize(const RawTrajectory& t, Gateway& gateway,
                              const TemplateSet& templates, const InternalizeConfig& config) {
    auto segments = find_segments(t);

    RefinedTrajectory rt;
    rt.query = t.query;
    rt.persona = t.persona;
    rt.rubric = t.rubric;
    rt.provenance.raw_id = t.query.query_id;
    rt.provenance.run_id = t.run_id;

    size_t seg_idx = 0;
    for (int i = 0; i < static_cast<int>(t.messages.size()); ++i) {
        if (seg_idx < segments.size() && i == segments[seg_idx].start_index) {
            const Segment& seg = segments[seg_idx];
            const Message& final_msg = t.messages[seg.end_index];

            std::vector<Message> excerpt(t.messages.begin() + seg.start_index,
                                         t.messages.begin() + seg.end_index + 1);
            ChatRequest req;
            req.agent_tag = AgentTag::Internalizer;
            req.params = default_params(AgentTag::Internalizer);
            req.messages.push_back(
                {Role::System, "You consolidate supervised research steps into single messages."});
            req.messages.push_back(
                {Role::User, templates.render(TemplateId::Internalizer,
                                              {{"question", t.query.text},
                                               {"history_str", render_history(excerpt)}})});

            Message replacement = final_msg;  // fallback: final message verbatim
            replacement.round.reset();
            bool consolidated = false;
            for (int attempt = 0; attempt <= config.regeneration_attempts; ++attempt) {
                ChatResponse resp = gateway.complete(req);
                auto parsed = parse_researcher(resp.text, /*strict=*/true);
                if (parsed.ok() && action_matches(parsed.value(), final_msg)) {
                    replacement.content = resp.text;
                    consolidated = true;
                    break;
                }
                req.messages.push_back({Role::Assistant, resp.text});
                req.messages.push_back(
                    {Role::User,
                     "Your message was rejected: it must parse as <think>...</think> plus the "
                     "segment's final action, preserving the tool name and arguments exactly. "
                     "Re-emit the consolidated message."});
            }
            ++rt.provenance.consolidated_segments;
            if (!consolidated) ++rt.provenance.fallback_segments;
            rt.messages.push_back(std::move(replacement));
            i = seg.end_index;
            ++seg_idx;
        } else {
            rt.messages.push_back(t.messages[i]);
        }
    }
    return rt;
}

json sft_record(const RefinedTrajectory& rt) {
    json messages = json::array();
    for (int i = 0; i < static_cast<int>(rt.messages.size()); ++i) {
        const Message& m = rt.messages[i];
        if (m.role == Role::Supervisor) throw SupervisorRoleLeakError(i);
        messages.push_back(json{{"role", to_string(m.role)}, {"content", m.content}});
    }
    return json{{"messages", messages},
                {"meta", json{{"query_id", rt.query.query_id},
                              {"assistant_turns", assistant_turn_count(rt.messages)},
                              {"source_run", rt.provenance.run_id}}}};
}

int export_sft(const std::vector<RefinedTrajectory>& batch, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    int count = 0;
    for (const auto& rt : batch) {
        out << sft_record(rt).dump() << "\n";
        ++count;
    }
    return count;
}

json to_json(const RefinementReport& r) {
    return json{{"input_count", r.input_count},
                {"kept", r.kept},
                {"dropped_by_length", r.dropped_by_length},
                {"skipped_not_completed", r.skipped_not_completed},
                {"fallback_segments", r.fallback_segments},
                {"output_count", r.output_count}};
}

RefineOutcome refine_batch(const std::vector<RawTrajectory>& raws, const FilterPolicy& policy,
                           Gateway& gateway, const TemplateSet& templates,
                           const InternalizeConfig& config) {
    RefineOutcome out;
    out.report.input_count = static_cast<int>(raws.size());
    for (const auto& t : raws) {
        if (t.status != TrajectoryStatus::Completed) {
            ++out.report.skipped_not_completed;
            continue;
        }
        if (!filter_by_length(t, policy)) {
            ++out.report.dropped_by_length;
            continue;
        }
        ++out.report.kept;
        RefinedTrajectory rt = internalize(t, gateway, templates, config);
        out.report.fallback_segments += rt.provenance.fallback_segments;
        out.refined.push_back(std::move(rt));
    }
    out.report.output_count = static_cast<int>(out.refined.size());
    return out;
}

}  // namespace shoplab
