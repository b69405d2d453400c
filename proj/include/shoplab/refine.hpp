#pragma once
// Phase 3: length filtering and reflective internalization. Each maximal
// [assistant, supervisor]+ assistant interleaving collapses into a single
// consolidated assistant message whose think block carries the lesson; the
// final action of the segment is preserved bit-for-bit.

#include <ostream>
#include <string>
#include <vector>

#include "shoplab/gateway.hpp"
#include "shoplab/model.hpp"
#include "shoplab/templates.hpp"

namespace shoplab {

struct FilterPolicy {
    int tau = 7;  // minimum interaction turns; turns = assistant messages
};

int assistant_turn_count(const std::vector<Message>& messages);

// keep <=> assistant turns >= tau. Caller ensures t.status == completed.
bool filter_by_length(const RawTrajectory& t, const FilterPolicy& policy);

struct Segment {
    int start_index = 0;  // inclusive, an assistant message
    int end_index = 0;    // inclusive, an assistant message
    int length() const { return end_index - start_index + 1; }

    bool operator==(const Segment&) const = default;
};

// All maximal assistant/supervisor interleavings, in order, non-overlapping.
// Throws MalformedInterleavingError when a supervisor message is not flanked
// by assistant messages.
std::vector<Segment> find_segments(const RawTrajectory& t);

struct InternalizeConfig {
    int regeneration_attempts = 2;  // extra attempts after the first reply
};

// Replaces every segment with one internalizer-generated message. A reply
// must parse under the researcher grammar and preserve the segment's final
// action (kind, tool name, structurally equal arguments); after exhausting
// regeneration attempts the segment's final assistant message is used
// verbatim and counted as a fallback.
RefinedTrajectory internalize(const RawTrajectory& t, Gateway& gateway,
                              const TemplateSet& templates, const InternalizeConfig& config = {});

// One SFT chat record per trajectory: {messages:[{role, content}], meta}.
// Throws SupervisorRoleLeakError if a supervisor message survived.
json sft_record(const RefinedTrajectory& rt);

// Appends one line per trajectory; returns the record count.
int export_sft(const std::vector<RefinedTrajectory>& batch, const std::string& path);

struct RefinementReport {
    int input_count = 0;
    int kept = 0;
    int dropped_by_length = 0;
    int skipped_not_completed = 0;
    int fallback_segments = 0;
    int output_count = 0;
};

json to_json(const RefinementReport& r);

struct RefineOutcome {
    std::vector<RefinedTrajectory> refined;
    RefinementReport report;
};

RefineOutcome refine_batch(const std::vector<RawTrajectory>& raws, const FilterPolicy& policy,
                           Gateway& gateway, const TemplateSet& templates,
                           const InternalizeConfig& config = {});

}  // namespace shoplab
