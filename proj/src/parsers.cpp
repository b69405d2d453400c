#include "shoplab/parsers.hpp"

#include <algorithm>
#include <cctype>

namespace shoplab {

namespace {

std::string trim(std::string_view s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

bool is_all_whitespace(std::string_view s) {
    return std::all_of(s.begin(), s.end(),
                       [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

struct TagSpan {
    size_t begin = 0;  // position of '<tag>'
    size_t end = 0;    // one past '</tag>'
    std::string inner;
};

// First complete <tag>...</tag> pair; matching is case-sensitive, truncated
// pairs are not recovered.
std::optional<TagSpan> find_tag(std::string_view text, const std::string& tag) {
    const std::string open = "<" + tag + ">";
    const std::string close = "</" + tag + ">";
    size_t b = text.find(open);
    if (b == std::string_view::npos) return std::nullopt;
    size_t inner_begin = b + open.size();
    size_t c = text.find(close, inner_begin);
    if (c == std::string_view::npos) return std::nullopt;
    TagSpan span;
    span.begin = b;
    span.end = c + close.size();
    span.inner = std::string(text.substr(inner_begin, c - inner_begin));
    return span;
}

std::string excise(std::string_view text, const TagSpan& span) {
    std::string out(text.substr(0, span.begin));
    out += text.substr(span.end);
    return out;
}

}  // namespace

std::string to_string(ParseErrorKind k) {
    switch (k) {
        case ParseErrorKind::MissingThink: return "MissingThink";
        case ParseErrorKind::BothActionsPresent: return "BothActionsPresent";
        case ParseErrorKind::MalformedToolCallJson: return "MalformedToolCallJson";
        case ParseErrorKind::UnknownToolName: return "UnknownToolName";
        case ParseErrorKind::ExtraneousContent: return "ExtraneousContent";
        case ParseErrorKind::MissingTag: return "MissingTag";
        case ParseErrorKind::UnparsableApproved: return "UnparsableApproved";
        case ParseErrorKind::NotJson: return "NotJson";
        case ParseErrorKind::MissingField: return "MissingField";
    }
    return "?";
}

std::string to_string(ActionKind k) {
    switch (k) {
        case ActionKind::PlanOnly: return "PlanOnly";
        case ActionKind::ToolCall: return "ToolCall";
        case ActionKind::Answer: return "Answer";
    }
    return "?";
}

std::optional<std::string> validate_tool_arguments(const std::string& tool_name,
                                                   const json& args) {
    if (!args.is_object()) return "arguments must be a JSON object";

    auto string_array = [&](const char* key, bool required) -> std::optional<std::string> {
        if (!args.contains(key)) {
            if (required) return std::string("missing required field \"") + key + "\"";
            return std::nullopt;
        }
        if (!args[key].is_array()) return std::string("\"") + key + "\" must be an array";
        for (const auto& e : args[key]) {
            if (!e.is_string()) return std::string("\"") + key + "\" must contain strings";
        }
        return std::nullopt;
    };
    auto string_field = [&](const char* key, bool required) -> std::optional<std::string> {
        if (!args.contains(key)) {
            if (required) return std::string("missing required field \"") + key + "\"";
            return std::nullopt;
        }
        if (!args[key].is_string()) return std::string("\"") + key + "\" must be a string";
        return std::nullopt;
    };
    auto no_extra = [&](std::initializer_list<const char*> allowed)
        -> std::optional<std::string> {
        for (auto it = args.begin(); it != args.end(); ++it) {
            bool known = false;
            for (const char* k : allowed) {
                if (it.key() == k) known = true;
            }
            if (!known) return "unexpected argument \"" + it.key() + "\"";
        }
        return std::nullopt;
    };

    if (tool_name == "web_search") {
        if (auto e = string_array("queries", true)) return *e;
        return no_extra({"queries"});
    }
    if (tool_name == "web_visit") {
        if (auto e = string_array("urls", true)) return *e;
        if (auto e = string_field("goal", true)) return *e;
        return no_extra({"urls", "goal"});
    }
    if (tool_name == "product_search") {
        if (auto e = string_field("query", true)) return *e;
        if (auto e = string_field("shop_id", false)) return *e;
        if (auto e = string_field("price", false)) return *e;
        return no_extra({"query", "shop_id", "price"});
    }
    if (tool_name == "view_product_details") {
        if (auto e = string_array("product_ids", true)) return *e;
        if (auto e = string_field("goal", true)) return *e;
        return no_extra({"product_ids", "goal"});
    }
    return "unknown tool";
}

Parsed<ResearcherOutput> parse_researcher(std::string_view text, bool strict) {
    auto think = find_tag(text, "think");
    if (!think) return ParseError{ParseErrorKind::MissingThink, "no <think>...</think> pair"};
    if (is_all_whitespace(think->inner)) {
        return ParseError{ParseErrorKind::MissingThink, "think block is empty"};
    }

    const std::string rest = excise(text, *think);
    auto tool = find_tag(rest, "tool_call");
    auto answer = find_tag(rest, "answer");
    if (tool && answer) {
        return ParseError{ParseErrorKind::BothActionsPresent,
                          "both <tool_call> and <answer> found"};
    }

    ResearcherOutput out;
    out.think = trim(think->inner);

    std::string remainder = rest;
    if (tool) {
        remainder = excise(rest, *tool);
        const std::string body = trim(tool->inner);
        json doc = json::parse(body, nullptr, false);
        if (doc.is_discarded()) {
            return ParseError{ParseErrorKind::MalformedToolCallJson, "body is not valid JSON"};
        }
        if (!doc.is_object() || !doc.contains("name") || !doc["name"].is_string()) {
            return ParseError{ParseErrorKind::MalformedToolCallJson,
                              "expected object with string \"name\""};
        }
        if (!doc.contains("arguments")) {
            return ParseError{ParseErrorKind::MalformedToolCallJson, "missing \"arguments\""};
        }
        const std::string name = doc["name"].get<std::string>();
        if (!is_registered_tool(name)) {
            return ParseError{ParseErrorKind::UnknownToolName, name};
        }
        if (auto err = validate_tool_arguments(name, doc["arguments"])) {
            return ParseError{ParseErrorKind::MalformedToolCallJson, name + ": " + *err};
        }
        out.kind = ActionKind::ToolCall;
        out.tool_call.tool_name = name;
        out.tool_call.arguments = doc["arguments"];
    } else if (answer) {
        remainder = excise(rest, *answer);
        out.kind = ActionKind::Answer;
        out.answer = trim(answer->inner);
    } else {
        out.kind = ActionKind::PlanOnly;
    }

    if (strict && !is_all_whitespace(remainder)) {
        return ParseError{ParseErrorKind::ExtraneousContent,
                          "non-whitespace content outside recognized tags"};
    }
    return out;
}

std::string render_researcher(const ResearcherOutput& o) {
    std::string out = "<think>" + o.think + "</think>";
    switch (o.kind) {
        case ActionKind::PlanOnly:
            break;
        case ActionKind::ToolCall: {
            json doc{{"name", o.tool_call.tool_name}, {"arguments", o.tool_call.arguments}};
            out += "\n<tool_call>\n" + doc.dump() + "\n</tool_call>";
            break;
        }
        case ActionKind::Answer:
            out += "\n<answer>" + o.answer + "</answer>";
            break;
    }
    return out;
}

Parsed<SupervisorVerdict> parse_supervisor(std::string_view text, SupervisorPhase phase) {
    auto wrapper = find_tag(text, "supervisor_response");
    if (!wrapper) return ParseError{ParseErrorKind::MissingTag, "supervisor_response"};

    auto approved = find_tag(wrapper->inner, "approved");
    if (!approved) return ParseError{ParseErrorKind::MissingTag, "approved"};
    auto feedback = find_tag(wrapper->inner, "feedback");
    if (!feedback) return ParseError{ParseErrorKind::MissingTag, "feedback"};
    auto reason = find_tag(wrapper->inner, "reason");
    if (!reason) return ParseError{ParseErrorKind::MissingTag, "reason"};

    std::string flag = trim(approved->inner);
    std::transform(flag.begin(), flag.end(), flag.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

    SupervisorVerdict v;
    if (flag == "true") {
        v.approved = true;
    } else if (flag == "false") {
        v.approved = false;
    } else {
        return ParseError{ParseErrorKind::UnparsableApproved, trim(approved->inner)};
    }
    v.feedback = feedback->inner;
    v.reason = reason->inner;
    v.phase = phase;
    return v;
}

std::string render_supervisor_response(const SupervisorVerdict& v) {
    std::string out = "<supervisor_response>\n";
    out += std::string("<approved>") + (v.approved ? "true" : "false") + "</approved>\n";
    out += "<feedback>" + v.feedback + "</feedback>\n";
    out += "<reason>" + v.reason + "</reason>\n";
    out += "</supervisor_response>";
    return out;
}

json to_json(const ExtractorResult& r) {
    return json{{"rational", r.rational}, {"evidence", r.evidence}, {"summary", r.summary}};
}

Parsed<ExtractorResult> parse_extractor(std::string_view text) {
    std::string body = trim(text);
    if (body.rfind("```", 0) == 0) {
        // fenced block: drop the fence line (``` or ```json) and the closing fence
        size_t nl = body.find('\n');
        size_t close = body.rfind("```");
        if (nl == std::string::npos || close <= nl) {
            return ParseError{ParseErrorKind::NotJson, "unterminated code fence"};
        }
        body = trim(body.substr(nl + 1, close - nl - 1));
    }

    json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        return ParseError{ParseErrorKind::NotJson, "expected a JSON object"};
    }

    auto field = [&](const char* primary, const char* alias) -> std::optional<std::string> {
        const char* key = doc.contains(primary) ? primary : (alias && doc.contains(alias) ? alias : nullptr);
        if (!key) return std::nullopt;
        const json& v = doc[key];
        return v.is_string() ? v.get<std::string>() : v.dump();
    };

    ExtractorResult r;
    auto rational = field("rational", "rationale");
    if (!rational) return ParseError{ParseErrorKind::MissingField, "rational"};
    auto evidence = field("evidence", nullptr);
    if (!evidence) return ParseError{ParseErrorKind::MissingField, "evidence"};
    auto summary = field("summary", nullptr);
    if (!summary) return ParseError{ParseErrorKind::MissingField, "summary"};
    r.rational = *rational;
    r.evidence = *evidence;
    r.summary = *summary;
    return r;
}

std::string render_extractor_result(const ExtractorResult& r) { return to_json(r).dump(); }

}  // namespace shoplab
