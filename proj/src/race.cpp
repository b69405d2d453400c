#include "shoplab/race.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <set>
#include <sstream>

#include "shoplab/errors.hpp"

namespace shoplab {

namespace {

const char* kPromptDimensionNames[] = {"comprehensiveness", "insight", "instruction_following",
                                       "readability"};

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string build_judge_prompt(RaceDimension d, const RubricDimension& dim,
                               const std::string& report_a, const std::string& report_b,
                               int s_max) {
    std::ostringstream out;
    out << "You are an impartial judge comparing two product research reports written for the "
           "same shopping question.\n\n";
    out << "Dimension under evaluation: " << kPromptDimensionNames[static_cast<int>(d)] << "\n\n";
    out << "Criteria:\n";
    int i = 0;
    for (const auto& c : dim.criteria) {
        out << ++i << ". " << c.name;
        if (!c.explanation.empty()) out << " - " << c.explanation;
        out << "\n";
    }
    out << "\nFor EACH criterion, assign integer scores from 0 to " << s_max
        << " to Report A and Report B (0 = fails entirely, " << s_max
        << " = flawless) and give a one-sentence rationale.\n";
    out << "Respond with a single JSON object of exactly this form:\n";
    out << "{\"scores\": [{\"criterion\": \"<name>\", \"report_a\": <int>, \"report_b\": <int>, "
           "\"rationale\": \"<text>\"}, ...]}\n";
    out << "with one entry per criterion, in the order listed above.\n\n";
    out << "Report A:\n" << report_a << "\n\n";
    out << "Report B:\n" << report_b;
    return out.str();
}

json parse_json_object(const std::string& text) {
    std::string body = text;
    size_t b = body.find_first_not_of(" \t\r\n");
    if (b != std::string::npos && body.compare(b, 3, "```") == 0) {
        size_t nl = body.find('\n', b);
        size_t close = body.rfind("```");
        if (nl != std::string::npos && close > nl) body = body.substr(nl + 1, close - nl - 1);
    }
    return json::parse(body, nullptr, false);
}

}  // namespace

std::vector<CriterionScore> judge_pairwise(const std::string& target_report,
                                           const std::string& reference_report,
                                           const Rubric& rubric, Gateway& gateway,
                                           const JudgeConfig& config) {
    if (target_report.empty() || reference_report.empty()) {
        throw Error("judge_pairwise: reports must be non-empty");
    }
    std::vector<CriterionScore> all;
    for (RaceDimension d : kAllDimensions) {
        const RubricDimension& dim = rubric[d];

        // position-bias mitigation: seeded coin per (seed, dimension)
        std::mt19937_64 rng(config.seed ^ fnv1a(dimension_key(d)));
        const bool target_is_a = (rng() & 1ULL) == 0ULL;
        const std::string& a = target_is_a ? target_report : reference_report;
        const std::string& b = target_is_a ? reference_report : target_report;

        ChatRequest req;
        req.agent_tag = AgentTag::Judge;
        req.params = default_params(AgentTag::Judge);
        req.messages.push_back(
            {Role::System, "You are a rigorous evaluation judge for research reports."});
        req.messages.push_back({Role::User, build_judge_prompt(d, dim, a, b, config.s_max)});

        std::vector<CriterionScore> dim_scores;
        std::string last_error;
        bool parsed_ok = false;
        for (int attempt = 0; attempt <= config.reprompts && !parsed_ok; ++attempt) {
            ChatResponse resp = gateway.complete(req);
            json doc = parse_json_object(resp.text);
            last_error.clear();
            if (doc.is_discarded() || !doc.is_object() || !doc.contains("scores") ||
                !doc["scores"].is_array()) {
                last_error = "expected {\"scores\": [...]}";
            } else {
                dim_scores.clear();
                for (const auto& c : dim.criteria) {
                    const json* entry = nullptr;
                    for (const auto& sj : doc["scores"]) {
                        if (sj.is_object() && sj.value("criterion", "") == c.name) {
                            entry = &sj;
                            break;
                        }
                    }
                    if (!entry) {
                        last_error = "missing criterion: " + c.name;
                        break;
                    }
                    if (!entry->contains("report_a") || !(*entry)["report_a"].is_number() ||
                        !entry->contains("report_b") || !(*entry)["report_b"].is_number()) {
                        last_error = "non-numeric scores for criterion: " + c.name;
                        break;
                    }
                    CriterionScore cs;
                    cs.dimension = d;
                    cs.criterion = c.name;
                    double sa = (*entry)["report_a"].get<double>();
                    double sb = (*entry)["report_b"].get<double>();
                    const double lo = 0.0;
                    const double hi = static_cast<double>(config.s_max);
                    if (sa < lo || sa > hi || sb < lo || sb > hi) cs.clamped = true;
                    sa = std::clamp(sa, lo, hi);
                    sb = std::clamp(sb, lo, hi);
                    cs.s_target = target_is_a ? sa : sb;
                    cs.s_reference = target_is_a ? sb : sa;
                    cs.judge_rationale = entry->value("rationale", "");
                    dim_scores.push_back(std::move(cs));
                }
                if (last_error.empty()) parsed_ok = true;
            }
            if (!parsed_ok && attempt < config.reprompts) {
                req.messages.push_back({Role::Assistant, resp.text});
                req.messages.push_back(
                    {Role::User, "Your reply was rejected (" + last_error +
                                     "). Respond again with the exact JSON shape requested, "
                                     "covering every listed criterion."});
            }
        }
        if (!parsed_ok) {
            if (last_error.rfind("missing criterion: ", 0) == 0) {
                throw MissingCriterionError(last_error.substr(std::string("missing criterion: ").size()));
            }
            throw MalformedJudgeReplyError(last_error);
        }
        for (auto& cs : dim_scores) all.push_back(std::move(cs));
    }
    return all;
}

std::pair<double, double> aggregate_dimension(const std::vector<CriterionScore>& scores,
                                              const RubricDimension& dim, RaceDimension which) {
    double s_target = 0.0;
    double s_reference = 0.0;
    for (size_t k = 0; k < dim.criteria.size(); ++k) {
        const Criterion& c = dim.criteria[k];
        const CriterionScore* found = nullptr;
        for (const auto& cs : scores) {
            if (cs.dimension == which && cs.criterion == c.name) {
                found = &cs;
                break;
            }
        }
        if (!found) throw MissingCriterionError(c.name);
        s_target += c.weight * found->s_target;
        s_reference += c.weight * found->s_reference;
    }
    return {s_target, s_reference};
}

std::pair<double, double> aggregate_overall(const std::array<double, 4>& s_dim_target,
                                            const std::array<double, 4>& s_dim_reference,
                                            const Rubric& rubric) {
    double t = 0.0;
    double r = 0.0;
    for (RaceDimension d : kAllDimensions) {
        t += rubric[d].weight * s_dim_target[static_cast<int>(d)];
        r += rubric[d].weight * s_dim_reference[static_cast<int>(d)];
    }
    return {t, r};
}

double final_relative(double s_int_target, double s_int_reference) {
    if (s_int_target < 0.0 || s_int_reference < 0.0) throw NegativeScoreError();
    if (s_int_target == 0.0 && s_int_reference == 0.0) return 0.5;  // documented convention
    if (s_int_target == s_int_reference) return 0.5;
    const double denom = s_int_target + s_int_reference;
    // the smaller share is computed directly and the larger as its
    // complement, so swapped arguments sum to exactly 1
    if (s_int_target < s_int_reference) return s_int_target / denom;
    return 1.0 - s_int_reference / denom;
}

double RaceResult::reported_dimension(RaceDimension d) const {
    return final_relative(s_dim_target[static_cast<int>(d)],
                          s_dim_reference[static_cast<int>(d)]) *
           100.0;
}

RaceResult evaluate_reports(const std::string& target_report,
                            const std::string& reference_report, const Rubric& rubric,
                            Gateway& gateway, const JudgeConfig& config) {
    const Rubric normalized = normalize_rubric(rubric);
    RaceResult result;
    result.criterion_scores =
        judge_pairwise(target_report, reference_report, normalized, gateway, config);
    for (RaceDimension d : kAllDimensions) {
        auto [t, r] = aggregate_dimension(result.criterion_scores, normalized[d], d);
        result.s_dim_target[static_cast<int>(d)] = t;
        result.s_dim_reference[static_cast<int>(d)] = r;
    }
    auto [ti, ri] = aggregate_overall(result.s_dim_target, result.s_dim_reference, normalized);
    result.s_int_target = ti;
    result.s_int_reference = ri;
    result.s_final = final_relative(ti, ri);
    return result;
}

// ---------------------------------------------------------------------------
// Effective Product Count
// ---------------------------------------------------------------------------

namespace {

bool id_char(char c) {
    unsigned char u = static_cast<unsigned char>(c);
    return std::isalnum(u) || c == '_' || c == '-';
}

}  // namespace

EProdResult effective_product_count(const std::string& report_text, const Catalog& catalog) {
    EProdResult out;
    std::set<std::string> seen;
    auto add = [&](const std::string& token) {
        if (token.empty() || !catalog.contains(token) || seen.count(token)) return;
        seen.insert(token);
        out.distinct_valid_ids.push_back(token);
    };

    // delimited tokens over the id charset [A-Za-z0-9_-]
    std::string current;
    for (char c : report_text) {
        if (id_char(c)) {
            current.push_back(c);
        } else {
            add(current);
            current.clear();
        }
    }
    add(current);

    // explicit "product_id:" annotations; tolerant of wider id charsets
    const std::string label = "product_id";
    size_t pos = 0;
    while ((pos = report_text.find(label, pos)) != std::string::npos) {
        size_t p = pos + label.size();
        while (p < report_text.size() && report_text[p] == ' ') ++p;
        if (p < report_text.size() && report_text[p] == ':') {
            ++p;
            while (p < report_text.size() && report_text[p] == ' ') ++p;
            size_t end = p;
            while (end < report_text.size() &&
                   !std::isspace(static_cast<unsigned char>(report_text[end]))) {
                ++end;
            }
            std::string token = report_text.substr(p, end - p);
            while (!token.empty() && std::string(",.;)]}\"'").find(token.back()) != std::string::npos) {
                token.pop_back();
            }
            add(token);
        }
        pos += label.size();
    }

    out.count = static_cast<int>(out.distinct_valid_ids.size());
    return out;
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

json to_json(const BenchmarkRow& row) {
    json j{{"query_id", row.query_id}, {"ok", row.ok}};
    if (!row.ok) {
        j["error"] = row.error;
        return j;
    }
    json dims = json::object();
    for (RaceDimension d : kAllDimensions) {
        dims[dimension_key(d)] = json{{"target", row.race.s_dim_target[static_cast<int>(d)]},
                                      {"reference", row.race.s_dim_reference[static_cast<int>(d)]},
                                      {"reported", row.race.reported_dimension(d)}};
    }
    json scores = json::array();
    for (const auto& cs : row.race.criterion_scores) {
        scores.push_back(json{{"dimension", dimension_key(cs.dimension)},
                              {"criterion", cs.criterion},
                              {"s_target", cs.s_target},
                              {"s_reference", cs.s_reference},
                              {"rationale", cs.judge_rationale},
                              {"clamped", cs.clamped}});
    }
    j["race"] = json{{"dimensions", dims},
                     {"s_int_target", row.race.s_int_target},
                     {"s_int_reference", row.race.s_int_reference},
                     {"s_final", row.race.s_final},
                     {"overall_reported", row.race.reported_overall()},
                     {"criterion_scores", scores}};
    j["eprod"] = json{{"count", row.eprod.count}, {"ids", row.eprod.distinct_valid_ids}};
    return j;
}

json to_json(const BenchmarkSummary& s) {
    return json{{"items", s.items},   {"errors", s.errors}, {"overall", s.overall},
                {"comp", s.comp},     {"depth", s.depth},   {"inst", s.inst},
                {"read", s.read},     {"eprod", s.eprod}};
}

std::string render_summary_table(const BenchmarkSummary& s) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "Items: %d (errors: %d)\n"
                  "Overall  Comp.  Depth  Inst.  Read.  E.Prod\n"
                  "%7.2f %6.2f %6.2f %6.2f %6.2f %7.2f",
                  s.items, s.errors, s.overall, s.comp, s.depth, s.inst, s.read, s.eprod);
    return buf;
}

BenchmarkOutcome benchmark(const std::vector<BenchmarkItem>& items, const Catalog& catalog,
                           Gateway& gateway, const JudgeConfig& config) {
    if (items.empty()) throw EmptyBatchError();
    BenchmarkOutcome out;
    for (const auto& item : items) {
        BenchmarkRow row;
        row.query_id = item.query_id;
        try {
            JudgeConfig item_config = config;
            item_config.seed = config.seed ^ fnv1a(item.query_id);
            row.race = evaluate_reports(item.target_report, item.reference_report, item.rubric,
                                        gateway, item_config);
            row.eprod = effective_product_count(item.target_report, catalog);
            row.ok = true;
        } catch (const Error& e) {
            row.ok = false;
            row.error = e.what();
        }
        out.rows.push_back(std::move(row));
    }
    std::sort(out.rows.begin(), out.rows.end(),
              [](const BenchmarkRow& a, const BenchmarkRow& b) { return a.query_id < b.query_id; });

    BenchmarkSummary& s = out.summary;
    s.items = static_cast<int>(out.rows.size());
    int ok_count = 0;
    double sum_overall = 0, sum_eprod = 0;
    std::array<double, 4> sum_dim{};
    for (const auto& row : out.rows) {
        if (!row.ok) {
            ++s.errors;
            continue;
        }
        ++ok_count;
        sum_overall += row.race.s_final;
        sum_eprod += row.eprod.count;
        for (RaceDimension d : kAllDimensions) {
            sum_dim[static_cast<int>(d)] += row.race.reported_dimension(d);
        }
    }
    if (ok_count > 0) {
        s.overall = sum_overall / ok_count * 100.0;
        s.comp = sum_dim[0] / ok_count;
        s.depth = sum_dim[1] / ok_count;
        s.inst = sum_dim[2] / ok_count;
        s.read = sum_dim[3] / ok_count;
        s.eprod = sum_eprod / ok_count;
    }
    return out;
}

}  // namespace shoplab
