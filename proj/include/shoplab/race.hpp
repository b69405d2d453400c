#pragma once
// Adapted RACE metric: rubric-driven pairwise judging, hierarchical weighted
// aggregation (criterion -> dimension -> overall) and the relative final
// score in [0,1], plus the Effective Product Count metric and batch
// benchmarking.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "shoplab/catalog.hpp"
#include "shoplab/gateway.hpp"
#include "shoplab/model.hpp"

namespace shoplab {

struct CriterionScore {
    RaceDimension dimension = RaceDimension::Comprehensiveness;
    std::string criterion;
    double s_target = 0.0;
    double s_reference = 0.0;
    std::string judge_rationale;
    bool clamped = false;  // an out-of-range judge score was clamped

    bool operator==(const CriterionScore&) const = default;
};

struct RaceResult {
    std::array<double, 4> s_dim_target{};     // indexed by RaceDimension
    std::array<double, 4> s_dim_reference{};
    double s_int_target = 0.0;
    double s_int_reference = 0.0;
    double s_final = 0.0;  // in [0,1]
    std::vector<CriterionScore> criterion_scores;

    double reported_overall() const { return s_final * 100.0; }
    double reported_dimension(RaceDimension d) const;  // relative per-dim score x100
};

struct JudgeConfig {
    int s_max = 10;      // integer judge scale 0..s_max
    int reprompts = 2;   // extra attempts on malformed replies
    std::uint64_t seed = 0;  // drives target/reference position shuffling
};

// One judge call per dimension; all the dimension's criteria are scored in
// one structured reply. The target/reference presentation order is
// randomized per call (seeded) and inverted on parse. Out-of-range scores
// are clamped and flagged.
std::vector<CriterionScore> judge_pairwise(const std::string& target_report,
                                           const std::string& reference_report,
                                           const Rubric& rubric, Gateway& gateway,
                                           const JudgeConfig& config = {});

// S_d(R) = sum_k w_{d,k} * s_{R,k} over the dimension's criteria, in rubric
// order; weights must be normalized.
std::pair<double, double> aggregate_dimension(const std::vector<CriterionScore>& scores,
                                              const RubricDimension& dim, RaceDimension which);

// S_int(R) = sum_d W_d * S_d(R).
std::pair<double, double> aggregate_overall(const std::array<double, 4>& s_dim_target,
                                            const std::array<double, 4>& s_dim_reference,
                                            const Rubric& rubric);

// S_final = S_int(tgt) / (S_int(tgt) + S_int(ref)); (0,0) maps to 0.5 by
// convention. Computed so that swapped arguments sum to exactly 1.
double final_relative(double s_int_target, double s_int_reference);

// Full pipeline for one report pair; accepts raw or normalized rubrics.
RaceResult evaluate_reports(const std::string& target_report,
                            const std::string& reference_report, const Rubric& rubric,
                            Gateway& gateway, const JudgeConfig& config = {});

// ---------------------------------------------------------------------------
// Effective Product Count
// ---------------------------------------------------------------------------

struct EProdResult {
    std::vector<std::string> distinct_valid_ids;  // first-occurrence order
    int count = 0;
};

// Scans the report for catalog ids appearing as delimited tokens, plus ids
// following explicit "product_id:" annotations; deduplicates and counts.
EProdResult effective_product_count(const std::string& report_text, const Catalog& catalog);

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

struct BenchmarkItem {
    std::string query_id;
    std::string target_report;
    std::string reference_report;
    Rubric rubric;
};

struct BenchmarkRow {
    std::string query_id;
    bool ok = false;
    std::string error;
    RaceResult race;
    EProdResult eprod;
};

struct BenchmarkSummary {
    int items = 0;
    int errors = 0;
    double overall = 0.0;  // means x100, Table-1 style
    double comp = 0.0;
    double depth = 0.0;
    double inst = 0.0;
    double read = 0.0;
    double eprod = 0.0;  // raw mean
};

struct BenchmarkOutcome {
    std::vector<BenchmarkRow> rows;  // sorted by query_id
    BenchmarkSummary summary;
};

json to_json(const BenchmarkRow& row);
json to_json(const BenchmarkSummary& s);
std::string render_summary_table(const BenchmarkSummary& s);

// Per-item judge failures become error rows; an empty batch throws
// EmptyBatchError. Per-item shuffling seeds derive from config.seed and the
// query_id, so results do not depend on evaluation order.
BenchmarkOutcome benchmark(const std::vector<BenchmarkItem>& items, const Catalog& catalog,
                           Gateway& gateway, const JudgeConfig& config = {});

}  // namespace shoplab
