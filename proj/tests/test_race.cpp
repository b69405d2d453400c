#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "shoplab/errors.hpp"
#include "shoplab/race.hpp"
#include "support.hpp"

using namespace shoplab;
using namespace testsup;

namespace {

// parity judge: every criterion scored s for both reports
std::shared_ptr<Gateway> parity_judge(double s = 8) {
    auto backend = std::make_shared<FnBackend>([s](const ChatRequest& req) {
        // pull criterion names out of the prompt's numbered list
        const std::string& prompt = req.messages.back().content;
        json scores = json::array();
        size_t pos = prompt.find("Criteria:\n");
        size_t end = prompt.find("\nFor EACH criterion");
        std::string block = prompt.substr(pos + 10, end - pos - 10);
        size_t start = 0;
        while (start < block.size()) {
            size_t nl = block.find('\n', start);
            std::string line = block.substr(start, nl - start);
            start = nl == std::string::npos ? block.size() : nl + 1;
            size_t dot = line.find(". ");
            if (dot == std::string::npos) continue;
            size_t dash = line.find(" - ");
            std::string name = line.substr(dot + 2, dash - dot - 2);
            scores.push_back(json{{"criterion", name},
                                  {"report_a", s},
                                  {"report_b", s},
                                  {"rationale", "parity"}});
        }
        return json{{"scores", scores}}.dump();
    });
    return std::make_shared<Gateway>(backend, RetryPolicy{0, 0});
}

}  // namespace

TEST_CASE("judge_pairwise: scores map back through the position shuffle") {
    Rubric r = normalize_rubric(make_test_rubric());
    // the judge always scores the target-marked report 9 and the other 3,
    // wherever the shuffle placed it
    auto backend = std::make_shared<FnBackend>([&](const ChatRequest& req) {
        const std::string& prompt = req.messages.back().content;
        const size_t a_pos = prompt.find("Report A:\n");
        const std::string a_text =
            prompt.substr(a_pos + 10, prompt.find('\n', a_pos + 10) - (a_pos + 10));
        const bool a_is_target = a_text.find("TGT") != std::string::npos;
        json scores = json::array();
        for (RaceDimension d : kAllDimensions) {
            for (const auto& c : r[d].criteria) {
                if (prompt.find(c.name) != std::string::npos) {
                    scores.push_back(json{{"criterion", c.name},
                                          {"report_a", a_is_target ? 9 : 3},
                                          {"report_b", a_is_target ? 3 : 9},
                                          {"rationale", "fixed"}});
                }
            }
        }
        return json{{"scores", scores}}.dump();
    });
    Gateway gw(backend, RetryPolicy{0, 0});
    JudgeConfig config;
    config.seed = 42;
    auto scores = judge_pairwise("TGT report", "REF report", r, gw, config);
    CHECK(scores.size() == 8);  // 2 criteria x 4 dimensions
    // the inversion restores target/reference regardless of the shuffle
    for (const auto& cs : scores) {
        CHECK(cs.s_target == 9);
        CHECK(cs.s_reference == 3);
        CHECK(!cs.clamped);
    }
    RaceResult res = evaluate_reports("TGT report", "REF report", r, gw, config);
    CHECK(res.s_int_target == doctest::Approx(9.0));
    CHECK(res.s_int_reference == doctest::Approx(3.0));
    CHECK(res.s_final == doctest::Approx(0.75));

    // a different seed flips some presentation orders but never the outcome
    JudgeConfig other_seed;
    other_seed.seed = 4242;
    RaceResult res2 = evaluate_reports("TGT report", "REF report", r, gw, other_seed);
    CHECK(res2.s_final == doctest::Approx(0.75));
}

TEST_CASE("judge_pairwise: missing criterion after reprompts is a typed error") {
    auto backend = std::make_shared<FnBackend>([](const ChatRequest&) {
        return json{{"scores", json::array({json{{"criterion", "comprehensiveness a"},
                                                 {"report_a", 5},
                                                 {"report_b", 5},
                                                 {"rationale", "only one"}}})}}
            .dump();
    });
    Gateway gw(backend, RetryPolicy{0, 0});
    Rubric r = normalize_rubric(make_test_rubric());
    CHECK_THROWS_AS(judge_pairwise("t", "r", r, gw), MissingCriterionError);
}

TEST_CASE("judge_pairwise: unparsable replies raise MalformedJudgeReply after reprompts") {
    auto backend = std::make_shared<FnBackend>([](const ChatRequest&) {
        return std::string("I refuse to answer in JSON");
    });
    Gateway gw(backend, RetryPolicy{0, 0});
    Rubric r = normalize_rubric(make_test_rubric());
    CHECK_THROWS_AS(judge_pairwise("t", "r", r, gw), MalformedJudgeReplyError);
}

TEST_CASE("judge_pairwise: out-of-range scores clamp with a flag") {
    auto backend = std::make_shared<FnBackend>([](const ChatRequest& req) {
        const std::string& prompt = req.messages.back().content;
        json scores = json::array();
        for (const std::string suffix : {" a", " b"}) {
            for (const std::string dim :
                 {"comprehensiveness", "depth", "instruction_following", "readability"}) {
                const std::string name = dim + suffix;
                if (prompt.find(name) != std::string::npos) {
                    scores.push_back(json{{"criterion", name},
                                          {"report_a", 14},
                                          {"report_b", -2},
                                          {"rationale", "wild"}});
                }
            }
        }
        return json{{"scores", scores}}.dump();
    });
    Gateway gw(backend, RetryPolicy{0, 0});
    Rubric r = normalize_rubric(make_test_rubric());
    auto scores = judge_pairwise("t", "r", r, gw);
    REQUIRE(!scores.empty());
    for (const auto& cs : scores) {
        CHECK(cs.clamped);
        CHECK(cs.s_target <= 10.0);
        CHECK(cs.s_target >= 0.0);
        CHECK(cs.s_reference <= 10.0);
        CHECK(cs.s_reference >= 0.0);
    }
}

TEST_CASE("aggregate_dimension: hand-checked weighted sums") {
    RubricDimension dim;
    dim.weight = 1.0;
    dim.criteria = {{"c1", "", 0.5, 0.5}, {"c2", "", 0.5, 0.5}};
    std::vector<CriterionScore> scores = {
        {RaceDimension::Comprehensiveness, "c1", 8, 2, "", false},
        {RaceDimension::Comprehensiveness, "c2", 6, 4, "", false}};
    auto [t, r] = aggregate_dimension(scores, dim, RaceDimension::Comprehensiveness);
    CHECK(t == doctest::Approx(7.0));
    CHECK(r == doctest::Approx(3.0));

    SUBCASE("single criterion with weight 1 is the identity") {
        RubricDimension single;
        single.weight = 1.0;
        single.criteria = {{"only", "", 1.0, 1.0}};
        std::vector<CriterionScore> s = {{RaceDimension::Depth, "only", 4.5, 9, "", false}};
        auto [st, sr] = aggregate_dimension(s, single, RaceDimension::Depth);
        CHECK(st == 4.5);
        CHECK(sr == 9.0);
    }
    SUBCASE("all-zero scores aggregate to zero") {
        std::vector<CriterionScore> zeros = {
            {RaceDimension::Comprehensiveness, "c1", 0, 0, "", false},
            {RaceDimension::Comprehensiveness, "c2", 0, 0, "", false}};
        auto [zt, zr] = aggregate_dimension(zeros, dim, RaceDimension::Comprehensiveness);
        CHECK(zt == 0.0);
        CHECK(zr == 0.0);
    }
    SUBCASE("missing criterion raises") {
        std::vector<CriterionScore> partial = {
            {RaceDimension::Comprehensiveness, "c1", 1, 1, "", false}};
        CHECK_THROWS_AS(aggregate_dimension(partial, dim, RaceDimension::Comprehensiveness),
                        MissingCriterionError);
    }
}

TEST_CASE("aggregate_overall: hand-checked") {
    Rubric r = make_test_rubric();
    r[RaceDimension::Comprehensiveness].weight = 0.6;
    r[RaceDimension::Depth].weight = 0.4;
    r[RaceDimension::InstructionFollowing].weight = 0.0;
    r[RaceDimension::Readability].weight = 0.0;
    auto [t1, r1] = aggregate_overall({7, 4, 123, 999}, {1, 2, 123, 999}, r);
    CHECK(t1 == doctest::Approx(0.6 * 7 + 0.4 * 4));  // 5.8
    CHECK(r1 == doctest::Approx(0.6 * 1 + 0.4 * 2));

    Rubric eq = make_test_rubric();  // equal 0.25 weights
    auto [t2, r2] = aggregate_overall({5, 5, 5, 5}, {0, 0, 0, 0}, eq);
    CHECK(t2 == doctest::Approx(5.0));
    CHECK(r2 == 0.0);
}

TEST_CASE("final_relative: conventions and exactness") {
    CHECK(final_relative(3.3, 3.3) == 0.5);  // parity, exactly
    CHECK(final_relative(5.8, 0.0) == 1.0);
    CHECK(final_relative(0.0, 5.8) == 0.0);
    CHECK(final_relative(0.0, 0.0) == 0.5);  // documented convention
    CHECK_THROWS_AS(final_relative(-0.1, 1.0), NegativeScoreError);

    SUBCASE("antisymmetry holds exactly on random pairs") {
        std::mt19937_64 rng(99);
        std::uniform_real_distribution<double> u(0.0, 10.0);
        for (int i = 0; i < 1000; ++i) {
            double a = u(rng);
            double b = u(rng);
            CHECK(final_relative(a, b) + final_relative(b, a) == 1.0);  // bitwise
        }
    }
    SUBCASE("monotone in the target score") {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(0.01, 10.0);
        for (int i = 0; i < 200; ++i) {
            double a = u(rng);
            double b = u(rng);
            double bump = u(rng) * 0.1;
            CHECK(final_relative(a + bump, b) >= final_relative(a, b));
        }
    }
}

TEST_CASE("monotonicity: raising one criterion's target score never lowers S_final") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 9.0);
    Rubric r = normalize_rubric(make_test_rubric());
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<CriterionScore> scores;
        for (RaceDimension d : kAllDimensions) {
            for (const auto& c : r[d].criteria) {
                scores.push_back({d, c.name, u(rng), u(rng), "", false});
            }
        }
        auto s_final = [&](const std::vector<CriterionScore>& ss) {
            std::array<double, 4> st{}, sr{};
            for (RaceDimension d : kAllDimensions) {
                auto [t, ref] = aggregate_dimension(ss, r[d], d);
                st[static_cast<int>(d)] = t;
                sr[static_cast<int>(d)] = ref;
            }
            auto [it, ir] = aggregate_overall(st, sr, r);
            return final_relative(it, ir);
        };
        const double base = s_final(scores);
        std::vector<CriterionScore> bumped = scores;
        bumped[rng() % bumped.size()].s_target += 0.5 + u(rng) * 0.1;
        CHECK(s_final(bumped) >= base);
    }
}

TEST_CASE("scale invariance: multiplying all scores by c > 0 leaves S_final unchanged") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    Rubric r = normalize_rubric(make_test_rubric());
    for (int trial = 0; trial < 50; ++trial) {
        std::array<double, 4> st{}, sr{};
        for (int d = 0; d < 4; ++d) {
            st[d] = u(rng);
            sr[d] = u(rng);
        }
        const double c = 0.1 + u(rng);
        auto [t1, r1] = aggregate_overall(st, sr, r);
        std::array<double, 4> st_scaled = st, sr_scaled = sr;
        for (int d = 0; d < 4; ++d) {
            st_scaled[d] *= c;
            sr_scaled[d] *= c;
        }
        auto [t2, r2] = aggregate_overall(st_scaled, sr_scaled, r);
        CHECK(final_relative(t1, r1) == doctest::Approx(final_relative(t2, r2)).epsilon(1e-12));
    }
}

TEST_CASE("effective_product_count: distinct valid ids only") {
    Catalog catalog = make_test_catalog();
    SUBCASE("duplicates counted once") {
        auto r = effective_product_count("consider p1, then p1 again, and also p2.", catalog);
        CHECK(r.count == 2);
        CHECK(r.distinct_valid_ids == std::vector<std::string>{"p1", "p2"});
    }
    SUBCASE("unknown ids do not count") {
        auto r = effective_product_count("the bogus product is great", catalog);
        CHECK(r.count == 0);
    }
    SUBCASE("ids inside prose and tables, near punctuation") {
        auto r = effective_product_count(
            "| p1 | $500 |\nRecommended: (p3). Avoid p2; it's overpriced. product_id: p1", catalog);
        CHECK(r.count == 3);
    }
    SUBCASE("substrings are not matches") {
        auto r = effective_product_count("p1000 and xp1 are not catalog items", catalog);
        CHECK(r.count == 0);
    }
    SUBCASE("duplication invariance") {
        std::mt19937_64 rng(17);
        for (int i = 0; i < 100; ++i) {
            std::string report = "p1 p2 maybe p3";
            auto base = effective_product_count(report, catalog);
            std::string doubled = report + " " + report + " p" + std::to_string(rng() % 4 + 1);
            // appending duplicates of existing ids never raises the count by
            // more than the one potentially-new id
            auto more = effective_product_count(doubled, catalog);
            CHECK(more.count >= base.count);
            CHECK(more.count <= base.count + 1);
            auto tripled = effective_product_count(doubled + " " + doubled, catalog);
            CHECK(tripled.count == more.count);
        }
    }
}

TEST_CASE("benchmark: parity judge yields an overall of exactly 50") {
    std::vector<BenchmarkItem> items = {{"q-1", "same report", "same report", make_test_rubric()}};
    auto gw = parity_judge();
    auto outcome = benchmark(items, make_test_catalog(), *gw);
    CHECK(outcome.summary.items == 1);
    CHECK(outcome.summary.errors == 0);
    CHECK(outcome.summary.overall == doctest::Approx(50.0));
    CHECK(outcome.summary.comp == doctest::Approx(50.0));
    CHECK(outcome.rows[0].race.s_final == 0.5);
}

TEST_CASE("benchmark: means match hand-computed values") {
    // item A: target 4 vs reference 6 -> 0.4; item B: 6 vs 4 -> 0.6
    auto backend = std::make_shared<FnBackend>([](const ChatRequest& req) {
        const std::string& prompt = req.messages.back().content;
        const bool item_a = prompt.find("report A-target") != std::string::npos ||
                            prompt.find("report A-reference") != std::string::npos;
        // report bodies mark which item this is; A/B position varies per seed
        json scores = json::array();
        for (const std::string suffix : {" a", " b"}) {
            for (const std::string dim :
                 {"comprehensiveness", "depth", "instruction_following", "readability"}) {
                const std::string name = dim + suffix;
                if (prompt.find(name) == std::string::npos) continue;
                // find which report text sits at position A
                size_t a_pos = prompt.find("Report A:\n");
                size_t b_pos = prompt.find("Report B:\n");
                std::string a_text = prompt.substr(a_pos + 10, prompt.find('\n', a_pos + 10) -
                                                                   (a_pos + 10));
                (void)b_pos;
                const bool a_is_target = a_text.find("-target") != std::string::npos;
                const double target_score = item_a ? 4 : 6;
                const double reference_score = item_a ? 6 : 4;
                scores.push_back(
                    json{{"criterion", name},
                         {"report_a", a_is_target ? target_score : reference_score},
                         {"report_b", a_is_target ? reference_score : target_score},
                         {"rationale", "scripted"}});
            }
        }
        return json{{"scores", scores}}.dump();
    });
    auto gw = std::make_shared<Gateway>(backend, RetryPolicy{0, 0});

    std::vector<BenchmarkItem> items = {
        {"q-a", "report A-target", "report A-reference", make_test_rubric()},
        {"q-b", "report B-target", "report B-reference", make_test_rubric()}};
    auto outcome = benchmark(items, make_test_catalog(), *gw);
    REQUIRE(outcome.summary.errors == 0);
    CHECK(outcome.rows[0].race.s_final == doctest::Approx(0.4));
    CHECK(outcome.rows[1].race.s_final == doctest::Approx(0.6));
    CHECK(outcome.summary.overall == doctest::Approx(50.0));
}

TEST_CASE("benchmark: per-item failures become error rows, batch continues") {
    int call = 0;
    auto backend = std::make_shared<FnBackend>([&](const ChatRequest& req) {
        ++call;
        const std::string& prompt = req.messages.back().content;
        if (prompt.find("broken item") != std::string::npos) return std::string("not json");
        json scores = json::array();
        for (const std::string suffix : {" a", " b"}) {
            for (const std::string dim :
                 {"comprehensiveness", "depth", "instruction_following", "readability"}) {
                const std::string name = dim + suffix;
                if (prompt.find(name) != std::string::npos) {
                    scores.push_back(json{{"criterion", name},
                                          {"report_a", 5},
                                          {"report_b", 5},
                                          {"rationale", "ok"}});
                }
            }
        }
        return json{{"scores", scores}}.dump();
    });
    auto gw = std::make_shared<Gateway>(backend, RetryPolicy{0, 0});
    std::vector<BenchmarkItem> items = {
        {"q-bad", "broken item", "broken item reference", make_test_rubric()},
        {"q-good", "fine report", "fine reference", make_test_rubric()}};
    auto outcome = benchmark(items, make_test_catalog(), *gw);
    CHECK(outcome.summary.items == 2);
    CHECK(outcome.summary.errors == 1);
    REQUIRE(outcome.rows.size() == 2);
    CHECK(outcome.rows[0].query_id == "q-bad");
    CHECK(!outcome.rows[0].ok);
    CHECK(outcome.rows[1].ok);
    CHECK(outcome.summary.overall == doctest::Approx(50.0));  // mean over ok rows
}

TEST_CASE("benchmark: empty batch is a typed error") {
    auto gw = parity_judge();
    CHECK_THROWS_AS(benchmark({}, make_test_catalog(), *gw), EmptyBatchError);
}

TEST_CASE("evaluate_reports rejects empty reports") {
    auto gw = parity_judge();
    CHECK_THROWS_AS(evaluate_reports("", "ref", make_test_rubric(), *gw), Error);
}
