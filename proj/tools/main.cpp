// shoplab CLI: corpus indexing, batch trajectory synthesis, refinement,
// report evaluation and trajectory inspection.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "shoplab/errors.hpp"
#include "shoplab/jsonl.hpp"
#include "shoplab/race.hpp"
#include "shoplab/refine.hpp"
#include "shoplab/synthesis.hpp"

namespace fs = std::filesystem;
using namespace shoplab;

namespace {

struct CliConfig {
    std::string corpus_path;
    std::string templates_dir = "templates";
    std::string web_fixture;
    std::string backend = "scripted";  // scripted | remote
    std::string script_path;
    std::string remote_url;
    std::string remote_model;
    SessionLimits limits;
    int tau = 7;
    int workers = 1;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    std::int64_t token_budget = 0;
    int content_window = 40000;
};

CliConfig load_config(const std::string& path) {
    CliConfig c;
    if (path.empty()) return c;
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw IoError("config is not valid JSON: " + path);
    c.corpus_path = j.value("corpus_path", c.corpus_path);
    c.templates_dir = j.value("templates_dir", c.templates_dir);
    c.web_fixture = j.value("web_fixture", c.web_fixture);
    if (j.contains("backend")) {
        const auto& b = j["backend"];
        c.backend = b.value("type", c.backend);
        c.script_path = b.value("path", c.script_path);
        c.remote_url = b.value("endpoint", c.remote_url);
        c.remote_model = b.value("model", c.remote_model);
    }
    if (j.contains("limits")) {
        const auto& l = j["limits"];
        c.limits.max_steps = l.value("max_steps", c.limits.max_steps);
        c.limits.max_revisions_per_step =
            l.value("max_revisions_per_step", c.limits.max_revisions_per_step);
        c.limits.max_total_revisions =
            l.value("max_total_revisions", c.limits.max_total_revisions);
    }
    c.tau = j.value("tau", c.tau);
    c.workers = j.value("workers", c.workers);
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.token_budget = j.value("token_budget", c.token_budget);
    c.content_window = j.value("content_window", c.content_window);
    return c;
}

// --backend scripted:<path> | remote:<url>,<model>
void apply_backend_flag(CliConfig& c, const std::string& flag) {
    if (flag.empty()) return;
    const size_t colon = flag.find(':');
    const std::string kind = flag.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : flag.substr(colon + 1);
    if (kind == "scripted") {
        c.backend = "scripted";
        if (!rest.empty()) c.script_path = rest;
    } else if (kind == "remote") {
        c.backend = "remote";
        const size_t comma = rest.find(',');
        c.remote_url = rest.substr(0, comma);
        if (comma != std::string::npos) c.remote_model = rest.substr(comma + 1);
    } else {
        throw Error("unknown backend kind: " + kind);
    }
}

std::shared_ptr<Gateway> build_gateway(const CliConfig& c) {
    std::shared_ptr<LlmBackend> backend;
    if (c.backend == "scripted") {
        if (c.script_path.empty()) throw Error("scripted backend needs a script path");
        backend = std::make_shared<ScriptedBackend>(load_script(c.script_path));
    } else if (c.backend == "remote") {
        RemoteBackendConfig rc;
        rc.base_url = c.remote_url;
        rc.model = c.remote_model;
        if (const char* key = std::getenv("LLM_API_KEY")) rc.api_key = key;
        backend = std::make_shared<RemoteBackend>(rc);
    } else {
        throw Error("unknown backend: " + c.backend);
    }
    RetryPolicy retry;
    if (c.backend == "scripted") retry.backoff_base_ms = 0;
    return std::make_shared<Gateway>(backend, retry, c.token_budget);
}

std::unique_ptr<WebBackend> build_web_backend(const CliConfig& c) {
    if (!c.web_fixture.empty()) return FixtureWebBackend::from_jsonl_file(c.web_fixture);
    // no fixture configured: an empty fixture backend (every query misses)
    return std::make_unique<FixtureWebBackend>();
}

ToolEnvironment build_environment(const CliConfig& c, std::shared_ptr<Gateway> gateway,
                                  const TemplateSet& templates) {
    Catalog catalog = Catalog::from_jsonl_file(c.corpus_path);
    std::vector<std::pair<std::string, std::string>> docs;
    docs.reserve(catalog.size());
    for (const auto& rec : catalog.records()) docs.emplace_back(rec.product_id, index_text(rec));
    Bm25Index index = Bm25Index::build(docs);
    ToolEnvConfig env_config;
    env_config.content_window = c.content_window;
    return ToolEnvironment(std::move(catalog), std::move(index), build_web_backend(c),
                           std::move(gateway), templates.text(TemplateId::Extractor), env_config);
}

// stable knobs only; paths are excluded so reruns in different directories
// produce identical manifests
json config_snapshot(const CliConfig& c) {
    return json{{"backend", c.backend},
                {"limits", json{{"max_steps", c.limits.max_steps},
                                {"max_revisions_per_step", c.limits.max_revisions_per_step},
                                {"max_total_revisions", c.limits.max_total_revisions}}},
                {"tau", c.tau},
                {"workers", c.workers},
                {"content_window", c.content_window}};
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output dir: " + dir);
}

// ---------------------------------------------------------------------------
// index
// ---------------------------------------------------------------------------

int cmd_index(const std::string& corpus, const std::string& out_dir) {
    Catalog catalog = Catalog::from_jsonl_file(corpus);
    std::vector<std::pair<std::string, std::string>> docs;
    for (const auto& rec : catalog.records()) docs.emplace_back(rec.product_id, index_text(rec));
    Bm25Index index = Bm25Index::build(docs);
    ensure_dir(out_dir);
    write_file(out_dir + "/index.json", index.to_json().dump());
    std::cout << "indexed " << index.doc_count()
              << " products, avg_doc_length=" << index.average_doc_length() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// synthesize
// ---------------------------------------------------------------------------

struct SynthesisResult {
    std::vector<RawTrajectory> trajectories;
    RunManifest manifest;
};

SynthesisResult run_synthesis(const CliConfig& c, const std::string& users_path, int n,
                              std::shared_ptr<Gateway> gateway, const TemplateSet& templates,
                              ToolEnvironment& env) {
    std::vector<BehaviorLog> logs;
    for_each_jsonl(users_path, [&](int line_no, const json& j) {
        try {
            logs.push_back(behavior_log_from_json(j));
        } catch (const Error& e) {
            std::cerr << "warning: users line " << line_no << " skipped: " << e.what() << "\n";
        }
    });
    if (static_cast<int>(logs.size()) > n) logs.resize(n);

    SynthesisResult result;
    result.manifest.run_id = "run-" + std::to_string(c.seed);
    result.manifest.seed = c.seed;
    result.manifest.config_snapshot = config_snapshot(c);
    result.manifest.counts.attempted = static_cast<int>(logs.size());

    // scripted runs are serialized: the script's per-agent sequence counters
    // are global, so concurrent sessions would interleave nondeterministically
    const int workers = c.backend == "scripted"
                            ? 1
                            : std::max(1, std::min(c.workers, static_cast<int>(logs.size())));

    std::vector<std::optional<RawTrajectory>> slots(logs.size());
    std::atomic<size_t> next{0};
    auto work = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= logs.size()) return;
            const BehaviorLog& log = logs[i];
            try {
                auto [persona, query] =
                    generate_persona_query(log, *gateway, templates, "q-" + log.user_id);
                Rubric rubric = generate_rubric(persona, query, *gateway, templates);
                SessionConfig sc;
                sc.limits = c.limits;
                sc.run_id = result.manifest.run_id;
                slots[i] =
                    run_research_session(query, persona, rubric, env, *gateway, templates, sc);
            } catch (const Error& e) {
                std::cerr << "warning: session for user " << log.user_id << " failed: " << e.what()
                          << "\n";
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    for (auto& slot : slots) {
        if (!slot) {
            ++result.manifest.counts.failed;
            continue;
        }
        if (slot->status == TrajectoryStatus::Completed) {
            ++result.manifest.counts.completed;
        } else {
            ++result.manifest.counts.failed;
        }
        result.trajectories.push_back(std::move(*slot));
    }
    std::sort(result.trajectories.begin(), result.trajectories.end(),
              [](const RawTrajectory& a, const RawTrajectory& b) {
                  return a.query.query_id < b.query.query_id;
              });
    result.manifest.usage = gateway->usage();
    return result;
}

int cmd_synthesize(const CliConfig& c, const std::string& users_path, int n) {
    if (n <= 0) {
        std::cerr << "error: -n must be >= 1\n";
        return 2;
    }
    auto gateway = build_gateway(c);
    TemplateSet templates = TemplateSet::load(c.templates_dir);
    ToolEnvironment env = build_environment(c, gateway, templates);

    const auto started = std::chrono::steady_clock::now();
    SynthesisResult result = run_synthesis(c, users_path, n, gateway, templates, env);
    if (c.backend != "scripted") {
        result.manifest.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                         std::chrono::steady_clock::now() - started)
                                         .count();
    }

    ensure_dir(c.output_dir);
    {
        std::ofstream out(c.output_dir + "/raw_trajectories.jsonl", std::ios::binary);
        for (const auto& t : result.trajectories) out << to_json(t).dump() << "\n";
    }
    {
        std::ofstream out(c.output_dir + "/rubrics.jsonl", std::ios::binary);
        for (const auto& t : result.trajectories) {
            out << json{{"query_id", t.query.query_id},
                        {"rubric", to_json(t.rubric)["dimensions"]}}
                       .dump()
                << "\n";
        }
    }
    write_file(c.output_dir + "/manifest.json", to_json(result.manifest).dump(2) + "\n");

    std::cout << "synthesized " << result.manifest.counts.completed << "/"
              << result.manifest.counts.attempted << " trajectories\n";
    return result.manifest.counts.completed > 0 ? 0 : 3;
}

// ---------------------------------------------------------------------------
// refine
// ---------------------------------------------------------------------------

int cmd_refine(const CliConfig& c, const std::string& raw_path) {
    auto gateway = build_gateway(c);
    TemplateSet templates = TemplateSet::load(c.templates_dir);

    std::vector<RawTrajectory> raws;
    for_each_jsonl(
        raw_path,
        [&](int line_no, const json& j) {
            try {
                raws.push_back(raw_trajectory_from_json(j));
            } catch (const Error& e) {
                std::cerr << "warning: line " << line_no << " skipped: " << e.what() << "\n";
            }
        },
        [](int line_no, const std::string&) {
            std::cerr << "warning: line " << line_no << " skipped: invalid JSON\n";
        });

    FilterPolicy policy;
    policy.tau = c.tau;
    RefineOutcome outcome = refine_batch(raws, policy, *gateway, templates);

    ensure_dir(c.output_dir);
    {
        std::ofstream out(c.output_dir + "/refined_trajectories.jsonl", std::ios::binary);
        for (const auto& rt : outcome.refined) out << to_json(rt).dump() << "\n";
    }
    export_sft(outcome.refined, c.output_dir + "/sft.jsonl");
    write_file(c.output_dir + "/refine_report.json", to_json(outcome.report).dump(2) + "\n");

    std::cout << "refined " << outcome.report.output_count << "/" << outcome.report.input_count
              << " (dropped_by_length=" << outcome.report.dropped_by_length
              << ", fallback_segments=" << outcome.report.fallback_segments << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const CliConfig& c, const std::string& pairs_path, const std::string& rubrics_path) {
    auto gateway = build_gateway(c);
    Catalog catalog = Catalog::from_jsonl_file(c.corpus_path);

    std::map<std::string, Rubric> rubrics;
    for_each_jsonl(rubrics_path, [&](int line_no, const json& j) {
        try {
            rubrics[j.at("query_id").get<std::string>()] = rubric_from_json(j.at("rubric"));
        } catch (const std::exception& e) {
            std::cerr << "warning: rubrics line " << line_no << " skipped: " << e.what() << "\n";
        }
    });

    std::vector<BenchmarkItem> items;
    std::vector<BenchmarkRow> missing_rubric_rows;
    for_each_jsonl(pairs_path, [&](int line_no, const json& j) {
        (void)line_no;
        BenchmarkItem item;
        item.query_id = j.value("query_id", "");
        item.target_report = j.value("target_report", "");
        item.reference_report = j.value("reference_report", "");
        const std::string rubric_ref = j.value("rubric_ref", item.query_id);
        auto it = rubrics.find(rubric_ref);
        if (it == rubrics.end()) {
            BenchmarkRow row;
            row.query_id = item.query_id;
            row.ok = false;
            row.error = "missing rubric: " + rubric_ref;
            missing_rubric_rows.push_back(std::move(row));
            return;
        }
        item.rubric = it->second;
        items.push_back(std::move(item));
    });

    if (items.empty() && missing_rubric_rows.empty()) {
        std::cerr << "error: empty evaluation batch\n";
        return 2;
    }

    JudgeConfig jc;
    jc.seed = c.seed;
    BenchmarkOutcome outcome;
    if (!items.empty()) {
        outcome = benchmark(items, catalog, *gateway, jc);
    }
    for (auto& row : missing_rubric_rows) outcome.rows.push_back(std::move(row));
    std::sort(outcome.rows.begin(), outcome.rows.end(),
              [](const BenchmarkRow& a, const BenchmarkRow& b) { return a.query_id < b.query_id; });
    outcome.summary.items = static_cast<int>(outcome.rows.size());
    outcome.summary.errors += static_cast<int>(missing_rubric_rows.size());

    ensure_dir(c.output_dir);
    {
        std::ofstream out(c.output_dir + "/eval_results.jsonl", std::ios::binary);
        for (const auto& row : outcome.rows) out << to_json(row).dump() << "\n";
    }
    write_file(c.output_dir + "/eval_summary.json", to_json(outcome.summary).dump(2) + "\n");
    std::cout << render_summary_table(outcome.summary) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// inspect
// ---------------------------------------------------------------------------

int cmd_inspect(const std::string& path, const std::string& id, bool as_json) {
    std::optional<RawTrajectory> found;
    for_each_jsonl(path, [&](int, const json& j) {
        if (found) return;
        try {
            RawTrajectory t = raw_trajectory_from_json(j);
            if (t.query.query_id == id) found = std::move(t);
        } catch (const std::exception&) {
        }
    });
    if (!found) {
        std::cerr << "error: no trajectory with id " << id << "\n";
        return 2;
    }
    if (as_json) {
        std::cout << to_json(*found).dump(2) << "\n";
        return 0;
    }
    const RawTrajectory& t = *found;
    std::cout << "trajectory " << t.query.query_id << " [" << to_string(t.status) << "]\n";
    std::cout << "query: " << t.query.text << "\n";
    std::cout << "messages: " << t.messages.size()
              << " (assistant turns: " << assistant_turn_count(t.messages) << ")\n";
    std::cout << "state timeline:\n";
    for (const auto& e : t.state_log) {
        std::cout << "  step " << e.step_index << "  " << to_string(e.state) << "/"
                  << to_string(e.phase) << "  " << (e.approved ? "approved" : "rejected")
                  << (e.synthetic ? " (synthetic)" : "");
        if (!e.reason.empty()) std::cout << "  - " << e.reason;
        std::cout << "\n";
    }
    if (!t.intermediate_reports.empty()) {
        std::cout << "intermediate report rounds:\n";
        for (const auto& r : t.intermediate_reports) {
            std::cout << "  round " << r.round << ": " << r.report_text.size() << " chars\n";
        }
    }
    return 0;
}

// ---------------------------------------------------------------------------
// demo
// ---------------------------------------------------------------------------

int cmd_demo(const std::string& fixtures_dir, const std::string& templates_dir,
             const std::string& out_dir, std::uint64_t seed) {
    CliConfig c;
    c.corpus_path = fixtures_dir + "/products.jsonl";
    c.templates_dir = templates_dir;
    c.web_fixture = fixtures_dir + "/web_fixture.jsonl";
    c.backend = "scripted";
    c.script_path = fixtures_dir + "/demo_script.jsonl";
    c.seed = seed;
    c.output_dir = out_dir;
    c.workers = 1;

    int rc = cmd_index(c.corpus_path, out_dir);
    if (rc != 0) return rc;
    rc = cmd_synthesize(c, fixtures_dir + "/users.jsonl", 1);
    if (rc != 0) return rc;
    rc = cmd_refine(c, out_dir + "/raw_trajectories.jsonl");
    if (rc != 0) return rc;

    // evaluation pairs: each completed trajectory's final report serves as
    // both target and reference (the demo's parity convention)
    std::vector<json> pairs;
    for_each_jsonl(out_dir + "/raw_trajectories.jsonl", [&](int, const json& j) {
        RawTrajectory t = raw_trajectory_from_json(j);
        if (t.status != TrajectoryStatus::Completed) return;
        auto report = final_report_text(t.messages);
        if (!report) return;
        pairs.push_back(json{{"query_id", t.query.query_id},
                             {"target_report", *report},
                             {"reference_report", *report},
                             {"rubric_ref", t.query.query_id}});
    });
    {
        std::ofstream out(out_dir + "/pairs.jsonl", std::ios::binary);
        for (const auto& p : pairs) out << p.dump() << "\n";
    }
    return cmd_eval(c, out_dir + "/pairs.jsonl", out_dir + "/rubrics.jsonl");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"shopping-research trajectory synthesis and evaluation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string backend_flag;
    std::string out_flag;
    std::uint64_t seed_flag = 0;
    bool seed_set = false;
    int workers_flag = 0;
    app.add_option("--config", config_path, "JSON config file");

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--backend", backend_flag,
                        "scripted:<script.jsonl> or remote:<url>,<model>");
        sub->add_option("--out", out_flag, "output directory");
        sub->add_option("--seed", seed_flag, "seed for randomized choices")
            ->each([&](const std::string&) { seed_set = true; });
        sub->add_option("--workers", workers_flag, "worker count");
    };

    auto* index = app.add_subcommand("index", "build and persist the product index");
    std::string index_corpus;
    index->add_option("corpus", index_corpus, "product corpus (jsonl)")->required();
    add_common(index);

    auto* synthesize = app.add_subcommand("synthesize", "run phases 1-2 for n users");
    std::string users_path;
    int synth_n = 0;
    std::string synth_corpus;
    std::string synth_templates;
    std::string synth_web;
    synthesize->add_option("users", users_path, "behavior logs (jsonl)")->required();
    synthesize->add_option("-n", synth_n, "number of users")->required();
    synthesize->add_option("--corpus", synth_corpus, "product corpus (jsonl)");
    synthesize->add_option("--templates", synth_templates, "templates directory");
    synthesize->add_option("--web-fixture", synth_web, "web fixture (jsonl)");
    add_common(synthesize);

    auto* refine = app.add_subcommand("refine", "filter and internalize raw trajectories");
    std::string raw_path;
    int tau_flag = -1;
    std::string refine_templates;
    refine->add_option("raw", raw_path, "raw trajectories (jsonl)")->required();
    refine->add_option("--tau", tau_flag, "minimum assistant turns");
    refine->add_option("--templates", refine_templates, "templates directory");
    add_common(refine);

    auto* eval = app.add_subcommand("eval", "benchmark report pairs");
    std::string pairs_path;
    std::string rubrics_path;
    std::string eval_corpus;
    eval->add_option("pairs", pairs_path, "evaluation pairs (jsonl)")->required();
    eval->add_option("--rubrics", rubrics_path, "rubrics file (jsonl)")->required();
    eval->add_option("--corpus", eval_corpus, "product corpus (jsonl)");
    add_common(eval);

    auto* inspect = app.add_subcommand("inspect", "pretty-print one trajectory");
    std::string inspect_path;
    std::string inspect_id;
    bool inspect_json = false;
    inspect->add_option("file", inspect_path, "trajectories (jsonl)")->required();
    inspect->add_option("id", inspect_id, "query id")->required();
    inspect->add_flag("--json", inspect_json, "machine-readable output");

    auto* demo = app.add_subcommand("demo", "index + synthesize + refine + eval on fixtures");
    std::string demo_fixtures = "fixtures";
    std::string demo_templates = "templates";
    demo->add_option("--fixtures", demo_fixtures, "fixtures directory");
    demo->add_option("--templates", demo_templates, "templates directory");
    add_common(demo);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        CliConfig c = load_config(config_path);
        apply_backend_flag(c, backend_flag);
        if (!out_flag.empty()) c.output_dir = out_flag;
        if (seed_set) c.seed = seed_flag;
        if (workers_flag > 0) c.workers = workers_flag;

        if (index->parsed()) {
            return cmd_index(index_corpus, c.output_dir);
        }
        if (synthesize->parsed()) {
            if (!synth_corpus.empty()) c.corpus_path = synth_corpus;
            if (!synth_templates.empty()) c.templates_dir = synth_templates;
            if (!synth_web.empty()) c.web_fixture = synth_web;
            return cmd_synthesize(c, users_path, synth_n);
        }
        if (refine->parsed()) {
            if (tau_flag >= 1) c.tau = tau_flag;
            if (!refine_templates.empty()) c.templates_dir = refine_templates;
            return cmd_refine(c, raw_path);
        }
        if (eval->parsed()) {
            if (!eval_corpus.empty()) c.corpus_path = eval_corpus;
            return cmd_eval(c, pairs_path, rubrics_path);
        }
        if (inspect->parsed()) {
            return cmd_inspect(inspect_path, inspect_id, inspect_json);
        }
        if (demo->parsed()) {
            return cmd_demo(demo_fixtures, demo_templates, c.output_dir, c.seed);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
