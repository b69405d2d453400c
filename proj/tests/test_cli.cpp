#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "shoplab/jsonl.hpp"
#include "support.hpp"

#ifndef SHOPLAB_CLI_PATH
#define SHOPLAB_CLI_PATH "shoplab"
#endif

using namespace shoplab;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args) {
    const std::string dir = testsup::make_temp_dir("cli-io");
    const std::string out_path = dir + "/out.txt";
    const std::string err_path = dir + "/err.txt";
    const std::string cmd =
        std::string(SHOPLAB_CLI_PATH) + " " + args + " >" + out_path + " 2>" + err_path;
    const int rc = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = read_file(out_path);
    r.err = read_file(err_path);
    return r;
}

const std::string kFixtures = testsup::fixtures_dir();
const std::string kTemplates = testsup::templates_dir();

std::string demo_once(const std::string& tag, unsigned seed = 7) {
    const std::string out = testsup::make_temp_dir("demo-" + tag);
    auto r = run_cli("demo --fixtures " + kFixtures + " --templates " + kTemplates + " --out " +
                     out + " --seed " + std::to_string(seed));
    REQUIRE(r.exit_code == 0);
    return out;
}

}  // namespace

TEST_CASE("index: fixture corpus succeeds, bad input exits 2") {
    const std::string out = testsup::make_temp_dir("index");
    auto ok = run_cli("index " + kFixtures + "/products.jsonl --out " + out);
    CHECK(ok.exit_code == 0);
    CHECK(ok.out.find("indexed 8 products") != std::string::npos);

    SUBCASE("duplicate ids name the line") {
        const std::string dup = out + "/dup.jsonl";
        std::ofstream f(dup);
        f << R"({"product_id":"p1","product_name":"a"})" << "\n";
        f << R"({"product_id":"p1","product_name":"b"})" << "\n";
        f.close();
        auto bad = run_cli("index " + dup + " --out " + out);
        CHECK(bad.exit_code == 2);
        CHECK(bad.err.find("line 2") != std::string::npos);
    }
    SUBCASE("missing file") {
        auto missing = run_cli("index /no/such/file.jsonl --out " + out);
        CHECK(missing.exit_code == 2);
        CHECK(missing.err.find("cannot open") != std::string::npos);
    }
}

TEST_CASE("synthesize: n=0 is a usage error") {
    const std::string out = testsup::make_temp_dir("synth");
    auto r = run_cli("synthesize " + kFixtures + "/users.jsonl -n 0 --corpus " + kFixtures +
                     "/products.jsonl --templates " + kTemplates + " --backend scripted:" +
                     kFixtures + "/demo_script.jsonl --out " + out);
    CHECK(r.exit_code == 2);
}

TEST_CASE("synthesize: exhausted script fails the session and the run exits 3") {
    const std::string out = testsup::make_temp_dir("synth");
    // a script that stops after the persona reply
    const std::string script = out + "/short.jsonl";
    {
        auto lines = read_lines(kFixtures + "/demo_script.jsonl");
        std::ofstream f(script);
        f << lines[0] << "\n";
    }
    auto r = run_cli("synthesize " + kFixtures + "/users.jsonl -n 1 --corpus " + kFixtures +
                     "/products.jsonl --templates " + kTemplates + " --backend scripted:" + script +
                     " --out " + out);
    CHECK(r.exit_code == 3);
    CHECK(r.err.find("failed") != std::string::npos);
}

TEST_CASE("synthesize: a session hitting script exhaustion fails alone, the run continues") {
    const std::string out = testsup::make_temp_dir("synth-iso");
    const std::string users2 = out + "/users2.jsonl";
    {
        std::ofstream f(users2);
        f << read_file(kFixtures + "/users.jsonl");
        f << json{{"user_id", "u-2002"},
                  {"events", json::array({json{{"kind", "purchase"},
                                               {"timestamp", 1700000000},
                                               {"payload", "bought a monitor"}}})}}
                 .dump()
          << "\n";
    }
    // the demo script covers exactly one session; the second one exhausts it
    auto r = run_cli("synthesize " + users2 + " -n 2 --corpus " + kFixtures +
                     "/products.jsonl --templates " + kTemplates + " --web-fixture " + kFixtures +
                     "/web_fixture.jsonl --backend scripted:" + kFixtures +
                     "/demo_script.jsonl --out " + out);
    CHECK(r.exit_code == 0);  // one session completed
    json manifest = json::parse(read_file(out + "/manifest.json"));
    CHECK(manifest["counts"]["attempted"] == 2);
    CHECK(manifest["counts"]["completed"] == 1);
    CHECK(manifest["counts"]["failed"] == 1);
}

TEST_CASE("demo chain: synthesize, refine, eval artifacts all land on disk") {
    const std::string out = demo_once("artifacts");

    auto raws = read_lines(out + "/raw_trajectories.jsonl");
    REQUIRE(raws.size() == 1);
    RawTrajectory t = raw_trajectory_from_json(json::parse(raws[0]));
    CHECK(t.status == TrajectoryStatus::Completed);
    CHECK(validate_raw_trajectory(t).empty());

    json manifest = json::parse(read_file(out + "/manifest.json"));
    CHECK(manifest["counts"]["attempted"] == 1);
    CHECK(manifest["counts"]["completed"] == 1);
    CHECK(manifest["counts"]["attempted"].get<int>() ==
          manifest["counts"]["completed"].get<int>() +
              manifest["counts"]["filtered_by_length"].get<int>() +
              manifest["counts"]["failed"].get<int>());
    CHECK(manifest["usage"]["calls"].get<int>() > 0);

    auto refined = read_lines(out + "/refined_trajectories.jsonl");
    REQUIRE(refined.size() == 1);
    RefinedTrajectory rt = refined_trajectory_from_json(json::parse(refined[0]));
    for (const auto& m : rt.messages) CHECK(m.role != Role::Supervisor);

    auto sft = read_lines(out + "/sft.jsonl");
    REQUIRE(sft.size() == 1);
    json rec = json::parse(sft[0]);
    CHECK(rec["meta"]["assistant_turns"].get<int>() >= 6);

    json report = json::parse(read_file(out + "/refine_report.json"));
    CHECK(report["kept"] == 1);
    CHECK(report["fallback_segments"] == 0);

    json summary = json::parse(read_file(out + "/eval_summary.json"));
    CHECK(summary["overall"].get<double>() == doctest::Approx(50.0));
    CHECK(summary["eprod"].get<double>() > 0);
}

TEST_CASE("refine: corrupted lines are skipped with a warning, exit stays 0") {
    const std::string out = demo_once("refine-corrupt");
    const std::string mixed = out + "/mixed.jsonl";
    {
        std::ofstream f(mixed);
        f << "this is not json\n";
        f << read_file(out + "/raw_trajectories.jsonl");
    }
    auto r = run_cli("refine " + mixed + " --templates " + kTemplates + " --backend scripted:" +
                     kFixtures + "/demo_script.jsonl --tau 7 --out " + out + "/refine2");
    CHECK(r.exit_code == 0);
    CHECK(r.err.find("skipped") != std::string::npos);
    CHECK(read_lines(out + "/refine2/refined_trajectories.jsonl").size() == 1);
}

TEST_CASE("refine: tau above the turn count drops the trajectory") {
    const std::string out = demo_once("refine-tau");
    auto r = run_cli("refine " + out + "/raw_trajectories.jsonl --templates " + kTemplates +
                     " --backend scripted:" + kFixtures + "/demo_script.jsonl --tau 9 --out " +
                     out + "/refine3");
    CHECK(r.exit_code == 0);
    json report = json::parse(read_file(out + "/refine3/refine_report.json"));
    CHECK(report["dropped_by_length"] == 1);
    CHECK(report["output_count"] == 0);
}

TEST_CASE("eval: missing rubric reference becomes an error row, exit stays 0") {
    const std::string out = demo_once("eval-missing");
    const std::string pairs = out + "/pairs2.jsonl";
    {
        std::ofstream f(pairs);
        f << read_file(out + "/pairs.jsonl");
        f << json{{"query_id", "q-ghost"},
                  {"target_report", "some report"},
                  {"reference_report", "other report"},
                  {"rubric_ref", "q-ghost"}}
                 .dump()
          << "\n";
    }
    auto r = run_cli("eval " + pairs + " --rubrics " + out + "/rubrics.jsonl --corpus " +
                     kFixtures + "/products.jsonl --backend scripted:" + kFixtures +
                     "/demo_script.jsonl --out " + out + "/eval2");
    CHECK(r.exit_code == 0);
    auto rows = read_lines(out + "/eval2/eval_results.jsonl");
    REQUIRE(rows.size() == 2);
    json ghost;
    for (const auto& line : rows) {
        json row = json::parse(line);
        if (row["query_id"] == "q-ghost") ghost = row;
    }
    REQUIRE(!ghost.is_null());
    CHECK(ghost["ok"] == false);
    CHECK(ghost["error"].get<std::string>().find("missing rubric") != std::string::npos);
}

TEST_CASE("eval: empty batch exits 2") {
    const std::string out = testsup::make_temp_dir("eval-empty");
    const std::string empty = out + "/empty.jsonl";
    std::ofstream(empty).close();
    auto r = run_cli("eval " + empty + " --rubrics " + empty + " --corpus " + kFixtures +
                     "/products.jsonl --backend scripted:" + kFixtures + "/demo_script.jsonl"
                     " --out " + out);
    CHECK(r.exit_code == 2);
}

TEST_CASE("inspect: timeline, json mode, unknown id") {
    const std::string out = demo_once("inspect");
    auto shown = run_cli("inspect " + out + "/raw_trajectories.jsonl q-u-1001");
    CHECK(shown.exit_code == 0);
    CHECK(shown.out.find("state timeline:") != std::string::npos);
    CHECK(shown.out.find("CheckPlan") != std::string::npos);

    auto as_json = run_cli("inspect " + out + "/raw_trajectories.jsonl q-u-1001 --json");
    CHECK(as_json.exit_code == 0);
    json machine = json::parse(as_json.out, nullptr, false);
    CHECK(!machine.is_discarded());
    CHECK(machine["query"]["query_id"] == "q-u-1001");

    auto unknown = run_cli("inspect " + out + "/raw_trajectories.jsonl nope");
    CHECK(unknown.exit_code == 2);
}

TEST_CASE("unknown flags and missing subcommands exit 2") {
    CHECK(run_cli("definitely-not-a-subcommand").exit_code == 2);
    CHECK(run_cli("index").exit_code == 2);  // missing required positional
}
