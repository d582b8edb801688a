#include <catch_amalgamated.hpp>

#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out, err;
};

fs::path scratch()
{
    static fs::path d = [] {
        auto p = fs::temp_directory_path() / ("renormtrace_cli_" + std::to_string(::getpid()));
        fs::create_directories(p);
        return p;
    }();
    return d;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

Run run(const std::string& args)
{
    auto err = scratch() / "stderr.txt";
    std::string cmd = std::string("\"") + RENORMTRACE_CLI + "\" " + args + " 2>\"" + err.string() + "\"";
    Run r;
    FILE* p = ::popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    char buf[4096];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    int st = ::pclose(p);
    r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    r.err = slurp(err);
    return r;
}

std::string scenario(const std::string& name) { return std::string("\"") + RENORMTRACE_SCENARIOS + "/" + name + ".json\""; }

std::string write_scenario(const std::string& name, const std::string& text)
{
    auto p = scratch() / (name + ".json");
    std::ofstream(p) << text;
    return "\"" + p.string() + "\"";
}

}  // namespace

TEST_CASE("passing scenario exits 0 with a JSON report")
{
    auto r = run("--scenario " + scenario("lemma1_findim") + " -q");
    REQUIRE(r.code == 0);
    auto j = nlohmann::ordered_json::parse(r.out);
    CHECK(j["scenario"] == "lemma1_findim");
    CHECK(j["all_pass"] == true);
    REQUIRE(j["rows"].size() > 0);
    for (auto& row : j["rows"]) {
        CHECK(row["pass"] == true);
        for (const char* k : {"task_id", "quantity", "value_re", "value_im", "reference", "defect", "tolerance", "route", "tail_bound", "residual"})
            CHECK(row.contains(k));
    }
}

TEST_CASE("reports are deterministic apart from the timestamp")
{
    auto strip = [](const std::string& s) {
        auto j = nlohmann::ordered_json::parse(s);
        j.erase("generated_at");
        return j.dump();
    };
    auto a = run("--scenario " + scenario("acs_identities") + " -q");
    auto b = run("--scenario " + scenario("acs_identities") + " -q --threads 1");
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(strip(a.out) == strip(b.out));
}

TEST_CASE("csv output")
{
    auto r = run("--scenario " + scenario("lemma1_findim") + " -q --format csv");
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("task_id,quantity,value_re,value_im,reference,defect,tolerance,pass,route,tail_bound,residual\n", 0) == 0);
    auto out = scratch() / "report.csv";
    auto f = run("--scenario " + scenario("lemma1_findim") + " -q --out \"" + out.string() + "\"");
    REQUIRE(f.code == 0);
    CHECK(slurp(out) == r.out);
}

TEST_CASE("timings go to stderr unless quiet")
{
    auto r = run("--scenario " + scenario("lemma1_findim"));
    REQUIRE(r.code == 0);
    CHECK(r.err.find("rank4_random") != std::string::npos);
    auto q = run("--scenario " + scenario("lemma1_findim") + " -q");
    CHECK(q.err.empty());
}

TEST_CASE("malformed literal exits 2 naming the key")
{
    auto s = write_scenario("bad_literal", R"({"name": "bad", "operators": {"D": {"kind": "multiplier", "coeffs": "x"}},
        "tasks": [{"id": "a", "task": "acs_identities"}]})");
    auto r = run("--scenario " + s);
    CHECK(r.code == 2);
    CHECK(r.err.find("operators.D.coeffs") != std::string::npos);
}

TEST_CASE("unknown keys and task types exit 2")
{
    auto s = write_scenario("bad_task", R"({"name": "bad", "tasks": [{"id": "a", "task": "nope"}]})");
    auto r = run("--scenario " + s);
    CHECK(r.code == 2);
    CHECK(r.err.find("tasks[0].task") != std::string::npos);

    auto k = write_scenario("bad_key", R"({"name": "bad", "tasks": [{"id": "a", "task": "acs_identities", "trails": 10}]})");
    auto rk = run("--scenario " + k);
    CHECK(rk.code == 2);
    CHECK(rk.err.find("trails") != std::string::npos);

    auto j = write_scenario("bad_json", "{\"name\": ");
    CHECK(run("--scenario " + j).code == 2);
    CHECK(run("--scenario /nonexistent/file.json").code == 2);
    CHECK(run("--bogus-flag").code == 2);
    CHECK(run("").code == 2);
}

TEST_CASE("failing tolerance exits 1")
{
    auto s = write_scenario("strict", R"({"name": "strict", "seed": 3,
        "tasks": [{"id": "a", "task": "findim_lemma1", "trials": 2, "tolerance": 1e-30},
                  {"id": "b", "task": "acs_identities", "trials": 10}]})");
    auto r = run("--scenario " + s + " -q");
    CHECK(r.code == 1);
    auto j = nlohmann::ordered_json::parse(r.out);
    CHECK(j["all_pass"] == false);
    bool saw_b = false;
    for (auto& row : j["rows"]) saw_b |= row["task_id"] == "b";
    CHECK(saw_b);

    auto ff = run("--scenario " + s + " -q --fail-fast");
    CHECK(ff.code == 1);
    auto jf = nlohmann::ordered_json::parse(ff.out);
    for (auto& row : jf["rows"]) CHECK(row["task_id"] != "b");
}

TEST_CASE("task listing")
{
    auto r = run("--list-tasks");
    REQUIRE(r.code == 0);
    for (const char* t : {"weighted_trace", "residue", "det", "trace_form", "volterra", "b3", "b4", "acs_identities", "findim_lemma1", "prop4",
                          "theorem3"})
        CHECK(r.out.find(std::string(t) + "\t") != std::string::npos);
}

TEST_CASE("sweep over a numeric parameter")
{
    auto r = run("--scenario " + scenario("lemma1_findim") + " -q sweep --param fd_step --values 1e-3 1e-4");
    CHECK(r.code == 0);
    auto j = nlohmann::ordered_json::parse(r.out);
    REQUIRE(j.contains("aggregate"));
    bool found = false;
    for (auto& s : j["aggregate"])
        if (s["quantity"] == "max_defect") {
            found = true;
            CHECK(s["values"].size() == 2);
            CHECK(std::abs(s["loglog_slope"].get<double>() - 2.0) < 0.2);
        }
    CHECK(found);

    auto csv = run("--scenario " + scenario("lemma1_findim") + " -q --format csv sweep --param fd_step --values 1e-3 1e-4");
    CHECK(csv.out.rfind("task_id,quantity,param_value,defect,loglog_slope\n", 0) == 0);

    auto bad = run("--scenario " + scenario("lemma1_findim") + " -q sweep --param no_such_key --values 1 2");
    CHECK(bad.code == 2);
    CHECK(bad.err.find("no_such_key") != std::string::npos);
}
