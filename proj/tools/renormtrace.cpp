#include <renormtrace.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

enum class Format { json, csv };

Format pick_format(const std::string& fmt, const std::string& out, const rt::Scenario* sc)
{
    std::string f = fmt;
    if (f.empty() && out.size() >= 4 && out.substr(out.size() - 4) == ".csv") f = "csv";
    if (f.empty() && sc) f = sc->out_format;
    if (f.empty() || f == "json") return Format::json;
    if (f == "csv") return Format::csv;
    throw rt::ScenarioError("unknown output format '" + f + "'");
}

template <class R>
void emit(const R& r, Format f, const std::string& out)
{
    std::ofstream file;
    if (!out.empty() && out != "-") {
        file.open(out);
        if (!file) throw rt::Error("cannot open " + out + " for writing");
    }
    std::ostream& os = file.is_open() ? static_cast<std::ostream&>(file) : std::cout;
    if (f == Format::csv)
        rt::write_csv(os, r);
    else
        rt::write_json(os, r, rt::utc_timestamp());
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"renormtrace: renormalized traces and determinant-bundle curvature checks"};
    app.set_version_flag("--version", "renormtrace 1.0");

    std::string scenario, out, format, precision = "default";
    int threads = 0;
    bool fail_fast = false, list_tasks = false, quiet = false;
    app.add_option("--scenario", scenario, "scenario JSON file")->check(CLI::ExistingFile);
    app.add_option("--out", out, "output file (default stdout)");
    app.add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    app.add_flag("--fail-fast", fail_fast, "stop after the first failing task");
    app.add_option("--threads", threads, "worker threads (0: hardware)")->check(CLI::NonNegativeNumber);
    app.add_option("--precision", precision, "default or extended")->check(CLI::IsMember({"default", "extended"}));
    app.add_flag("--list-tasks", list_tasks, "list task types and exit");
    app.add_flag("-q,--quiet", quiet, "no per-task timings on stderr");

    auto* sw = app.add_subcommand("sweep", "rerun a scenario over values of one numeric parameter");
    std::string param;
    std::vector<double> values;
    sw->add_option("--param", param, "dotted key, e.g. fd_step or cutoff.N")->required();
    sw->add_option("--values", values, "parameter values")->required()->expected(1, -1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (list_tasks) {
        for (auto& [name, t] : rt::task_registry()) std::cout << name << "\t" << t.description << "\n";
        return 0;
    }
    if (scenario.empty()) {
        std::cerr << "error: --scenario is required\n";
        return 2;
    }
    if (threads > 0) rt::set_threads(threads);

    rt::RunOptions ro;
    ro.fail_fast = fail_fast;
    ro.extended = precision == "extended";
    ro.timings = !quiet;
    try {
        auto doc = rt::read_json_file(scenario);
        if (*sw) {
            auto res = rt::sweep(doc, param, values, ro);
            emit(res, pick_format(format, out, nullptr), out);
            return res.all_pass() ? 0 : 1;
        }
        auto sc = rt::parse_scenario(doc);
        auto rep = rt::run_scenario(sc, ro);
        std::string dest = out.empty() ? sc.out_path : out;
        emit(rep, pick_format(format, dest, &sc), dest);
        return rep.all_pass() ? 0 : 1;
    } catch (const rt::ScenarioError& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
