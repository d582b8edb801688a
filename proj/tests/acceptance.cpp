// one line per acceptance criterion; exit status 0 iff all pass
#include <renormtrace.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <set>
#include <string>
#include <vector>

using namespace rt;

namespace {

struct Outcome {
    bool pass = true;
    double seconds = 0;
    size_t rows = 0, checked = 0;
    std::vector<std::string> failures;
};

std::string path(const std::string& name) { return std::string(RENORMTRACE_SCENARIOS) + "/" + name + ".json"; }

Outcome run_tasks(const std::string& scenario, const std::set<std::string>& ids = {})
{
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    try {
        auto sc = load_scenario(path(scenario));
        if (!ids.empty()) {
            std::vector<ojson> keep;
            for (auto& t : sc.tasks)
                if (ids.count(t.at("id").get<std::string>())) keep.push_back(t);
            if (keep.size() != ids.size()) throw Error(scenario + ": missing task ids");
            sc.tasks = keep;
        }
        RunOptions ro;
        ro.timings = false;
        auto rep = run_scenario(sc, ro);
        o.rows = rep.rows.size();
        for (auto& r : rep.rows) {
            if (r.tolerance) ++o.checked;
            if (!r.pass) {
                o.pass = false;
                o.failures.push_back(r.task_id + "/" + r.quantity + " value " + fmt17(r.value) + " defect " + (r.defect ? fmt17(*r.defect) : "-"));
            }
        }
        if (o.checked == 0) {
            o.pass = false;
            o.failures.push_back("no checked rows");
        }
    } catch (const std::exception& e) {
        o.pass = false;
        o.failures.push_back(e.what());
    }
    o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return o;
}

Outcome merge(Outcome a, const Outcome& b)
{
    a.pass = a.pass && b.pass;
    a.seconds += b.seconds;
    a.rows += b.rows;
    a.checked += b.checked;
    a.failures.insert(a.failures.end(), b.failures.begin(), b.failures.end());
    return a;
}

int failed = 0;

void report(int n, const char* what, Outcome o, double budget)
{
    if (o.seconds > budget) {
        o.pass = false;
        o.failures.push_back("runtime " + std::to_string(o.seconds) + " s over budget " + std::to_string(budget) + " s");
    }
    if (!o.pass) ++failed;
    std::printf("criterion %2d: %s  %-44s %3zu checks  %7.2f s (budget %g s)\n", n, o.pass ? "PASS" : "FAIL", what, o.checked, o.seconds, budget);
    for (auto& f : o.failures) std::printf("              %s\n", f.c_str());
    std::fflush(stdout);
}

// exact anchors, outside the scenario machinery
Outcome trace_anchors()
{
    Outcome o;
    auto p = ACPoint::standard();
    Mat2 I = Mat2::Identity();
    o.checked = 2;
    if (complexified_trace(I, p) != cplx(1, 0)) o.pass = false, o.failures.push_back("tr_C(I) != 1");
    if (complexified_trace(p.J, p) != cplx(0, 1)) o.pass = false, o.failures.push_back("tr_C(J) != i");
    return o;
}

}  // namespace

int main()
{
    report(1, "finite-rank determinant curvature", run_tasks("lemma1_findim"), 5);
    report(2, "heat coefficient anchors", run_tasks("residue_calibration", {"heat_identity", "heat_inv_sqrt_laws"}), 30);
    report(3, "residue calibration", run_tasks("residue_calibration", {"residue_inv_sqrt", "zeta_pole_half", "residue_generic"}), 30);
    report(4, "weighted trace of commutators", run_tasks("lemma2_checks", {"commutator_cos_sin", "commutator_cos_lambda_cos"}), 60);
    report(5, "derivative along a weight family", run_tasks("lemma2_checks", {"derivative_lambda", "derivative_modulated_lambda"}), 60);
    report(6, "curvature at fixed cutoff", run_tasks("prop4_family", {"trig_prop4", "chiral_prop4"}), 300);
    report(7, "renormalized curvature and obstruction", run_tasks("theorem3_family"), 600);
    report(8, "trace forms and bracket expansions", run_tasks("appendix_b_suite"), 300);
    report(9, "almost complex structure identities", merge(run_tasks("acs_identities"), trace_anchors()), 5);
    report(10, "renormalized-limit extractor", run_tasks("residue_calibration", {"synthetic_fit"}), 5);
    std::printf("%d of 10 criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
