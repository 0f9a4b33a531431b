#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sscg/harness.hpp"

namespace {

sscg::CRule parse_c_rule(const std::string& text) {
    if (text == "one") return sscg::CRule::one();
    if (text.rfind("const:", 0) == 0)
        return sscg::CRule::constant(std::stod(text.substr(6)));
    if (text == "sqrt-kappa") {
        sscg::CRule c;
        c.kind = sscg::CRule::Kind::SqrtKappaA;
        return c;  // stats filled in by the harness from the loaded matrix
    }
    if (text == "full") {
        sscg::CRule c;
        c.kind = sscg::CRule::Kind::FullBound;
        return c;
    }
    throw sscg::ConfigError("unknown c-rule: " + text);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"s-step conjugate gradient solvers and benchmark harness"};
    app.require_subcommand(1);

    auto* fetch = app.add_subcommand("fetch", "Download a matrix from the collection");
    std::string fetch_name;
    std::string fetch_dest = "data";
    fetch->add_option("name", fetch_name, "collection name (e.g. nos6 or HB/nos6)")
        ->required();
    fetch->add_option("--dest", fetch_dest, "destination directory");

    auto* run = app.add_subcommand("run", "Run a solver on a Matrix Market file");
    std::string matrix_path, solver = "cg", c_rule_text, out_dir;
    int s = 4, smax = 10, f_opt = 0, s0 = 0, max_outer = 1000;
    double eps = 1e-6;
    double roundoff = sscg::kBenchmarkRoundoff;
    run->add_option("--matrix", matrix_path, "path to .mtx file")->required();
    run->add_option("--solver", solver, "cg | sstep | adaptive")
        ->check(CLI::IsMember({"cg", "sstep", "adaptive"}));
    run->add_option("--s", s, "block size for sstep");
    run->add_option("--smax", smax, "maximum block size for adaptive");
    run->add_option("--f", f_opt, "basis growth cap (default: smax)");
    run->add_option("--s0", s0, "initial basis size (default: smax)");
    run->add_option("--eps-star", eps, "target residual norm");
    run->add_option("--c-rule", c_rule_text, "one | const:V | sqrt-kappa | full");
    run->add_option("--max-outer", max_outer, "outer loop cap");
    run->add_option("--out", out_dir, "trace output directory");
    run->add_option("--unit-roundoff", roundoff, "roundoff constant in the selection bound");

    auto* table = app.add_subcommand("table", "Summarize a directory of trace files");
    std::string trace_dir;
    table->add_option("dir", trace_dir, "directory holding .csv traces")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (fetch->parsed()) {
            std::string path = sscg::fetch_matrix(fetch_name, fetch_dest);
            std::printf("%s\n", path.c_str());
            return 0;
        }
        if (run->parsed()) {
            sscg::ExperimentPlan plan;
            plan.matrix_path = matrix_path;
            plan.eps_values = {eps};
            plan.output_dir = out_dir;
            plan.max_outer = max_outer;
            plan.s_bar_0 = s0;
            plan.f = f_opt;
            plan.unit_roundoff = roundoff;
            if (solver == "cg")
                plan.solvers.push_back(sscg::SolverChoice::classical());
            else if (solver == "sstep")
                plan.solvers.push_back(sscg::SolverChoice::fixed(s));
            else
                plan.solvers.push_back(sscg::SolverChoice::adaptive(smax));
            if (!c_rule_text.empty()) {
                plan.c_rule = parse_c_rule(c_rule_text);
                plan.c_rule_set = true;
            }
            sscg::ExperimentResult result = sscg::run_experiment(plan);
            std::fputs(result.summary_text.c_str(), stdout);
            for (const auto& r : result.runs) {
                if (r.errored) {
                    std::fprintf(stderr, "error: %s\n", r.error_text.c_str());
                    return 1;
                }
                if (r.status != sscg::SolveStatus::Converged) return 2;
            }
            return 0;
        }
        std::fputs(sscg::summarize_trace_dir(trace_dir).c_str(), stdout);
        return 0;
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
}
