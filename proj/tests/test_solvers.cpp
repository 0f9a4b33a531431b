#include <cmath>
#include <map>
#include <random>

#include "catch_amalgamated.hpp"
#include "sscg/solvers.hpp"
#include "support.hpp"

using namespace sscg;

namespace {

SparseMatrixCsr identity_csr(int n) {
    SparseMatrixCsr a;
    a.n = n;
    a.n_a = 1;
    a.row_offsets.resize(n + 1);
    for (int i = 0; i <= n; ++i) a.row_offsets[i] = i;
    for (int i = 0; i < n; ++i) {
        a.col_indices.push_back(i);
        a.values.push_back(1.0);
    }
    return a;
}

SparseMatrixCsr indefinite_2x2() {
    SparseMatrixCsr a;
    a.n = 2;
    a.n_a = 1;
    a.row_offsets = {0, 1, 2};
    a.col_indices = {0, 1};
    a.values = {1.0, -1.0};
    return a;
}

struct GrProblem {
    SparseMatrixCsr a;
    std::vector<double> b;
    std::vector<double> x1;
};

const GrProblem& gr_problem() {
    static GrProblem prob = [] {
        GrProblem p;
        auto [scaled, d] = equilibrate(testsup::gr_30_30());
        p.a = std::move(scaled);
        p.b = make_rhs(p.a.n);
        p.x1.assign(p.a.n, 0.0);
        return p;
    }();
    return prob;
}

GramMatrix diag_gram(std::vector<double> d, int s) {
    int order = static_cast<int>(d.size());
    std::vector<double> e(static_cast<size_t>(order) * order, 0.0);
    for (int i = 0; i < order; ++i) e[static_cast<size_t>(i) * order + i] = d[i];
    return GramMatrix(order, s, std::move(e));
}

}  // namespace

TEST_CASE("CRule evaluation") {
    CHECK(CRule::one().eval(3, 5) == 1.0);
    CHECK(CRule::constant(10.0).eval(0, 1) == 10.0);
    CHECK_THROWS_AS(CRule::constant(0.0), ConfigError);
    CHECK_THROWS_AS(CRule::constant(-2.0), ConfigError);

    MatrixStats st;
    st.norm_a = 2.0;
    st.kappa_a = 16.0;
    CHECK(CRule::sqrt_kappa(st).eval(7, 2) == Catch::Approx(4.0).epsilon(1e-15));

    // tau = 1/norm_a = 0.5, N_k = 7 + 2*9 + 14*0.5 = 32, c = 6*32*j*kappa
    CRule full = CRule::full_bound(st, 9);
    CHECK(full.eval(0, 1) == Catch::Approx(6.0 * 32.0 * 16.0).epsilon(1e-15));
    CHECK(full.eval(0, 3) == Catch::Approx(6.0 * 32.0 * 3.0 * 16.0).epsilon(1e-15));
}

TEST_CASE("SolverConfig validation") {
    SolverConfig good;
    CHECK_NOTHROW(good.validate());

    SolverConfig c = good;
    c.eps_star = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = good;
    c.s_max = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = good;
    c.s_bar_0 = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = good;
    c.s_bar_0 = 5;
    c.s_max = 4;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = good;
    c.f = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = good;
    c.eps_star = 1e-17;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = good;
    c.max_outer = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("classical CG solves A=I in one iteration") {
    SparseMatrixCsr a = identity_csr(5);
    std::vector<double> b = {1, 2, 3, 4, 5}, x1(5, 0.0);
    SolveResult res = classical_cg(a, b, x1, 1e-12, 100);
    CHECK(res.status == SolveStatus::Converged);
    CHECK(res.trace.iterations() == 1);
    CHECK(res.x == b);
}

TEST_CASE("classical CG rejects indefinite matrices") {
    std::vector<double> b = {1, 1}, x1(2, 0.0);
    CHECK_THROWS_AS(classical_cg(indefinite_2x2(), b, x1, 1e-10, 10), NotPositiveDefinite);
}

TEST_CASE("classical CG rejects mismatched vector lengths") {
    SparseMatrixCsr a = identity_csr(3);
    std::vector<double> b = {1, 1}, x1(3, 0.0);
    CHECK_THROWS_AS(classical_cg(a, b, x1, 1e-10, 10), DimensionError);
}

TEST_CASE("classical CG converges on random SPD systems and counts one sync per iteration") {
    std::mt19937_64 rng(101);
    testsup::Dense ad = testsup::random_spd(30, 100.0, rng);
    SparseMatrixCsr a = testsup::dense_to_csr(ad, 30);
    auto b = make_rhs(30);
    std::vector<double> x1(30, 0.0);
    SolveResult res = classical_cg(a, b, x1, 1e-10, 1000);
    REQUIRE(res.status == SolveStatus::Converged);
    CHECK(res.trace.records.back().true_resid <= 1e-10);
    CHECK(res.trace.sync_count() == res.trace.iterations());
    CHECK(static_cast<long>(res.trace.records.size()) == res.trace.iterations());
}

TEST_CASE("classical CG flags stagnation at an unreachable tolerance") {
    std::mt19937_64 rng(103);
    testsup::Dense ad = testsup::random_spd(10, 1e8, rng);
    SparseMatrixCsr a = testsup::dense_to_csr(ad, 10);
    auto b = make_rhs(10);
    std::vector<double> x1(10, 0.0);
    SolveResult res = classical_cg(a, b, x1, 1e-30, 5000);
    CHECK(res.status == SolveStatus::Stagnation);
}

TEST_CASE("sstep_cg is the single-element variable method") {
    const auto& prob = gr_problem();
    SolveResult fixed = sstep_cg(prob.a, prob.b, prob.x1, 3, 1e-6, 200);
    SolveResult var = variable_sstep_cg(prob.a, prob.b, prob.x1, {3, 3, 3}, 1e-6, 200);
    REQUIRE(fixed.status == SolveStatus::Converged);
    REQUIRE(var.status == SolveStatus::Converged);
    CHECK(fixed.x == var.x);
    REQUIRE(fixed.trace.records.size() == var.trace.records.size());
    for (size_t i = 0; i < fixed.trace.records.size(); ++i) {
        CHECK(fixed.trace.records[i].true_resid == var.trace.records[i].true_resid);
        CHECK(fixed.trace.records[i].upd_resid == var.trace.records[i].upd_resid);
    }
}

TEST_CASE("variable s-step CG validates its inputs") {
    const auto& prob = gr_problem();
    CHECK_THROWS_AS(variable_sstep_cg(prob.a, prob.b, prob.x1, {}, 1e-6, 10), ConfigError);
    CHECK_THROWS_AS(variable_sstep_cg(prob.a, prob.b, prob.x1, {2, 0}, 1e-6, 10), ConfigError);
    std::vector<double> short_b = {1.0};
    CHECK_THROWS_AS(variable_sstep_cg(prob.a, short_b, prob.x1, {1}, 1e-6, 10), DimensionError);
}

TEST_CASE("a variable sequence repeats its final value once exhausted") {
    const auto& prob = gr_problem();
    SolveResult res = variable_sstep_cg(prob.a, prob.b, prob.x1, {2, 3}, 1e-6, 200);
    REQUIRE(res.status == SolveStatus::Converged);
    REQUIRE(res.trace.blocks.size() >= 3);
    CHECK(res.trace.blocks[0].s_bar == 2);
    for (size_t k = 1; k < res.trace.blocks.size(); ++k) CHECK(res.trace.blocks[k].s_bar == 3);
}

TEST_CASE("s=1 s-step CG tracks classical CG residuals") {
    std::mt19937_64 rng(107);
    testsup::Dense ad = testsup::random_spd(40, 100.0, rng);
    SparseMatrixCsr a = testsup::dense_to_csr(ad, 40);
    auto b = make_rhs(40);
    std::vector<double> x1(40, 0.0);

    SolveResult cl = classical_cg(a, b, x1, 1e-300, 20);
    SolveResult st = sstep_cg(a, b, x1, 1, 1e-300, 20);
    SolveResult ones = variable_sstep_cg(a, b, x1, std::vector<int>(20, 1), 1e-300, 20);

    REQUIRE(cl.trace.records.size() == 20);
    REQUIRE(st.trace.records.size() == 20);
    REQUIRE(ones.trace.records.size() == 20);
    for (size_t i = 0; i < 20; ++i) {
        double ref = cl.trace.records[i].true_resid;
        CHECK(std::abs(st.trace.records[i].true_resid - ref) <= 1e-8 * ref);
        CHECK(std::abs(ones.trace.records[i].true_resid - ref) <= 1e-8 * ref);
    }
}

TEST_CASE("fixed s-step CG reproduces the relaxed-tolerance block counts") {
    const auto& prob = gr_problem();
    SolveResult res = sstep_cg(prob.a, prob.b, prob.x1, 4, 1e-6, 200);
    REQUIRE(res.status == SolveStatus::Converged);
    int outers = res.trace.outer_loops();
    CHECK(outers >= 7);
    CHECK(outers <= 11);
    CHECK(res.trace.sync_count() == outers);
}

TEST_CASE("classical CG reproduces the tight-tolerance iteration count") {
    const auto& prob = gr_problem();
    SolveResult res = classical_cg(prob.a, prob.b, prob.x1, 3.4e-14, 5000);
    REQUIRE(res.status == SolveStatus::Converged);
    CHECK(res.trace.iterations() >= 49);
    CHECK(res.trace.iterations() <= 55);
}

TEST_CASE("fixed s=8 cannot reach the tight tolerance") {
    const auto& prob = gr_problem();
    SolveResult res = sstep_cg(prob.a, prob.b, prob.x1, 8, 3.4e-14, 400);
    CHECK(res.status != SolveStatus::Converged);
}

TEST_CASE("choose_s_tilde keeps the full block when the basis is well conditioned") {
    GramMatrix g = diag_gram({1, 1, 1, 1, 1, 1, 1}, 3);
    SolverConfig cfg;
    cfg.eps_star = 1e-6;
    cfg.s_max = 3;
    SelectResult sel = choose_s_tilde(g, 1.0, cfg, 0);
    CHECK(sel.s_tilde == 3);
    CHECK(sel.kappa == 1.0);
}

TEST_CASE("choose_s_tilde picks the largest candidate under the bound") {
    GramMatrix g = diag_gram({1, 1, 100, 10000, 1, 1, 1}, 3);
    SolverConfig cfg;
    cfg.eps_star = 0.05;
    cfg.unit_roundoff = 1e-3;
    cfg.s_max = 3;
    // bound = 0.05/(1e-3 * 1) = 50; cond estimates are 1, 10, 100
    SelectResult sel = choose_s_tilde(g, 1.0, cfg, 0);
    CHECK(sel.s_tilde == 2);
    CHECK(sel.kappa == Catch::Approx(10.0).epsilon(1e-12));
    CHECK(sel.bound == Catch::Approx(50.0).epsilon(1e-12));
}

TEST_CASE("choose_s_tilde falls back to one when the bound is below one") {
    GramMatrix g = diag_gram({1, 1, 1, 1, 1, 1, 1}, 3);
    SolverConfig cfg;
    cfg.eps_star = 1e-9;
    cfg.unit_roundoff = 1e-3;
    cfg.s_max = 3;
    SelectResult sel = choose_s_tilde(g, 1.0, cfg, 0);
    CHECK(sel.s_tilde == 1);
    CHECK(sel.bound < 1.0);
}

TEST_CASE("inner_check edge cases") {
    SolverConfig cfg;
    cfg.eps_star = 1e-6;
    CHECK(inner_check(1.0, cfg, 0, 1, 0.0));
    CHECK(inner_check(1.0, cfg, 0, 1, 1.0));
    CHECK_FALSE(inner_check(1.0, cfg, 0, 1, -1.0));
    CHECK_FALSE(inner_check(std::numeric_limits<double>::infinity(), cfg, 0, 1, 1.0));

    // rhs = 1e-6/(1e9 * 2^-53) ~ 9, so gamma=10 fails and gamma=8 passes
    SolverConfig tight = cfg;
    tight.c_rule = CRule::constant(1e9);
    CHECK_FALSE(inner_check(10.0, tight, 0, 1, 1.0));
    CHECK(inner_check(8.0, tight, 0, 1, 1.0));
}

TEST_CASE("adaptive CG solves A=I in a single outer loop") {
    SparseMatrixCsr a = identity_csr(6);
    std::vector<double> b = {1, -1, 2, -2, 3, -3}, x1(6, 0.0);
    SolverConfig cfg;
    cfg.eps_star = 1e-12;
    cfg.s_max = 4;
    cfg.s_bar_0 = 4;
    cfg.f = 4;
    SolveResult res = adaptive_sstep_cg(a, b, x1, cfg);
    CHECK(res.status == SolveStatus::Converged);
    CHECK(res.trace.outer_loops() == 1);
    for (int i = 0; i < 6; ++i) CHECK(res.x[i] == Catch::Approx(b[i]).margin(1e-12));
}

TEST_CASE("adaptive CG with s_max=1 matches fixed s=1 exactly") {
    std::mt19937_64 rng(109);
    testsup::Dense ad = testsup::random_spd(25, 1000.0, rng);
    SparseMatrixCsr a = testsup::dense_to_csr(ad, 25);
    auto b = make_rhs(25);
    std::vector<double> x1(25, 0.0);

    SolverConfig cfg;
    cfg.eps_star = 1e-10;
    cfg.s_max = 1;
    cfg.s_bar_0 = 1;
    cfg.f = 1;
    cfg.max_outer = 500;
    SolveResult ad_res = adaptive_sstep_cg(a, b, x1, cfg);
    SolveResult fx_res = sstep_cg(a, b, x1, 1, 1e-10, 500);

    REQUIRE(ad_res.status == SolveStatus::Converged);
    REQUIRE(fx_res.status == SolveStatus::Converged);
    CHECK(ad_res.x == fx_res.x);
    REQUIRE(ad_res.trace.records.size() == fx_res.trace.records.size());
    for (size_t i = 0; i < ad_res.trace.records.size(); ++i)
        CHECK(ad_res.trace.records[i].true_resid == fx_res.trace.records[i].true_resid);
}

TEST_CASE("adaptive CG respects the growth cap and screening bound") {
    const auto& prob = gr_problem();
    SolverConfig cfg;
    cfg.eps_star = 1e-6;
    cfg.s_max = 6;
    cfg.s_bar_0 = 2;
    cfg.f = 1;
    cfg.unit_roundoff = 0x1p-52;
    SolveResult res = adaptive_sstep_cg(prob.a, prob.b, prob.x1, cfg);
    REQUIRE(res.status == SolveStatus::Converged);

    const auto& blocks = res.trace.blocks;
    REQUIRE(!blocks.empty());
    CHECK(blocks[0].s_bar == 2);
    for (size_t k = 0; k < blocks.size(); ++k) {
        const auto& blk = blocks[k];
        CHECK(blk.s_tilde <= blk.s_bar);
        CHECK(blk.s_exec <= blk.s_tilde);
        CHECK(blk.s_exec >= 1);
        if (k > 0) {
            int cap = std::min(std::max(blocks[k - 1].s_exec, 1) + cfg.f, cfg.s_max);
            CHECK(blk.s_bar == cap);
        }
        if (blk.s_tilde > 1) CHECK(blk.gamma <= blk.bound);
    }
    CHECK(res.trace.sync_count() == res.trace.outer_loops());
}

TEST_CASE("adaptive CG in-loop check holds for every non-final inner iteration") {
    const auto& prob = gr_problem();
    SolverConfig cfg;
    cfg.eps_star = 3.4e-14;
    cfg.s_max = 8;
    cfg.s_bar_0 = 8;
    cfg.f = 8;
    cfg.unit_roundoff = 0x1p-52;
    SolveResult res = adaptive_sstep_cg(prob.a, prob.b, prob.x1, cfg);
    REQUIRE(res.status == SolveStatus::Converged);

    const auto& recs = res.trace.records;
    std::map<int, long> last_of_block;
    for (size_t i = 0; i < recs.size(); ++i) last_of_block[recs[i].outer_k] = static_cast<long>(i);
    for (size_t i = 0; i < recs.size(); ++i) {
        bool is_last = last_of_block[recs[i].outer_k] == static_cast<long>(i);
        if (!is_last) {
            CHECK(recs[i].check_evaluated);
            CHECK(recs[i].check_ok);
        }
    }
}

TEST_CASE("adaptive CG reports breakdown on an indefinite matrix after one retry") {
    std::vector<double> b = {1, 1}, x1(2, 0.0);
    SolverConfig cfg;
    cfg.eps_star = 1e-10;
    cfg.s_max = 2;
    cfg.s_bar_0 = 2;
    cfg.f = 2;
    SolveResult res = adaptive_sstep_cg(indefinite_2x2(), b, x1, cfg);
    CHECK(res.status == SolveStatus::BreakdownIndefinite);
    REQUIRE(res.trace.blocks.size() == 1);
    CHECK(res.trace.blocks[0].retried);
}

TEST_CASE("adaptive CG keeps the residual gap small at termination") {
    const auto& prob = gr_problem();
    for (double eps : {1e-6, 3.4e-14}) {
        SolverConfig cfg;
        cfg.eps_star = eps;
        cfg.s_max = 10;
        cfg.s_bar_0 = 10;
        cfg.f = 10;
        cfg.unit_roundoff = 0x1p-52;
        SolveResult res = adaptive_sstep_cg(prob.a, prob.b, prob.x1, cfg);
        REQUIRE(res.status == SolveStatus::Converged);
        CHECK(res.trace.blocks.back().exit_true_resid <= eps);
        CHECK(res.trace.blocks.back().residual_gap <= 10.0 * eps);
    }
}

TEST_CASE("adaptive CG stops at max_outer without converging") {
    const auto& prob = gr_problem();
    SolverConfig cfg;
    cfg.eps_star = 3.4e-14;
    cfg.s_max = 10;
    cfg.s_bar_0 = 10;
    cfg.f = 10;
    cfg.unit_roundoff = 0x1p-52;
    cfg.max_outer = 2;
    SolveResult res = adaptive_sstep_cg(prob.a, prob.b, prob.x1, cfg);
    CHECK(res.status == SolveStatus::NotConverged);
    CHECK(res.trace.outer_loops() == 2);
}

TEST_CASE("adaptive CG converges on the tight-tolerance grid benchmark") {
    const auto& prob = gr_problem();
    SolverConfig cfg;
    cfg.eps_star = 3.4e-14;
    cfg.s_max = 10;
    cfg.s_bar_0 = 10;
    cfg.f = 10;
    cfg.unit_roundoff = 0x1p-52;
    SolveResult res = adaptive_sstep_cg(prob.a, prob.b, prob.x1, cfg);
    REQUIRE(res.status == SolveStatus::Converged);
    CHECK(res.trace.outer_loops() >= 12);
    CHECK(res.trace.outer_loops() <= 18);

    // early screening steps are forced small by the conditioning bound
    auto seq = res.trace.s_sequence();
    REQUIRE(seq.size() >= 5);
    CHECK(seq[0] == 1);
    CHECK(seq[1] == 1);
    CHECK(seq[2] == 2);

    long expected_wasted = 0;
    for (const auto& blk : res.trace.blocks) expected_wasted += 2L * (blk.s_bar - blk.s_exec);
    CHECK(res.trace.records.back().wasted_matvecs == expected_wasted);
}
