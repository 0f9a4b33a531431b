#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sscg/basis.hpp"
#include "sscg/dense.hpp"
#include "sscg/errors.hpp"
#include "sscg/sparse.hpp"

namespace sscg {

enum class SolveStatus {
    Converged,
    NotConverged,
    BreakdownIndefinite,
    Diverged,
    Stagnation,
};

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Converged: return "converged";
        case SolveStatus::NotConverged: return "not-converged";
        case SolveStatus::BreakdownIndefinite: return "breakdown-indefinite";
        case SolveStatus::Diverged: return "diverged";
        case SolveStatus::Stagnation: return "stagnation";
    }
    return "unknown";
}

/// The c_{k,j} factor of the selection bound. Three rules: a constant
/// (default 1), sqrt(kappa(A)), and the full bound 6*N_k*j*kappa(A) with
/// N_k = 7 + 2*N_A + 14*tau_k and tau_k = ||B||/||A|| (||B|| = 1 for the
/// monomial family).
struct CRule {
    enum class Kind { Constant, SqrtKappaA, FullBound };
    Kind kind = Kind::Constant;
    double value = 1.0;
    MatrixStats stats;
    int n_a = 0;

    static CRule one() { return CRule{}; }

    static CRule constant(double v) {
        if (v <= 0.0) throw ConfigError("CRule: constant must be positive");
        CRule c;
        c.value = v;
        return c;
    }

    static CRule sqrt_kappa(const MatrixStats& st) {
        CRule c;
        c.kind = Kind::SqrtKappaA;
        c.stats = st;
        return c;
    }

    static CRule full_bound(const MatrixStats& st, int n_a) {
        CRule c;
        c.kind = Kind::FullBound;
        c.stats = st;
        c.n_a = n_a;
        return c;
    }

    double eval(int /*k*/, int j) const {
        switch (kind) {
            case Kind::Constant: return value;
            case Kind::SqrtKappaA: return std::sqrt(stats.kappa_a);
            case Kind::FullBound: {
                double tau = 1.0 / stats.norm_a;
                double nk = 7.0 + 2.0 * n_a + 14.0 * tau;
                return 6.0 * nk * j * stats.kappa_a;
            }
        }
        return value;
    }
};

struct SolverConfig {
    double eps_star = 1e-6;
    int s_max = 10;
    int s_bar_0 = 1;
    int f = 1;
    CRule c_rule;
    double unit_roundoff = 0x1p-53;
    int max_outer = 1000;
    long max_total_iters = 100000;
    BasisSpec basis;
    bool skip_inner_check = false;

    void validate() const {
        if (eps_star <= 0.0) throw ConfigError("SolverConfig: eps_star must be positive");
        if (s_max < 1) throw ConfigError("SolverConfig: s_max must be >= 1");
        if (s_bar_0 < 1 || s_bar_0 > s_max)
            throw ConfigError("SolverConfig: s_bar_0 must be in [1, s_max]");
        if (f < 1) throw ConfigError("SolverConfig: f must be >= 1");
        if (eps_star <= unit_roundoff)
            throw ConfigError("SolverConfig: eps_star must exceed unit_roundoff");
        if (max_outer < 1) throw ConfigError("SolverConfig: max_outer must be >= 1");
        if (max_total_iters < 1) throw ConfigError("SolverConfig: max_total_iters must be >= 1");
        if (c_rule.kind == CRule::Kind::Constant && c_rule.value <= 0.0)
            throw ConfigError("SolverConfig: c_rule constant must be positive");
    }
};

struct TraceRecord {
    long iter = 0;
    int outer_k = 0;
    int s_k = 0;
    int s_bar = 0;
    int s_tilde = 0;
    double true_resid = 0.0;
    double upd_resid = 0.0;
    double kappa_y = 1.0;
    long syncs = 0;
    long wasted_matvecs = 0;
    bool check_evaluated = false;
    bool check_ok = true;
};

/// Per-outer-loop bookkeeping kept alongside the row records so that the
/// screening and check postconditions stay assertable after the run.
struct BlockInfo {
    int k = 0;
    int s_bar = 0;
    int s_tilde = 0;
    int s_exec = 0;
    double entry_resid = 0.0;
    double bound = std::numeric_limits<double>::infinity();
    double gamma = 1.0;
    bool retried = false;
    double exit_true_resid = 0.0;
    double residual_gap = 0.0;
};

struct ConvergenceTrace {
    std::vector<TraceRecord> records;
    std::vector<BlockInfo> blocks;

    long iterations() const { return records.empty() ? 0 : records.back().iter; }
    long sync_count() const { return records.empty() ? 0 : records.back().syncs; }
    int outer_loops() const { return static_cast<int>(blocks.size()); }

    std::vector<int> s_sequence() const {
        std::vector<int> seq;
        seq.reserve(blocks.size());
        for (const auto& blk : blocks) seq.push_back(blk.s_exec);
        return seq;
    }
};

struct SolveResult {
    std::vector<double> x;
    ConvergenceTrace trace;
    SolveStatus status = SolveStatus::NotConverged;
};

namespace detail {

inline double dot(const std::vector<double>& u, const std::vector<double>& v) {
    return compensated_dot(u, v);
}

inline double nrm2(const std::vector<double>& v) { return std::sqrt(dot(v, v)); }

inline std::vector<double> residual(const SparseMatrixCsr& a, const std::vector<double>& b,
                                    const std::vector<double>& x) {
    std::vector<double> r = spmv(a, x);
    for (size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    return r;
}

inline BasisMatrix truncate_basis(const BasisMatrix& y, int s_tilde) {
    if (s_tilde == y.s) return y;
    BasisMatrix t;
    t.n = y.n;
    t.s = s_tilde;
    t.columns.reserve(2 * s_tilde + 1);
    for (int c = 0; c <= s_tilde; ++c) t.columns.push_back(y.columns[c]);
    for (int c = 0; c < s_tilde; ++c) t.columns.push_back(y.columns[y.s + 1 + c]);
    return t;
}

}  // namespace detail

/// Screening rule: the largest i in [1, s_bar] whose sub-basis condition
/// estimate sqrt(kappa(G_hat_i)) stays below eps_star/(c(k,s_max)*u*r_norm),
/// searched downward. Falls back to 1 when the bound is below 1 or nothing
/// passes. kappa is the estimate for the returned i (gamma of the run).
struct SelectResult {
    int s_tilde = 1;
    double kappa = 1.0;
    double bound = 0.0;
};

inline SelectResult choose_s_tilde(const GramMatrix& g, double r_norm, const SolverConfig& cfg,
                                   int k) {
    int sbar = g.s;
    double c = cfg.c_rule.eval(k, cfg.s_max);
    double bound = cfg.eps_star / (c * cfg.unit_roundoff * r_norm);
    if (bound >= 1.0) {
        for (int i = sbar; i >= 1; --i) {
            double kap = cond_from_gram(extract_sub_gram(g, i));
            if (kap <= bound) return {i, kap, bound};
        }
    }
    return {1, cond_from_gram(extract_sub_gram(g, 1)), bound};
}

/// The in-loop relaxation check: true iff
/// gamma <= eps_star / (c(k,j) * unit_roundoff * r_coord_norm).
/// A zero residual norm passes (the bound is infinite); a negative value
/// signals a negative quadratic form r'^T G r' and fails the check.
inline bool inner_check(double gamma, const SolverConfig& cfg, int k, int j,
                        double r_coord_norm) {
    if (!(r_coord_norm >= 0.0)) return false;
    if (r_coord_norm == 0.0) return true;
    double rhs = cfg.eps_star / (cfg.c_rule.eval(k, j) * cfg.unit_roundoff * r_coord_norm);
    return gamma <= rhs;
}

/// Classical CG. Convergence is tested on the explicitly computed residual
/// b - A*x each iteration; the recurrence residual is logged as upd_resid.
inline SolveResult classical_cg(const SparseMatrixCsr& a, const std::vector<double>& b,
                                const std::vector<double>& x1, double eps_star,
                                long max_iters) {
    if (static_cast<int>(b.size()) != a.n || static_cast<int>(x1.size()) != a.n)
        throw DimensionError("classical_cg: vector length mismatch");
    SolveResult res;
    std::vector<double> x = x1;
    std::vector<double> r = detail::residual(a, b, x);
    std::vector<double> p = r;
    double rr = detail::dot(r, r);
    const double b_norm = detail::nrm2(b);
    double best = std::numeric_limits<double>::infinity();
    long since_best = 0;

    for (long i = 1; i <= max_iters; ++i) {
        std::vector<double> ap = spmv(a, p);
        double pap = detail::dot(p, ap);
        if (!(pap > 0.0))
            throw NotPositiveDefinite("classical_cg: p'Ap <= 0 at iteration " +
                                      std::to_string(i));
        double alpha = rr / pap;
        for (int q = 0; q < a.n; ++q) x[q] += alpha * p[q];
        for (int q = 0; q < a.n; ++q) r[q] -= alpha * ap[q];
        double rr_new = detail::dot(r, r);
        double tr = detail::nrm2(detail::residual(a, b, x));

        TraceRecord rec;
        rec.iter = i;
        rec.outer_k = static_cast<int>(i - 1);
        rec.s_k = 1;
        rec.s_bar = 1;
        rec.s_tilde = 1;
        rec.true_resid = tr;
        rec.upd_resid = std::sqrt(std::max(rr_new, 0.0));
        rec.kappa_y = 1.0;
        rec.syncs = i;
        rec.wasted_matvecs = 0;
        res.trace.records.push_back(rec);

        if (tr <= eps_star) {
            res.status = SolveStatus::Converged;
            break;
        }
        if (tr > 1e3 * b_norm) {
            res.status = SolveStatus::Diverged;
            break;
        }
        if (tr < best) {
            best = tr;
            since_best = 0;
        } else if (++since_best >= 5L * a.n) {
            res.status = SolveStatus::Stagnation;
            break;
        }
        if (!(rr > 0.0)) {
            res.status = SolveStatus::BreakdownIndefinite;
            break;
        }
        double beta = rr_new / rr;
        for (int q = 0; q < a.n; ++q) p[q] = r[q] + beta * p[q];
        rr = rr_new;
    }
    res.x = std::move(x);
    return res;
}

/// Variable s-step CG: block k runs s_sequence[k] coordinate iterations
/// (the sequence cycles its final value). Convergence is tested on the true
/// residual at outer-loop boundaries; one synchronization per outer loop.
inline SolveResult variable_sstep_cg(const SparseMatrixCsr& a, const std::vector<double>& b,
                                     const std::vector<double>& x1,
                                     const std::vector<int>& s_sequence, double eps_star,
                                     int max_outer) {
    if (s_sequence.empty()) throw ConfigError("variable_sstep_cg: empty s sequence");
    for (int s : s_sequence)
        if (s < 1) throw ConfigError("variable_sstep_cg: s values must be >= 1");
    if (static_cast<int>(b.size()) != a.n || static_cast<int>(x1.size()) != a.n)
        throw DimensionError("variable_sstep_cg: vector length mismatch");

    SolveResult res;
    std::vector<double> x = x1;
    std::vector<double> r = detail::residual(a, b, x);
    std::vector<double> p = r;
    const double b_norm = detail::nrm2(b);
    long m = 0;

    for (int k = 0; k < max_outer; ++k) {
        double entry_norm = detail::nrm2(r);
        if (entry_norm == 0.0) {
            res.status = SolveStatus::Converged;
            break;
        }
        int s = s_sequence[std::min<size_t>(k, s_sequence.size() - 1)];
        BasisSpec spec = BasisSpec::monomial(s);
        BasisMatrix y = build_basis(a, p, r, s, spec);
        GramMatrix g = compute_gram(y);
        ChangeOfBasis bmat = assemble_b(spec, s);
        double kappa = cond_from_gram(g);

        int order = 2 * s + 1;
        std::vector<double> pp(order, 0.0), rp(order, 0.0), xp(order, 0.0);
        pp[0] = 1.0;
        rp[s + 1] = 1.0;
        double rq = g.at(s + 1, s + 1);
        int s_exec = 0;
        bool broke_down = false;
        std::vector<TraceRecord> rows;

        for (int j = 1; j <= s; ++j) {
            std::vector<double> w = bmat.apply(pp);
            double den = g_inner(g, pp, w);
            if (!(den > 0.0)) {
                broke_down = true;
                break;
            }
            double alpha = rq / den;
            for (int q = 0; q < order; ++q) xp[q] += alpha * pp[q];
            for (int q = 0; q < order; ++q) rp[q] -= alpha * w[q];
            double rq_new = g_inner(g, rp, rp);
            s_exec = j;

            std::vector<double> x_meas = detail::basis_times(y, xp);
            for (int q = 0; q < a.n; ++q) x_meas[q] += x[q];
            TraceRecord rec;
            rec.iter = m + j;
            rec.outer_k = k;
            rec.s_bar = s;
            rec.s_tilde = s;
            rec.true_resid = detail::nrm2(detail::residual(a, b, x_meas));
            rec.upd_resid = std::sqrt(std::max(rq_new, 0.0));
            rec.kappa_y = kappa;
            rec.syncs = k + 1;
            rows.push_back(rec);

            if (rq_new == 0.0) break;
            if (rq_new < 0.0) {
                broke_down = true;
                break;
            }
            double beta = rq_new / rq;
            for (int q = 0; q < order; ++q) pp[q] = rp[q] + beta * pp[q];
            rq = rq_new;
        }

        RecoveredIterates rec = recover_iterates(y, xp, rp, pp, x);
        x = std::move(rec.x);
        r = std::move(rec.r);
        p = std::move(rec.p);
        m += s_exec;

        std::vector<double> tr_vec = detail::residual(a, b, x);
        double tr = detail::nrm2(tr_vec);
        for (int q = 0; q < a.n; ++q) tr_vec[q] -= r[q];
        double gap = detail::nrm2(tr_vec);

        for (auto& row : rows) row.s_k = s_exec;
        res.trace.records.insert(res.trace.records.end(), rows.begin(), rows.end());

        BlockInfo blk;
        blk.k = k;
        blk.s_bar = s;
        blk.s_tilde = s;
        blk.s_exec = s_exec;
        blk.entry_resid = entry_norm;
        blk.gamma = kappa;
        blk.exit_true_resid = tr;
        blk.residual_gap = gap;
        res.trace.blocks.push_back(blk);

        if (broke_down) {
            res.status = SolveStatus::BreakdownIndefinite;
            break;
        }
        if (tr <= eps_star) {
            res.status = SolveStatus::Converged;
            break;
        }
        if (tr > 1e3 * b_norm) {
            res.status = SolveStatus::Diverged;
            break;
        }
    }
    res.x = std::move(x);
    return res;
}

/// Fixed s-step CG: the s-step method with a constant block size. Shares the
/// variable-s code path with a single-element sequence.
inline SolveResult sstep_cg(const SparseMatrixCsr& a, const std::vector<double>& b,
                            const std::vector<double>& x1, int s, double eps_star,
                            int max_outer) {
    return variable_sstep_cg(a, b, x1, std::vector<int>{s}, eps_star, max_outer);
}

/// Adaptive s-step CG: each outer loop builds a basis of s_bar_k steps
/// (growing from the previous executed size by at most f, capped at s_max),
/// screens it down to s_tilde_k via choose_s_tilde, and runs inner
/// iterations that break early when inner_check fails. Breakdown inside a
/// block is retried once with the block restarted at s=1.
inline SolveResult adaptive_sstep_cg(const SparseMatrixCsr& a, const std::vector<double>& b,
                                     const std::vector<double>& x1, const SolverConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(b.size()) != a.n || static_cast<int>(x1.size()) != a.n)
        throw DimensionError("adaptive_sstep_cg: vector length mismatch");

    SolveResult res;
    std::vector<double> x = x1;
    std::vector<double> r = detail::residual(a, b, x);
    std::vector<double> p = r;
    const double b_norm = detail::nrm2(b);
    long m = 0;
    long wasted = 0;
    int s_prev = 0;

    for (int k = 0; k < cfg.max_outer; ++k) {
        double entry_norm = detail::nrm2(r);
        if (entry_norm == 0.0) {
            res.status = SolveStatus::Converged;
            break;
        }
        int s_bar = (k == 0) ? cfg.s_bar_0 : std::min(s_prev + cfg.f, cfg.s_max);

        struct Attempt {
            bool broke_down = false;
            int s_exec = 0;
            SelectResult sel;
            BasisMatrix y;
            std::vector<double> xp, rp, pp;
            std::vector<TraceRecord> rows;
        };

        auto run_block = [&](int s_build, bool forced_s1) {
            Attempt at;
            BasisSpec spec = BasisSpec::monomial(s_build);
            BasisMatrix y_full = build_basis(a, p, r, s_build, spec);
            GramMatrix g_full = compute_gram(y_full);
            if (forced_s1) {
                at.sel.s_tilde = 1;
                at.sel.kappa = cond_from_gram(g_full);
                double c = cfg.c_rule.eval(k, cfg.s_max);
                at.sel.bound = cfg.eps_star / (c * cfg.unit_roundoff * entry_norm);
            } else {
                at.sel = choose_s_tilde(g_full, entry_norm, cfg, k);
            }
            int st = at.sel.s_tilde;
            at.y = detail::truncate_basis(y_full, st);
            GramMatrix g = (st == s_build) ? std::move(g_full) : extract_sub_gram(g_full, st);
            ChangeOfBasis bmat = assemble_b(BasisSpec::monomial(st), st);

            int order = 2 * st + 1;
            at.pp.assign(order, 0.0);
            at.rp.assign(order, 0.0);
            at.xp.assign(order, 0.0);
            at.pp[0] = 1.0;
            at.rp[st + 1] = 1.0;
            double rq = g.at(st + 1, st + 1);

            for (int j = 1; j <= st; ++j) {
                std::vector<double> w = bmat.apply(at.pp);
                double den = g_inner(g, at.pp, w);
                if (!(den > 0.0)) {
                    at.broke_down = true;
                    break;
                }
                double alpha = rq / den;
                for (int q = 0; q < order; ++q) at.xp[q] += alpha * at.pp[q];
                for (int q = 0; q < order; ++q) at.rp[q] -= alpha * w[q];
                double rq_new = g_inner(g, at.rp, at.rp);
                at.s_exec = j;

                std::vector<double> x_meas = detail::basis_times(at.y, at.xp);
                for (int q = 0; q < a.n; ++q) x_meas[q] += x[q];
                TraceRecord rec;
                rec.iter = m + j;
                rec.outer_k = k;
                rec.s_bar = s_bar;
                rec.s_tilde = st;
                rec.true_resid = detail::nrm2(detail::residual(a, b, x_meas));
                rec.upd_resid = std::sqrt(std::max(rq_new, 0.0));
                rec.kappa_y = at.sel.kappa;
                rec.syncs = k + 1;
                at.rows.push_back(rec);

                if (rq_new == 0.0) break;
                if (rq_new < 0.0 && (j == st || cfg.skip_inner_check)) {
                    at.broke_down = true;
                    break;
                }
                double beta = rq_new / rq;
                for (int q = 0; q < order; ++q) at.pp[q] = at.rp[q] + beta * at.pp[q];
                rq = rq_new;

                if (j < st && !cfg.skip_inner_check) {
                    double rn = (rq_new < 0.0) ? -1.0 : std::sqrt(rq_new);
                    bool ok = inner_check(at.sel.kappa, cfg, k, j, rn);
                    at.rows.back().check_evaluated = true;
                    at.rows.back().check_ok = ok;
                    if (!ok) break;
                }
            }
            return at;
        };

        Attempt at = run_block(s_bar, false);
        bool retried = false;
        if (at.broke_down) {
            retried = true;
            at = run_block(1, true);
        }

        bool fatal = at.broke_down;
        RecoveredIterates rec = recover_iterates(at.y, at.xp, at.rp, at.pp, x);
        x = std::move(rec.x);
        r = std::move(rec.r);
        p = std::move(rec.p);
        m += at.s_exec;
        s_prev = std::max(at.s_exec, 1);
        wasted += 2L * (s_bar - at.s_exec);

        std::vector<double> tr_vec = detail::residual(a, b, x);
        double tr = detail::nrm2(tr_vec);
        for (int q = 0; q < a.n; ++q) tr_vec[q] -= r[q];
        double gap = detail::nrm2(tr_vec);

        for (auto& row : at.rows) {
            row.s_k = at.s_exec;
            row.wasted_matvecs = wasted;
        }
        res.trace.records.insert(res.trace.records.end(), at.rows.begin(), at.rows.end());

        BlockInfo blk;
        blk.k = k;
        blk.s_bar = s_bar;
        blk.s_tilde = at.sel.s_tilde;
        blk.s_exec = at.s_exec;
        blk.entry_resid = entry_norm;
        blk.bound = at.sel.bound;
        blk.gamma = at.sel.kappa;
        blk.retried = retried;
        blk.exit_true_resid = tr;
        blk.residual_gap = gap;
        res.trace.blocks.push_back(blk);

        if (fatal) {
            res.status = SolveStatus::BreakdownIndefinite;
            break;
        }
        if (tr <= cfg.eps_star) {
            res.status = SolveStatus::Converged;
            break;
        }
        if (tr > 1e3 * b_norm) {
            res.status = SolveStatus::Diverged;
            break;
        }
        if (m >= cfg.max_total_iters) break;
    }
    res.x = std::move(x);
    return res;
}

}  // namespace sscg
