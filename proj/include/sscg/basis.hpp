#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sscg/dense.hpp"
#include "sscg/errors.hpp"
#include "sscg/sparse.hpp"

namespace sscg {

/// Three-term recurrence coefficients of the basis polynomials:
///   A*y_j = gamma_j*y_{j+1} + theta_j*y_j + sigma_{j-1}*y_{j-1}.
struct BasisSpec {
    enum class Family { Monomial };
    Family family = Family::Monomial;
    std::vector<double> theta;
    std::vector<double> gamma;
    std::vector<double> sigma;

    static BasisSpec monomial(int s) {
        BasisSpec spec;
        spec.theta.assign(s, 0.0);
        spec.gamma.assign(s, 1.0);
        spec.sigma.assign(s, 0.0);
        return spec;
    }
};

/// The n x (2s+1) basis [rho_0(A)p, ..., rho_s(A)p, rho_0(A)r, ..., rho_{s-1}(A)r],
/// stored as a vector of columns.
struct BasisMatrix {
    int n = 0;
    int s = 0;
    std::vector<std::vector<double>> columns;

    int num_cols() const { return 2 * s + 1; }
};

/// Change-of-basis matrix B satisfying A*Y_ = Y*B, where Y_ is Y with
/// columns s+1 and 2s+1 zeroed (1-based). Stored as (row, col, value)
/// triplets; nonzero columns hold at most three recurrence coefficients.
struct ChangeOfBasis {
    struct Triplet {
        int row;
        int col;
        double value;
    };
    int s = 0;
    std::vector<Triplet> entries;

    int order() const { return 2 * s + 1; }

    std::vector<double> apply(const std::vector<double>& v) const {
        if (static_cast<int>(v.size()) != order())
            throw DimensionError("ChangeOfBasis::apply: length mismatch");
        std::vector<double> w(order(), 0.0);
        for (const auto& t : entries) w[t.row] += t.value * v[t.col];
        return w;
    }

    std::vector<double> dense() const {
        std::vector<double> d(static_cast<size_t>(order()) * order(), 0.0);
        for (const auto& t : entries) d[static_cast<size_t>(t.row) * order() + t.col] += t.value;
        return d;
    }
};

/// Builds Y = [P block | R block] by repeated application of the recurrence.
/// Costs 2s-1 matrix products: s past p and s-1 past r.
inline BasisMatrix build_basis(const SparseMatrixCsr& a, const std::vector<double>& p,
                               const std::vector<double>& r, int s, const BasisSpec& spec) {
    if (s < 1) throw ConfigError("build_basis: s must be >= 1");
    if (static_cast<int>(p.size()) != a.n || static_cast<int>(r.size()) != a.n)
        throw DimensionError("build_basis: vector length does not match matrix dimension");
    BasisMatrix y;
    y.n = a.n;
    y.s = s;
    y.columns.reserve(2 * s + 1);

    auto extend = [&](const std::vector<double>& start, int steps) {
        size_t base = y.columns.size();
        y.columns.push_back(start);
        for (int j = 0; j < steps; ++j) {
            std::vector<double> next = spmv(a, y.columns[base + j]);
            double th = spec.theta[j];
            double sg = (j > 0) ? spec.sigma[j - 1] : 0.0;
            double ga = spec.gamma[j];
            if (th != 0.0 || sg != 0.0 || ga != 1.0) {
                const std::vector<double>& cur = y.columns[base + j];
                for (int i = 0; i < a.n; ++i) {
                    double v = next[i] - th * cur[i];
                    if (sg != 0.0) v -= sg * y.columns[base + j - 1][i];
                    next[i] = v / ga;
                }
            }
            y.columns.push_back(std::move(next));
        }
    };
    extend(p, s);
    extend(r, s - 1);
    return y;
}

/// Assembles B from the recurrence coefficients. Block boundaries: the P
/// block occupies columns 1..s+1 and the R block columns s+2..2s+1 (1-based);
/// the last column of each block is zero.
inline ChangeOfBasis assemble_b(const BasisSpec& spec, int s) {
    if (s < 1) throw ConfigError("assemble_b: s must be >= 1");
    ChangeOfBasis b;
    b.s = s;
    auto block = [&](int base, int cols) {
        for (int j = 0; j < cols; ++j) {
            int c = base + j;
            if (j > 0 && spec.sigma[j - 1] != 0.0)
                b.entries.push_back({c - 1, c, spec.sigma[j - 1]});
            if (spec.theta[j] != 0.0) b.entries.push_back({c, c, spec.theta[j]});
            b.entries.push_back({c + 1, c, spec.gamma[j]});
        }
    };
    block(0, s);
    block(s + 1, s - 1);
    return b;
}

/// G = Y^T Y with a fixed summation order per entry. One synchronization
/// event in the harness accounting.
inline GramMatrix compute_gram(const BasisMatrix& y) {
    int m = y.num_cols();
    std::vector<double> g(static_cast<size_t>(m) * m);
    for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) {
            double acc = detail::compensated_dot(y.columns[i], y.columns[j]);
            g[static_cast<size_t>(i) * m + j] = acc;
            g[static_cast<size_t>(j) * m + i] = acc;
        }
    return GramMatrix(m, y.s, std::move(g));
}

namespace detail {

inline std::vector<double> basis_times(const BasisMatrix& y, const std::vector<double>& c) {
    if (static_cast<int>(c.size()) != y.num_cols())
        throw DimensionError("recover_iterates: coordinate length mismatch");
    std::vector<double> out(y.n);
    for (int i = 0; i < y.n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < y.num_cols(); ++j) acc += y.columns[j][i] * c[j];
        out[i] = acc;
    }
    return out;
}

}  // namespace detail

struct RecoveredIterates {
    std::vector<double> x;
    std::vector<double> r;
    std::vector<double> p;
};

/// x = Y*xp + x_base, r = Y*rp, p = Y*pp.
inline RecoveredIterates recover_iterates(const BasisMatrix& y, const std::vector<double>& xp,
                                          const std::vector<double>& rp,
                                          const std::vector<double>& pp,
                                          const std::vector<double>& x_base) {
    if (static_cast<int>(x_base.size()) != y.n)
        throw DimensionError("recover_iterates: x_base length mismatch");
    RecoveredIterates out;
    out.x = detail::basis_times(y, xp);
    for (int i = 0; i < y.n; ++i) out.x[i] += x_base[i];
    out.r = detail::basis_times(y, rp);
    out.p = detail::basis_times(y, pp);
    return out;
}

}  // namespace sscg
