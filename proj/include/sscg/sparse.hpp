#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sscg/dense.hpp"
#include "sscg/errors.hpp"

namespace sscg {

/// Compressed sparse row storage of a symmetric matrix. Both triangles are
/// stored explicitly; column indices are strictly increasing within a row.
struct SparseMatrixCsr {
    int n = 0;
    std::vector<int> row_offsets;
    std::vector<int> col_indices;
    std::vector<double> values;
    int n_a = 0;

    int nnz() const { return static_cast<int>(values.size()); }
};

enum class StatsMethod { ExactDense, Lanczos, UserSupplied };

struct MatrixStats {
    double norm_a = 0.0;
    double kappa_a = 1.0;
    StatsMethod method = StatsMethod::UserSupplied;
};

namespace detail {

/// Compensated (Kahan) dot product. The attainable residual floors of the
/// solvers sit within a small factor of machine precision, so reductions keep
/// a correction term; the error stays O(u) independent of the vector length.
inline double compensated_dot(const double* u, const double* v, size_t n) {
    double sum = 0.0, carry = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double term = u[i] * v[i] - carry;
        double next = sum + term;
        carry = (next - sum) - term;
        sum = next;
    }
    return sum;
}

inline double compensated_dot(const std::vector<double>& u, const std::vector<double>& v) {
    return compensated_dot(u.data(), v.data(), u.size());
}

inline SparseMatrixCsr csr_from_triplets(int n,
                                         std::vector<std::pair<std::pair<int, int>, double>> trips) {
    std::sort(trips.begin(), trips.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    // sum duplicates
    std::vector<std::pair<std::pair<int, int>, double>> merged;
    merged.reserve(trips.size());
    for (const auto& t : trips) {
        if (!merged.empty() && merged.back().first == t.first)
            merged.back().second += t.second;
        else
            merged.push_back(t);
    }
    SparseMatrixCsr a;
    a.n = n;
    a.row_offsets.assign(n + 1, 0);
    a.col_indices.reserve(merged.size());
    a.values.reserve(merged.size());
    for (const auto& t : merged) a.row_offsets[t.first.first + 1]++;
    for (int r = 0; r < n; ++r) a.row_offsets[r + 1] += a.row_offsets[r];
    for (const auto& t : merged) {
        a.col_indices.push_back(t.first.second);
        a.values.push_back(t.second);
    }
    a.n_a = 0;
    for (int r = 0; r < n; ++r)
        a.n_a = std::max(a.n_a, a.row_offsets[r + 1] - a.row_offsets[r]);
    return a;
}

}  // namespace detail

/// Parses Matrix Market coordinate data (real or integer, symmetric or
/// general with symmetric content). Symmetric input is expanded to full
/// storage; duplicate entries are summed. General input is verified to be
/// numerically symmetric within 1e-12 relative and then symmetrized exactly.
inline SparseMatrixCsr parse_matrix_market(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty Matrix Market stream");
    std::istringstream banner(line);
    std::string tag, object, format, field, symmetry;
    banner >> tag >> object >> format >> field >> symmetry;
    if (tag != "%%MatrixMarket") throw ParseError("missing %%MatrixMarket banner");
    for (auto* s : {&object, &format, &field, &symmetry})
        std::transform(s->begin(), s->end(), s->begin(),
                       [](unsigned char c) { return std::tolower(c); });
    if (object != "matrix" || format != "coordinate")
        throw ParseError("unsupported Matrix Market kind: " + line);
    if (field != "real" && field != "integer")
        throw ParseError("unsupported field type: " + field);
    if (symmetry != "symmetric" && symmetry != "general")
        throw ParseError("unsupported symmetry: " + symmetry);

    long rows = -1, cols = -1, count = -1;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '%') continue;
        std::istringstream sz(line);
        if (!(sz >> rows >> cols >> count)) throw ParseError("malformed size line: " + line);
        break;
    }
    if (rows < 0) throw ParseError("missing size line");
    if (rows != cols) throw NotSymmetric("matrix is not square");
    int n = static_cast<int>(rows);

    std::vector<std::pair<std::pair<int, int>, double>> trips;
    trips.reserve(static_cast<size_t>(count) * (symmetry == "symmetric" ? 2 : 1));
    long seen = 0;
    while (seen < count && std::getline(in, line)) {
        if (line.empty() || line[0] == '%') continue;
        std::istringstream es(line);
        long i, j;
        double v;
        if (!(es >> i >> j >> v)) throw ParseError("malformed entry line: " + line);
        if (i < 1 || i > n || j < 1 || j > n)
            throw ParseError("entry index out of range: " + line);
        trips.push_back({{static_cast<int>(i - 1), static_cast<int>(j - 1)}, v});
        if (symmetry == "symmetric" && i != j)
            trips.push_back({{static_cast<int>(j - 1), static_cast<int>(i - 1)}, v});
        ++seen;
    }
    if (seen != count) throw ParseError("truncated entry list");

    SparseMatrixCsr a = detail::csr_from_triplets(n, std::move(trips));

    if (symmetry == "general") {
        double max_abs = 0.0;
        for (double v : a.values) max_abs = std::max(max_abs, std::abs(v));
        std::map<std::pair<int, int>, double> lookup;
        for (int r = 0; r < n; ++r)
            for (int k = a.row_offsets[r]; k < a.row_offsets[r + 1]; ++k)
                lookup[{r, a.col_indices[k]}] = a.values[k];
        std::vector<std::pair<std::pair<int, int>, double>> sym;
        sym.reserve(a.values.size());
        for (const auto& [ij, v] : lookup) {
            auto it = lookup.find({ij.second, ij.first});
            double w = (it == lookup.end()) ? 0.0 : it->second;
            if (std::abs(v - w) > 1e-12 * max_abs)
                throw NotSymmetric("general file content is not symmetric");
            double avg = 0.5 * (v + w);
            sym.push_back({ij, avg});
            if (it == lookup.end()) sym.push_back({{ij.second, ij.first}, avg});
        }
        a = detail::csr_from_triplets(n, std::move(sym));
    }
    return a;
}

inline SparseMatrixCsr parse_matrix_market(const std::string& text) {
    std::istringstream in(text);
    return parse_matrix_market(in);
}

/// y = A*v with a fixed per-row summation order (ascending column index).
inline std::vector<double> spmv(const SparseMatrixCsr& a, const std::vector<double>& v) {
    if (static_cast<int>(v.size()) != a.n)
        throw DimensionError("spmv: vector length does not match matrix dimension");
    std::vector<double> y(a.n);
    for (int r = 0; r < a.n; ++r) {
        double acc = 0.0;
        for (int k = a.row_offsets[r]; k < a.row_offsets[r + 1]; ++k)
            acc += a.values[k] * v[a.col_indices[k]];
        y[r] = acc;
    }
    return y;
}

/// Symmetric scaling A' = D^{-1/2} A D^{-1/2} with d_i the largest magnitude
/// entry of row i. Returns the scaled matrix and the d_i.
inline std::pair<SparseMatrixCsr, std::vector<double>> equilibrate(const SparseMatrixCsr& a) {
    std::vector<double> d(a.n, 0.0);
    for (int r = 0; r < a.n; ++r)
        for (int k = a.row_offsets[r]; k < a.row_offsets[r + 1]; ++k)
            d[r] = std::max(d[r], std::abs(a.values[k]));
    for (int r = 0; r < a.n; ++r)
        if (d[r] <= 0.0) throw SingularRow("equilibrate: row " + std::to_string(r) + " is zero");
    SparseMatrixCsr out = a;
    for (int r = 0; r < a.n; ++r)
        for (int k = a.row_offsets[r]; k < a.row_offsets[r + 1]; ++k)
            out.values[k] = a.values[k] / std::sqrt(d[r] * d[a.col_indices[k]]);
    return {std::move(out), std::move(d)};
}

namespace detail {

// Eigenvalue counting for a symmetric tridiagonal matrix: number of
// eigenvalues strictly below x, by the Sturm sequence of the LDL^T pivots.
inline int sturm_count(const std::vector<double>& alpha, const std::vector<double>& beta,
                       double x) {
    int count = 0;
    double d = 1.0;
    for (size_t i = 0; i < alpha.size(); ++i) {
        double b2 = (i == 0) ? 0.0 : beta[i - 1] * beta[i - 1];
        d = alpha[i] - x - b2 / d;
        if (d == 0.0) d = 1e-300;
        if (d < 0.0) ++count;
    }
    return count;
}

inline double tridiag_eigen_at(const std::vector<double>& alpha, const std::vector<double>& beta,
                               int index) {
    double lo = alpha[0], hi = alpha[0];
    for (size_t i = 0; i < alpha.size(); ++i) {
        double r = 0.0;
        if (i > 0) r += std::abs(beta[i - 1]);
        if (i + 1 < alpha.size()) r += std::abs(beta[i]);
        lo = std::min(lo, alpha[i] - r);
        hi = std::max(hi, alpha[i] + r);
    }
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (sturm_count(alpha, beta, mid) <= index)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Extreme eigenvalue estimates of an SPD matrix. ExactDense forms the dense
/// matrix (n capped at 5000) and runs the Jacobi eigensolver. Lanczos runs
/// `budget` steps (capped at n; 0 means n) with full reorthogonalization from
/// the normalized all-ones vector and reads extreme Ritz values off the
/// tridiagonal by bisection.
inline MatrixStats estimate_stats(const SparseMatrixCsr& a, StatsMethod mode, int budget = 0) {
    double lmin = 0.0, lmax = 0.0;
    if (mode == StatsMethod::ExactDense) {
        if (a.n > 5000) throw ConfigError("estimate_stats: exact-dense mode capped at n=5000");
        std::vector<double> dense(static_cast<size_t>(a.n) * a.n, 0.0);
        for (int r = 0; r < a.n; ++r)
            for (int k = a.row_offsets[r]; k < a.row_offsets[r + 1]; ++k)
                dense[static_cast<size_t>(r) * a.n + a.col_indices[k]] = a.values[k];
        std::vector<double> ev = sym_eigenvalues(std::move(dense), a.n);
        lmin = ev.front();
        lmax = ev.back();
    } else if (mode == StatsMethod::Lanczos) {
        int m = (budget <= 0) ? a.n : std::min(budget, a.n);
        std::vector<double> alpha, beta;
        std::vector<std::vector<double>> q;
        std::vector<double> v(a.n, 1.0 / std::sqrt(static_cast<double>(a.n)));
        q.push_back(v);
        for (int j = 0; j < m; ++j) {
            std::vector<double> w = spmv(a, q[j]);
            double aj = 0.0;
            for (int i = 0; i < a.n; ++i) aj += w[i] * q[j][i];
            alpha.push_back(aj);
            for (int i = 0; i < a.n; ++i) w[i] -= aj * q[j][i];
            if (j > 0)
                for (int i = 0; i < a.n; ++i) w[i] -= beta[j - 1] * q[j - 1][i];
            // full reorthogonalization, two passes
            for (int pass = 0; pass < 2; ++pass)
                for (const auto& qi : q) {
                    double c = 0.0;
                    for (int i = 0; i < a.n; ++i) c += w[i] * qi[i];
                    for (int i = 0; i < a.n; ++i) w[i] -= c * qi[i];
                }
            double bj = 0.0;
            for (int i = 0; i < a.n; ++i) bj += w[i] * w[i];
            bj = std::sqrt(bj);
            if (j + 1 == m || bj < 1e-300) break;
            beta.push_back(bj);
            for (int i = 0; i < a.n; ++i) w[i] /= bj;
            q.push_back(std::move(w));
        }
        beta.resize(alpha.size() - 1);
        lmin = detail::tridiag_eigen_at(alpha, beta, 0);
        lmax = detail::tridiag_eigen_at(alpha, beta, static_cast<int>(alpha.size()) - 1);
    } else {
        throw ConfigError("estimate_stats: user-supplied stats cannot be estimated");
    }
    if (lmin <= 0.0)
        throw NotPositiveDefinite("estimate_stats: nonpositive smallest eigenvalue estimate");
    MatrixStats st;
    st.norm_a = lmax;
    st.kappa_a = lmax / lmin;
    st.method = mode;
    return st;
}

/// Right-hand side with entries 1/sqrt(n), so that the 2-norm is 1.
inline std::vector<double> make_rhs(int n) {
    return std::vector<double>(n, 1.0 / std::sqrt(static_cast<double>(n)));
}

}  // namespace sscg
