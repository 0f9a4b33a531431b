#pragma once

// Shared test utilities: deterministic random problem generators, dense
// oracles that bypass the library's own kernels, and the gr_30_30 grid
// operator used across the suite.

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sscg/sparse.hpp"

namespace testsup {

using Dense = std::vector<double>;  // row-major order*order

inline double& at(Dense& m, int order, int i, int j) { return m[static_cast<size_t>(i) * order + j]; }
inline double at(const Dense& m, int order, int i, int j) { return m[static_cast<size_t>(i) * order + j]; }

// Random orthogonal matrix by modified Gram-Schmidt on a Gaussian matrix.
inline Dense random_orthogonal(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Dense q(static_cast<size_t>(n) * n);
    for (auto& v : q) v = gauss(rng);
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < j; ++k) {
            double proj = 0.0;
            for (int i = 0; i < n; ++i) proj += at(q, n, i, k) * at(q, n, i, j);
            for (int i = 0; i < n; ++i) at(q, n, i, j) -= proj * at(q, n, i, k);
        }
        double norm = 0.0;
        for (int i = 0; i < n; ++i) norm += at(q, n, i, j) * at(q, n, i, j);
        norm = std::sqrt(norm);
        for (int i = 0; i < n; ++i) at(q, n, i, j) /= norm;
    }
    return q;
}

// Dense SPD matrix with a log-uniform spectrum in [1/kappa, 1].
inline Dense random_spd(int n, double kappa, std::mt19937_64& rng) {
    Dense q = random_orthogonal(n, rng);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> ev(n);
    ev[0] = 1.0 / kappa;
    ev[n - 1] = 1.0;
    for (int i = 1; i + 1 < n; ++i) ev[i] = std::pow(kappa, unif(rng) - 1.0);
    Dense a(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k) acc += at(q, n, i, k) * ev[k] * at(q, n, j, k);
            at(a, n, i, j) = acc;
            at(a, n, j, i) = acc;
        }
    return a;
}

inline sscg::SparseMatrixCsr dense_to_csr(const Dense& m, int n) {
    sscg::SparseMatrixCsr a;
    a.n = n;
    a.row_offsets.assign(n + 1, 0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            a.col_indices.push_back(j);
            a.values.push_back(at(m, n, i, j));
        }
        a.row_offsets[i + 1] = static_cast<int>(a.values.size());
    }
    a.n_a = n;
    return a;
}

inline std::vector<double> dense_matvec(const Dense& m, int n, const std::vector<double>& v) {
    std::vector<double> y(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) y[i] += at(m, n, i, j) * v[j];
    return y;
}

inline std::vector<double> random_vector(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = gauss(rng);
    return v;
}

// 2-norm condition number of a tall matrix by one-sided (Hestenes) Jacobi
// SVD on the columns. Independent of the library's Gram-eigenvalue route.
inline double svd_cond(const std::vector<std::vector<double>>& cols) {
    std::vector<std::vector<double>> c = cols;
    size_t m = c.size();
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (size_t i = 0; i + 1 < m; ++i)
            for (size_t j = i + 1; j < m; ++j) {
                double aii = 0.0, ajj = 0.0, aij = 0.0;
                for (size_t k = 0; k < c[i].size(); ++k) {
                    aii += c[i][k] * c[i][k];
                    ajj += c[j][k] * c[j][k];
                    aij += c[i][k] * c[j][k];
                }
                if (std::abs(aij) <= 1e-17 * std::sqrt(aii * ajj)) continue;
                rotated = true;
                double tau = (ajj - aii) / (2.0 * aij);
                double t = (tau >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                double cs = 1.0 / std::sqrt(1.0 + t * t);
                double sn = cs * t;
                for (size_t k = 0; k < c[i].size(); ++k) {
                    double vi = c[i][k], vj = c[j][k];
                    c[i][k] = cs * vi - sn * vj;
                    c[j][k] = sn * vi + cs * vj;
                }
            }
        if (!rotated) break;
    }
    double smin = std::numeric_limits<double>::infinity(), smax = 0.0;
    for (const auto& col : c) {
        double norm = 0.0;
        for (double v : col) norm += v * v;
        norm = std::sqrt(norm);
        smin = std::min(smin, norm);
        smax = std::max(smax, norm);
    }
    return smax / smin;
}

// The gr_30_30 operator: 9-point stencil on a 30x30 grid, 8 on the
// diagonal and -1 for each of the up-to-8 neighbors (900 rows, 7744
// stored entries).
inline sscg::SparseMatrixCsr gr_30_30() {
    const int g = 30;
    const int n = g * g;
    sscg::SparseMatrixCsr a;
    a.n = n;
    a.row_offsets.assign(n + 1, 0);
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) {
            int row = i * g + j;
            for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    int ni = i + di, nj = j + dj;
                    if (ni < 0 || ni >= g || nj < 0 || nj >= g) continue;
                    a.col_indices.push_back(ni * g + nj);
                    a.values.push_back(di == 0 && dj == 0 ? 8.0 : -1.0);
                }
            a.row_offsets[row + 1] = static_cast<int>(a.values.size());
        }
    a.n_a = 9;
    return a;
}

inline std::string to_matrix_market(const sscg::SparseMatrixCsr& a) {
    std::ostringstream out;
    out << "%%MatrixMarket matrix coordinate real symmetric\n";
    long lower = 0;
    for (int r = 0; r < a.n; ++r)
        for (int k = a.row_offsets[r]; k < a.row_offsets[r + 1]; ++k)
            if (a.col_indices[k] <= r) ++lower;
    out << a.n << " " << a.n << " " << lower << "\n";
    char buf[48];
    for (int r = 0; r < a.n; ++r)
        for (int k = a.row_offsets[r]; k < a.row_offsets[r + 1]; ++k)
            if (a.col_indices[k] <= r) {
                std::snprintf(buf, sizeof(buf), "%d %d %.17g\n", r + 1,
                              a.col_indices[k] + 1, a.values[k]);
                out << buf;
            }
    return out.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot write " + path);
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
}

}  // namespace testsup
