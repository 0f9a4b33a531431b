#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sscg/errors.hpp"

namespace sscg {

/// Symmetric Gram matrix G = Y^T Y of a (2s+1)-column basis.
/// Entries are stored dense row-major and symmetrized on construction
/// to suppress round-off asymmetry of the product.
struct GramMatrix {
    int order = 0;
    int s = 0;
    std::vector<double> entries;

    GramMatrix() = default;

    GramMatrix(int order_, int s_, std::vector<double> raw)
        : order(order_), s(s_), entries(std::move(raw)) {
        for (int i = 0; i < order; ++i)
            for (int j = i + 1; j < order; ++j) {
                double v = 0.5 * (entries[i * order + j] + entries[j * order + i]);
                entries[i * order + j] = v;
                entries[j * order + i] = v;
            }
    }

    double at(int i, int j) const { return entries[i * order + j]; }
};

/// Eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations.
/// Sweeps until the off-diagonal Frobenius norm falls below 1e-14 times
/// the Frobenius norm of the input, or 30 sweeps have run. Ascending order.
inline std::vector<double> sym_eigenvalues(std::vector<double> m, int order) {
    if (order == 0) return {};
    double norm_f = 0.0;
    for (int i = 0; i < order * order; ++i) norm_f += m[i] * m[i];
    norm_f = std::sqrt(norm_f);
    const double tol = 1e-14 * norm_f;

    for (int sweep = 0; sweep < 30; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < order; ++i)
            for (int j = 0; j < order; ++j)
                if (i != j) off += m[i * order + j] * m[i * order + j];
        if (std::sqrt(off) <= tol) break;

        for (int p = 0; p < order - 1; ++p) {
            for (int q = p + 1; q < order; ++q) {
                double apq = m[p * order + q];
                if (apq == 0.0) continue;
                double app = m[p * order + p];
                double aqq = m[q * order + q];
                double theta = (aqq - app) / (2.0 * apq);
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double sn = t * c;
                for (int k = 0; k < order; ++k) {
                    double akp = m[k * order + p];
                    double akq = m[k * order + q];
                    m[k * order + p] = c * akp - sn * akq;
                    m[k * order + q] = sn * akp + c * akq;
                }
                for (int k = 0; k < order; ++k) {
                    double apk = m[p * order + k];
                    double aqk = m[q * order + k];
                    m[p * order + k] = c * apk - sn * aqk;
                    m[q * order + k] = sn * apk + c * aqk;
                }
            }
        }
    }

    std::vector<double> ev(order);
    for (int i = 0; i < order; ++i) ev[i] = m[i * order + i];
    std::sort(ev.begin(), ev.end());
    return ev;
}

/// Condition number of the basis matrix Y recovered from its Gram matrix:
/// sqrt(lambda_max/lambda_min) of G = Y^T Y. Returns +infinity when G is
/// numerically rank deficient (lambda_min <= 1e-14 * lambda_max).
inline double cond_from_gram(const GramMatrix& g) {
    std::vector<double> ev = sym_eigenvalues(g.entries, g.order);
    double lmax = ev.back();
    if (lmax <= 0.0) return std::numeric_limits<double>::infinity();
    double lmin = ev.front();
    if (lmin <= 1e-14 * lmax) return std::numeric_limits<double>::infinity();
    return std::sqrt(lmax / lmin);
}

/// Sub-Gram matrix of the leading i-step basis columns. For a Gram matrix
/// built with block parameter s_bar, the i-step basis takes columns
/// 1..i+1 of the P block and the first i columns of the R block, which
/// starts at index i_s = s_bar+2 (1-based). Order of the result is 2i+1.
inline GramMatrix extract_sub_gram(const GramMatrix& g, int i) {
    int sbar = g.s;
    if (i < 1 || i > sbar)
        throw IndexError("extract_sub_gram: i=" + std::to_string(i) +
                         " out of range [1," + std::to_string(sbar) + "]");
    int m = 2 * i + 1;
    std::vector<int> ids;
    ids.reserve(m);
    for (int c = 0; c <= i; ++c) ids.push_back(c);
    for (int c = 0; c < i; ++c) ids.push_back(sbar + 1 + c);
    std::vector<double> sub(static_cast<size_t>(m) * m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            sub[a * m + b] = g.at(ids[a], ids[b]);
    return GramMatrix(m, i, std::move(sub));
}

/// G-weighted inner product u^T G v.
inline double g_inner(const GramMatrix& g, const std::vector<double>& u,
                      const std::vector<double>& v) {
    if (static_cast<int>(u.size()) != g.order || static_cast<int>(v.size()) != g.order)
        throw DimensionError("g_inner: coordinate length does not match Gram order");
    double acc = 0.0;
    for (int i = 0; i < g.order; ++i) {
        double row = 0.0;
        for (int j = 0; j < g.order; ++j) row += g.at(i, j) * v[j];
        acc += u[i] * row;
    }
    return acc;
}

}  // namespace sscg
