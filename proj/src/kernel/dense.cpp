#include "gwasgls/kernel/dense.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gwasgls/error.hpp"

namespace gwasgls::kernel
{
namespace
{

// Right-hand sides processed together so the active columns of L stay in
// cache across them.
constexpr Index rhs_tile = 32;
// Eliminated columns folded into one pass over a right-hand side.
constexpr Index elim_group = 4;

void zero_strict_upper(MatrixRef a)
{
    for (Index j = 1; j < a.cols(); ++j)
    {
        std::fill_n(a.col(j).data(), std::min(j, a.rows()), 0.0);
    }
}

}  // namespace

void subtract_sequence(double* y, Index len, std::span<const double* const> cols, std::span<const double> coeffs)
{
    const std::size_t count = coeffs.size();
    std::size_t k = 0;
    for (; k + 4 <= count; k += 4)
    {
        const double* __restrict c0 = cols[k];
        const double* __restrict c1 = cols[k + 1];
        const double* __restrict c2 = cols[k + 2];
        const double* __restrict c3 = cols[k + 3];
        const double a0 = coeffs[k];
        const double a1 = coeffs[k + 1];
        const double a2 = coeffs[k + 2];
        const double a3 = coeffs[k + 3];
        double* __restrict out = y;
        for (Index i = 0; i < len; ++i)
        {
            double v = out[i];
            v -= a0 * c0[i];
            v -= a1 * c1[i];
            v -= a2 * c2[i];
            v -= a3 * c3[i];
            out[i] = v;
        }
    }
    for (; k < count; ++k)
    {
        const double* __restrict c = cols[k];
        const double a = coeffs[k];
        double* __restrict out = y;
        for (Index i = 0; i < len; ++i)
        {
            out[i] -= a * c[i];
        }
    }
}

double dot(const double* a, const double* b, Index len)
{
    double s = 0.0;
    for (Index i = 0; i < len; ++i)
    {
        s += a[i] * b[i];
    }
    return s;
}

void cholesky_unblocked(MatrixRef a, Index pivot_offset)
{
    const Index n = a.rows();
    if (a.cols() != n)
    {
        throw DimensionMismatch("cholesky_unblocked: block must be square");
    }
    for (Index j = 0; j < n; ++j)
    {
        const double d = a(j, j);
        if (!(d > 0.0) || !std::isfinite(d))
        {
            throw NotPositiveDefinite(pivot_offset + j);
        }
        const double ljj = std::sqrt(d);
        a(j, j) = ljj;
        double* colj = a.col(j).data();
        for (Index i = j + 1; i < n; ++i)
        {
            colj[i] /= ljj;
        }
        for (Index jj = j + 1; jj < n; ++jj)
        {
            const double coeff = colj[jj];
            double* target = a.col(jj).data();
            for (Index i = jj; i < n; ++i)
            {
                target[i] -= coeff * colj[i];
            }
        }
    }
}

void solve_panel_rows(ConstMatrixRef l11, MatrixRef a21)
{
    const Index kb = l11.rows();
    if (l11.cols() != kb || a21.cols() != kb)
    {
        throw DimensionMismatch("solve_panel_rows: panel width mismatch");
    }
    const Index rows = a21.rows();
    std::vector<const double*> cols;
    std::vector<double> coeffs;
    cols.reserve(static_cast<std::size_t>(kb));
    coeffs.reserve(static_cast<std::size_t>(kb));
    for (Index j = 0; j < kb; ++j)
    {
        cols.clear();
        coeffs.clear();
        for (Index k = 0; k < j; ++k)
        {
            cols.push_back(a21.col(k).data());
            coeffs.push_back(l11(j, k));
        }
        double* colj = a21.col(j).data();
        subtract_sequence(colj, rows, cols, coeffs);
        const double ljj = l11(j, j);
        for (Index i = 0; i < rows; ++i)
        {
            colj[i] /= ljj;
        }
    }
}

void cholesky_in_place(MatrixRef a, Index panel_width)
{
    const Index n = a.rows();
    if (a.cols() != n)
    {
        throw DimensionMismatch("cholesky: matrix must be square");
    }
    panel_width = std::max<Index>(panel_width, 1);
    std::vector<const double*> cols;
    std::vector<double> coeffs;
    for (Index k0 = 0; k0 < n; k0 += panel_width)
    {
        const Index kb = std::min(panel_width, n - k0);
        const Index k1 = k0 + kb;
        cholesky_unblocked(a.block(k0, k0, kb, kb), k0);
        if (k1 == n)
        {
            break;
        }
        solve_panel_rows(a.block(k0, k0, kb, kb), a.block(k1, k0, n - k1, kb));
        // Trailing update of the lower triangle, one target column at a time.
        for (Index j = k1; j < n; ++j)
        {
            cols.clear();
            coeffs.clear();
            for (Index k = k0; k < k1; ++k)
            {
                cols.push_back(a.col(k).data() + j);
                coeffs.push_back(a(j, k));
            }
            subtract_sequence(a.col(j).data() + j, n - j, cols, coeffs);
        }
    }
}

CholeskyFactor cholesky_spd(const CovarianceMatrix& m, Index panel_width)
{
    Matrix l = m.data();
    cholesky_in_place(l, panel_width);
    zero_strict_upper(l);
    return CholeskyFactor(std::move(l));
}

void trsolve_lower_in_place(ConstMatrixRef lower, MatrixRef b)
{
    const Index n = lower.rows();
    if (lower.cols() != n || b.rows() != n)
    {
        throw DimensionMismatch("trsolve_lower: L is " + std::to_string(lower.rows()) + "x"
                                + std::to_string(lower.cols()) + ", B has " + std::to_string(b.rows())
                                + " rows");
    }
    const Index ncols = b.cols();
    std::array<const double*, elim_group> cols{};
    std::array<double, elim_group> coeffs{};
    for (Index c0 = 0; c0 < ncols; c0 += rhs_tile)
    {
        const Index c1 = std::min(ncols, c0 + rhs_tile);
        for (Index k = 0; k < n; k += elim_group)
        {
            const Index g = std::min(elim_group, n - k);
            const Index below = k + g;
            for (Index kk = 0; kk < g; ++kk)
            {
                cols[static_cast<std::size_t>(kk)] = lower.col(k + kk).data() + below;
            }
            for (Index c = c0; c < c1; ++c)
            {
                double* x = b.col(c).data();
                for (Index kk = k; kk < below; ++kk)
                {
                    x[kk] /= lower(kk, kk);
                    const double xk = x[kk];
                    for (Index i = kk + 1; i < below; ++i)
                    {
                        x[i] -= lower(i, kk) * xk;
                    }
                    coeffs[static_cast<std::size_t>(kk - k)] = xk;
                }
                if (below < n)
                {
                    subtract_sequence(x + below,
                                      n - below,
                                      std::span<const double* const>(cols.data(), static_cast<std::size_t>(g)),
                                      std::span<const double>(coeffs.data(), static_cast<std::size_t>(g)));
                }
            }
        }
    }
}

Matrix trsolve_lower(const CholeskyFactor& factor, ConstMatrixRef b)
{
    Matrix x = b;
    trsolve_lower_in_place(factor.data(), x);
    return x;
}

Matrix gram(ConstMatrixRef a)
{
    const Index k = a.cols();
    if (k < 1)
    {
        throw DimensionMismatch("gram: need at least one column");
    }
    Matrix s(k, k);
    for (Index j = 0; j < k; ++j)
    {
        for (Index i = j; i < k; ++i)
        {
            s(i, j) = dot(a.col(i).data(), a.col(j).data(), a.rows());
            s(j, i) = s(i, j);
        }
    }
    return s;
}

}  // namespace gwasgls::kernel
