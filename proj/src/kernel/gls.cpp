#include "gwasgls/kernel/gls.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>
#include <vector>

#include "gwasgls/error.hpp"
#include "gwasgls/kernel/dense.hpp"

namespace gwasgls::kernel
{
namespace
{

constexpr double eps = 0x1p-52;

// p x p work arrays never touch the heap.
using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, max_design_width,
                                  max_design_width>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, max_design_width, 1>;

double max_abs_lower(const SmallMatrix& s)
{
    double mx = 0.0;
    for (Index j = 0; j < s.cols(); ++j)
    {
        for (Index i = j; i < s.rows(); ++i)
        {
            mx = std::max(mx, std::abs(s(i, j)));
        }
    }
    return mx;
}

// Lower Cholesky of the lower triangle of `s`, in place. Returns the index
// of the first pivot not above `threshold`, or -1 on success.
Index small_cholesky(SmallMatrix& s, double threshold)
{
    const Index p = s.rows();
    for (Index j = 0; j < p; ++j)
    {
        double d = s(j, j);
        for (Index k = 0; k < j; ++k)
        {
            d -= s(j, k) * s(j, k);
        }
        if (!(d > threshold) || !std::isfinite(d))
        {
            return j;
        }
        const double ljj = std::sqrt(d);
        s(j, j) = ljj;
        for (Index i = j + 1; i < p; ++i)
        {
            double v = s(i, j);
            for (Index k = 0; k < j; ++k)
            {
                v -= s(i, k) * s(j, k);
            }
            s(i, j) = v / ljj;
        }
    }
    return -1;
}

// Solves L L^T x = rhs in place using the lower triangle of `l`.
void small_cholesky_solve(const SmallMatrix& l, SmallVector& x)
{
    const Index p = l.rows();
    for (Index i = 0; i < p; ++i)
    {
        double v = x(i);
        for (Index k = 0; k < i; ++k)
        {
            v -= l(i, k) * x(k);
        }
        x(i) = v / l(i, i);
    }
    for (Index i = p - 1; i >= 0; --i)
    {
        double v = x(i);
        for (Index k = i + 1; k < p; ++k)
        {
            v -= l(k, i) * x(k);
        }
        x(i) = v / l(i, i);
    }
}

// (L L^T)^-1 from the lower factor, full symmetric storage.
SmallMatrix small_cholesky_inverse(const SmallMatrix& l)
{
    const Index p = l.rows();
    SmallMatrix w = SmallMatrix::Zero(p, p);
    for (Index j = 0; j < p; ++j)
    {
        w(j, j) = 1.0 / l(j, j);
        for (Index i = j + 1; i < p; ++i)
        {
            double v = 0.0;
            for (Index k = j; k < i; ++k)
            {
                v -= l(i, k) * w(k, j);
            }
            w(i, j) = v / l(i, i);
        }
    }
    SmallMatrix inv(p, p);
    for (Index j = 0; j < p; ++j)
    {
        for (Index i = j; i < p; ++i)
        {
            double v = 0.0;
            for (Index k = i; k < p; ++k)
            {
                v += w(k, i) * w(k, j);
            }
            inv(i, j) = v;
            inv(j, i) = v;
        }
    }
    return inv;
}

double pivot_threshold(const SmallMatrix& s, Index sample_rows)
{
    return static_cast<double>(sample_rows) * eps * max_abs_lower(s);
}

template <typename Fn>
void parallel_columns(Index count, int threads, Fn&& fn)
{
    const Index workers = std::clamp<Index>(threads, 1, std::max<Index>(count, 1));
    if (workers <= 1)
    {
        fn(Index{0}, count);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    const Index chunk = (count + workers - 1) / workers;
    for (Index w = 0; w < workers; ++w)
    {
        const Index c0 = w * chunk;
        const Index c1 = std::min(count, c0 + chunk);
        pool.emplace_back([&, w, c0, c1] {
            try
            {
                if (c0 < c1)
                {
                    fn(c0, c1);
                }
            }
            catch (...)
            {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool)
    {
        t.join();
    }
    for (auto& e : errors)
    {
        if (e)
        {
            std::rethrow_exception(e);
        }
    }
}

void solve_columns(const WhitenedCovariates& cov, ConstMatrixRef xr_bar, ResultBlock& out, bool emit_s_inv, Index c0,
                   Index c1)
{
    const Index n = cov.n();
    const Index q = cov.xl_bar.cols();
    const Index p = q + 1;
    const Index count = c1 - c0;

    // S_BL rows for this range, stacked: row k is x_k^T xl_bar.
    Matrix s_blk(count, q);
    for (Index j = 0; j < q; ++j)
    {
        const double* xl = cov.xl_bar.col(j).data();
        for (Index k = 0; k < count; ++k)
        {
            s_blk(k, j) = dot(xr_bar.col(c0 + k).data(), xl, n);
        }
    }

    SmallMatrix s(p, p);
    SmallVector rhs(p);
    for (Index k = 0; k < count; ++k)
    {
        const double* x = xr_bar.col(c0 + k).data();
        s.topLeftCorner(q, q) = cov.s_tl;
        s.row(q).head(q) = s_blk.row(k);
        s.col(q).head(q) = s_blk.row(k).transpose();
        s(q, q) = dot(x, x, n);
        rhs.head(q) = cov.b_t;
        rhs(q) = dot(x, cov.y_bar.data(), n);

        const double threshold = pivot_threshold(s, n);
        if (small_cholesky(s, threshold) >= 0)
        {
            out.mark_degenerate(c0 + k);
            continue;
        }
        small_cholesky_solve(s, rhs);
        auto rec = out.record(c0 + k);
        std::copy_n(rhs.data(), p, rec.begin());
        if (emit_s_inv)
        {
            const SmallMatrix inv = small_cholesky_inverse(s);
            auto it = rec.begin() + p;
            for (Index j = 0; j < p; ++j)
            {
                for (Index i = j; i < p; ++i)
                {
                    *it++ = inv(i, j);
                }
            }
        }
    }
}

void check_block_target(const WhitenedCovariates& cov, ConstMatrixRef x, const ResultBlock& out)
{
    if (x.rows() != cov.n())
    {
        throw DimensionMismatch("SNP block has " + std::to_string(x.rows()) + " rows, expected "
                                + std::to_string(cov.n()));
    }
    if (out.count() != x.cols() || out.p() != cov.p())
    {
        throw DimensionMismatch("result block does not match the SNP block");
    }
}

}  // namespace

WhitenedCovariates finish_whitened_covariates(Matrix xl_bar, Vector y_bar)
{
    if (xl_bar.rows() != y_bar.size())
    {
        throw DimensionMismatch("whitened covariates and phenotype disagree on n");
    }
    WhitenedCovariates cov;
    cov.s_tl = gram(xl_bar);
    cov.b_t.resize(xl_bar.cols());
    for (Index j = 0; j < xl_bar.cols(); ++j)
    {
        cov.b_t(j) = dot(xl_bar.col(j).data(), y_bar.data(), y_bar.size());
    }
    SmallMatrix s = cov.s_tl;
    if (const Index bad = small_cholesky(s, pivot_threshold(s, xl_bar.rows())); bad >= 0)
    {
        throw RankDeficientCovariates("whitened covariate Gram matrix is singular at column " + std::to_string(bad));
    }
    cov.xl_bar = std::move(xl_bar);
    cov.y_bar = std::move(y_bar);
    return cov;
}

PreparedContext gls_prepare(const CovarianceMatrix& m, const DesignLeft& xl, const Phenotype& y)
{
    if (xl.n() != m.n() || y.n() != m.n())
    {
        throw DimensionMismatch("covariance is " + std::to_string(m.n()) + "x" + std::to_string(m.n())
                                + ", covariates have " + std::to_string(xl.n()) + " rows, phenotype has "
                                + std::to_string(y.n()));
    }
    PreparedContext ctx;
    ctx.factor = cholesky_spd(m);
    Matrix xl_bar = trsolve_lower(ctx.factor, xl.data());
    Vector y_bar = trsolve_lower(ctx.factor, y.data());
    ctx.covariates = finish_whitened_covariates(std::move(xl_bar), std::move(y_bar));
    return ctx;
}

void solve_whitened_block(const WhitenedCovariates& cov, ConstMatrixRef xr_bar, ResultBlock& out,
                          const SolveOptions& opts)
{
    check_block_target(cov, xr_bar, out);
    const bool emit = opts.emit_s_inv && out.with_s_inv();
    parallel_columns(xr_bar.cols(), opts.threads,
                     [&](Index c0, Index c1) { solve_columns(cov, xr_bar, out, emit, c0, c1); });
}

void gls_solve_block_in_place(const PreparedContext& ctx, MatrixRef x_blk, ResultBlock& out, const SolveOptions& opts)
{
    check_block_target(ctx.covariates, x_blk, out);
    const bool emit = opts.emit_s_inv && out.with_s_inv();
    parallel_columns(x_blk.cols(), opts.threads, [&](Index c0, Index c1) {
        trsolve_lower_in_place(ctx.factor.data(), x_blk.middleCols(c0, c1 - c0));
        solve_columns(ctx.covariates, x_blk, out, emit, c0, c1);
    });
}

ResultBlock gls_solve_block(const PreparedContext& ctx, const SnpBlock& blk, const SolveOptions& opts)
{
    Matrix work = blk.data;
    ResultBlock out(ctx.p(), opts.emit_s_inv, blk.count());
    out.reset(blk.first_index, blk.count());
    gls_solve_block_in_place(ctx, work, out, opts);
    return out;
}

SmallSolve solve_small_spd(ConstMatrixRef s, const Vector& rhs, std::optional<Index> sample_rows, bool want_inverse)
{
    const Index p = s.rows();
    if (s.cols() != p || rhs.size() != p)
    {
        throw DimensionMismatch("solve_small_spd: S must be square and match rhs");
    }
    if (p < 1 || p > max_design_width)
    {
        throw DimensionMismatch("solve_small_spd: dimension " + std::to_string(p) + " outside [1,"
                                + std::to_string(max_design_width) + "]");
    }
    SmallMatrix l = s;
    const double threshold = pivot_threshold(l, sample_rows.value_or(p));
    if (const Index bad = small_cholesky(l, threshold); bad >= 0)
    {
        throw NotPositiveDefinite(bad);
    }
    SmallVector x = rhs;
    small_cholesky_solve(l, x);
    SmallSolve result;
    result.x = x;
    if (want_inverse)
    {
        result.inverse = Matrix(small_cholesky_inverse(l));
    }
    return result;
}

}  // namespace gwasgls::kernel
