#pragma once

#include <optional>

#include "gwasgls/kernel/types.hpp"

namespace gwasgls::kernel
{

struct SolveOptions
{
    /// Worker threads splitting the SNP columns of a block. Results do not
    /// depend on this value.
    int threads = 1;
    bool emit_s_inv = false;
};

/// Factorizes M, whitens X_L and y, and forms S_TL and b_T once for all SNPs.
/// Throws NotPositiveDefinite (from M) or RankDeficientCovariates.
PreparedContext gls_prepare(const CovarianceMatrix& m, const DesignLeft& xl, const Phenotype& y);

/// Builds S_TL and b_T from covariates that were already whitened elsewhere
/// (the distributed engine replicates xl_bar and y_bar to every rank).
WhitenedCovariates finish_whitened_covariates(Matrix xl_bar, Vector y_bar);

/// Solves every SNP of `blk`. Degenerate SNPs are flagged, never thrown.
ResultBlock gls_solve_block(const PreparedContext& ctx, const SnpBlock& blk, const SolveOptions& opts = {});

/// Pipeline variant: whitens `x_blk` in place (its contents are consumed)
/// and writes into a caller-owned result block already reset to the right
/// first index and count.
void gls_solve_block_in_place(const PreparedContext& ctx,
                              MatrixRef x_blk,
                              ResultBlock& out,
                              const SolveOptions& opts = {});

/// Per-SNP stage on already whitened genotype columns: S_BL rows are formed
/// as one stacked product, then each p x p system is solved.
void solve_whitened_block(const WhitenedCovariates& cov,
                          ConstMatrixRef xr_bar,
                          ResultBlock& out,
                          const SolveOptions& opts = {});

/// Result of a p x p Cholesky solve. `inverse` is filled only on request.
struct SmallSolve
{
    Vector x;
    std::optional<Matrix> inverse;
};

/// Pivot threshold is sample_rows * eps * max|S| with eps = 2^-52.
/// `sample_rows` is the number of observations that formed S; it defaults
/// to the dimension of S when S did not come from a Gram product.
/// Throws NotPositiveDefinite with the failing pivot index.
SmallSolve solve_small_spd(ConstMatrixRef s,
                           const Vector& rhs,
                           std::optional<Index> sample_rows = std::nullopt,
                           bool want_inverse = false);

}  // namespace gwasgls::kernel
