#pragma once

// Dense building blocks for the GLS kernels.
//
// Every routine here updates an element by subtracting its rank-1
// contributions in ascending order of the eliminated index, one at a time.
// Blocking, tiling and the column grouping of right-hand sides therefore
// never change the value computed for an element, which is what lets the
// distributed factorization and solve reproduce these results exactly and
// makes per-SNP results independent of block composition.

#include <span>

#include "gwasgls/kernel/types.hpp"

namespace gwasgls::kernel
{

inline constexpr Index default_panel_width = 64;

/// y[i] -= coeffs[0] * cols[0][i]; y[i] -= coeffs[1] * cols[1][i]; ...
/// for i in [0, len), applied in order of the coefficient list.
void subtract_sequence(double* y, Index len, std::span<const double* const> cols, std::span<const double> coeffs);

/// Sequential dot product, summed in ascending index order.
double dot(const double* a, const double* b, Index len);

/// Unblocked in-place lower Cholesky of a square block. Only the lower
/// triangle is read or written. `pivot_offset` is added to the failing
/// column index in the reported error.
void cholesky_unblocked(MatrixRef a, Index pivot_offset = 0);

/// a21 := a21 * l11^-T for a lower-triangular l11 (the panel step of a
/// right-looking Cholesky).
void solve_panel_rows(ConstMatrixRef l11, MatrixRef a21);

/// Blocked right-looking Cholesky. The input is left untouched; the result
/// has a zeroed strict upper triangle.
/// Throws NotPositiveDefinite when a pivot is non-positive or not finite.
CholeskyFactor cholesky_spd(const CovarianceMatrix& m, Index panel_width = default_panel_width);

/// In-place version over the lower triangle of `a`.
void cholesky_in_place(MatrixRef a, Index panel_width = default_panel_width);

/// Forward substitution L X = B over all columns of `b`, in place.
void trsolve_lower_in_place(ConstMatrixRef lower, MatrixRef b);

Matrix trsolve_lower(const CholeskyFactor& factor, ConstMatrixRef b);

/// A^T A, lower triangle computed and mirrored so the stored result is
/// exactly symmetric.
Matrix gram(ConstMatrixRef a);

}  // namespace gwasgls::kernel
