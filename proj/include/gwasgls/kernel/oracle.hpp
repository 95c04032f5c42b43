#pragma once

#include <Eigen/LU>

#include "gwasgls/kernel/types.hpp"

namespace gwasgls::kernel
{

/// Literal b = (X^T M^-1 X)^-1 X^T M^-1 y with a pivoted LU of M and no
/// structure exploitation. Reference implementation for verification only.
/// Throws InvalidInput for a singular M and RankDeficientCovariates when
/// X^T M^-1 X is singular.
Vector gls_oracle(const CovarianceMatrix& m, ConstMatrixRef xi, const Vector& y);

/// Reuses one LU of M across many designs; each call costs O(n^2 p).
class GlsOracle
{
  public:
    explicit GlsOracle(const CovarianceMatrix& m);

    /// Degenerate designs are reported through the status, not thrown.
    /// With `want_s_inv`, the packed lower triangle of (X^T M^-1 X)^-1 is
    /// filled as well.
    SnpResult solve(ConstMatrixRef xi, const Vector& y, std::uint64_t snp_index = 0, bool want_s_inv = false) const;

  private:
    Eigen::PartialPivLU<Matrix> lu_;
};

}  // namespace gwasgls::kernel
