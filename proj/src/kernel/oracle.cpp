#include "gwasgls/kernel/oracle.hpp"

#include <limits>

#include <Eigen/Cholesky>

#include "gwasgls/error.hpp"

namespace gwasgls::kernel
{
namespace
{

// Reciprocal condition below which X^T M^-1 X is treated as singular.
constexpr double singular_rcond = 1e-12;

}  // namespace

GlsOracle::GlsOracle(const CovarianceMatrix& m) : lu_(m.data())
{
    if (!(lu_.rcond() > std::numeric_limits<double>::epsilon()))
    {
        throw InvalidInput("covariance matrix is numerically singular");
    }
}

SnpResult GlsOracle::solve(ConstMatrixRef xi, const Vector& y, std::uint64_t snp_index, bool want_s_inv) const
{
    if (xi.rows() != lu_.rows() || y.size() != lu_.rows())
    {
        throw DimensionMismatch("oracle: design/phenotype rows do not match the covariance");
    }
    SnpResult r;
    r.snp_index = snp_index;
    const Matrix minv_x = lu_.solve(xi);
    const Vector minv_y = lu_.solve(y);
    const Matrix s = xi.transpose() * minv_x;
    const Vector rhs = xi.transpose() * minv_y;
    // X^T M^-1 X is symmetric in exact arithmetic; use its lower half.
    const Matrix s_sym = s.selfadjointView<Eigen::Lower>();
    Eigen::LLT<Matrix> llt(s_sym);
    if (llt.info() != Eigen::Success || !(llt.rcond() > singular_rcond))
    {
        r.status = SnpStatus::degenerate;
        r.beta = Vector::Constant(xi.cols(), std::numeric_limits<double>::quiet_NaN());
        return r;
    }
    r.beta = llt.solve(rhs);
    if (want_s_inv)
    {
        const Matrix inv = llt.solve(Matrix::Identity(s.rows(), s.cols()));
        std::vector<double> packed;
        for (Index j = 0; j < inv.cols(); ++j)
        {
            for (Index i = j; i < inv.rows(); ++i)
            {
                packed.push_back(inv(i, j));
            }
        }
        r.s_inv = std::move(packed);
    }
    return r;
}

Vector gls_oracle(const CovarianceMatrix& m, ConstMatrixRef xi, const Vector& y)
{
    const GlsOracle oracle(m);
    SnpResult r = oracle.solve(xi, y);
    if (r.status == SnpStatus::degenerate)
    {
        throw RankDeficientCovariates("X^T M^-1 X is singular");
    }
    return r.beta;
}

}  // namespace gwasgls::kernel
