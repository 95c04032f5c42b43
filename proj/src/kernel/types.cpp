#include "gwasgls/kernel/types.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "gwasgls/error.hpp"

namespace gwasgls::kernel
{

CovarianceMatrix::CovarianceMatrix(Matrix data) : data_(std::move(data))
{
    if (data_.rows() == 0 || data_.rows() != data_.cols())
    {
        throw DimensionMismatch("covariance matrix must be square and non-empty, got "
                                + std::to_string(data_.rows()) + "x" + std::to_string(data_.cols()));
    }
    if (!data_.allFinite())
    {
        throw InvalidInput("covariance matrix has non-finite entries");
    }
    const Index n = data_.rows();
    for (Index j = 0; j < n; ++j)
    {
        for (Index i = j + 1; i < n; ++i)
        {
            if (data_(i, j) != data_(j, i))
            {
                throw NotSymmetric("covariance matrix is not symmetric at (" + std::to_string(i) + ","
                                   + std::to_string(j) + ")");
            }
        }
    }
}

CholeskyFactor::CholeskyFactor(Matrix lower) : data_(std::move(lower))
{
    if (data_.rows() != data_.cols())
    {
        throw DimensionMismatch("Cholesky factor must be square");
    }
    for (Index j = 0; j < data_.cols(); ++j)
    {
        if (!(data_(j, j) > 0.0) || !std::isfinite(data_(j, j)))
        {
            throw NotPositiveDefinite(j);
        }
    }
}

DesignLeft::DesignLeft(Matrix data) : data_(std::move(data))
{
    const Index p = data_.cols() + 1;
    if (p < min_design_width || p > max_design_width)
    {
        throw InvalidInput("design width p=" + std::to_string(p) + " outside ["
                           + std::to_string(min_design_width) + "," + std::to_string(max_design_width) + "]");
    }
    if (data_.cols() > data_.rows())
    {
        throw RankDeficientCovariates("more covariates than individuals");
    }
    if (!data_.allFinite())
    {
        throw InvalidInput("covariates have non-finite entries");
    }
}

Phenotype::Phenotype(Vector data) : data_(std::move(data))
{
    if (data_.size() == 0)
    {
        throw DimensionMismatch("phenotype is empty");
    }
    if (!data_.allFinite())
    {
        throw InvalidInput("phenotype has non-finite entries");
    }
}

ResultBlock::ResultBlock(Index p, bool with_s_inv, Index capacity) : p_(p), with_s_inv_(with_s_inv)
{
    records_.reserve(static_cast<std::size_t>(capacity * record_length()));
}

void ResultBlock::reset(std::uint64_t first_index, Index count)
{
    first_index_ = first_index;
    count_ = count;
    const auto needed = static_cast<std::size_t>(count * record_length());
    if (records_.size() < needed)
    {
        records_.resize(needed);
    }
}

std::span<double> ResultBlock::record(Index k)
{
    const Index len = record_length();
    return {records_.data() + k * len, static_cast<std::size_t>(len)};
}

std::span<const double> ResultBlock::record(Index k) const
{
    const Index len = record_length();
    return {records_.data() + k * len, static_cast<std::size_t>(len)};
}

SnpStatus ResultBlock::status(Index k) const
{
    return std::isnan(record(k)[0]) ? SnpStatus::degenerate : SnpStatus::ok;
}

void ResultBlock::mark_degenerate(Index k)
{
    for (double& v : record(k))
    {
        v = std::numeric_limits<double>::quiet_NaN();
    }
}

SnpResult ResultBlock::at(Index k) const
{
    SnpResult r;
    r.snp_index = first_index_ + static_cast<std::uint64_t>(k);
    const auto rec = record(k);
    r.beta = Eigen::Map<const Vector>(rec.data(), p_);
    r.status = status(k);
    if (with_s_inv_ && r.status == SnpStatus::ok)
    {
        r.s_inv.emplace(rec.begin() + p_, rec.end());
    }
    return r;
}

}  // namespace gwasgls::kernel
