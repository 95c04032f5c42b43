#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace gwasgls
{

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MatrixRef = Eigen::Ref<Matrix>;
using ConstMatrixRef = Eigen::Ref<const Matrix>;

}  // namespace gwasgls

namespace gwasgls::kernel
{

/// Design widths accepted by the solver (covariates + one SNP column).
inline constexpr Index min_design_width = 2;
inline constexpr Index max_design_width = 20;

/// The n x n kinship matrix. Symmetry is checked with exact equality and the
/// constructor never symmetrizes on the caller's behalf.
class CovarianceMatrix
{
  public:
    explicit CovarianceMatrix(Matrix data);

    Index n() const noexcept { return data_.rows(); }
    const Matrix& data() const noexcept { return data_; }

  private:
    Matrix data_;
};

/// Lower Cholesky factor. Only the lower triangle is meaningful; the strict
/// upper part is zero-filled by every producer in this library.
class CholeskyFactor
{
  public:
    CholeskyFactor() = default;
    /// Validates shape and a strictly positive diagonal.
    explicit CholeskyFactor(Matrix lower);

    Index n() const noexcept { return data_.rows(); }
    const Matrix& data() const noexcept { return data_; }

  private:
    Matrix data_;
};

/// Covariate columns shared by every test (intercept included), X_L.
class DesignLeft
{
  public:
    explicit DesignLeft(Matrix data);

    Index n() const noexcept { return data_.rows(); }
    /// Total design width including the SNP column.
    Index p() const noexcept { return data_.cols() + 1; }
    const Matrix& data() const noexcept { return data_; }

  private:
    Matrix data_;
};

class Phenotype
{
  public:
    explicit Phenotype(Vector data);

    Index n() const noexcept { return data_.size(); }
    const Vector& data() const noexcept { return data_; }

  private:
    Vector data_;
};

/// Non-owning view of `count` contiguous genotype columns starting at global
/// SNP `first_index`.
struct SnpBlock
{
    std::uint64_t first_index = 0;
    Eigen::Map<const Matrix> data{nullptr, 0, 0};

    Index n() const noexcept { return data.rows(); }
    Index count() const noexcept { return data.cols(); }
};

/// Whitened covariates and phenotype with the SNP-independent parts of the
/// normal equations. This is all a rank needs to solve SNPs locally.
struct WhitenedCovariates
{
    Matrix xl_bar;  // L^-1 X_L
    Vector y_bar;   // L^-1 y
    Matrix s_tl;    // xl_bar^T xl_bar
    Vector b_t;     // xl_bar^T y_bar

    Index n() const noexcept { return xl_bar.rows(); }
    Index p() const noexcept { return xl_bar.cols() + 1; }
};

struct PreparedContext
{
    CholeskyFactor factor;
    WhitenedCovariates covariates;

    Index n() const noexcept { return factor.n(); }
    Index p() const noexcept { return covariates.p(); }
};

enum class SnpStatus : std::uint8_t
{
    ok,
    degenerate,
};

struct SnpResult
{
    std::uint64_t snp_index = 0;
    Vector beta;
    /// Packed lower triangle of S_i^-1, column by column.
    std::optional<std::vector<double>> s_inv;
    SnpStatus status = SnpStatus::ok;
};

inline constexpr Index packed_size(Index p) noexcept { return p * (p + 1) / 2; }

/// Per-SNP outputs for one block, stored in on-disk record layout: one
/// record per SNP holding beta (p reals) followed, when enabled, by the
/// packed S_i^-1. Degenerate records are NaN-filled.
class ResultBlock
{
  public:
    ResultBlock() = default;
    ResultBlock(Index p, bool with_s_inv, Index capacity = 0);

    /// Re-targets the block without shrinking storage.
    void reset(std::uint64_t first_index, Index count);

    std::uint64_t first_index() const noexcept { return first_index_; }
    Index count() const noexcept { return count_; }
    Index p() const noexcept { return p_; }
    bool with_s_inv() const noexcept { return with_s_inv_; }
    Index record_length() const noexcept { return p_ + (with_s_inv_ ? packed_size(p_) : 0); }

    std::span<double> record(Index k);
    std::span<const double> record(Index k) const;
    std::span<const double> beta(Index k) const { return record(k).first(static_cast<std::size_t>(p_)); }
    SnpStatus status(Index k) const;
    void mark_degenerate(Index k);

    SnpResult at(Index k) const;

    /// Raw record storage for the first count() records.
    std::span<const double> records() const
    {
        return {records_.data(), static_cast<std::size_t>(count_ * record_length())};
    }
    std::span<double> records()
    {
        return {records_.data(), static_cast<std::size_t>(count_ * record_length())};
    }

  private:
    std::uint64_t first_index_ = 0;
    Index count_ = 0;
    Index p_ = 0;
    bool with_s_inv_ = false;
    std::vector<double> records_;
};

}  // namespace gwasgls::kernel
