#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gwasgls
{

/// Broad failure class. The CLI maps these onto process exit codes.
enum class ErrorCategory
{
    usage,      // bad flags or configuration
    data,       // malformed/inconsistent files, transport faults
    numerical,  // factorization breakdown, rank deficiency
};

class Error : public std::runtime_error
{
  public:
    Error(ErrorCategory category, std::string name, const std::string& message)
        : std::runtime_error(message), category_(category), name_(std::move(name))
    {
    }

    ErrorCategory category() const noexcept { return category_; }
    const std::string& name() const noexcept { return name_; }

  private:
    ErrorCategory category_;
    std::string name_;
};

class NotPositiveDefinite : public Error
{
  public:
    explicit NotPositiveDefinite(std::int64_t pivot_index)
        : Error(ErrorCategory::numerical,
                "NotPositiveDefinite",
                "matrix is not positive definite (pivot " + std::to_string(pivot_index) + ")"),
          pivot_index_(pivot_index)
    {
    }

    std::int64_t pivot_index() const noexcept { return pivot_index_; }

  private:
    std::int64_t pivot_index_;
};

class RankDeficientCovariates : public Error
{
  public:
    explicit RankDeficientCovariates(const std::string& message)
        : Error(ErrorCategory::numerical, "RankDeficientCovariates", message)
    {
    }
};

class NotSymmetric : public Error
{
  public:
    explicit NotSymmetric(const std::string& message)
        : Error(ErrorCategory::data, "NotSymmetric", message)
    {
    }
};

class DimensionMismatch : public Error
{
  public:
    explicit DimensionMismatch(const std::string& message)
        : Error(ErrorCategory::data, "DimensionMismatch", message)
    {
    }
};

class InvalidInput : public Error
{
  public:
    explicit InvalidInput(const std::string& message)
        : Error(ErrorCategory::data, "InvalidInput", message)
    {
    }
};

class BadMagic : public Error
{
  public:
    explicit BadMagic(const std::string& message) : Error(ErrorCategory::data, "BadMagic", message) {}
};

class UnsupportedVersion : public Error
{
  public:
    explicit UnsupportedVersion(const std::string& message)
        : Error(ErrorCategory::data, "UnsupportedVersion", message)
    {
    }
};

class TruncatedFile : public Error
{
  public:
    explicit TruncatedFile(const std::string& message)
        : Error(ErrorCategory::data, "TruncatedFile", message)
    {
    }
};

class ShortWrite : public Error
{
  public:
    explicit ShortWrite(const std::string& message) : Error(ErrorCategory::data, "ShortWrite", message) {}
};

class IoFailure : public Error
{
  public:
    explicit IoFailure(const std::string& message) : Error(ErrorCategory::data, "IoFailure", message) {}
};

class OverlappingBuffer : public Error
{
  public:
    explicit OverlappingBuffer(const std::string& message)
        : Error(ErrorCategory::usage, "OverlappingBuffer", message)
    {
    }
};

class ConfigError : public Error
{
  public:
    explicit ConfigError(const std::string& message) : Error(ErrorCategory::usage, "ConfigError", message) {}
};

class TransportFailure : public Error
{
  public:
    TransportFailure(int rank, const std::string& reason)
        : Error(ErrorCategory::data,
                "TransportFailure",
                "transport failure on rank " + std::to_string(rank) + ": " + reason),
          rank_(rank)
    {
    }

    int rank() const noexcept { return rank_; }

  private:
    int rank_;
};

class SizeMismatch : public Error
{
  public:
    explicit SizeMismatch(const std::string& message)
        : Error(ErrorCategory::usage, "SizeMismatch", message)
    {
    }
};

}  // namespace gwasgls
