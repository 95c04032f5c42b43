#pragma once

// Binary file formats.
//
// Every file starts with a 4-byte ASCII magic, a little-endian u32 version
// (always 1) and a kind-specific list of little-endian u64 dimensions:
//
//   GWAM  covariance   n
//   GWAX  genotypes    n, m
//   GWAC  covariates   n, p-1
//   GWAY  phenotype    n
//   GWAB  results      m, p, flags      (flags bit 0: S^-1 present)
//
// The payload follows with no padding: column-major IEEE-754 binary64 in
// little-endian byte order. A results payload is m fixed-size records, one
// per SNP: beta (p reals) then, when flagged, the packed lower triangle of
// S^-1 (p(p+1)/2 reals). Degenerate SNPs are stored as all-NaN records.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "gwasgls/kernel/types.hpp"

namespace gwasgls::io
{

inline constexpr std::uint32_t format_version = 1;

enum class FileKind
{
    covariance,
    genotypes,
    covariates,
    phenotype,
    results,
};

std::array<char, 4> magic_of(FileKind kind) noexcept;
std::string_view kind_name(FileKind kind) noexcept;
std::size_t dim_count(FileKind kind) noexcept;

struct FileHeader
{
    FileKind kind = FileKind::covariance;
    std::uint32_t version = format_version;
    std::vector<std::uint64_t> dims;

    std::size_t size_bytes() const noexcept { return 8 + 8 * dims.size(); }
    std::vector<std::byte> encode() const;
    /// Validates magic, version and dimensions against the expected kind.
    static FileHeader decode(std::span<const std::byte> bytes, FileKind expected);
};

inline std::size_t header_size(FileKind kind) noexcept { return 8 + 8 * dim_count(kind); }

FileHeader read_header(const std::filesystem::path& path, FileKind expected);

/// Matrix payloads for every kind except results. A phenotype payload is a
/// single column.
void write_matrix(const std::filesystem::path& path, FileKind kind, ConstMatrixRef payload);
Matrix read_matrix(const std::filesystem::path& path, FileKind kind);

void write_covariance(const std::filesystem::path& path, const kernel::CovarianceMatrix& m);
kernel::CovarianceMatrix read_covariance(const std::filesystem::path& path);
void write_covariates(const std::filesystem::path& path, const kernel::DesignLeft& xl);
kernel::DesignLeft read_covariates(const std::filesystem::path& path);
void write_phenotype(const std::filesystem::path& path, const kernel::Phenotype& y);
kernel::Phenotype read_phenotype(const std::filesystem::path& path);

struct ResultFileInfo
{
    std::uint64_t m = 0;
    std::uint64_t p = 0;
    bool with_s_inv = false;

    std::uint64_t flags() const noexcept { return with_s_inv ? 1u : 0u; }
    std::uint64_t record_length() const noexcept;
    std::uint64_t record_bytes() const noexcept { return 8 * record_length(); }
    std::uint64_t header_bytes() const noexcept { return header_size(FileKind::results); }
    std::uint64_t record_offset(std::uint64_t snp_index) const noexcept
    {
        return header_bytes() + snp_index * record_bytes();
    }
};

ResultFileInfo read_result_info(const std::filesystem::path& path);

/// Writes the header and sizes the file for all m records (zero-filled
/// until written).
void create_result_file(const std::filesystem::path& path, const ResultFileInfo& info);

/// Synchronous offset-addressed write of one block's records.
void write_results(const std::filesystem::path& path, const kernel::ResultBlock& block);

/// Whole results file in memory.
struct ResultSet
{
    ResultFileInfo info;
    /// record_length x m, one column per SNP.
    Matrix records;

    kernel::SnpStatus status(Index k) const;
    Eigen::VectorXd beta(Index k) const { return records.col(k).head(static_cast<Index>(info.p)); }
    kernel::SnpResult at(Index k) const;
};

ResultSet read_results(const std::filesystem::path& path);

}  // namespace gwasgls::io
