#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "gwasgls/pipeline/pipeline.hpp"

namespace gwasgls::datagen
{

/// xoshiro256** seeded through splitmix64. Every random quantity in a
/// generated dataset comes from one stream in a fixed order, so equal specs
/// give byte-identical files.
class Xoshiro256
{
  public:
    explicit Xoshiro256(std::uint64_t seed);

    std::uint64_t next() noexcept;
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    /// Uniform integer in [0, bound), by rejection.
    std::uint64_t below(std::uint64_t bound) noexcept;
    /// Standard normal by the Marsaglia polar method.
    double normal() noexcept;

  private:
    std::uint64_t s_[4];
    std::optional<double> spare_;
};

struct GenSpec
{
    std::uint64_t n = 100;
    std::uint64_t m = 500;
    std::uint64_t p = 4;
    std::uint64_t seed = 42;
    double maf_lo = 0.05;
    double maf_hi = 0.5;
    double ridge = 1.0;
    std::uint64_t planted = 5;
    double effect = 1.0;
    /// SNP indices overwritten with a constant-zero column / a copy of the
    /// intercept, for degeneracy tests.
    std::optional<std::uint64_t> zero_snp;
    std::optional<std::uint64_t> intercept_snp;

    /// Throws InvalidInput when the spec violates its ranges.
    void validate() const;
};

struct DatasetPaths
{
    std::filesystem::path covariance;
    std::filesystem::path covariates;
    std::filesystem::path phenotype;
    std::filesystem::path genotypes;
    std::filesystem::path planted;

    static DatasetPaths in(const std::filesystem::path& dir);
    pipeline::RunPaths run_paths(const std::filesystem::path& output) const;
};

struct GeneratedDataset
{
    DatasetPaths paths;
    std::vector<std::uint64_t> planted;
};

/// Writes cov.gwam, covariates.gwac, pheno.gway, geno.gwax and planted.txt.
///
/// Genotypes are dosages in {0,1,2} (two Bernoulli draws at a per-SNP allele
/// frequency from [maf_lo, maf_hi]); covariates are an intercept plus p-2
/// standard normal columns; the phenotype carries the covariates, the
/// standardized planted SNPs times `effect`, and unit normal noise; and
/// M = G G^T / m + ridge * I, which is SPD for any ridge > 0.
GeneratedDataset gen_dataset(const GenSpec& spec, const std::filesystem::path& out_dir);

inline constexpr std::uint64_t oracle_max_n = 500;
inline constexpr std::uint64_t oracle_max_m = 5000;

/// SNP-by-SNP evaluation of the GLS formula with nothing hoisted but the LU
/// of M. Desk-scale only; larger inputs raise ConfigError.
void oracle_solve_all(const pipeline::RunPaths& paths, bool emit_s_inv = false);

struct CompareReport
{
    std::uint64_t m = 0;
    std::uint64_t compared = 0;
    std::uint64_t degenerate = 0;
    std::uint64_t status_mismatches = 0;
    double max_relative = 0.0;
    std::uint64_t worst_snp = 0;

    bool within(double tol) const noexcept { return status_mismatches == 0 && max_relative <= tol; }
};

/// Max over SNPs that are ok in both files of
/// ||b_a - b_b||_inf / max(||b_a||_inf, ||b_b||_inf), plus status mismatches.
CompareReport compare_results(const std::filesystem::path& a, const std::filesystem::path& b);

}  // namespace gwasgls::datagen
