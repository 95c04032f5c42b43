#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "gwasgls/io/async.hpp"
#include "gwasgls/run_summary.hpp"

namespace gwasgls::pipeline
{

inline constexpr std::uint64_t default_block_size = 5000;

struct BlockRange
{
    std::uint64_t first = 0;
    std::uint64_t count = 0;

    friend bool operator==(const BlockRange&, const BlockRange&) = default;
};

struct BlockPlan
{
    std::uint64_t m = 0;
    std::uint64_t m_blk = 0;
    std::vector<BlockRange> blocks;
};

/// Contiguous partition of [0, m) into blocks of m_blk; the last block holds
/// the remainder.
BlockPlan block_plan(std::uint64_t m, std::uint64_t m_blk);

struct RunPaths
{
    std::filesystem::path covariance;
    std::filesystem::path covariates;
    std::filesystem::path phenotype;
    std::filesystem::path genotypes;
    std::filesystem::path output;
};

struct RunConfig
{
    std::uint64_t block_size = default_block_size;
    int threads = 1;
    bool emit_s_inv = false;
    /// Cap on block-buffer bytes; unset means unlimited.
    std::optional<std::uint64_t> memory_budget;
};

/// One input region plus its output region.
struct BufferRegion
{
    BufferRegion(Index n, Index capacity, Index p, bool with_s_inv)
        : genotypes(n, capacity), results(p, with_s_inv, capacity)
    {
    }

    io::GenotypeBuffer genotypes;
    io::ResultBuffer results;

    std::uint64_t bytes() const noexcept { return genotypes.bytes() + results.bytes(); }
};

/// The two equal memory regions of the double-buffered loop.
class BufferPair
{
  public:
    BufferPair(Index n, Index capacity, Index p, bool with_s_inv);

    BufferRegion& current() noexcept { return *regions_[current_]; }
    BufferRegion& next() noexcept { return *regions_[1 - current_]; }
    void swap() noexcept { current_ = 1 - current_; }
    std::uint64_t bytes() const noexcept { return regions_[0]->bytes() + regions_[1]->bytes(); }

    /// Bytes that two regions of this shape would occupy.
    static std::uint64_t required_bytes(Index n, Index capacity, Index p, bool with_s_inv);

  private:
    std::array<std::unique_ptr<BufferRegion>, 2> regions_;
    int current_ = 0;
};

/// Double-buffered out-of-core solve: one prepare, then blocks are loaded,
/// solved and stored with transfers overlapping compute.
RunSummary run_ooc(const RunPaths& paths, const RunConfig& cfg);

/// Whole genotype matrix in memory, solved as a single block.
RunSummary run_incore(const RunPaths& paths, const RunConfig& cfg);

}  // namespace gwasgls::pipeline
