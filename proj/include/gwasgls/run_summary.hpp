#pragma once

#include <cstdint>
#include <string>

namespace gwasgls
{

/// Outcome of one solver run, serialized as a single line of key=value
/// pairs for the bench harness.
struct RunSummary
{
    std::string mode;
    std::uint64_t n = 0;
    std::uint64_t m = 0;
    std::uint64_t p = 0;
    std::uint64_t m_blk = 0;
    int np = 1;
    int threads = 1;
    std::string transport = "none";
    bool emit_s_inv = false;
    std::uint64_t mem_budget = 0;  // 0: unlimited

    // Wall-clock seconds. prepare, compute, io_wait and redistribute are
    // disjoint phases; stream covers the whole block loop.
    double wall_total = 0.0;
    double prepare = 0.0;
    double compute = 0.0;
    double io_wait = 0.0;
    double redistribute = 0.0;
    double stream = 0.0;

    std::uint64_t blocks = 0;
    std::uint64_t bytes_read = 0;
    std::uint64_t bytes_written = 0;
    std::uint64_t buffer_regions = 0;
    std::uint64_t buffer_bytes = 0;
    std::uint64_t peak_resident_bytes = 0;
    /// Transport bytes observed across the zero-copy view steps.
    std::uint64_t view_bytes = 0;
    std::uint64_t transport_bytes = 0;

    std::string to_record() const;
    /// Throws InvalidInput on malformed records or unknown keys.
    static RunSummary from_record(const std::string& line);
};

}  // namespace gwasgls
