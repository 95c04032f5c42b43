#include "gwasgls/pipeline/pipeline.hpp"

#include <chrono>
#include <string>

#include "gwasgls/error.hpp"
#include "gwasgls/io/format.hpp"
#include "gwasgls/kernel/gls.hpp"

namespace gwasgls::pipeline
{
namespace
{

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Inputs
{
    kernel::CovarianceMatrix m;
    kernel::DesignLeft xl;
    kernel::Phenotype y;
    std::uint64_t snps = 0;
    std::uint64_t bytes = 0;
};

Inputs load_inputs(const RunPaths& paths)
{
    Inputs in{io::read_covariance(paths.covariance), io::read_covariates(paths.covariates),
              io::read_phenotype(paths.phenotype)};
    const io::FileHeader geno = io::read_header(paths.genotypes, io::FileKind::genotypes);
    const auto n = static_cast<std::uint64_t>(in.m.n());
    if (static_cast<std::uint64_t>(in.xl.n()) != n || static_cast<std::uint64_t>(in.y.n()) != n
        || geno.dims[0] != n)
    {
        throw DimensionMismatch("input files disagree on n: covariance " + std::to_string(n) + ", covariates "
                                + std::to_string(in.xl.n()) + ", phenotype " + std::to_string(in.y.n())
                                + ", genotypes " + std::to_string(geno.dims[0]));
    }
    in.snps = geno.dims[1];
    in.bytes = std::filesystem::file_size(paths.covariance) + std::filesystem::file_size(paths.covariates)
               + std::filesystem::file_size(paths.phenotype);
    return in;
}

void check_config(const RunConfig& cfg)
{
    if (cfg.block_size < 1)
    {
        throw ConfigError("block size must be at least 1");
    }
    if (cfg.threads < 1)
    {
        throw ConfigError("thread count must be at least 1");
    }
}

RunSummary base_summary(const char* mode, const Inputs& in, const RunConfig& cfg)
{
    RunSummary s;
    s.mode = mode;
    s.n = static_cast<std::uint64_t>(in.m.n());
    s.m = in.snps;
    s.p = static_cast<std::uint64_t>(in.xl.p());
    s.threads = cfg.threads;
    s.emit_s_inv = cfg.emit_s_inv;
    s.mem_budget = cfg.memory_budget.value_or(0);
    return s;
}

// Covariance, its factor, and O(np) covariate state on top of the buffers.
std::uint64_t resident_estimate(std::uint64_t n, std::uint64_t p, std::uint64_t buffer_bytes)
{
    return 2 * n * n * sizeof(double) + 3 * n * p * sizeof(double) + buffer_bytes;
}

}  // namespace

BlockPlan block_plan(std::uint64_t m, std::uint64_t m_blk)
{
    if (m < 1 || m_blk < 1)
    {
        throw ConfigError("block_plan needs m >= 1 and m_blk >= 1");
    }
    BlockPlan plan{m, m_blk, {}};
    plan.blocks.reserve(static_cast<std::size_t>((m + m_blk - 1) / m_blk));
    for (std::uint64_t first = 0; first < m; first += m_blk)
    {
        plan.blocks.push_back({first, std::min(m_blk, m - first)});
    }
    return plan;
}

BufferPair::BufferPair(Index n, Index capacity, Index p, bool with_s_inv)
    : regions_{std::make_unique<BufferRegion>(n, capacity, p, with_s_inv),
               std::make_unique<BufferRegion>(n, capacity, p, with_s_inv)}
{
}

std::uint64_t BufferPair::required_bytes(Index n, Index capacity, Index p, bool with_s_inv)
{
    const Index record = p + (with_s_inv ? kernel::packed_size(p) : 0);
    return 2 * static_cast<std::uint64_t>(capacity) * static_cast<std::uint64_t>(n + record) * sizeof(double);
}

RunSummary run_ooc(const RunPaths& paths, const RunConfig& cfg)
{
    const auto t_start = Clock::now();
    check_config(cfg);
    const Inputs in = load_inputs(paths);
    RunSummary s = base_summary("ooc", in, cfg);

    const Index n = in.m.n();
    const Index p = in.xl.p();
    const BlockPlan plan = block_plan(in.snps, cfg.block_size);
    const auto capacity = static_cast<Index>(std::min(cfg.block_size, in.snps));
    s.m_blk = cfg.block_size;
    s.blocks = plan.blocks.size();

    const std::uint64_t needed = BufferPair::required_bytes(n, capacity, p, cfg.emit_s_inv);
    if (cfg.memory_budget && needed > *cfg.memory_budget)
    {
        throw ConfigError("two block regions need " + std::to_string(needed) + " bytes, budget is "
                          + std::to_string(*cfg.memory_budget));
    }

    io::create_result_file(paths.output, {in.snps, static_cast<std::uint64_t>(p), cfg.emit_s_inv});

    auto t = Clock::now();
    const kernel::PreparedContext ctx = kernel::gls_prepare(in.m, in.xl, in.y);
    s.prepare = seconds_since(t);

    const kernel::SolveOptions opts{cfg.threads, cfg.emit_s_inv};
    // Regions outlive the agents: agents drain before the buffers go away.
    BufferPair buffers(n, capacity, p, cfg.emit_s_inv);
    s.buffer_regions = 2;
    s.buffer_bytes = buffers.bytes();
    {
        io::BlockReader reader(paths.genotypes);
        io::BlockWriter writer(paths.output);

        const auto t_stream = Clock::now();
        const auto& blocks = plan.blocks;
        io::IoTicket load = reader.read_block_start(blocks[0].first, static_cast<Index>(blocks[0].count),
                                                    buffers.current().genotypes);
        io::IoTicket store;
        for (std::size_t b = 0; b < blocks.size(); ++b)
        {
            const Index count = static_cast<Index>(blocks[b].count);
            t = Clock::now();
            reader.read_block_wait(std::move(load));
            s.io_wait += seconds_since(t);
            if (b + 1 < blocks.size())
            {
                load = reader.read_block_start(blocks[b + 1].first, static_cast<Index>(blocks[b + 1].count),
                                               buffers.next().genotypes);
            }

            BufferRegion& region = buffers.current();
            if (region.genotypes.token().held() || region.results.token().held())
            {
                throw std::logic_error("compute region is still owned by an in-flight transfer");
            }
            t = Clock::now();
            kernel::ResultBlock& out = region.results.block();
            out.reset(blocks[b].first, count);
            kernel::gls_solve_block_in_place(ctx, region.genotypes.columns(count), out, opts);
            s.compute += seconds_since(t);

            if (b > 0)
            {
                t = Clock::now();
                writer.write_block_wait(std::move(store));
                s.io_wait += seconds_since(t);
            }
            store = writer.write_block_start(region.results);
            buffers.swap();
        }
        t = Clock::now();
        writer.write_block_wait(std::move(store));
        s.io_wait += seconds_since(t);
        s.stream = seconds_since(t_stream);
        s.bytes_read = in.bytes + reader.bytes_read();
        s.bytes_written = io::header_size(io::FileKind::results) + writer.bytes_written();
    }
    s.peak_resident_bytes = resident_estimate(s.n, s.p, s.buffer_bytes);
    s.wall_total = seconds_since(t_start);
    return s;
}

RunSummary run_incore(const RunPaths& paths, const RunConfig& cfg)
{
    const auto t_start = Clock::now();
    check_config(cfg);
    const Inputs in = load_inputs(paths);
    RunSummary s = base_summary("incore", in, cfg);

    const Index n = in.m.n();
    const Index p = in.xl.p();
    const auto m = static_cast<Index>(in.snps);
    s.m_blk = in.snps;
    s.blocks = 1;

    const Index record = p + (cfg.emit_s_inv ? kernel::packed_size(p) : 0);
    const std::uint64_t needed = static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(n + record) * sizeof(double);
    if (cfg.memory_budget && needed > *cfg.memory_budget)
    {
        throw ConfigError("in-core run needs " + std::to_string(needed) + " bytes of block storage, budget is "
                          + std::to_string(*cfg.memory_budget));
    }

    io::create_result_file(paths.output, {in.snps, static_cast<std::uint64_t>(p), cfg.emit_s_inv});

    auto t = Clock::now();
    const kernel::PreparedContext ctx = kernel::gls_prepare(in.m, in.xl, in.y);
    s.prepare = seconds_since(t);

    BufferRegion region(n, m, p, cfg.emit_s_inv);
    s.buffer_regions = 1;
    s.buffer_bytes = region.bytes();
    {
        io::BlockReader reader(paths.genotypes);
        io::BlockWriter writer(paths.output);
        const auto t_stream = Clock::now();

        t = Clock::now();
        reader.read_block_wait(reader.read_block_start(0, m, region.genotypes));
        s.io_wait += seconds_since(t);

        t = Clock::now();
        kernel::ResultBlock& out = region.results.block();
        out.reset(0, m);
        kernel::gls_solve_block_in_place(ctx, region.genotypes.columns(m), out, {cfg.threads, cfg.emit_s_inv});
        s.compute = seconds_since(t);

        t = Clock::now();
        writer.write_block_wait(writer.write_block_start(region.results));
        s.io_wait += seconds_since(t);
        s.stream = seconds_since(t_stream);
        s.bytes_read = in.bytes + reader.bytes_read();
        s.bytes_written = io::header_size(io::FileKind::results) + writer.bytes_written();
    }
    s.peak_resident_bytes = resident_estimate(s.n, s.p, s.buffer_bytes);
    s.wall_total = seconds_since(t_start);
    return s;
}

}  // namespace gwasgls::pipeline
