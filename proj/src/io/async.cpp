#include "gwasgls/io/async.hpp"

#include <string>

#include "gwasgls/error.hpp"

namespace gwasgls::io
{

void OwnershipToken::acquire(const char* what)
{
    bool expected = false;
    if (!held_.compare_exchange_strong(expected, true, std::memory_order_acq_rel))
    {
        throw OverlappingBuffer(std::string(what) + ": buffer is already owned by an in-flight transfer");
    }
}

namespace
{

std::atomic<std::uint64_t> g_live_bytes{0};
std::atomic<std::uint64_t> g_peak_bytes{0};
std::atomic<std::uint64_t> g_live_regions{0};
std::atomic<std::uint64_t> g_peak_regions{0};

void raise_to(std::atomic<std::uint64_t>& peak, std::uint64_t now) noexcept
{
    std::uint64_t seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now))
    {
    }
}

}  // namespace

std::uint64_t BufferAccounting::live_bytes() noexcept { return g_live_bytes.load(); }
std::uint64_t BufferAccounting::peak_bytes() noexcept { return g_peak_bytes.load(); }
std::uint64_t BufferAccounting::live_regions() noexcept { return g_live_regions.load(); }
std::uint64_t BufferAccounting::peak_regions() noexcept { return g_peak_regions.load(); }

void BufferAccounting::reset_peak() noexcept
{
    g_peak_bytes.store(g_live_bytes.load());
    g_peak_regions.store(g_live_regions.load());
}

void BufferAccounting::add(std::uint64_t bytes, bool region) noexcept
{
    raise_to(g_peak_bytes, g_live_bytes.fetch_add(bytes) + bytes);
    if (region)
    {
        raise_to(g_peak_regions, ++g_live_regions);
    }
}

void BufferAccounting::remove(std::uint64_t bytes, bool region) noexcept
{
    g_live_bytes.fetch_sub(bytes);
    if (region)
    {
        --g_live_regions;
    }
}

GenotypeBuffer::GenotypeBuffer(Index n, Index capacity)
    : n_(n), capacity_(capacity), storage_(static_cast<std::size_t>(n * capacity))
{
    BufferAccounting::add(bytes(), true);
}

GenotypeBuffer::~GenotypeBuffer() { BufferAccounting::remove(bytes(), true); }

Eigen::Map<Matrix> GenotypeBuffer::columns(Index count)
{
    if (count > capacity_)
    {
        throw DimensionMismatch("requested " + std::to_string(count) + " columns from a buffer of "
                                + std::to_string(capacity_));
    }
    return {storage_.data(), n_, count};
}

ResultBuffer::ResultBuffer(Index p, bool with_s_inv, Index capacity)
    : capacity_(capacity), block_(p, with_s_inv, capacity)
{
    block_.reset(0, capacity);
    BufferAccounting::add(bytes());
}

ResultBuffer::~ResultBuffer() { BufferAccounting::remove(bytes()); }

IoAgent::IoAgent() : worker_([this] { run(); }) {}

IoAgent::~IoAgent()
{
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    cv_.notify_all();
    worker_.join();
}

std::future<void> IoAgent::submit(std::function<void()> task)
{
    std::packaged_task<void()> job(std::move(task));
    auto fut = job.get_future();
    {
        std::lock_guard lock(mutex_);
        queue_.push_back(std::move(job));
    }
    cv_.notify_one();
    return fut;
}

void IoAgent::run()
{
    for (;;)
    {
        std::packaged_task<void()> job;
        {
            std::unique_lock lock(mutex_);
            cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            if (queue_.empty())
            {
                return;
            }
            job = std::move(queue_.front());
            queue_.pop_front();
        }
        job();
    }
}

BlockReader::BlockReader(const std::filesystem::path& genotypes) : file_(genotypes, File::Mode::read)
{
    const std::uint64_t size = file_.size();
    std::vector<std::byte> head(std::min<std::uint64_t>(size, header_size(FileKind::genotypes)));
    file_.read_at(0, head);
    const FileHeader h = FileHeader::decode(head, FileKind::genotypes);
    n_ = static_cast<Index>(h.dims[0]);
    m_ = h.dims[1];
    payload_offset_ = h.size_bytes();
}

IoTicket BlockReader::read_block_start(std::uint64_t first, Index count, GenotypeBuffer& buffer)
{
    if (count < 1 || first + static_cast<std::uint64_t>(count) > m_)
    {
        throw DimensionMismatch("block [" + std::to_string(first) + ", " + std::to_string(first + count)
                                + ") outside the " + std::to_string(m_) + " SNPs on file");
    }
    if (buffer.n() != n_ || count > buffer.capacity())
    {
        throw DimensionMismatch("genotype buffer cannot hold the requested block");
    }
    buffer.token().acquire("read_block_start");
    IoTicket t;
    t.owner_ = &buffer.token();
    t.buffer_ = &buffer;
    t.first_index_ = first;
    t.count_ = count;
    const std::uint64_t offset = payload_offset_ + first * static_cast<std::uint64_t>(n_) * sizeof(double);
    const std::size_t bytes = static_cast<std::size_t>(n_ * count) * sizeof(double);
    double* target = buffer.data();
    t.done_ = agent_.submit([this, offset, bytes, target] {
        file_.read_at(offset, {reinterpret_cast<std::byte*>(target), bytes});
        bytes_read_ += bytes;
    });
    return t;
}

kernel::SnpBlock BlockReader::read_block_wait(IoTicket&& ticket)
{
    if (!ticket.valid())
    {
        throw std::logic_error("read_block_wait on an empty ticket");
    }
    IoTicket t = std::move(ticket);
    auto* buffer = static_cast<GenotypeBuffer*>(t.buffer_);
    try
    {
        t.done_.get();
    }
    catch (...)
    {
        t.owner_->release();
        throw;
    }
    t.owner_->release();
    return kernel::SnpBlock{t.first_index_, Eigen::Map<const Matrix>(buffer->data(), n_, t.count_)};
}

BlockWriter::BlockWriter(const std::filesystem::path& results)
    : file_(results, File::Mode::write_existing), info_(read_result_info(results))
{
}

IoTicket BlockWriter::write_block_start(ResultBuffer& buffer)
{
    const kernel::ResultBlock& blk = buffer.block();
    if (static_cast<std::uint64_t>(blk.p()) != info_.p || blk.with_s_inv() != info_.with_s_inv)
    {
        throw DimensionMismatch("result block layout does not match the results file");
    }
    if (blk.first_index() + static_cast<std::uint64_t>(blk.count()) > info_.m)
    {
        throw DimensionMismatch("result block extends past m");
    }
    buffer.token().acquire("write_block_start");
    IoTicket t;
    t.owner_ = &buffer.token();
    t.buffer_ = &buffer;
    t.first_index_ = blk.first_index();
    t.count_ = blk.count();
    const std::uint64_t offset = info_.record_offset(blk.first_index());
    const auto recs = blk.records();
    t.done_ = agent_.submit([this, offset, recs] {
        file_.write_at(offset, std::as_bytes(recs));
        bytes_written_ += recs.size_bytes();
    });
    return t;
}

void BlockWriter::write_block_wait(IoTicket&& ticket)
{
    if (!ticket.valid())
    {
        throw std::logic_error("write_block_wait on an empty ticket");
    }
    IoTicket t = std::move(ticket);
    try
    {
        t.done_.get();
    }
    catch (...)
    {
        t.owner_->release();
        throw;
    }
    t.owner_->release();
}

}  // namespace gwasgls::io
