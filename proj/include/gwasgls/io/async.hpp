#pragma once

// Asynchronous block transfers. Each direction owns one I/O agent (a worker
// thread draining a FIFO), so loads and stores proceed while the caller
// computes. A buffer handed to a start call belongs to the in-flight ticket
// until the matching wait returns; handing it out twice is rejected.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <mutex>
#include <thread>
#include <vector>

#include "gwasgls/io/file.hpp"
#include "gwasgls/io/format.hpp"
#include "gwasgls/kernel/types.hpp"

namespace gwasgls::io
{

/// Single-holder flag marking a buffer as lent to an in-flight transfer.
class OwnershipToken
{
  public:
    /// Throws OverlappingBuffer when already held.
    void acquire(const char* what);
    void release() noexcept { held_.store(false, std::memory_order_release); }
    bool held() const noexcept { return held_.load(std::memory_order_acquire); }

  private:
    std::atomic<bool> held_{false};
};

/// Process-wide accounting of live block-buffer bytes (genotype and
/// result buffers), so harnesses can check allocation bounds. A region is
/// one genotype buffer; its result buffer only adds bytes.
struct BufferAccounting
{
    static std::uint64_t live_bytes() noexcept;
    static std::uint64_t peak_bytes() noexcept;
    static std::uint64_t live_regions() noexcept;
    static std::uint64_t peak_regions() noexcept;
    /// Resets both peaks to the current live totals.
    static void reset_peak() noexcept;

    static void add(std::uint64_t bytes, bool region = false) noexcept;
    static void remove(std::uint64_t bytes, bool region = false) noexcept;
};

/// One n x capacity region for genotype columns.
class GenotypeBuffer
{
  public:
    GenotypeBuffer(Index n, Index capacity);
    ~GenotypeBuffer();
    GenotypeBuffer(const GenotypeBuffer&) = delete;
    GenotypeBuffer& operator=(const GenotypeBuffer&) = delete;

    Index n() const noexcept { return n_; }
    Index capacity() const noexcept { return capacity_; }
    std::uint64_t bytes() const noexcept { return storage_.size() * sizeof(double); }

    /// Leading `count` columns. Callers must not use this while a ticket
    /// holds the buffer.
    Eigen::Map<Matrix> columns(Index count);
    double* data() noexcept { return storage_.data(); }

    OwnershipToken& token() noexcept { return token_; }
    const OwnershipToken& token() const noexcept { return token_; }

  private:
    Index n_;
    Index capacity_;
    std::vector<double> storage_;
    OwnershipToken token_;
};

/// One output region: a result block in record layout.
class ResultBuffer
{
  public:
    ResultBuffer(Index p, bool with_s_inv, Index capacity);
    ~ResultBuffer();
    ResultBuffer(const ResultBuffer&) = delete;
    ResultBuffer& operator=(const ResultBuffer&) = delete;

    kernel::ResultBlock& block() noexcept { return block_; }
    const kernel::ResultBlock& block() const noexcept { return block_; }
    std::uint64_t bytes() const noexcept
    {
        return static_cast<std::uint64_t>(capacity_ * block_.record_length()) * sizeof(double);
    }

    OwnershipToken& token() noexcept { return token_; }

  private:
    Index capacity_;
    kernel::ResultBlock block_;
    OwnershipToken token_;
};

/// FIFO worker thread. Tasks run in submission order.
class IoAgent
{
  public:
    IoAgent();
    /// Drains every queued task before returning.
    ~IoAgent();

    IoAgent(const IoAgent&) = delete;
    IoAgent& operator=(const IoAgent&) = delete;

    std::future<void> submit(std::function<void()> task);

  private:
    void run();

    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::packaged_task<void()>> queue_;
    bool stopping_ = false;
    std::thread worker_;
};

/// Handle for one in-flight transfer. Move-only; consumed by its wait.
class IoTicket
{
  public:
    IoTicket() = default;
    IoTicket(IoTicket&&) noexcept = default;
    IoTicket& operator=(IoTicket&&) noexcept = default;

    bool valid() const noexcept { return done_.valid(); }
    std::uint64_t first_index() const noexcept { return first_index_; }
    Index count() const noexcept { return count_; }
    const void* buffer() const noexcept { return buffer_; }

  private:
    friend class BlockReader;
    friend class BlockWriter;

    std::future<void> done_;
    OwnershipToken* owner_ = nullptr;
    void* buffer_ = nullptr;
    std::uint64_t first_index_ = 0;
    Index count_ = 0;
};

/// Loader for a genotype file.
class BlockReader
{
  public:
    explicit BlockReader(const std::filesystem::path& genotypes);

    Index n() const noexcept { return n_; }
    std::uint64_t m() const noexcept { return m_; }
    std::uint64_t bytes_read() const noexcept { return bytes_read_.load(); }

    /// Queues a read of columns [first, first + count) into `buffer` and
    /// returns immediately. Throws DimensionMismatch for an out-of-range
    /// request and OverlappingBuffer when the buffer is already lent.
    IoTicket read_block_start(std::uint64_t first, Index count, GenotypeBuffer& buffer);

    /// Blocks until the read finished; rethrows its failure (for example
    /// TruncatedFile). The returned view aliases the buffer.
    kernel::SnpBlock read_block_wait(IoTicket&& ticket);

  private:
    File file_;
    Index n_ = 0;
    std::uint64_t m_ = 0;
    std::uint64_t payload_offset_ = 0;
    std::atomic<std::uint64_t> bytes_read_{0};
    IoAgent agent_;
};

/// Storer for a results file whose header was already written.
class BlockWriter
{
  public:
    explicit BlockWriter(const std::filesystem::path& results);

    const ResultFileInfo& info() const noexcept { return info_; }
    std::uint64_t bytes_written() const noexcept { return bytes_written_.load(); }

    /// Queues the block's records at their SNP-index offsets.
    IoTicket write_block_start(ResultBuffer& buffer);
    void write_block_wait(IoTicket&& ticket);

  private:
    File file_;
    ResultFileInfo info_;
    std::atomic<std::uint64_t> bytes_written_{0};
    IoAgent agent_;
};

}  // namespace gwasgls::io
