#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

namespace gwasgls::io
{

/// Owned POSIX descriptor with offset-addressed transfers.
class File
{
  public:
    enum class Mode
    {
        read,
        write_existing,
        create_truncate,
    };

    File() = default;
    File(const std::filesystem::path& path, Mode mode);
    ~File();

    File(File&& other) noexcept;
    File& operator=(File&& other) noexcept;
    File(const File&) = delete;
    File& operator=(const File&) = delete;

    bool is_open() const noexcept { return fd_ >= 0; }
    const std::filesystem::path& path() const noexcept { return path_; }

    std::uint64_t size() const;
    void resize(std::uint64_t bytes);

    /// Reads exactly `out.size()` bytes or throws TruncatedFile.
    void read_at(std::uint64_t offset, std::span<std::byte> out) const;
    /// Writes all bytes or throws ShortWrite.
    void write_at(std::uint64_t offset, std::span<const std::byte> data);

  private:
    int fd_ = -1;
    std::filesystem::path path_;
};

}  // namespace gwasgls::io
