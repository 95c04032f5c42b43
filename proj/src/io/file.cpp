#include "gwasgls/io/file.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <string>

#include "gwasgls/error.hpp"

namespace gwasgls::io
{
namespace
{

std::string errno_text() { return std::strerror(errno); }

}  // namespace

File::File(const std::filesystem::path& path, Mode mode) : path_(path)
{
    int flags = O_CLOEXEC;
    switch (mode)
    {
        case Mode::read: flags |= O_RDONLY; break;
        case Mode::write_existing: flags |= O_WRONLY; break;
        case Mode::create_truncate: flags |= O_RDWR | O_CREAT | O_TRUNC; break;
    }
    fd_ = ::open(path.c_str(), flags, 0644);
    if (fd_ < 0)
    {
        throw IoFailure("cannot open " + path.string() + ": " + errno_text());
    }
}

File::~File()
{
    if (fd_ >= 0)
    {
        ::close(fd_);
    }
}

File::File(File&& other) noexcept : fd_(other.fd_), path_(std::move(other.path_)) { other.fd_ = -1; }

File& File::operator=(File&& other) noexcept
{
    if (this != &other)
    {
        if (fd_ >= 0)
        {
            ::close(fd_);
        }
        fd_ = other.fd_;
        path_ = std::move(other.path_);
        other.fd_ = -1;
    }
    return *this;
}

std::uint64_t File::size() const
{
    struct stat st{};
    if (::fstat(fd_, &st) != 0)
    {
        throw IoFailure("cannot stat " + path_.string() + ": " + errno_text());
    }
    return static_cast<std::uint64_t>(st.st_size);
}

void File::resize(std::uint64_t bytes)
{
    if (::ftruncate(fd_, static_cast<off_t>(bytes)) != 0)
    {
        throw IoFailure("cannot resize " + path_.string() + ": " + errno_text());
    }
}

void File::read_at(std::uint64_t offset, std::span<std::byte> out) const
{
    std::size_t done = 0;
    while (done < out.size())
    {
        const ssize_t got = ::pread(fd_, out.data() + done, out.size() - done, static_cast<off_t>(offset + done));
        if (got < 0)
        {
            if (errno == EINTR)
            {
                continue;
            }
            throw IoFailure("read failed on " + path_.string() + ": " + errno_text());
        }
        if (got == 0)
        {
            throw TruncatedFile(path_.string() + ": expected " + std::to_string(out.size()) + " bytes at offset "
                                + std::to_string(offset) + ", file ends after " + std::to_string(done));
        }
        done += static_cast<std::size_t>(got);
    }
}

void File::write_at(std::uint64_t offset, std::span<const std::byte> data)
{
    std::size_t done = 0;
    while (done < data.size())
    {
        const ssize_t put =
            ::pwrite(fd_, data.data() + done, data.size() - done, static_cast<off_t>(offset + done));
        if (put < 0)
        {
            if (errno == EINTR)
            {
                continue;
            }
            throw ShortWrite("write failed on " + path_.string() + ": " + errno_text());
        }
        if (put == 0)
        {
            throw ShortWrite("no progress writing " + path_.string());
        }
        done += static_cast<std::size_t>(put);
    }
}

}  // namespace gwasgls::io
