#include "gwasgls/io/format.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "gwasgls/error.hpp"
#include "gwasgls/io/file.hpp"

namespace gwasgls::io
{

static_assert(std::endian::native == std::endian::little, "payloads are memcpy'd as little-endian binary64");

namespace
{

void put_u32(std::vector<std::byte>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
    {
        out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffu));
    }
}

void put_u64(std::vector<std::byte>& out, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i)
    {
        out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffu));
    }
}

std::uint64_t get_le(std::span<const std::byte> bytes, std::size_t offset, std::size_t width)
{
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i)
    {
        v |= static_cast<std::uint64_t>(bytes[offset + i]) << (8 * i);
    }
    return v;
}

std::span<const std::byte> as_bytes(const double* data, std::size_t count)
{
    return {reinterpret_cast<const std::byte*>(data), count * sizeof(double)};
}

std::span<std::byte> as_writable_bytes(double* data, std::size_t count)
{
    return {reinterpret_cast<std::byte*>(data), count * sizeof(double)};
}

// Shape of the payload described by a non-results header.
std::pair<Index, Index> payload_shape(const FileHeader& h)
{
    switch (h.kind)
    {
        case FileKind::covariance: return {static_cast<Index>(h.dims[0]), static_cast<Index>(h.dims[0])};
        case FileKind::genotypes:
        case FileKind::covariates: return {static_cast<Index>(h.dims[0]), static_cast<Index>(h.dims[1])};
        case FileKind::phenotype: return {static_cast<Index>(h.dims[0]), 1};
        case FileKind::results: break;
    }
    throw InvalidInput("results files are not plain matrices");
}

FileHeader header_for(FileKind kind, ConstMatrixRef payload)
{
    FileHeader h;
    h.kind = kind;
    const auto rows = static_cast<std::uint64_t>(payload.rows());
    const auto cols = static_cast<std::uint64_t>(payload.cols());
    switch (kind)
    {
        case FileKind::covariance:
            if (rows != cols)
            {
                throw DimensionMismatch("covariance payload must be square");
            }
            h.dims = {rows};
            break;
        case FileKind::genotypes:
        case FileKind::covariates: h.dims = {rows, cols}; break;
        case FileKind::phenotype:
            if (cols != 1)
            {
                throw DimensionMismatch("phenotype payload must be a single column");
            }
            h.dims = {rows};
            break;
        case FileKind::results: throw InvalidInput("use create_result_file/write_results for results");
    }
    for (auto d : h.dims)
    {
        if (d == 0)
        {
            throw DimensionMismatch(std::string(kind_name(kind)) + " payload has a zero dimension");
        }
    }
    return h;
}

}  // namespace

std::array<char, 4> magic_of(FileKind kind) noexcept
{
    switch (kind)
    {
        case FileKind::covariance: return {'G', 'W', 'A', 'M'};
        case FileKind::genotypes: return {'G', 'W', 'A', 'X'};
        case FileKind::covariates: return {'G', 'W', 'A', 'C'};
        case FileKind::phenotype: return {'G', 'W', 'A', 'Y'};
        case FileKind::results: return {'G', 'W', 'A', 'B'};
    }
    return {'?', '?', '?', '?'};
}

std::string_view kind_name(FileKind kind) noexcept
{
    switch (kind)
    {
        case FileKind::covariance: return "covariance";
        case FileKind::genotypes: return "genotypes";
        case FileKind::covariates: return "covariates";
        case FileKind::phenotype: return "phenotype";
        case FileKind::results: return "results";
    }
    return "unknown";
}

std::size_t dim_count(FileKind kind) noexcept
{
    switch (kind)
    {
        case FileKind::covariance:
        case FileKind::phenotype: return 1;
        case FileKind::genotypes:
        case FileKind::covariates: return 2;
        case FileKind::results: return 3;
    }
    return 0;
}

std::vector<std::byte> FileHeader::encode() const
{
    std::vector<std::byte> out;
    out.reserve(size_bytes());
    for (char c : magic_of(kind))
    {
        out.push_back(static_cast<std::byte>(c));
    }
    put_u32(out, version);
    for (auto d : dims)
    {
        put_u64(out, d);
    }
    return out;
}

FileHeader FileHeader::decode(std::span<const std::byte> bytes, FileKind expected)
{
    if (bytes.size() < 4)
    {
        throw TruncatedFile("header shorter than the magic");
    }
    const auto want = magic_of(expected);
    if (std::memcmp(bytes.data(), want.data(), 4) != 0)
    {
        std::string found(reinterpret_cast<const char*>(bytes.data()), 4);
        throw BadMagic("expected " + std::string(want.data(), 4) + " (" + std::string(kind_name(expected))
                       + "), found '" + found + "'");
    }
    if (bytes.size() < 8)
    {
        throw TruncatedFile("header truncated before the version");
    }
    FileHeader h;
    h.kind = expected;
    h.version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
    if (h.version != format_version)
    {
        throw UnsupportedVersion("unsupported format version " + std::to_string(h.version));
    }
    const std::size_t ndims = dim_count(expected);
    if (bytes.size() < 8 + 8 * ndims)
    {
        throw TruncatedFile("header truncated in the dimension fields");
    }
    for (std::size_t i = 0; i < ndims; ++i)
    {
        h.dims.push_back(get_le(bytes, 8 + 8 * i, 8));
    }
    const std::size_t positive = expected == FileKind::results ? 2 : ndims;  // flags may be zero
    for (std::size_t i = 0; i < positive; ++i)
    {
        if (h.dims[i] == 0)
        {
            throw DimensionMismatch(std::string(kind_name(expected)) + " header has a zero dimension");
        }
    }
    if (expected == FileKind::results && (h.dims[2] & ~std::uint64_t{1}) != 0)
    {
        throw InvalidInput("results header has unknown flag bits");
    }
    return h;
}

FileHeader read_header(const std::filesystem::path& path, FileKind expected)
{
    const File f(path, File::Mode::read);
    const std::uint64_t size = f.size();
    std::vector<std::byte> bytes(std::min<std::uint64_t>(size, header_size(expected)));
    f.read_at(0, bytes);
    return FileHeader::decode(bytes, expected);
}

void write_matrix(const std::filesystem::path& path, FileKind kind, ConstMatrixRef payload)
{
    const FileHeader h = header_for(kind, payload);
    File f(path, File::Mode::create_truncate);
    f.write_at(0, h.encode());
    // Column by column so strided views need no contiguous copy.
    std::uint64_t offset = h.size_bytes();
    for (Index j = 0; j < payload.cols(); ++j)
    {
        f.write_at(offset, as_bytes(payload.col(j).data(), static_cast<std::size_t>(payload.rows())));
        offset += static_cast<std::uint64_t>(payload.rows()) * sizeof(double);
    }
}

Matrix read_matrix(const std::filesystem::path& path, FileKind kind)
{
    const File f(path, File::Mode::read);
    const std::uint64_t size = f.size();
    std::vector<std::byte> head(std::min<std::uint64_t>(size, header_size(kind)));
    f.read_at(0, head);
    const FileHeader h = FileHeader::decode(head, kind);
    const auto [rows, cols] = payload_shape(h);
    const std::uint64_t expected = h.size_bytes() + static_cast<std::uint64_t>(rows) * cols * sizeof(double);
    if (size < expected)
    {
        throw TruncatedFile(path.string() + ": " + std::to_string(size) + " bytes, expected "
                            + std::to_string(expected));
    }
    if (size > expected)
    {
        throw DimensionMismatch(path.string() + ": trailing bytes after the payload");
    }
    Matrix out(rows, cols);
    f.read_at(h.size_bytes(), as_writable_bytes(out.data(), static_cast<std::size_t>(out.size())));
    return out;
}

void write_covariance(const std::filesystem::path& path, const kernel::CovarianceMatrix& m)
{
    write_matrix(path, FileKind::covariance, m.data());
}

kernel::CovarianceMatrix read_covariance(const std::filesystem::path& path)
{
    return kernel::CovarianceMatrix(read_matrix(path, FileKind::covariance));
}

void write_covariates(const std::filesystem::path& path, const kernel::DesignLeft& xl)
{
    write_matrix(path, FileKind::covariates, xl.data());
}

kernel::DesignLeft read_covariates(const std::filesystem::path& path)
{
    return kernel::DesignLeft(read_matrix(path, FileKind::covariates));
}

void write_phenotype(const std::filesystem::path& path, const kernel::Phenotype& y)
{
    write_matrix(path, FileKind::phenotype, y.data());
}

kernel::Phenotype read_phenotype(const std::filesystem::path& path)
{
    Matrix raw = read_matrix(path, FileKind::phenotype);
    return kernel::Phenotype(Vector(raw.col(0)));
}

std::uint64_t ResultFileInfo::record_length() const noexcept
{
    return p + (with_s_inv ? p * (p + 1) / 2 : 0);
}

ResultFileInfo read_result_info(const std::filesystem::path& path)
{
    const FileHeader h = read_header(path, FileKind::results);
    ResultFileInfo info;
    info.m = h.dims[0];
    info.p = h.dims[1];
    info.with_s_inv = (h.dims[2] & 1u) != 0;
    return info;
}

void create_result_file(const std::filesystem::path& path, const ResultFileInfo& info)
{
    if (info.m == 0 || info.p == 0)
    {
        throw DimensionMismatch("result file needs m > 0 and p > 0");
    }
    FileHeader h;
    h.kind = FileKind::results;
    h.dims = {info.m, info.p, info.flags()};
    File f(path, File::Mode::create_truncate);
    f.write_at(0, h.encode());
    f.resize(info.record_offset(info.m));
}

void write_results(const std::filesystem::path& path, const kernel::ResultBlock& block)
{
    const ResultFileInfo info = read_result_info(path);
    if (info.p != static_cast<std::uint64_t>(block.p()) || info.with_s_inv != block.with_s_inv())
    {
        throw DimensionMismatch("result block layout does not match " + path.string());
    }
    if (block.first_index() + static_cast<std::uint64_t>(block.count()) > info.m)
    {
        throw DimensionMismatch("result block extends past m");
    }
    File f(path, File::Mode::write_existing);
    const auto recs = block.records();
    f.write_at(info.record_offset(block.first_index()), as_bytes(recs.data(), recs.size()));
}

kernel::SnpStatus ResultSet::status(Index k) const
{
    return std::isnan(records(0, k)) ? kernel::SnpStatus::degenerate : kernel::SnpStatus::ok;
}

kernel::SnpResult ResultSet::at(Index k) const
{
    kernel::SnpResult r;
    r.snp_index = static_cast<std::uint64_t>(k);
    r.beta = beta(k);
    r.status = status(k);
    if (info.with_s_inv && r.status == kernel::SnpStatus::ok)
    {
        const auto p = static_cast<Index>(info.p);
        const double* rec = records.col(k).data();
        r.s_inv.emplace(rec + p, rec + records.rows());
    }
    return r;
}

ResultSet read_results(const std::filesystem::path& path)
{
    const File f(path, File::Mode::read);
    const std::uint64_t size = f.size();
    std::vector<std::byte> head(std::min<std::uint64_t>(size, header_size(FileKind::results)));
    f.read_at(0, head);
    const FileHeader h = FileHeader::decode(head, FileKind::results);
    ResultSet rs;
    rs.info.m = h.dims[0];
    rs.info.p = h.dims[1];
    rs.info.with_s_inv = (h.dims[2] & 1u) != 0;
    const std::uint64_t expected = rs.info.record_offset(rs.info.m);
    if (size < expected)
    {
        throw TruncatedFile(path.string() + ": " + std::to_string(size) + " bytes, expected "
                            + std::to_string(expected));
    }
    if (size > expected)
    {
        throw DimensionMismatch(path.string() + ": trailing bytes after the records");
    }
    rs.records.resize(static_cast<Index>(rs.info.record_length()), static_cast<Index>(rs.info.m));
    f.read_at(rs.info.header_bytes(),
              as_writable_bytes(rs.records.data(), static_cast<std::size_t>(rs.records.size())));
    return rs;
}

}  // namespace gwasgls::io
