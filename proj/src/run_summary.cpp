#include "gwasgls/run_summary.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "gwasgls/error.hpp"

namespace gwasgls
{
namespace
{

std::string fmt_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text)
{
    T v{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    {
        throw InvalidInput("bad value for " + key + ": '" + text + "'");
    }
    return v;
}

}  // namespace

std::string RunSummary::to_record() const
{
    std::ostringstream os;
    os << "mode=" << mode << " n=" << n << " m=" << m << " p=" << p << " m_blk=" << m_blk << " np=" << np
       << " threads=" << threads << " transport=" << transport << " emit_sinv=" << (emit_s_inv ? 1 : 0)
       << " mem_budget=" << mem_budget << " wall_total=" << fmt_double(wall_total)
       << " prepare=" << fmt_double(prepare) << " compute=" << fmt_double(compute)
       << " io_wait=" << fmt_double(io_wait) << " redistribute=" << fmt_double(redistribute)
       << " stream=" << fmt_double(stream) << " blocks=" << blocks << " bytes_read=" << bytes_read
       << " bytes_written=" << bytes_written << " buffer_regions=" << buffer_regions
       << " buffer_bytes=" << buffer_bytes << " peak_resident=" << peak_resident_bytes
       << " view_bytes=" << view_bytes << " transport_bytes=" << transport_bytes;
    return os.str();
}

RunSummary RunSummary::from_record(const std::string& line)
{
    RunSummary s;
    using Setter = std::function<void(const std::string&)>;
    auto u64 = [](std::uint64_t& field, const char* key) -> Setter {
        return [&field, key](const std::string& v) { field = parse_number<std::uint64_t>(key, v); };
    };
    auto dbl = [](double& field, const char* key) -> Setter {
        return [&field, key](const std::string& v) { field = parse_number<double>(key, v); };
    };
    const std::map<std::string, Setter> setters = {
        {"mode", [&](const std::string& v) { s.mode = v; }},
        {"n", u64(s.n, "n")},
        {"m", u64(s.m, "m")},
        {"p", u64(s.p, "p")},
        {"m_blk", u64(s.m_blk, "m_blk")},
        {"np", [&](const std::string& v) { s.np = parse_number<int>("np", v); }},
        {"threads", [&](const std::string& v) { s.threads = parse_number<int>("threads", v); }},
        {"transport", [&](const std::string& v) { s.transport = v; }},
        {"emit_sinv", [&](const std::string& v) { s.emit_s_inv = parse_number<int>("emit_sinv", v) != 0; }},
        {"mem_budget", u64(s.mem_budget, "mem_budget")},
        {"wall_total", dbl(s.wall_total, "wall_total")},
        {"prepare", dbl(s.prepare, "prepare")},
        {"compute", dbl(s.compute, "compute")},
        {"io_wait", dbl(s.io_wait, "io_wait")},
        {"redistribute", dbl(s.redistribute, "redistribute")},
        {"stream", dbl(s.stream, "stream")},
        {"blocks", u64(s.blocks, "blocks")},
        {"bytes_read", u64(s.bytes_read, "bytes_read")},
        {"bytes_written", u64(s.bytes_written, "bytes_written")},
        {"buffer_regions", u64(s.buffer_regions, "buffer_regions")},
        {"buffer_bytes", u64(s.buffer_bytes, "buffer_bytes")},
        {"peak_resident", u64(s.peak_resident_bytes, "peak_resident")},
        {"view_bytes", u64(s.view_bytes, "view_bytes")},
        {"transport_bytes", u64(s.transport_bytes, "transport_bytes")},
    };
    std::istringstream is(line);
    std::string token;
    while (is >> token)
    {
        const auto eq = token.find('=');
        if (eq == std::string::npos)
        {
            throw InvalidInput("malformed summary field '" + token + "'");
        }
        const std::string key = token.substr(0, eq);
        const auto it = setters.find(key);
        if (it == setters.end())
        {
            throw InvalidInput("unknown summary key '" + key + "'");
        }
        it->second(token.substr(eq + 1));
    }
    return s;
}

}  // namespace gwasgls
