#include "gwasgls/datagen/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "gwasgls/error.hpp"
#include "gwasgls/io/file.hpp"
#include "gwasgls/io/format.hpp"
#include "gwasgls/kernel/oracle.hpp"

namespace gwasgls::datagen
{
namespace
{

constexpr std::uint64_t snp_chunk = 256;

std::uint64_t splitmix64(std::uint64_t& state) noexcept
{
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

}  // namespace

Xoshiro256::Xoshiro256(std::uint64_t seed)
{
    std::uint64_t sm = seed;
    for (auto& word : s_)
    {
        word = splitmix64(sm);
    }
}

std::uint64_t Xoshiro256::next() noexcept
{
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Xoshiro256::uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1p-53; }

std::uint64_t Xoshiro256::below(std::uint64_t bound) noexcept
{
    // Largest multiple of bound that fits, so the modulo is unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    for (;;)
    {
        const std::uint64_t r = next();
        if (r < limit)
        {
            return r % bound;
        }
    }
}

double Xoshiro256::normal() noexcept
{
    if (spare_)
    {
        const double v = *spare_;
        spare_.reset();
        return v;
    }
    for (;;)
    {
        const double u = 2.0 * uniform() - 1.0;
        const double v = 2.0 * uniform() - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0)
        {
            const double scale = std::sqrt(-2.0 * std::log(s) / s);
            spare_ = v * scale;
            return u * scale;
        }
    }
}

void GenSpec::validate() const
{
    if (n < 1 || m < 1)
    {
        throw InvalidInput("n and m must be at least 1");
    }
    if (p < 2 || p > 20)
    {
        throw InvalidInput("p must lie in [2, 20], got " + std::to_string(p));
    }
    if (p - 1 > n)
    {
        throw InvalidInput("p - 1 covariates exceed n individuals");
    }
    if (!(maf_lo >= 0.05 && maf_lo <= maf_hi && maf_hi <= 0.5))
    {
        throw InvalidInput("allele frequency range must satisfy 0.05 <= lo <= hi <= 0.5");
    }
    if (!(ridge > 0.0) || !std::isfinite(ridge))
    {
        throw InvalidInput("ridge must be positive");
    }
    if ((zero_snp && *zero_snp >= m) || (intercept_snp && *intercept_snp >= m))
    {
        throw InvalidInput("override SNP index outside [0, m)");
    }
}

DatasetPaths DatasetPaths::in(const std::filesystem::path& dir)
{
    return {dir / "cov.gwam", dir / "covariates.gwac", dir / "pheno.gway", dir / "geno.gwax", dir / "planted.txt"};
}

pipeline::RunPaths DatasetPaths::run_paths(const std::filesystem::path& output) const
{
    return {covariance, covariates, phenotype, genotypes, output};
}

GeneratedDataset gen_dataset(const GenSpec& spec, const std::filesystem::path& out_dir)
{
    spec.validate();
    std::filesystem::create_directories(out_dir);
    GeneratedDataset ds{DatasetPaths::in(out_dir), {}};

    const auto n = static_cast<Index>(spec.n);
    const auto q = static_cast<Index>(spec.p - 1);
    Xoshiro256 rng(spec.seed);

    // 1. planted SNP indices
    const std::uint64_t planted_count = std::min(spec.planted, spec.m);
    while (ds.planted.size() < planted_count)
    {
        const std::uint64_t j = rng.below(spec.m);
        if (std::find(ds.planted.begin(), ds.planted.end(), j) == ds.planted.end())
        {
            ds.planted.push_back(j);
        }
    }
    std::sort(ds.planted.begin(), ds.planted.end());

    // 2. covariates: intercept then standard normals, column-major
    Matrix xl(n, q);
    xl.col(0).setOnes();
    for (Index c = 1; c < q; ++c)
    {
        for (Index i = 0; i < n; ++i)
        {
            xl(i, c) = rng.normal();
        }
    }
    Vector y = Vector::Ones(n);
    for (Index c = 1; c < q; ++c)
    {
        y += 0.5 * xl.col(c);
    }

    // 3. genotypes, streamed in chunks while accumulating G G^T
    io::FileHeader geno_header;
    geno_header.kind = io::FileKind::genotypes;
    geno_header.dims = {spec.n, spec.m};
    io::File geno(ds.paths.genotypes, io::File::Mode::create_truncate);
    geno.write_at(0, geno_header.encode());
    std::uint64_t offset = geno_header.size_bytes();

    // Dosage products and their sums are small integers, exact in binary64
    // under any summation order.
    Matrix kin = Matrix::Zero(n, n);
    Matrix chunk(n, static_cast<Index>(std::min(snp_chunk, spec.m)));
    for (std::uint64_t j0 = 0; j0 < spec.m; j0 += snp_chunk)
    {
        const auto width = static_cast<Index>(std::min(snp_chunk, spec.m - j0));
        for (Index c = 0; c < width; ++c)
        {
            const std::uint64_t j = j0 + static_cast<std::uint64_t>(c);
            const double f = spec.maf_lo + (spec.maf_hi - spec.maf_lo) * rng.uniform();
            for (Index i = 0; i < n; ++i)
            {
                const int a = rng.uniform() < f ? 1 : 0;
                const int b = rng.uniform() < f ? 1 : 0;
                chunk(i, c) = static_cast<double>(a + b);
            }
            if (spec.zero_snp && *spec.zero_snp == j)
            {
                chunk.col(c).setZero();
            }
            else if (spec.intercept_snp && *spec.intercept_snp == j)
            {
                chunk.col(c).setOnes();
            }
            else if (std::binary_search(ds.planted.begin(), ds.planted.end(), j))
            {
                const double sd = std::sqrt(2.0 * f * (1.0 - f));
                for (Index i = 0; i < n; ++i)
                {
                    y(i) += spec.effect * (chunk(i, c) - 2.0 * f) / sd;
                }
            }
        }
        auto cols = chunk.leftCols(width);
        geno.write_at(offset, {reinterpret_cast<const std::byte*>(cols.data()),
                               static_cast<std::size_t>(n * width) * sizeof(double)});
        offset += static_cast<std::uint64_t>(n * width) * sizeof(double);
        kin.selfadjointView<Eigen::Lower>().rankUpdate(cols);
    }

    // 4. noise
    for (Index i = 0; i < n; ++i)
    {
        y(i) += rng.normal();
    }

    Matrix m(n, n);
    const auto snps = static_cast<double>(spec.m);
    for (Index j = 0; j < n; ++j)
    {
        for (Index i = j; i < n; ++i)
        {
            m(i, j) = kin(i, j) / snps;
            if (i == j)
            {
                m(i, j) += spec.ridge;
            }
            m(j, i) = m(i, j);
        }
    }

    io::write_matrix(ds.paths.covariance, io::FileKind::covariance, m);
    io::write_matrix(ds.paths.covariates, io::FileKind::covariates, xl);
    io::write_matrix(ds.paths.phenotype, io::FileKind::phenotype, y);
    std::ofstream planted(ds.paths.planted);
    for (auto j : ds.planted)
    {
        planted << j << '\n';
    }
    if (!planted)
    {
        throw IoFailure("cannot write " + ds.paths.planted.string());
    }
    return ds;
}

void oracle_solve_all(const pipeline::RunPaths& paths, bool emit_s_inv)
{
    const kernel::CovarianceMatrix m = io::read_covariance(paths.covariance);
    const kernel::DesignLeft xl = io::read_covariates(paths.covariates);
    const kernel::Phenotype y = io::read_phenotype(paths.phenotype);
    const io::FileHeader gh = io::read_header(paths.genotypes, io::FileKind::genotypes);
    if (gh.dims[0] > oracle_max_n || gh.dims[1] > oracle_max_m)
    {
        throw ConfigError("oracle is limited to n <= " + std::to_string(oracle_max_n) + " and m <= "
                          + std::to_string(oracle_max_m));
    }
    const Matrix g = io::read_matrix(paths.genotypes, io::FileKind::genotypes);
    if (g.rows() != m.n() || xl.n() != m.n() || y.n() != m.n())
    {
        throw DimensionMismatch("oracle inputs disagree on n");
    }

    const Index p = xl.p();
    const kernel::GlsOracle oracle(m);
    kernel::ResultBlock out(p, emit_s_inv, g.cols());
    out.reset(0, g.cols());
    Matrix xi(m.n(), p);
    xi.leftCols(p - 1) = xl.data();
    for (Index j = 0; j < g.cols(); ++j)
    {
        xi.col(p - 1) = g.col(j);
        const kernel::SnpResult r = oracle.solve(xi, y.data(), static_cast<std::uint64_t>(j), emit_s_inv);
        if (r.status == kernel::SnpStatus::degenerate)
        {
            out.mark_degenerate(j);
            continue;
        }
        auto rec = out.record(j);
        std::copy_n(r.beta.data(), p, rec.begin());
        if (emit_s_inv)
        {
            std::copy(r.s_inv->begin(), r.s_inv->end(), rec.begin() + p);
        }
    }
    io::create_result_file(paths.output, {static_cast<std::uint64_t>(g.cols()), static_cast<std::uint64_t>(p), emit_s_inv});
    io::write_results(paths.output, out);
}

CompareReport compare_results(const std::filesystem::path& a, const std::filesystem::path& b)
{
    const io::ResultSet ra = io::read_results(a);
    const io::ResultSet rb = io::read_results(b);
    if (ra.info.m != rb.info.m || ra.info.p != rb.info.p)
    {
        throw DimensionMismatch("result files differ in shape: m " + std::to_string(ra.info.m) + " vs "
                                + std::to_string(rb.info.m) + ", p " + std::to_string(ra.info.p) + " vs "
                                + std::to_string(rb.info.p));
    }
    CompareReport rep;
    rep.m = ra.info.m;
    for (Index k = 0; k < static_cast<Index>(rep.m); ++k)
    {
        const auto sa = ra.status(k);
        const auto sb = rb.status(k);
        if (sa != sb)
        {
            ++rep.status_mismatches;
            continue;
        }
        if (sa == kernel::SnpStatus::degenerate)
        {
            ++rep.degenerate;
            continue;
        }
        ++rep.compared;
        const Vector ba = ra.beta(k);
        const Vector bb = rb.beta(k);
        const double diff = (ba - bb).lpNorm<Eigen::Infinity>();
        const double scale = std::max(ba.lpNorm<Eigen::Infinity>(), bb.lpNorm<Eigen::Infinity>());
        double rel = 0.0;
        if (diff > 0.0 || std::isnan(diff))
        {
            rel = scale > 0.0 && !std::isnan(diff) ? diff / scale : std::numeric_limits<double>::infinity();
        }
        if (rel > rep.max_relative)
        {
            rep.max_relative = rel;
            rep.worst_snp = static_cast<std::uint64_t>(k);
        }
    }
    return rep;
}

}  // namespace gwasgls::datagen
