#include "gwasgls/cli/cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "gwasgls/datagen/datagen.hpp"
#include "gwasgls/dist/engine.hpp"
#include "gwasgls/error.hpp"
#include "gwasgls/pipeline/pipeline.hpp"

namespace gwasgls::cli
{
namespace
{

namespace fs = std::filesystem;

struct SolveFlags
{
    std::string mode;
    std::string cov;
    std::string covariates;
    std::string pheno;
    std::string geno;
    std::string out;
    std::uint64_t block_size = 0;  // 0: the mode's default
    int threads = 1;
    int np = 1;
    std::string transport = "inproc";
    bool emit_s_inv = false;
};

std::optional<std::uint64_t> budget_from_env()
{
    const char* raw = std::getenv(mem_budget_env);
    if (raw == nullptr || *raw == '\0')
    {
        return std::nullopt;
    }
    const std::string_view s(raw);
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || end != s.data() + s.size())
    {
        throw ConfigError(std::string(mem_budget_env) + " must be a byte count, got '" + std::string(s) + "'");
    }
    return v;
}

RunSummary solve(const SolveFlags& f)
{
    const pipeline::RunPaths paths{f.cov, f.covariates, f.pheno, f.geno, f.out};
    const auto budget = budget_from_env();
    if (f.threads < 1)
    {
        throw ConfigError("--threads must be at least 1");
    }
    if (f.mode == "dist")
    {
        if (f.threads != 1)
        {
            throw ConfigError("dist ranks are single-threaded; --threads must be 1");
        }
        dist::DistConfig cfg;
        cfg.np = f.np;
        cfg.block_size = f.block_size;
        cfg.emit_s_inv = f.emit_s_inv;
        cfg.transport = dist::parse_transport(f.transport);
        cfg.memory_budget = budget;
        return dist::run_dist(paths, cfg);
    }
    if (f.np != 1)
    {
        throw ConfigError("--np applies to --mode dist only");
    }
    pipeline::RunConfig cfg;
    cfg.block_size = f.block_size == 0 ? pipeline::default_block_size : f.block_size;
    cfg.threads = f.threads;
    cfg.emit_s_inv = f.emit_s_inv;
    cfg.memory_budget = budget;
    if (f.mode == "incore")
    {
        return pipeline::run_incore(paths, cfg);
    }
    return pipeline::run_ooc(paths, cfg);
}

std::vector<std::uint64_t> parse_values(const std::string& csv)
{
    std::vector<std::uint64_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        std::uint64_t v = 0;
        const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || ec != std::errc{} || end != item.data() + item.size() || v == 0)
        {
            throw ConfigError("--values must be a comma-separated list of positive integers, got '" + csv + "'");
        }
        out.push_back(v);
    }
    if (out.empty())
    {
        throw ConfigError("--values is empty");
    }
    return out;
}

struct BenchFlags
{
    std::string sweep;
    std::string values;
    std::string report;
    std::uint64_t n = 1000;
    std::uint64_t m = 4096;
    std::uint64_t p = 4;
    std::uint64_t seed = 42;
    std::string work;
    bool keep = false;
    SolveFlags solve;
};

void bench(const BenchFlags& b, std::ostream& out)
{
    const std::vector<std::uint64_t> values = parse_values(b.values);
    SolveFlags base = b.solve;
    if (b.sweep == "np")
    {
        base.mode = "dist";
    }
    const fs::path work = b.work.empty() ? fs::temp_directory_path() / ("gwas_gls_bench_" + std::to_string(::getpid()))
                                         : fs::path(b.work);
    std::ofstream report(b.report, std::ios::trunc);
    if (!report)
    {
        throw IoFailure("cannot open report " + b.report);
    }

    std::map<std::pair<std::uint64_t, std::uint64_t>, datagen::DatasetPaths> datasets;
    auto dataset = [&](std::uint64_t n, std::uint64_t m) {
        auto it = datasets.find({n, m});
        if (it == datasets.end())
        {
            datagen::GenSpec spec;
            spec.n = n;
            spec.m = m;
            spec.p = b.p;
            spec.seed = b.seed;
            const fs::path dir = work / ("n" + std::to_string(n) + "_m" + std::to_string(m));
            it = datasets.emplace(std::pair{n, m}, datagen::gen_dataset(spec, dir).paths).first;
        }
        return it->second;
    };

    for (const std::uint64_t v : values)
    {
        SolveFlags f = base;
        std::uint64_t n = b.n;
        std::uint64_t m = b.m;
        if (b.sweep == "m")
        {
            m = v;
        }
        else if (b.sweep == "n")
        {
            n = v;
        }
        else
        {
            f.np = static_cast<int>(v);
        }
        const datagen::DatasetPaths ds = dataset(n, m);
        f.cov = ds.covariance.string();
        f.covariates = ds.covariates.string();
        f.pheno = ds.phenotype.string();
        f.geno = ds.genotypes.string();
        f.out = (ds.genotypes.parent_path() / "results.gwab").string();
        const RunSummary s = solve(f);
        report << s.to_record() << '\n';
        report.flush();
        if (!report)
        {
            throw IoFailure("cannot write report " + b.report);
        }
        out << s.to_record() << '\n';
    }
    if (!b.keep)
    {
        std::error_code ec;
        for (const auto& [key, ds] : datasets)
        {
            fs::remove_all(ds.genotypes.parent_path(), ec);
        }
        if (b.work.empty())
        {
            fs::remove(work, ec);
        }
    }
}

std::string one_line(std::string s)
{
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    return s;
}

}  // namespace

int exit_code_for(const std::exception_ptr& e)
{
    try
    {
        std::rethrow_exception(e);
    }
    catch (const Error& err)
    {
        switch (err.category())
        {
        case ErrorCategory::usage:
            return exit_usage;
        case ErrorCategory::numerical:
            return exit_numerical;
        case ErrorCategory::data:
            return exit_data;
        }
    }
    catch (const CLI::Error&)
    {
        return exit_usage;
    }
    catch (...)
    {
    }
    return exit_data;
}

std::string error_line(const std::exception_ptr& e)
{
    std::string kind = "Unknown";
    std::string message;
    try
    {
        std::rethrow_exception(e);
    }
    catch (const Error& err)
    {
        kind = err.name();
        message = err.what();
    }
    catch (const CLI::Error& err)
    {
        kind = "UsageError";
        message = err.what();
    }
    catch (const fs::filesystem_error& err)
    {
        kind = "IoFailure";
        message = err.what();
    }
    catch (const std::exception& err)
    {
        kind = "InternalError";
        message = err.what();
    }
    catch (...)
    {
    }
    return "error code=" + std::to_string(exit_code_for(e)) + " kind=" + kind + " message=" + one_line(message);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Generalized least squares association scans over dense genotype blocks"};
    app.name("gwas_gls");
    app.require_subcommand(1);

    datagen::GenSpec gen;
    std::string gen_out;
    auto* gen_cmd = app.add_subcommand("gen", "write a synthetic dataset");
    gen_cmd->add_option("--n", gen.n, "individuals")->required();
    gen_cmd->add_option("--m", gen.m, "SNPs")->required();
    gen_cmd->add_option("--p", gen.p, "design width incl. the SNP column")->required();
    gen_cmd->add_option("--seed", gen.seed, "PRNG seed")->capture_default_str();
    gen_cmd->add_option("--out", gen_out, "output directory")->required();
    gen_cmd->add_option("--ridge", gen.ridge, "diagonal added to G G^T / m")->capture_default_str();
    gen_cmd->add_option("--effect", gen.effect, "planted SNP effect size")->capture_default_str();
    std::optional<std::uint64_t> zero_snp;
    std::optional<std::uint64_t> intercept_snp;
    gen_cmd->add_option("--zero-snp", zero_snp, "SNP index replaced by a constant-zero column");
    gen_cmd->add_option("--intercept-snp", intercept_snp, "SNP index replaced by a copy of the intercept");

    SolveFlags sf;
    auto* solve_cmd = app.add_subcommand("solve", "run the association scan");
    solve_cmd->add_option("--mode", sf.mode, "engine")->required()->check(CLI::IsMember({"incore", "ooc", "dist"}));
    solve_cmd->add_option("--cov", sf.cov, "covariance matrix file")->required();
    solve_cmd->add_option("--covariates", sf.covariates, "covariate file")->required();
    solve_cmd->add_option("--pheno", sf.pheno, "phenotype file")->required();
    solve_cmd->add_option("--geno", sf.geno, "genotype file")->required();
    solve_cmd->add_option("--out", sf.out, "result file")->required();
    solve_cmd->add_option("--block-size", sf.block_size, "SNPs per block (0: 5000, or 256*np for dist)")->capture_default_str();
    solve_cmd->add_option("--threads", sf.threads, "threads for the per-SNP loop")->capture_default_str();
    solve_cmd->add_option("--np", sf.np, "ranks for --mode dist")->capture_default_str();
    solve_cmd->add_option("--transport", sf.transport, "rank transport")
        ->check(CLI::IsMember({"inproc", "socket"}))
        ->capture_default_str();
    solve_cmd->add_flag("--emit-sinv", sf.emit_s_inv, "also store packed (X^T M^-1 X)^-1 per SNP");

    std::string o_cov, o_covariates, o_pheno, o_geno, o_out;
    bool oracle_sinv = false;
    auto* oracle_cmd = app.add_subcommand("oracle", "SNP-by-SNP reference solve (desk-scale inputs only)");
    oracle_cmd->add_option("--cov", o_cov)->required();
    oracle_cmd->add_option("--covariates", o_covariates)->required();
    oracle_cmd->add_option("--pheno", o_pheno)->required();
    oracle_cmd->add_option("--geno", o_geno)->required();
    oracle_cmd->add_option("--out", o_out)->required();
    oracle_cmd->add_flag("--emit-sinv", oracle_sinv);

    std::string va, vb;
    double tol = 1e-8;
    auto* verify_cmd = app.add_subcommand("verify", "compare two result files");
    verify_cmd->add_option("--a", va)->required();
    verify_cmd->add_option("--b", vb)->required();
    verify_cmd->add_option("--tol", tol, "relative infinity-norm tolerance")->capture_default_str();

    BenchFlags bf;
    bf.solve.mode = "ooc";
    auto* bench_cmd = app.add_subcommand("bench", "generate and solve a sweep of datasets");
    bench_cmd->add_option("--sweep", bf.sweep)->required()->check(CLI::IsMember({"m", "n", "np"}));
    bench_cmd->add_option("--values", bf.values, "comma-separated sweep values")->required();
    bench_cmd->add_option("--report", bf.report, "output records file")->required();
    bench_cmd->add_option("--n", bf.n)->capture_default_str();
    bench_cmd->add_option("--m", bf.m)->capture_default_str();
    bench_cmd->add_option("--p", bf.p)->capture_default_str();
    bench_cmd->add_option("--seed", bf.seed)->capture_default_str();
    bench_cmd->add_option("--mode", bf.solve.mode)->check(CLI::IsMember({"incore", "ooc", "dist"}))->capture_default_str();
    bench_cmd->add_option("--block-size", bf.solve.block_size)->capture_default_str();
    bench_cmd->add_option("--threads", bf.solve.threads)->capture_default_str();
    bench_cmd->add_option("--np", bf.solve.np)->capture_default_str();
    bench_cmd->add_option("--transport", bf.solve.transport)->check(CLI::IsMember({"inproc", "socket"}))->capture_default_str();
    bench_cmd->add_option("--work", bf.work, "scratch directory for generated datasets");
    bench_cmd->add_flag("--keep", bf.keep, "keep generated datasets");

    try
    {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    }
    catch (const CLI::CallForHelp&)
    {
        out << app.help();
        return exit_ok;
    }
    catch (const CLI::CallForAllHelp&)
    {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    }
    catch (const CLI::Error&)
    {
        err << error_line(std::current_exception()) << '\n';
        return exit_usage;
    }

    try
    {
        if (gen_cmd->parsed())
        {
            gen.zero_snp = zero_snp;
            gen.intercept_snp = intercept_snp;
            const datagen::GeneratedDataset ds = datagen::gen_dataset(gen, gen_out);
            out << "gen n=" << gen.n << " m=" << gen.m << " p=" << gen.p << " seed=" << gen.seed << " out=" << gen_out
                << " planted=";
            for (std::size_t i = 0; i < ds.planted.size(); ++i)
            {
                out << (i ? "," : "") << ds.planted[i];
            }
            out << '\n';
        }
        else if (solve_cmd->parsed())
        {
            out << solve(sf).to_record() << '\n';
        }
        else if (oracle_cmd->parsed())
        {
            datagen::oracle_solve_all({o_cov, o_covariates, o_pheno, o_geno, o_out}, oracle_sinv);
            out << "oracle out=" << o_out << '\n';
        }
        else if (verify_cmd->parsed())
        {
            if (!(tol >= 0.0))
            {
                throw ConfigError("--tol must be non-negative");
            }
            const datagen::CompareReport r = datagen::compare_results(va, vb);
            const bool ok = r.within(tol);
            std::ostringstream line;
            line << std::setprecision(6) << "verify m=" << r.m << " compared=" << r.compared
                 << " degenerate=" << r.degenerate << " status_mismatches=" << r.status_mismatches
                 << " max_relative=" << r.max_relative << " worst_snp=" << r.worst_snp << " tol=" << tol
                 << " result=" << (ok ? "PASS" : "FAIL");
            out << line.str() << '\n';
            return ok ? exit_ok : exit_mismatch;
        }
        else if (bench_cmd->parsed())
        {
            bench(bf, out);
        }
        return exit_ok;
    }
    catch (...)
    {
        err << error_line(std::current_exception()) << '\n';
        return exit_code_for(std::current_exception());
    }
}

}  // namespace gwasgls::cli
