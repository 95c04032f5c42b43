#include <doctest.h>

#include <atomic>
#include <stdexcept>

#include "gwasgls/datagen/datagen.hpp"
#include "gwasgls/dist/engine.hpp"
#include "gwasgls/dist/grid.hpp"
#include "gwasgls/dist/linalg.hpp"
#include "gwasgls/dist/matrix.hpp"
#include "gwasgls/dist/transport.hpp"
#include "gwasgls/error.hpp"
#include "gwasgls/io/format.hpp"
#include "gwasgls/kernel/dense.hpp"
#include "gwasgls/pipeline/pipeline.hpp"
#include "test_support.hpp"

using namespace gwasgls;
using namespace gwasgls::dist;
using gwasgls::testing::bitwise_equal;
using gwasgls::testing::kinship;
using gwasgls::testing::make_dataset;
using gwasgls::testing::random_matrix;
using gwasgls::testing::TempDir;

namespace
{

// Assertions inside rank bodies throw instead: forked ranks cannot report
// to doctest, and a throw there becomes TransportFailure on rank 0.
void expect(bool ok, const std::string& what)
{
    if (!ok)
    {
        throw std::runtime_error("expectation failed: " + what);
    }
}

void run_on(TransportKind kind, int np, const std::function<void(Transport&)>& body)
{
    if (kind == TransportKind::inproc)
    {
        run_inproc(np, body);
    }
    else
    {
        run_socket(np, body);
    }
}

const TransportKind kinds[] = {TransportKind::inproc, TransportKind::socket};

Bytes bytes_of(std::initializer_list<int> v)
{
    Bytes b;
    for (int x : v)
    {
        b.push_back(static_cast<std::byte>(x));
    }
    return b;
}

}  // namespace

TEST_SUITE("dist.grid")
{
    TEST_CASE("near-square grids")
    {
        CHECK(GridLayout::create(1) == GridLayout(1, 1));
        CHECK(GridLayout::create(4) == GridLayout(2, 2));
        CHECK(GridLayout::create(6) == GridLayout(2, 3));
        CHECK(GridLayout::create(7) == GridLayout(1, 7));
        CHECK(GridLayout::create(16) == GridLayout(4, 4));
        CHECK_THROWS_AS(GridLayout::create(0), ConfigError);
        CHECK_THROWS_AS(GridLayout(0, 2), ConfigError);
    }

    TEST_CASE("row-major rank coordinates")
    {
        const GridLayout g(2, 3);
        CHECK(g.coord(4).row == 1);
        CHECK(g.coord(4).col == 1);
        for (int r = 0; r < g.size(); ++r)
        {
            CHECK(g.rank_of(g.coord(r)) == r);
        }
    }

    TEST_CASE("2D owner of an entry")
    {
        const GridLayout g(2, 3);
        const Owner2D o = owner_2d(3, 4, g);
        CHECK(o.rank == 4);
        CHECK(o.local_row == 1);
        CHECK(o.local_col == 1);
        for (Index i = 0; i < 11; ++i)
        {
            for (Index j = 0; j < 13; ++j)
            {
                const Owner2D w = owner_2d(i, j, g);
                const auto [gi, gj] = global_2d(w.rank, w.local_row, w.local_col, g);
                CHECK(gi == i);
                CHECK(gj == j);
            }
        }
    }

    TEST_CASE("1D owner of a column")
    {
        const GridLayout g(2, 3);
        CHECK(owner_1d(7, g).rank == 1);
        CHECK(owner_1d(7, g).local_col == 1);
        for (Index j = 0; j < 40; ++j)
        {
            const Owner1D o = owner_1d(j, g);
            CHECK(global_1d(o.rank, o.local_col, g) == j);
        }
    }

    TEST_CASE("cyclic counts sum to the extent")
    {
        for (Index extent : {0, 1, 5, 6, 7, 100})
        {
            for (int parts : {1, 2, 3, 6})
            {
                Index total = 0;
                for (int i = 0; i < parts; ++i)
                {
                    total += cyclic_count(extent, parts, i);
                }
                CHECK(total == extent);
            }
        }
        CHECK(cyclic_count(7, 3, 0) == 3);
        CHECK(cyclic_count(7, 3, 2) == 2);
    }
}

TEST_SUITE("dist.transport")
{
    TEST_CASE("single rank all-to-all returns its own slice")
    {
        for (TransportKind kind : kinds)
        {
            CHECK_NOTHROW(run_on(kind, 1, [](Transport& t) {
                const auto out = t.alltoall({bytes_of({1, 2, 3})});
                expect(out.size() == 1 && out[0] == bytes_of({1, 2, 3}), "self slice");
            }));
        }
    }

    TEST_CASE("broadcast of 8 bytes")
    {
        for (TransportKind kind : kinds)
        {
            CHECK_NOTHROW(run_on(kind, 3, [](Transport& t) {
                const Bytes payload = bytes_of({1, 2, 3, 4, 5, 6, 7, 8});
                const Bytes got = t.broadcast(0, t.rank() == 0 ? payload : Bytes{});
                expect(got == payload, "broadcast payload");
            }));
        }
    }

    TEST_CASE("ring passes a token around every rank")
    {
        for (TransportKind kind : kinds)
        {
            CHECK_NOTHROW(run_on(kind, 4, [](Transport& t) {
                const int next = (t.rank() + 1) % t.size();
                const int prev = (t.rank() + t.size() - 1) % t.size();
                if (t.rank() == 0)
                {
                    t.send(next, bytes_of({0}));
                    const Bytes b = t.recv(prev);
                    expect(b.size() == 4, "token visited all ranks");
                }
                else
                {
                    Bytes b = t.recv(prev);
                    b.push_back(static_cast<std::byte>(t.rank()));
                    t.send(next, b);
                }
            }));
        }
    }

    TEST_CASE("collectives agree on every rank")
    {
        for (TransportKind kind : kinds)
        {
            CHECK_NOTHROW(run_on(kind, 3, [](Transport& t) {
                const Bytes mine = bytes_of({t.rank(), t.rank()});
                const auto all = t.allgather(mine);
                expect(all.size() == 3, "allgather count");
                for (int r = 0; r < 3; ++r)
                {
                    expect(all[static_cast<std::size_t>(r)] == bytes_of({r, r}), "allgather slice");
                }
                std::vector<Bytes> slices;
                for (int r = 0; r < 3; ++r)
                {
                    slices.push_back(bytes_of({t.rank() * 10 + r}));
                }
                const auto got = t.alltoall(slices);
                for (int r = 0; r < 3; ++r)
                {
                    expect(got[static_cast<std::size_t>(r)] == bytes_of({r * 10 + t.rank()}), "alltoall slice");
                }
                t.barrier();
                expect(t.traffic() == t.stats().bytes_sent + t.stats().bytes_received, "traffic");
            }));
        }
    }

    TEST_CASE("wrong slice count is a size mismatch")
    {
        CHECK_THROWS_AS(run_inproc(2, [](Transport& t) { t.alltoall({Bytes{}}); }), SizeMismatch);
        CHECK_THROWS_AS(doubles_from(bytes_of({1, 2, 3})), SizeMismatch);
    }

    TEST_CASE("doubles round trip through bytes")
    {
        const std::vector<double> v = {1.5, -0.0, 1e300};
        const std::vector<double> back = doubles_from(to_bytes(v));
        CHECK(back == v);
    }

    TEST_CASE("a failing rank unblocks its peers")
    {
        CHECK_THROWS_AS(run_inproc(3,
                                   [](Transport& t) {
                                       if (t.rank() == 2)
                                       {
                                           throw InvalidInput("rank 2 gives up");
                                       }
                                       t.barrier();
                                   }),
                        InvalidInput);
        CHECK_THROWS_AS(run_socket(3,
                                   [](Transport& t) {
                                       if (t.rank() == 2)
                                       {
                                           throw InvalidInput("rank 2 gives up");
                                       }
                                       t.barrier();
                                   }),
                        TransportFailure);
    }
}

TEST_SUITE("dist.matrix")
{
    TEST_CASE("scatter of the identity on a 2x2 grid")
    {
        CHECK_NOTHROW(run_inproc(4, [](Transport& t) {
            const GridLayout g(2, 2);
            const DistMatrix2D a = scatter_matrix(t.rank() == 0 ? Matrix(Matrix::Identity(4, 4)) : Matrix(), g, t);
            expect(a.local().rows() == 2 && a.local().cols() == 2, "local shape");
            const bool diag_owner = a.coord().row == a.coord().col;
            expect(bitwise_equal(a.local(), diag_owner ? Matrix(Matrix::Identity(2, 2)) : Matrix(Matrix::Zero(2, 2))),
                   "local entries");
        }));
    }

    TEST_CASE("scatter then gather round trips")
    {
        const Matrix x = random_matrix(37, 37, 11);
        for (TransportKind kind : kinds)
        {
            CHECK_NOTHROW(run_on(kind, 6, [&](Transport& t) {
                const GridLayout g = GridLayout::create(6);
                const DistMatrix2D a = scatter_matrix(t.rank() == 0 ? x : Matrix(), g, t);
                const Matrix back = gather_matrix(a, t);
                if (t.rank() == 0)
                {
                    expect(bitwise_equal(back, x), "gather at root");
                }
                else
                {
                    expect(back.size() == 0, "empty elsewhere");
                }
                expect(bitwise_equal(allgather_matrix(a, t), x), "allgather");
                const Matrix region = allgather_region(a, 3, 20, 5, 9, t, true);
                for (Index j = 0; j < 4; ++j)
                {
                    for (Index i = 0; i < 17; ++i)
                    {
                        const double want = (3 + i >= 5 + j) ? x(3 + i, 5 + j) : 0.0;
                        expect(region(i, j) == want, "lower region");
                    }
                }
            }));
        }
    }

    TEST_CASE("1D and 2D layouts convert both ways")
    {
        const Matrix x = random_matrix(16, 12, 12);
        for (int np : {1, 4, 6})
        {
            CHECK_NOTHROW(run_inproc(np, [&](Transport& t) {
                const GridLayout g = GridLayout::create(np);
                const Index lc = cyclic_count(12, np, t.rank());
                Matrix buffer(16, lc);
                for (Index k = 0; k < lc; ++k)
                {
                    buffer.col(k) = x.col(global_1d(t.rank(), k, g));
                }
                const Matrix original = buffer;
                DistMatrix1D v = DistMatrix1D::view(Eigen::Map<Matrix>(buffer.data(), 16, lc), 12, g, t.rank());
                expect(v.is_view() && v.data() == buffer.data(), "view aliases the buffer");
                const DistMatrix2D d = redist_1d_to_2d(v, t);
                expect(bitwise_equal(allgather_matrix(d, t), x), "2D content");
                buffer.setZero();
                redist_2d_to_1d(d, v, t);
                expect(bitwise_equal(buffer, original), "back in place");
            }));
        }
    }

    TEST_CASE("view with the wrong local width is rejected")
    {
        Matrix buffer(4, 4);
        CHECK_THROWS_AS(DistMatrix1D::view(Eigen::Map<Matrix>(buffer.data(), 4, 4), 12, GridLayout(2, 2), 0),
                        DimensionMismatch);
    }

    TEST_CASE("symmetry check agrees on all ranks")
    {
        Matrix s = kinship(9, 20, 1);
        CHECK_NOTHROW(run_inproc(4, [&](Transport& t) {
            check_symmetric(scatter_matrix(t.rank() == 0 ? s : Matrix(), GridLayout(2, 2), t), t);
        }));
        Matrix bad = s;
        bad(7, 2) += 1e-12;
        std::atomic<int> thrown{0};
        CHECK_THROWS_AS(run_inproc(4,
                                   [&](Transport& t) {
                                       const DistMatrix2D a =
                                           scatter_matrix(t.rank() == 0 ? bad : Matrix(), GridLayout(2, 2), t);
                                       try
                                       {
                                           check_symmetric(a, t);
                                       }
                                       catch (const NotSymmetric&)
                                       {
                                           ++thrown;
                                           throw;
                                       }
                                   }),
                        NotSymmetric);
        CHECK(thrown.load() == 4);
    }
}

TEST_SUITE("dist.linalg")
{
    TEST_CASE("distributed factor and solve are bitwise equal to the kernel")
    {
        for (Index n : {1, 16, 75})
        {
            const Matrix m = kinship(n, 2 * n + 3, static_cast<std::uint64_t>(n));
            const Matrix b = random_matrix(n, 5, 9);
            for (Index panel : {1, 8, 64})
            {
                const kernel::CholeskyFactor ref = kernel::cholesky_spd(kernel::CovarianceMatrix(m), panel);
                Matrix ref_x = b;
                kernel::trsolve_lower_in_place(ref.data(), ref_x);
                for (int np : {1, 4, 6})
                {
                    INFO("n=" << n << " panel=" << panel << " np=" << np);
                    CHECK_NOTHROW(run_inproc(np, [&](Transport& t) {
                        const GridLayout g = GridLayout::create(np);
                        const DistMatrix2D dm = scatter_matrix(t.rank() == 0 ? m : Matrix(), g, t);
                        const DistMatrix2D l = dist_cholesky(dm, t, panel);
                        expect(bitwise_equal(allgather_matrix(l, t), ref.data()), "factor");
                        const DistMatrix2D db = scatter_matrix(t.rank() == 0 ? b : Matrix(), g, t);
                        const DistMatrix2D x = dist_trsolve(l, db, t, panel);
                        expect(bitwise_equal(allgather_matrix(x, t), ref_x), "solve");
                    }));
                }
            }
        }
    }

    TEST_CASE("indefinite input fails on every rank with the kernel's pivot")
    {
        Matrix m = kinship(20, 30, 4);
        m(13, 13) = -5.0;
        std::atomic<int> pivots{0};
        CHECK_THROWS_AS(run_inproc(4,
                                   [&](Transport& t) {
                                       const DistMatrix2D dm =
                                           scatter_matrix(t.rank() == 0 ? m : Matrix(), GridLayout(2, 2), t);
                                       try
                                       {
                                           dist_cholesky(dm, t, 8);
                                       }
                                       catch (const NotPositiveDefinite& e)
                                       {
                                           if (e.pivot_index() == 13)
                                           {
                                               ++pivots;
                                           }
                                           throw;
                                       }
                                   }),
                        NotPositiveDefinite);
        CHECK(pivots.load() == 4);
    }
}

TEST_SUITE("dist.engine")
{
    TEST_CASE("block size rules")
    {
        DistConfig cfg;
        cfg.np = 4;
        CHECK(dist_block_size(cfg) == 1024);
        cfg.block_size = 12;
        CHECK(dist_block_size(cfg) == 12);
        cfg.block_size = 10;
        CHECK_THROWS_AS(dist_block_size(cfg), ConfigError);
        cfg.np = 0;
        CHECK_THROWS_AS(dist_block_size(cfg), ConfigError);
        CHECK(parse_transport("socket") == TransportKind::socket);
        CHECK(transport_name(TransportKind::inproc) == "inproc");
        CHECK_THROWS_AS(parse_transport("mpi"), ConfigError);
    }

    TEST_CASE("distributed runs equal the out-of-core run bitwise")
    {
        TempDir dir("dist_engine");
        datagen::GenSpec spec;
        spec.n = 70;
        spec.m = 203;
        spec.seed = 8;
        spec.zero_snp = 17;
        spec.intercept_snp = 150;
        const auto ds = make_dataset(dir.path(), spec);
        pipeline::RunConfig rc;
        rc.block_size = 40;
        rc.emit_s_inv = true;
        pipeline::run_ooc(ds.paths.run_paths(dir / "ooc.gwab"), rc);
        const Matrix ref = io::read_results(dir / "ooc.gwab").records;

        for (TransportKind kind : kinds)
        {
            for (int np : {1, 4, 6})
            {
                INFO("np=" << np << " transport=" << transport_name(kind));
                DistConfig cfg;
                cfg.np = np;
                cfg.block_size = static_cast<std::uint64_t>(12 * np);  // 203 is not a multiple
                cfg.emit_s_inv = true;
                cfg.transport = kind;
                cfg.panel_width = 16;
                const RunSummary s = run_dist(ds.paths.run_paths(dir / "dist.gwab"), cfg);
                CHECK(s.mode == "dist");
                CHECK(s.np == np);
                CHECK(s.view_bytes == 0);
                CHECK(s.blocks == (203 + cfg.block_size - 1) / cfg.block_size);
                const io::ResultSet rs = io::read_results(dir / "dist.gwab");
                CHECK(bitwise_equal(rs.records, ref));
                CHECK(rs.status(17) == kernel::SnpStatus::degenerate);
                CHECK(rs.status(150) == kernel::SnpStatus::degenerate);
            }
        }
    }

    TEST_CASE("repeated distributed runs are identical")
    {
        TempDir dir("dist_repeat");
        datagen::GenSpec spec;
        spec.n = 30;
        spec.m = 50;
        const auto ds = make_dataset(dir.path(), spec);
        DistConfig cfg;
        cfg.np = 4;
        cfg.block_size = 8;
        run_dist(ds.paths.run_paths(dir / "a.gwab"), cfg);
        run_dist(ds.paths.run_paths(dir / "b.gwab"), cfg);
        CHECK(bitwise_equal(io::read_results(dir / "a.gwab").records, io::read_results(dir / "b.gwab").records));
    }

    TEST_CASE("more ranks than SNPs in a block")
    {
        TempDir dir("dist_sparse");
        datagen::GenSpec spec;
        spec.n = 20;
        spec.m = 3;
        const auto ds = make_dataset(dir.path(), spec);
        pipeline::run_incore(ds.paths.run_paths(dir / "ref.gwab"), {});
        DistConfig cfg;
        cfg.np = 6;
        run_dist(ds.paths.run_paths(dir / "d.gwab"), cfg);
        CHECK(bitwise_equal(io::read_results(dir / "d.gwab").records, io::read_results(dir / "ref.gwab").records));
    }

    TEST_CASE("errors reach the caller with their kind")
    {
        TempDir dir("dist_err");
        datagen::GenSpec spec;
        spec.n = 20;
        spec.m = 10;
        const auto ds = make_dataset(dir.path(), spec);
        Matrix m = Matrix::Identity(20, 20);
        m(3, 9) = 0.25;
        io::write_matrix(ds.paths.covariance, io::FileKind::covariance, m);
        DistConfig cfg;
        cfg.np = 4;
        cfg.block_size = 4;
        CHECK_THROWS_AS(run_dist(ds.paths.run_paths(dir / "r.gwab"), cfg), NotSymmetric);
        m(3, 9) = 0.0;
        m(4, 4) = -1.0;
        io::write_matrix(ds.paths.covariance, io::FileKind::covariance, m);
        CHECK_THROWS_AS(run_dist(ds.paths.run_paths(dir / "r.gwab"), cfg), NotPositiveDefinite);
    }
}
