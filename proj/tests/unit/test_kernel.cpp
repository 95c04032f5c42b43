#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Cholesky>

#include "gwasgls/error.hpp"
#include "gwasgls/kernel/dense.hpp"
#include "gwasgls/kernel/gls.hpp"
#include "gwasgls/kernel/oracle.hpp"
#include "test_support.hpp"

using namespace gwasgls;
using namespace gwasgls::kernel;
using gwasgls::testing::bitwise_equal;
using gwasgls::testing::kinship;
using gwasgls::testing::random_matrix;
using gwasgls::testing::random_spd;

namespace
{

Matrix mat(std::initializer_list<std::initializer_list<double>> rows)
{
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
    Index i = 0;
    for (const auto& r : rows)
    {
        Index j = 0;
        for (double v : r)
        {
            m(i, j++) = v;
        }
        ++i;
    }
    return m;
}

// Design blocks with an intercept plus normal covariates.
Matrix covariates(Index n, Index q, std::uint64_t seed)
{
    Matrix xl = random_matrix(n, q, seed);
    xl.col(0).setOnes();
    return xl;
}

Matrix dosages(Index n, Index m, std::uint64_t seed)
{
    datagen::Xoshiro256 rng(seed);
    Matrix g(n, m);
    for (Index j = 0; j < m; ++j)
    {
        for (Index i = 0; i < n; ++i)
        {
            g(i, j) = static_cast<double>(rng.below(3));
        }
    }
    return g;
}

// ||b_a - b_b||_inf / max(||b_a||_inf, ||b_b||_inf) over ok SNPs.
double worst_beta_gap(const ResultBlock& a, const ResultBlock& b)
{
    double worst = 0.0;
    for (Index k = 0; k < a.count(); ++k)
    {
        const auto ba = Eigen::Map<const Vector>(a.beta(k).data(), a.p());
        const auto bb = Eigen::Map<const Vector>(b.beta(k).data(), b.p());
        const double scale = std::max(ba.lpNorm<Eigen::Infinity>(), bb.lpNorm<Eigen::Infinity>());
        worst = std::max(worst, (ba - bb).lpNorm<Eigen::Infinity>() / scale);
    }
    return worst;
}

ResultBlock solve_all(const PreparedContext& ctx, const Matrix& g, const SolveOptions& opts = {})
{
    return gls_solve_block(ctx, SnpBlock{0, Eigen::Map<const Matrix>(g.data(), g.rows(), g.cols())}, opts);
}

}  // namespace

TEST_SUITE("kernel.cholesky")
{
    TEST_CASE("2x2 closed form")
    {
        const CholeskyFactor l = cholesky_spd(CovarianceMatrix(mat({{4, 2}, {2, 5}})));
        CHECK(bitwise_equal(l.data(), mat({{2, 0}, {1, 2}})));
    }

    TEST_CASE("identity factor is identity")
    {
        const CholeskyFactor l = cholesky_spd(CovarianceMatrix(Matrix::Identity(3, 3)));
        CHECK(bitwise_equal(l.data(), Matrix::Identity(3, 3)));
    }

    TEST_CASE("kinship factor reconstructs M")
    {
        const Matrix m = kinship(50, 200, 42);
        const CholeskyFactor l = cholesky_spd(CovarianceMatrix(m));
        const Matrix r = l.data() * l.data().transpose() - m;
        CHECK(r.cwiseAbs().maxCoeff() <= 1e-10 * m.cwiseAbs().maxCoeff());
        CHECK(l.data().triangularView<Eigen::StrictlyUpper>().toDenseMatrix().isZero(0.0));
    }

    TEST_CASE("panel width does not change the factor")
    {
        const CovarianceMatrix m(random_spd(150, 7));
        const Matrix ref = cholesky_spd(m, 64).data();
        for (Index nb : {1, 3, 16, 150, 400})
        {
            CHECK(bitwise_equal(cholesky_spd(m, nb).data(), ref));
        }
    }

    TEST_CASE("indefinite matrix reports the failing pivot")
    {
        Matrix m = Matrix::Identity(4, 4);
        m(2, 2) = -1.0;
        try
        {
            cholesky_spd(CovarianceMatrix(m));
            FAIL("expected NotPositiveDefinite");
        }
        catch (const NotPositiveDefinite& e)
        {
            CHECK(e.pivot_index() == 2);
            CHECK(e.category() == ErrorCategory::numerical);
        }
    }

    TEST_CASE("asymmetric input is rejected, not symmetrized")
    {
        Matrix m = Matrix::Identity(3, 3);
        m(0, 1) = 1e-17;
        CHECK_THROWS_AS(CovarianceMatrix{m}, NotSymmetric);
        CHECK_THROWS_AS(CovarianceMatrix{Matrix(2, 3)}, DimensionMismatch);
    }
}

TEST_SUITE("kernel.trsolve")
{
    TEST_CASE("forward substitution by hand")
    {
        const CholeskyFactor l(mat({{2, 0}, {1, 2}}));
        Matrix b(2, 1);
        b << 2, 3;
        CHECK(bitwise_equal(trsolve_lower(l, b), mat({{1}, {1}})));
    }

    TEST_CASE("identity factor returns B")
    {
        const Matrix b = random_matrix(6, 3, 1);
        CHECK(bitwise_equal(trsolve_lower(CholeskyFactor(Matrix::Identity(6, 6)), b), b));
    }

    TEST_CASE("residual on a random factor")
    {
        const CholeskyFactor l = cholesky_spd(CovarianceMatrix(random_spd(64, 3)));
        const Matrix b = random_matrix(64, 8, 4);
        const Matrix x = trsolve_lower(l, b);
        CHECK((l.data() * x - b).cwiseAbs().maxCoeff() <= 1e-12 * b.cwiseAbs().maxCoeff());
    }

    TEST_CASE("columns are solved independently, bitwise")
    {
        const CholeskyFactor l = cholesky_spd(CovarianceMatrix(random_spd(70, 5)));
        const Matrix b = random_matrix(70, 45, 6);
        const Matrix x = trsolve_lower(l, b);
        for (Index j : {0, 13, 31, 32, 44})
        {
            CHECK(bitwise_equal(trsolve_lower(l, b.col(j)), x.col(j)));
        }
    }

    TEST_CASE("dimension mismatch")
    {
        const CholeskyFactor l(Matrix::Identity(3, 3));
        CHECK_THROWS_AS(trsolve_lower(l, Matrix::Ones(4, 1)), DimensionMismatch);
    }
}

TEST_SUITE("kernel.gram")
{
    TEST_CASE("ones column")
    {
        CHECK(bitwise_equal(gram(Matrix::Ones(3, 1)), mat({{3}})));
    }

    TEST_CASE("identity")
    {
        CHECK(bitwise_equal(gram(Matrix::Identity(2, 2)), Matrix::Identity(2, 2)));
    }

    TEST_CASE("triple-loop oracle and exact symmetry")
    {
        const Matrix a = random_matrix(10, 3, 11);
        const Matrix s = gram(a);
        for (Index i = 0; i < 3; ++i)
        {
            for (Index j = 0; j < 3; ++j)
            {
                double ref = 0.0;
                for (Index r = 0; r < 10; ++r)
                {
                    ref += a(r, i) * a(r, j);
                }
                CHECK(std::abs(s(i, j) - ref) <= 1e-13);
                CHECK(s(i, j) == s(j, i));
            }
        }
    }
}

TEST_SUITE("kernel.small_spd")
{
    TEST_CASE("identity")
    {
        Vector rhs(4);
        rhs << 1, 2, 3, 4;
        CHECK(bitwise_equal(solve_small_spd(Matrix::Identity(4, 4), rhs).x, rhs));
    }

    TEST_CASE("2x2 against the explicit inverse")
    {
        const Matrix s = mat({{4, 2}, {2, 5}});
        Vector rhs(2);
        rhs << 8, 9;
        // inverse = [[5,-2],[-2,4]] / 16
        const double x0 = (5.0 * 8 - 2.0 * 9) / 16.0;
        const double x1 = (-2.0 * 8 + 4.0 * 9) / 16.0;
        const SmallSolve r = solve_small_spd(s, rhs, std::nullopt, true);
        CHECK(r.x(0) == doctest::Approx(x0).epsilon(1e-14));
        CHECK(r.x(1) == doctest::Approx(x1).epsilon(1e-14));
        REQUIRE(r.inverse);
        CHECK((*r.inverse - mat({{5, -2}, {-2, 4}}) / 16.0).cwiseAbs().maxCoeff() <= 1e-15);
        CHECK((s * r.x - rhs).norm() <= 1e-10 * rhs.norm());
    }

    TEST_CASE("rank one matrix")
    {
        CHECK_THROWS_AS(solve_small_spd(mat({{1, 1}, {1, 1}}), Vector::Ones(2)), NotPositiveDefinite);
    }
}

TEST_SUITE("kernel.gls")
{
    TEST_CASE("prepare with identity covariance")
    {
        const PreparedContext ctx = gls_prepare(CovarianceMatrix(Matrix::Identity(3, 3)), DesignLeft(Matrix::Ones(3, 1)),
                                                Phenotype(Vector::LinSpaced(3, 1, 3)));
        CHECK(bitwise_equal(ctx.covariates.xl_bar, Matrix::Ones(3, 1)));
        CHECK(bitwise_equal(ctx.covariates.y_bar, Vector::LinSpaced(3, 1, 3)));
        CHECK(ctx.covariates.s_tl(0, 0) == 3.0);
        CHECK(ctx.covariates.b_t(0) == 6.0);
    }

    TEST_CASE("prepare with scalar covariance")
    {
        const PreparedContext ctx = gls_prepare(CovarianceMatrix(2.0 * Matrix::Identity(3, 3)), DesignLeft(Matrix::Ones(3, 1)),
                                                Phenotype(Vector::LinSpaced(3, 1, 3)));
        CHECK((ctx.covariates.xl_bar - Matrix::Constant(3, 1, 1.0 / std::sqrt(2.0))).cwiseAbs().maxCoeff() <= 1e-15);
        CHECK(ctx.covariates.s_tl(0, 0) == doctest::Approx(1.5).epsilon(1e-15));
        CHECK(ctx.covariates.b_t(0) == doctest::Approx(3.0).epsilon(1e-15));
    }

    TEST_CASE("prepared context residuals")
    {
        const Matrix m = kinship(100, 500, 42);
        const Matrix xl = covariates(100, 3, 42);
        const Vector y = random_matrix(100, 1, 43);
        const PreparedContext ctx = gls_prepare(CovarianceMatrix(m), DesignLeft(xl), Phenotype(y));
        const Matrix& l = ctx.factor.data();
        CHECK((l * l.transpose() - m).cwiseAbs().maxCoeff() <= 1e-10 * m.cwiseAbs().maxCoeff());
        CHECK((l * ctx.covariates.xl_bar - xl).cwiseAbs().maxCoeff() <= 1e-10 * xl.cwiseAbs().maxCoeff());
        CHECK((l * ctx.covariates.y_bar - y).cwiseAbs().maxCoeff() <= 1e-10 * y.cwiseAbs().maxCoeff());
        CHECK(bitwise_equal(ctx.covariates.s_tl, ctx.covariates.s_tl.transpose()));
    }

    TEST_CASE("rank deficient covariates")
    {
        Matrix xl(5, 2);
        xl.col(0).setOnes();
        xl.col(1).setConstant(2.0);
        CHECK_THROWS_AS(gls_prepare(CovarianceMatrix(Matrix::Identity(5, 5)), DesignLeft(xl), Phenotype(Vector::Ones(5))),
                        RankDeficientCovariates);
    }

    TEST_CASE("hand-checkable OLS")
    {
        const PreparedContext ctx = gls_prepare(CovarianceMatrix(Matrix::Identity(3, 3)), DesignLeft(Matrix::Ones(3, 1)),
                                                Phenotype(Vector::LinSpaced(3, 1, 3)));
        const Matrix g = mat({{0}, {1}, {2}});
        const ResultBlock r = solve_all(ctx, g);
        REQUIRE(r.status(0) == SnpStatus::ok);
        CHECK(r.beta(0)[0] == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(r.beta(0)[1] == doctest::Approx(1.0).epsilon(1e-14));

        Matrix xi(3, 2);
        xi << 1, 0, 1, 1, 1, 2;
        const Vector b = gls_oracle(CovarianceMatrix(Matrix::Identity(3, 3)), xi, Vector::LinSpaced(3, 1, 3));
        CHECK(b(0) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(b(1) == doctest::Approx(1.0).epsilon(1e-14));
    }

    TEST_CASE("SNP duplicating the intercept is degenerate, block continues")
    {
        const Matrix m = kinship(30, 80, 9);
        const Matrix xl = covariates(30, 2, 9);
        const PreparedContext ctx = gls_prepare(CovarianceMatrix(m), DesignLeft(xl), Phenotype(random_matrix(30, 1, 8)));
        Matrix g = dosages(30, 5, 10);
        g.col(1).setOnes();
        g.col(3).setZero();
        const ResultBlock r = solve_all(ctx, g, {1, true});
        CHECK(r.status(0) == SnpStatus::ok);
        CHECK(r.status(1) == SnpStatus::degenerate);
        CHECK(r.status(2) == SnpStatus::ok);
        CHECK(r.status(3) == SnpStatus::degenerate);
        CHECK(r.status(4) == SnpStatus::ok);
        const SnpResult d = r.at(1);
        CHECK(std::isnan(d.beta(0)));
        CHECK_FALSE(d.s_inv.has_value());
        CHECK(r.at(2).s_inv.has_value());
    }

    TEST_CASE("structured solve matches the oracle")
    {
        for (const Index p : {2, 4, 20})
        {
            CAPTURE(p);
            const Index n = 120;
            const Matrix m = random_spd(n, static_cast<std::uint64_t>(p));
            const Matrix xl = covariates(n, p - 1, 100 + static_cast<std::uint64_t>(p));
            const Vector y = random_matrix(n, 1, 200 + static_cast<std::uint64_t>(p));
            const Matrix g = dosages(n, 25, 300 + static_cast<std::uint64_t>(p));
            const CovarianceMatrix cm(m);
            const PreparedContext ctx = gls_prepare(cm, DesignLeft(xl), Phenotype(y));
            const ResultBlock r = solve_all(ctx, g, {1, true});
            const GlsOracle oracle(cm);
            Matrix xi(n, p);
            xi.leftCols(p - 1) = xl;
            for (Index k = 0; k < g.cols(); ++k)
            {
                xi.col(p - 1) = g.col(k);
                const SnpResult o = oracle.solve(xi, y, static_cast<std::uint64_t>(k), true);
                REQUIRE(r.status(k) == SnpStatus::ok);
                const Vector b = Eigen::Map<const Vector>(r.beta(k).data(), p);
                CHECK((b - o.beta).lpNorm<Eigen::Infinity>() <= 1e-8 * o.beta.lpNorm<Eigen::Infinity>());
                const auto packed = r.record(k).subspan(static_cast<std::size_t>(p));
                const Eigen::Map<const Vector> got(packed.data(), static_cast<Index>(packed.size()));
                const Eigen::Map<const Vector> want(o.s_inv->data(), static_cast<Index>(o.s_inv->size()));
                CHECK((got - want).lpNorm<Eigen::Infinity>() <= 1e-8 * want.lpNorm<Eigen::Infinity>());
            }
        }
    }

    TEST_CASE("scale invariance")
    {
        const Index n = 80;
        const Matrix m = kinship(n, 300, 5);
        const Matrix xl = covariates(n, 3, 6);
        const Vector y = random_matrix(n, 1, 7);
        const Matrix g = dosages(n, 40, 8);
        const ResultBlock base = solve_all(gls_prepare(CovarianceMatrix(m), DesignLeft(xl), Phenotype(y)), g);
        for (const double c : {0.5, 3.0, 1000.0})
        {
            const ResultBlock scaled = solve_all(gls_prepare(CovarianceMatrix(c * m), DesignLeft(xl), Phenotype(y)), g);
            CHECK(worst_beta_gap(base, scaled) <= 1e-9);
        }
    }

    TEST_CASE("identity covariance reduces to OLS normal equations")
    {
        const Index n = 60;
        const Matrix xl = covariates(n, 3, 21);
        const Vector y = random_matrix(n, 1, 22);
        const Matrix g = dosages(n, 30, 23);
        const ResultBlock r = solve_all(gls_prepare(CovarianceMatrix(Matrix::Identity(n, n)), DesignLeft(xl), Phenotype(y)), g);
        Matrix xi(n, 4);
        xi.leftCols(3) = xl;
        for (Index k = 0; k < g.cols(); ++k)
        {
            xi.col(3) = g.col(k);
            const Vector ols = (xi.transpose() * xi).ldlt().solve(xi.transpose() * y);
            const Vector b = Eigen::Map<const Vector>(r.beta(k).data(), 4);
            CHECK((b - ols).lpNorm<Eigen::Infinity>() <= 1e-10 * ols.lpNorm<Eigen::Infinity>());
        }
    }

    TEST_CASE("column permutation permutes results bitwise")
    {
        const Index n = 70;
        const PreparedContext ctx = gls_prepare(CovarianceMatrix(kinship(n, 120, 31)), DesignLeft(covariates(n, 3, 32)),
                                                Phenotype(random_matrix(n, 1, 33)));
        const Matrix g = dosages(n, 37, 34);
        std::vector<Index> perm(37);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), std::mt19937_64(35));
        Matrix gp(n, 37);
        for (Index k = 0; k < 37; ++k)
        {
            gp.col(k) = g.col(perm[static_cast<std::size_t>(k)]);
        }
        const ResultBlock a = solve_all(ctx, g, {1, true});
        const ResultBlock b = solve_all(ctx, gp, {1, true});
        for (Index k = 0; k < 37; ++k)
        {
            const auto ra = a.record(perm[static_cast<std::size_t>(k)]);
            const auto rb = b.record(k);
            CHECK(std::equal(ra.begin(), ra.end(), rb.begin()));
        }
    }

    TEST_CASE("block size and thread count do not change results")
    {
        const Index n = 64;
        const Index m = 100;
        const PreparedContext ctx = gls_prepare(CovarianceMatrix(kinship(n, 200, 41)), DesignLeft(covariates(n, 3, 42)),
                                                Phenotype(random_matrix(n, 1, 43)));
        const Matrix g = dosages(n, m, 44);
        const ResultBlock whole = solve_all(ctx, g);
        for (const Index blk : {Index{1}, Index{7}, Index{64}, m})
        {
            for (Index first = 0; first < m; first += blk)
            {
                const Index count = std::min(blk, m - first);
                const ResultBlock part = gls_solve_block(
                    ctx, SnpBlock{static_cast<std::uint64_t>(first), Eigen::Map<const Matrix>(g.col(first).data(), n, count)});
                CHECK(part.first_index() == static_cast<std::uint64_t>(first));
                for (Index k = 0; k < count; ++k)
                {
                    const auto a = part.record(k);
                    const auto b = whole.record(first + k);
                    CHECK(std::equal(a.begin(), a.end(), b.begin()));
                }
            }
        }
        const ResultBlock threaded = solve_all(ctx, g, {4, false});
        CHECK(std::equal(threaded.records().begin(), threaded.records().end(), whole.records().begin()));
    }

    TEST_CASE("dimension checks")
    {
        const PreparedContext ctx = gls_prepare(CovarianceMatrix(Matrix::Identity(4, 4)), DesignLeft(Matrix::Ones(4, 1)),
                                                Phenotype(Vector::LinSpaced(4, 1, 4)));
        const Matrix g = Matrix::Ones(5, 2);
        CHECK_THROWS_AS(solve_all(ctx, g), DimensionMismatch);
        CHECK_THROWS_AS(gls_prepare(CovarianceMatrix(Matrix::Identity(4, 4)), DesignLeft(Matrix::Ones(3, 1)),
                                    Phenotype(Vector::Ones(4))),
                        DimensionMismatch);
        CHECK_THROWS(DesignLeft(Matrix::Ones(30, 20)));  // p = 21
    }
}
