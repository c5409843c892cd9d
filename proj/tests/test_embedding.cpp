#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "havok_mpc/embedding.hpp"
#include "havok_mpc/errors.hpp"
#include "havok_mpc/rng.hpp"
#include "oracles.hpp"

using namespace havok;

namespace {

Matrix random_matrix(Index rows, Index cols, Rng& rng) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
    }
    return m;
}

}  // namespace

TEST_CASE("build_hankel stacks sliding windows") {
    Matrix series(4, 1);
    series << 1, 2, 3, 4;
    const Matrix H = build_hankel(series, 2);
    Matrix expected(2, 3);
    expected << 1, 2, 3, 2, 3, 4;
    CHECK(H == expected);
}

TEST_CASE("build_hankel of a constant series is rank one") {
    Matrix series(3, 1);
    series << 5, 5, 5;
    const Matrix H = build_hankel(series, 2);
    CHECK(H == Matrix::Constant(2, 2, 5.0));
    const auto factors = svd_factorize(H);
    CHECK(factors.S(0) > 1e-12);
    CHECK(factors.S(1) < 1e-12);
}

TEST_CASE("build_hankel obeys the Hankel index law") {
    Matrix series(5, 1);
    series << 1, 2, 3, 4, 5;
    const Matrix H = build_hankel(series, 3);
    REQUIRE(H.rows() == 3);
    REQUIRE(H.cols() == 3);
    for (Index i = 0; i < 3; ++i) {
        for (Index j = 0; j < 3; ++j) CHECK(H(i, j) == series(i + j, 0));
    }
}

TEST_CASE("build_hankel shift law holds for multi-channel series") {
    Rng rng(41);
    for (int n_ch = 1; n_ch <= 3; ++n_ch) {
        for (int depth = 1; depth <= 5; ++depth) {
            const Matrix series = random_matrix(12, n_ch, rng);
            const Matrix H = build_hankel(series, depth);
            for (Index i = 0; i + n_ch < H.rows(); ++i) {
                for (Index j = 0; j + 1 < H.cols(); ++j) {
                    CHECK(H(i + n_ch, j) == H(i, j + 1));
                }
            }
        }
    }
}

TEST_CASE("build_hankel rejects depth beyond the data") {
    CHECK_THROWS_AS(build_hankel(Matrix::Zero(3, 1), 4), DataError);
}

TEST_CASE("svd of the identity has unit singular values") {
    const auto factors = svd_factorize(Matrix::Identity(3, 3));
    CHECK(factors.S.size() == 3);
    for (Index i = 0; i < 3; ++i) CHECK(factors.S(i) == doctest::Approx(1.0));
}

TEST_CASE("svd of a rank-one outer product matches the closed form") {
    Vector a(2), b(2);
    a << 1, 2;
    b << 3, 4;
    const Matrix H = a * b.transpose();
    const auto factors = svd_factorize(H);
    const double expected = oracles::rank1_singular_value(a, b);  // sqrt(5) * 5
    CHECK(expected == doctest::Approx(5.0 * std::sqrt(5.0)));
    CHECK(factors.S(0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(factors.S(1) < 1e-12);
}

TEST_CASE("svd of the zero matrix is all zero") {
    const auto factors = svd_factorize(Matrix::Zero(4, 3));
    CHECK(factors.S.maxCoeff() == 0.0);
}

TEST_CASE("svd rejects non-finite entries") {
    Matrix H = Matrix::Ones(3, 3);
    H(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(svd_factorize(H), DataError);
}

TEST_CASE("svd reconstruction error stays within tolerance on random matrices") {
    Rng rng(42);
    for (int trial = 0; trial < 40; ++trial) {
        const Index rows = static_cast<Index>(rng.uniform_int(1, 50));
        const Index cols = static_cast<Index>(rng.uniform_int(1, 50));
        const Matrix H = random_matrix(rows, cols, rng);
        const auto factors = svd_factorize(H);
        const double err = (factors.U * factors.S.asDiagonal() * factors.V.transpose() - H).norm();
        CHECK(err <= 1e-10 * std::max(1.0, H.norm()));
        for (Index i = 0; i + 1 < factors.S.size(); ++i) CHECK(factors.S(i) >= factors.S(i + 1));
        CHECK(factors.S(factors.S.size() - 1) >= 0.0);
    }
}

TEST_CASE("truncated reconstruction error equals the tail energy") {
    Rng rng(43);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix H = random_matrix(static_cast<Index>(rng.uniform_int(2, 30)),
                                       static_cast<Index>(rng.uniform_int(2, 30)), rng);
        const auto factors = svd_factorize(H);
        const Index r = static_cast<Index>(
            rng.uniform_int(1, static_cast<std::uint64_t>(factors.S.size())));
        const Matrix approx = factors.U.leftCols(r) * factors.S.head(r).asDiagonal() *
                              factors.V.leftCols(r).transpose();
        const double err_sq = (H - approx).squaredNorm();
        const double tail = factors.S.tail(factors.S.size() - r).squaredNorm();
        CHECK(std::abs(err_sq - tail) <= 1e-8 * std::max(1.0, tail));
    }
}

TEST_CASE("choose_rank energy picks the dominant mode") {
    Vector s(2);
    s << 10.0, 1e-14;
    CHECK(choose_rank(s, RankPolicy::energy(0.99)) == 1);
}

TEST_CASE("choose_rank energy on equal shares matches the cumulative oracle") {
    Vector s(3);
    s << 3.0, 3.0, 3.0;
    CHECK(oracles::energy_rank(s, 0.5) == 2);
    CHECK(choose_rank(s, RankPolicy::energy(0.5)) == 2);
}

TEST_CASE("choose_rank fixed clamps to the spectrum length") {
    Vector s(3);
    s << 5.0, 4.0, 3.0;
    CHECK(choose_rank(s, RankPolicy::fixed(10)) == 3);
    CHECK(choose_rank(s, RankPolicy::fixed(2)) == 2);
}

TEST_CASE("choose_rank rejects an all-zero spectrum") {
    CHECK_THROWS_AS(choose_rank(Vector::Zero(3), RankPolicy::energy(0.9)), NumericError);
}

TEST_CASE("choose_rank energy is monotone in the threshold") {
    Rng rng(44);
    for (int trial = 0; trial < 20; ++trial) {
        Vector s(8);
        for (Index i = 0; i < 8; ++i) s(i) = std::abs(rng.gaussian()) + 1e-6;
        std::sort(s.data(), s.data() + s.size(), std::greater<double>());
        int previous = 0;
        for (double tau : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 1.0}) {
            const int r = choose_rank(s, RankPolicy::energy(tau));
            CHECK(r >= previous);
            previous = r;
        }
    }
}

TEST_CASE("choose_rank hard threshold separates signal from a noise floor") {
    // median = 0.9, omega(0.5) = 0.56/8 - 0.95/4 + 1.82/2 + 1.43 = 2.1725,
    // cutoff 1.955: exactly the two signal values survive.
    Vector s(7);
    s << 100.0, 50.0, 1.0, 0.95, 0.9, 0.8, 0.7;
    const double beta = 0.5;
    const double omega = 0.56 * beta * beta * beta - 0.95 * beta * beta + 1.82 * beta + 1.43;
    CHECK(omega == doctest::Approx(2.1725));
    CHECK(choose_rank(s, RankPolicy::hard_threshold(), beta) == 2);
}

TEST_CASE("choose_rank hard threshold keeps at least one value") {
    Vector s(3);
    s << 1.0, 1.0, 1.0;  // cutoff above every value
    CHECK(choose_rank(s, RankPolicy::hard_threshold(), 1.0) == 1);
}

TEST_CASE("project and lift are exact adjoints") {
    Rng rng(45);
    const Matrix outputs = random_matrix(40, 2, rng);
    const Matrix inputs = random_matrix(40, 1, rng);
    const HankelConfig cfg{4, true};
    const auto emb = make_embedding(outputs, inputs, cfg, RankPolicy::energy(0.95));
    REQUIRE(emb.rank >= 1);

    const Matrix gram = emb.U.transpose() * emb.U;
    CHECK((gram - Matrix::Identity(emb.rank, emb.rank)).cwiseAbs().maxCoeff() < 1e-10);

    for (int trial = 0; trial < 5; ++trial) {
        Vector z(emb.rank);
        for (Index i = 0; i < emb.rank; ++i) z(i) = rng.gaussian();
        const Vector back = project(emb, lift(emb, z));
        CHECK((back - z).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK(lift(emb, Vector::Zero(emb.rank)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("full-rank embeddings reconstruct delay vectors exactly") {
    Rng rng(46);
    const Matrix outputs = random_matrix(60, 1, rng);
    const Matrix inputs = random_matrix(60, 1, rng);
    const HankelConfig cfg{3, true};
    const auto emb = make_embedding(outputs, inputs, cfg, RankPolicy::fixed(1 << 20));
    REQUIRE(emb.rank == emb.delay_dim());  // random data: numerically full rank

    const Vector h = delay_vector(outputs, inputs, cfg, 10);
    const Vector back = lift(emb, project(emb, h));
    CHECK((back - h).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("projection of an orthogonal vector vanishes") {
    DelayEmbedding emb;
    emb.config = {3, false};
    emb.n_outputs = 1;
    emb.rank = 1;
    emb.U = Matrix::Zero(3, 1);
    emb.U(0, 0) = 1.0;
    emb.S = Vector::Ones(1);

    Vector h = Vector::Zero(3);
    h(1) = 7.0;
    CHECK(project(emb, h)(0) == 0.0);
    h.setZero();
    h(0) = 1.0;  // the basis vector itself
    CHECK(project(emb, h)(0) == 1.0);
}

TEST_CASE("project rejects mismatched lengths") {
    DelayEmbedding emb;
    emb.config = {2, false};
    emb.n_outputs = 1;
    emb.rank = 1;
    emb.U = Matrix::Ones(2, 1) / std::sqrt(2.0);
    emb.S = Vector::Ones(1);
    CHECK_THROWS_AS(project(emb, Vector::Zero(3)), DataError);
    CHECK_THROWS_AS(lift(emb, Vector::Zero(2)), DataError);
}

TEST_CASE("make_embedding survives all-zero data") {
    const Matrix outputs = Matrix::Zero(20, 1);
    const Matrix inputs = Matrix::Zero(20, 1);
    const auto emb = make_embedding(outputs, inputs, {3, true}, RankPolicy::energy(0.999));
    CHECK(emb.rank == 1);
    CHECK(emb.S(0) == 0.0);
    CHECK(emb.U.col(0).norm() == doctest::Approx(1.0));
}
