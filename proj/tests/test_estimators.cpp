#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "scatterhom/elliptical.hpp"
#include "scatterhom/estimators.hpp"
#include "scatterhom/rng.hpp"
#include "test_support.hpp"

using namespace scatterhom;
using test_support::random_invertible;
using test_support::random_matrix;
using test_support::random_vector;

namespace {

Matrix cross_points() {
    Matrix x(4, 2);
    x << 1, 0, 0, 1, -1, 0, 0, -1;
    return x;
}

Matrix spherical_sample(const EllipticalFamily& fam, int n, std::uint64_t seed) {
    EllipticalSampleSpec spec{fam, Vector::Zero(fam.dim()),
                              Matrix::Identity(fam.dim(), fam.dim())};
    auto rng = make_stream(seed, 0);
    return sample(spec, n, rng);
}

ShapeMatrix expected_shape_image(const ShapeMatrix& v, const Matrix& a) {
    return ShapeMatrix(SpdMatrix(a * v.mat() * a.transpose()));
}

}  // namespace

TEST_CASE("hr_estimate solves the symmetric four-point configuration exactly") {
    const auto est = hr_estimate(cross_points());
    CHECK(est.location.norm() < 1e-12);
    CHECK((est.shape.mat() - Matrix::Identity(2, 2)).norm() < 1e-12);
    CHECK(est.sign_residual < 1e-12);
    CHECK(est.shape_residual < 1e-12);
}

TEST_CASE("hr_estimate satisfies its estimating equations on random data") {
    std::mt19937_64 rng(3001);
    for (int k : {2, 3}) {
        const Matrix data = random_matrix(80, k, rng);
        const auto est = hr_estimate(data);
        CHECK(est.sign_residual <= 1e-8);
        CHECK(est.shape_residual <= 1e-8);
        CHECK(std::abs(est.shape.mat().determinant() - 1.0) < 1e-10);

        // recompute the residuals independently at the returned estimate
        const Matrix inv_root = sym_inv_sqrt(est.shape.mat());
        Matrix z = (data.rowwise() - est.location.transpose()) * inv_root;
        Vector mean_sign = Vector::Zero(k);
        Matrix outer = Matrix::Zero(k, k);
        for (int i = 0; i < data.rows(); ++i) {
            const Vector u = z.row(i).transpose().normalized();
            mean_sign += u;
            outer += u * u.transpose();
        }
        mean_sign /= data.rows();
        outer /= data.rows();
        CHECK(mean_sign.norm() <= 1e-8);
        CHECK((outer - Matrix::Identity(k, k) / k).norm() <= 1e-8);
    }
}

TEST_CASE("hr_estimate is affine equivariant") {
    std::mt19937_64 rng(3002);
    const Matrix data = random_matrix(60, 2, rng);
    const auto base = hr_estimate(data);
    for (int rep = 0; rep < 5; ++rep) {
        const Matrix a = random_invertible(2, rng);
        const Vector b = random_vector(2, rng);
        const Matrix transformed = (data * a.transpose()).rowwise() + b.transpose();
        const auto est = hr_estimate(transformed);
        CHECK((est.location - (a * base.location + b)).norm() < 1e-6);
        CHECK((est.shape.mat() - expected_shape_image(base.shape, a).mat()).norm() < 1e-6);
    }
}

TEST_CASE("hr_estimate is consistent on a large spherical Gaussian sample") {
    const Matrix data = spherical_sample(EllipticalFamily::gaussian(2), 10000, 99);
    const auto est = hr_estimate(data);
    CHECK(est.location.norm() < 0.05);
    CHECK((est.shape.mat() - Matrix::Identity(2, 2)).norm() < 0.05);
}

TEST_CASE("hr_estimate rejects degenerate input and reports non-convergence") {
    Matrix with_center(5, 2);
    with_center << 0, 0, 1, 0, -1, 0, 0, 1, 0, -1;
    CHECK_THROWS_AS(hr_estimate(with_center), DegenerateDataError);

    std::mt19937_64 rng(3003);
    const Matrix data = random_matrix(40, 2, rng);
    CHECK_THROWS_AS(hr_estimate(data, 1e-8, 1), ConvergenceFailureError);
}

TEST_CASE("tyler_pooled returns the identity at an exact fixed point") {
    const auto shape = tyler_pooled(cross_points());
    CHECK((shape.mat() - Matrix::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("tyler_pooled meets its fixed-point contract") {
    std::mt19937_64 rng(3004);
    for (int k : {2, 3, 4}) {
        const Matrix data = random_matrix(150, k, rng);
        const auto shape = tyler_pooled(data);
        CHECK(std::abs(shape.mat().determinant() - 1.0) < 1e-10);
        const Matrix inv_root = sym_inv_sqrt(shape.mat());
        Matrix scatter = Matrix::Zero(k, k);
        for (int i = 0; i < data.rows(); ++i) {
            const Vector z = inv_root * data.row(i).transpose();
            scatter += z * z.transpose() / z.squaredNorm();
        }
        scatter *= static_cast<double>(k) / data.rows();
        CHECK((scatter - Matrix::Identity(k, k)).norm() <= 1e-9);
    }
}

TEST_CASE("tyler_pooled is equivariant and robust to heavy tails") {
    std::mt19937_64 rng(3005);
    const Matrix data = random_matrix(120, 2, rng);
    const auto base = tyler_pooled(data);
    const Matrix a = random_invertible(2, rng);
    const auto transformed = tyler_pooled(data * a.transpose());
    CHECK((transformed.mat() - expected_shape_image(base, a).mat()).norm() < 1e-6);

    const Matrix heavy = spherical_sample(EllipticalFamily::student(2, 0.5), 10000, 123);
    CHECK((tyler_pooled(heavy).mat() - Matrix::Identity(2, 2)).norm() < 0.05);

    Matrix with_zero = cross_points();
    with_zero.row(0).setZero();
    CHECK_THROWS_AS(tyler_pooled(with_zero), DegenerateDataError);
}

TEST_CASE("align produces midrank-tied frames on duplicated groups") {
    std::mt19937_64 rng(3006);
    const Matrix g = random_matrix(40, 2, rng);
    const auto frame = align(make_grouped_sample({g, g}));
    CHECK(frame.had_ties);
    CHECK(frame.scale == median(frame.distances));
    // every distance appears in both groups, so the per-group rank multisets agree
    Vector first = frame.ranks.head(40), second = frame.ranks.tail(40);
    std::sort(first.data(), first.data() + 40);
    std::sort(second.data(), second.data() + 40);
    CHECK((first - second).norm() == 0.0);
}

TEST_CASE("ranks are exactly invariant under monotone radial transforms at known theta") {
    std::mt19937_64 rng(3007);
    const Matrix g1 = random_matrix(30, 2, rng);
    const Matrix g2 = random_matrix(50, 2, rng);
    const auto sample = make_grouped_sample({g1, g2});
    const auto frame = align_known(sample, {Vector::Zero(2), Vector::Zero(2)},
                                   ShapeMatrix(Matrix::Identity(2, 2)));
    const auto cubed = transform_radial(frame, [](double r) { return r * r * r; });
    CHECK((frame.ranks - cubed.ranks).norm() == 0.0);
    CHECK((frame.signs - cubed.signs).norm() == 0.0);
}

TEST_CASE("aligned distances scale by a common factor under affine maps") {
    std::mt19937_64 rng(3008);
    const Matrix g1 = random_matrix(45, 2, rng);
    const Matrix g2 = random_matrix(55, 2, rng);
    const auto frame = align(make_grouped_sample({g1, g2}));

    const Matrix a = random_invertible(2, rng);
    const Vector b1 = random_vector(2, rng), b2 = random_vector(2, rng);
    const auto transformed = align(make_grouped_sample(
        {(g1 * a.transpose()).rowwise() + b1.transpose(),
         (g2 * a.transpose()).rowwise() + b2.transpose()}));

    const double c = transformed.distances(0) / frame.distances(0);
    for (int i = 0; i < frame.total(); ++i)
        CHECK(transformed.distances(i) / frame.distances(i) ==
              Catch::Approx(c).epsilon(1e-9));
    CHECK((frame.ranks - transformed.ranks).norm() == 0.0);
}

TEST_CASE("grouped sample validation") {
    CHECK_THROWS_AS(make_grouped_sample({}), DimensionMismatchError);
    CHECK_THROWS_AS(make_grouped_sample({Matrix::Zero(2, 2)}), DegenerateDataError);
    Matrix bad = Matrix::Zero(5, 2);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(make_grouped_sample({bad}), DomainError);
    std::mt19937_64 rng(3009);
    CHECK_THROWS_AS(
        make_grouped_sample({random_matrix(10, 2, rng), random_matrix(10, 3, rng)}),
        DimensionMismatchError);
}
