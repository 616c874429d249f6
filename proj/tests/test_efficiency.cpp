#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>
#include <sstream>

#include "scatterhom/efficiency.hpp"
#include "test_support.hpp"

using namespace scatterhom;

namespace {

LocalAlternative pure_scale_example() {
    const ShapeMatrix v(Matrix::Identity(2, 2));
    return make_local_alternative({0.5, 0.5}, {0.0, 1.0},
                                  {Matrix::Zero(2, 2), Matrix::Zero(2, 2)}, 1.0, v);
}

LocalAlternative random_alternative(int m, int k, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.2, 1.0);
    std::vector<double> weights(m);
    double sum = 0.0;
    for (auto& w : weights) {
        w = unif(rng);
        sum += w;
    }
    for (auto& w : weights) w /= sum;
    std::vector<double> scale_shifts(m);
    for (auto& s : scale_shifts) s = unif(rng) - 0.5;
    const ShapeMatrix base = test_support::random_shape(k, rng);
    const TraceFreeBasis basis(base);
    std::vector<Matrix> shape_shifts;
    for (int i = 0; i < m; ++i)
        shape_shifts.push_back(basis.lift(test_support::random_vector(shape_dim(k), rng)));
    return make_local_alternative(std::move(weights), std::move(scale_shifts),
                                  std::move(shape_shifts), 0.5 + unif(rng), base);
}

}  // namespace

TEST_CASE("noncentrality terms on hand-evaluated alternatives") {
    const auto [r2, r3] = noncentrality_terms(pure_scale_example());
    CHECK(r2 == Catch::Approx(0.5).epsilon(1e-12));
    CHECK(r3 == 0.0);

    // null direction: s_i^2 proportional to sqrt(weight)
    const ShapeMatrix id(Matrix::Identity(2, 2));
    const auto null_dir = make_local_alternative(
        {0.25, 0.75}, {0.5, std::sqrt(3.0) / 2.0},
        {Matrix::Zero(2, 2), Matrix::Zero(2, 2)}, 1.0, id);
    const auto [z2, z3] = noncentrality_terms(null_dir);
    CHECK(z2 == Catch::Approx(0.0).margin(1e-12));
    CHECK(z3 == 0.0);
}

TEST_CASE("noncentrality terms match the quadratic-form oracle") {
    std::mt19937_64 rng(5001);
    for (int rep = 0; rep < 5; ++rep) {
        const int m = 2 + rep % 3;
        const auto alt = random_alternative(m, 2, rng);
        const auto [r2, r3] = noncentrality_terms(alt);

        Matrix centering = Matrix::Identity(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                centering(i, j) -= std::sqrt(alt.weights[i] * alt.weights[j]);
        Vector s2(m);
        for (int i = 0; i < m; ++i) s2(i) = alt.scale_shifts[i];
        const double oracle2 =
            s2.dot(centering * s2) / (alt.sigma2 * alt.sigma2);
        CHECK(r2 == Catch::Approx(oracle2).margin(1e-12));

        const Matrix h = h_matrix(alt.shape);
        const int k0 = shape_dim(2);
        double oracle3 = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                oracle3 += centering(i, j) * vech_reduced(alt.shape_shifts[i]).dot(
                                                 h * vech_reduced(alt.shape_shifts[j]));
        oracle3 *= 2.0 * 2 * (2 + 2); // 2k(k+2)
        CHECK(r3 == Catch::Approx(oracle3).margin(1e-10));
        (void)k0;
    }
}

TEST_CASE("ARE anchors") {
    const auto id = are_pair(ScoreFunction::van_der_waerden(3), EllipticalFamily::gaussian(3));
    CHECK(id.scale == Catch::Approx(1.0).margin(1e-6));
    CHECK(id.shape == Catch::Approx(1.0).margin(1e-6));

    const auto vdw_t5 = are_pair(ScoreFunction::van_der_waerden(2),
                                 EllipticalFamily::student(2, 5));
    CHECK(vdw_t5.scale == Catch::Approx(2.551).margin(1e-3));
    CHECK(vdw_t5.shape == Catch::Approx(2.204).margin(1e-3));

    const auto sp_t8 = are_pair(ScoreFunction::spearman(3), EllipticalFamily::student(3, 8));
    CHECK(sp_t8.scale == Catch::Approx(1.348).margin(1e-3));
    CHECK(sp_t8.shape == Catch::Approx(1.225).margin(1e-3));

    const auto inf = are_pair(ScoreFunction::van_der_waerden(2),
                              EllipticalFamily::student(2, 4));
    CHECK(std::isinf(inf.scale));
    CHECK(std::isinf(inf.shape));

    const auto dim1 = are_pair(ScoreFunction::wilcoxon(1), EllipticalFamily::student(1, 5));
    CHECK(dim1.scale == Catch::Approx(1.993).margin(1e-3));
    CHECK(std::isnan(dim1.shape));
}

TEST_CASE("mixing weight limits and plug-in value") {
    CHECK(mixing_weight(0.0, 1.0, 2, 0.0) == 1.0);
    CHECK(mixing_weight(1.0, 0.0, 2, 0.0) == 0.0);
    CHECK(mixing_weight(1.0, 1.0, 2, 0.0) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK_THROWS_AS(mixing_weight(0.0, 0.0, 2, 0.0), ZeroAlternativeError);
}

TEST_CASE("local power at zero noncentrality equals the level") {
    CHECK(local_power_from_ncp(0.0, 2, 2, 0.05) == Catch::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("van der Waerden matches the pseudo-Gaussian test at the Gaussian") {
    const auto g = EllipticalFamily::gaussian(2);
    const auto alt = pure_scale_example();
    const auto [r2, r3] = noncentrality_terms(alt);
    CHECK(rank_noncentrality(ScoreFunction::van_der_waerden(2), g, r2, r3) ==
          Catch::Approx(pseudo_gaussian_noncentrality(g, r2, r3)).epsilon(1e-8));
    CHECK(local_power_rank(ScoreFunction::van_der_waerden(2), alt, g, 0.05) ==
          Catch::Approx(local_power_pseudo_gaussian(alt, g, 0.05)).epsilon(1e-8));
}

TEST_CASE("noncentrality ratio decomposes through the mixing weight") {
    std::mt19937_64 rng(5002);
    for (const auto& score : {ScoreFunction::van_der_waerden(2), ScoreFunction::wilcoxon(2),
                              ScoreFunction::spearman(2)}) {
        for (const auto& g : {EllipticalFamily::gaussian(2), EllipticalFamily::student(2, 8),
                              EllipticalFamily::power_exponential(2, 3)}) {
            const auto alt = random_alternative(3, 2, rng);
            const auto [r2, r3] = noncentrality_terms(alt);
            const double xi = mixing_weight(r2, r3, 2, g.kurtosis());
            const auto are = are_pair(score, g);
            const double ratio = rank_noncentrality(score, g, r2, r3) /
                                 pseudo_gaussian_noncentrality(g, r2, r3);
            CHECK(ratio ==
                  Catch::Approx((1 - xi) * are.scale + xi * are.shape).margin(1e-10));
        }
    }
}

TEST_CASE("van der Waerden AREs decay toward one as the Student tail lightens") {
    double prev_scale = 1e9, prev_shape = 1e9;
    for (double nu : {5.0, 8.0, 12.0, 50.0, 500.0}) {
        const auto v = are_pair(ScoreFunction::van_der_waerden(2),
                                EllipticalFamily::student(2, nu));
        CHECK(v.scale < prev_scale);
        CHECK(v.shape < prev_shape);
        CHECK(v.scale > 1.0);
        CHECK(v.shape > 1.0);
        prev_scale = v.scale;
        prev_shape = v.shape;
    }
}

TEST_CASE("table generator spot anchors and CSV formatting") {
    const auto rows = table1(
        {1, 4},
        {[](int k) { return EllipticalFamily::power_exponential(k, 3.0); }},
        {[](int k) { return ScoreFunction::van_der_waerden(k); }});
    REQUIRE(rows.size() == 2);
    CHECK(std::isnan(rows[0].are_shape)); // k = 1: no shape parameter
    CHECK(rows[1].are_scale == Catch::Approx(1.202).margin(1e-3));

    std::ostringstream csv;
    write_are_csv(csv, rows);
    const std::string text = csv.str();
    CHECK(text.find("score,k,density,xi0_are,xi1_are\n") == 0);
    CHECK(text.find("vdw,4,powerexp:3,1.202,") != std::string::npos);
}

TEST_CASE("alternative validation") {
    const ShapeMatrix id(Matrix::Identity(2, 2));
    CHECK_THROWS_AS(
        make_local_alternative({0.5, 0.6}, {0.0, 0.0},
                               {Matrix::Zero(2, 2), Matrix::Zero(2, 2)}, 1.0, id),
        InvalidParameterError);
    Matrix not_trace_free(2, 2);
    not_trace_free << 1.0, 0.0, 0.0, 1.0;
    CHECK_THROWS_AS(
        make_local_alternative({0.5, 0.5}, {0.0, 0.0},
                               {Matrix::Zero(2, 2), not_trace_free}, 1.0, id),
        InvalidParameterError);
}
