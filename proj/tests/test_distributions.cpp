#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "scatterhom/distributions.hpp"

using namespace scatterhom;

TEST_CASE("chi-square CDF closed-form anchors") {
    const auto chi2 = DistributionHandle::chi_squared(2);
    CHECK(chi2.cdf(2.0 * std::log(2.0)) == Catch::Approx(0.5).margin(1e-12));
    CHECK(chi2.cdf(0.0) == 0.0);
    CHECK(DistributionHandle::fisher_f(2, 5).cdf(0.0) == 0.0);
    CHECK(DistributionHandle::gamma(1.5).cdf(0.0) == 0.0);
}

TEST_CASE("chi-square CDF matches a quadrature oracle") {
    // chi-square(4) density x e^{-x/2}/4 integrated by composite Simpson
    const double x0 = 3.5;
    const int steps = 1000000;
    const double h = x0 / steps;
    auto density = [](double x) { return x * std::exp(-0.5 * x) / 4.0; };
    double sum = density(0.0) + density(x0);
    for (int i = 1; i < steps; ++i) sum += density(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    const double oracle = sum * h / 3.0;
    CHECK(DistributionHandle::chi_squared(4).cdf(x0) == Catch::Approx(oracle).margin(1e-10));
}

TEST_CASE("quantile anchors") {
    CHECK(chi_squared_quantile(3, 0.95) == Catch::Approx(7.8147).margin(5e-5));
    CHECK(chi_squared_quantile(2, 0.5) == Catch::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("Fisher-Snedecor median by bisection against the CDF") {
    const auto f = DistributionHandle::fisher_f(2, 5);
    double lo = 0.0, hi = 50.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f.cdf(mid) < 0.5 ? lo : hi) = mid;
    }
    CHECK(f.quantile(0.5) == Catch::Approx(0.5 * (lo + hi)).epsilon(1e-10));
}

TEST_CASE("quantile-cdf round trip over a parameter grid") {
    const double nus[] = {0.5, 2.0, 5.0, 8.0, 12.0};
    for (int k = 1; k <= 10; ++k) {
        for (double p : {1e-8, 1e-3, 0.2, 0.5, 0.8, 1.0 - 1e-3, 1.0 - 1e-8}) {
            const auto chi2 = DistributionHandle::chi_squared(k);
            CHECK(chi2.cdf(chi2.quantile(p)) == Catch::Approx(p).epsilon(1e-8));
            for (double nu : nus) {
                const auto f = DistributionHandle::fisher_f(k, nu);
                CHECK(f.cdf(f.quantile(p)) == Catch::Approx(p).epsilon(1e-8));
            }
        }
    }
}

TEST_CASE("complement accessors agree in the far tail") {
    const auto chi2 = DistributionHandle::chi_squared(3);
    const double q = chi2.quantile_complement(1e-14);
    CHECK(chi2.cdf_complement(q) == Catch::Approx(1e-14).epsilon(1e-6));
}

TEST_CASE("domain and parameter errors") {
    CHECK_THROWS_AS(DistributionHandle::chi_squared(0.0), InvalidParameterError);
    CHECK_THROWS_AS(DistributionHandle::fisher_f(2, -1.0), InvalidParameterError);
    CHECK_THROWS_AS(DistributionHandle::chi_squared(2).quantile(0.0), DomainError);
    CHECK_THROWS_AS(DistributionHandle::chi_squared(2).quantile(1.0), DomainError);
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(DistributionHandle::chi_squared(2).cdf(inf), DomainError);
}

TEST_CASE("noncentral chi-square upper tail") {
    // ncp = 0 reduces to the central distribution
    const double x = chi_squared_quantile(3, 0.95);
    CHECK(noncentral_chi_squared_upper(3, 0.0, x) == Catch::Approx(0.05).epsilon(1e-10));
    CHECK(noncentral_chi_squared_upper(3, 5.0, x) > 0.05);
}
