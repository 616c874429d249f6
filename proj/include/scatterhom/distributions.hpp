#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <cmath>
#include <variant>

#include "scatterhom/errors.hpp"

namespace scatterhom {

/// Handle for the scalar distributions the score and radial machinery needs:
/// chi-square(k), Fisher-Snedecor(k, nu) with fractional degrees of freedom,
/// and gamma(shape, scale). Evaluations delegate to Boost.Math.
class DistributionHandle {
public:
    static DistributionHandle chi_squared(double k) {
        check_positive(k, "chi-square degrees of freedom");
        return DistributionHandle(boost::math::chi_squared_distribution<double>(k));
    }
    static DistributionHandle fisher_f(double k, double nu) {
        check_positive(k, "Fisher-Snedecor numerator degrees of freedom");
        check_positive(nu, "Fisher-Snedecor denominator degrees of freedom");
        return DistributionHandle(boost::math::fisher_f_distribution<double>(k, nu));
    }
    static DistributionHandle gamma(double shape, double scale = 1.0) {
        check_positive(shape, "gamma shape");
        check_positive(scale, "gamma scale");
        return DistributionHandle(boost::math::gamma_distribution<double>(shape, scale));
    }

    double cdf(double x) const {
        if (!std::isfinite(x)) throw DomainError("cdf: argument must be finite");
        if (x <= 0.0) return 0.0;
        return std::visit([&](const auto& d) { return boost::math::cdf(d, x); }, dist_);
    }

    /// Upper-tail probability P[X > x], accurate when it is tiny.
    double cdf_complement(double x) const {
        if (x <= 0.0) return 1.0;
        return std::visit(
            [&](const auto& d) { return boost::math::cdf(boost::math::complement(d, x)); },
            dist_);
    }

    double quantile(double p) const {
        if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile: p must be in (0,1)");
        return std::visit([&](const auto& d) { return boost::math::quantile(d, p); }, dist_);
    }

    /// Quantile at p = 1 - q, accurate for tiny upper-tail probabilities q.
    double quantile_complement(double q) const {
        if (!(q > 0.0 && q < 1.0)) throw DomainError("quantile_complement: q must be in (0,1)");
        return std::visit(
            [&](const auto& d) { return boost::math::quantile(boost::math::complement(d, q)); },
            dist_);
    }

private:
    using Variant = std::variant<boost::math::chi_squared_distribution<double>,
                                 boost::math::fisher_f_distribution<double>,
                                 boost::math::gamma_distribution<double>>;
    explicit DistributionHandle(Variant d) : dist_(std::move(d)) {}
    static void check_positive(double v, const char* what) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw InvalidParameterError(std::string(what) + " must be positive");
    }
    Variant dist_;
};

/// Chi-square CDF (Psi_k) and quantile shorthands.
inline double chi_squared_cdf(double k, double x) {
    return DistributionHandle::chi_squared(k).cdf(x);
}
inline double chi_squared_quantile(double k, double p) {
    return DistributionHandle::chi_squared(k).quantile(p);
}

/// P[chi-square_df(ncp) > x].
inline double noncentral_chi_squared_upper(double df, double ncp, double x) {
    if (ncp <= 0.0) return DistributionHandle::chi_squared(df).cdf_complement(x);
    boost::math::non_central_chi_squared_distribution<double> d(df, ncp);
    return boost::math::cdf(boost::math::complement(d, x));
}

}  // namespace scatterhom
