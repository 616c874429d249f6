#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "scatterhom/distributions.hpp"
#include "scatterhom/errors.hpp"
#include "scatterhom/matrix_core.hpp"
#include "scatterhom/quadrature.hpp"

namespace scatterhom {

enum class FamilyKind { gaussian, student, powerexp };

/// A standardized radial family in dimension k: Gaussian, Student t_nu, or
/// power-exponential e_eta. The standardization constant (a_k, a_{k,nu} or
/// b_{k,eta}) is fixed so that the radial distance has median one, i.e.
/// radial_cdf(1) = 1/2.
class EllipticalFamily {
public:
    static EllipticalFamily gaussian(int k) { return EllipticalFamily(FamilyKind::gaussian, k, 0.0); }
    static EllipticalFamily student(int k, double nu) {
        if (!(nu > 0.0)) throw InvalidParameterError("student: nu must be positive");
        return EllipticalFamily(FamilyKind::student, k, nu);
    }
    static EllipticalFamily power_exponential(int k, double eta) {
        if (!(eta > 0.0)) throw InvalidParameterError("power_exponential: eta must be positive");
        return EllipticalFamily(FamilyKind::powerexp, k, eta);
    }

    FamilyKind kind() const { return kind_; }
    int dim() const { return dim_; }
    double parameter() const { return param_; }

    /// a_k, a_{k,nu}, or b_{k,eta}.
    double standardization_constant() const { return c_; }

    double radial_cdf(double r) const {
        if (!(r >= 0.0)) throw DomainError("radial_cdf: r must be nonnegative");
        switch (kind_) {
            case FamilyKind::gaussian: return radial_dist_.cdf(c_ * r * r);
            case FamilyKind::student: return radial_dist_.cdf(c_ * r * r / dim_);
            case FamilyKind::powerexp: return radial_dist_.cdf(c_ * std::pow(r, 2.0 * param_));
        }
        return 0.0;
    }

    double radial_quantile(double p) const {
        if (!(p > 0.0 && p < 1.0)) throw DomainError("radial_quantile: p must be in (0,1)");
        return radial_from_core(radial_dist_.quantile(p));
    }

    /// Quantile at p = 1 - q, accurate deep in the upper tail.
    double radial_quantile_complement(double q) const {
        if (!(q > 0.0 && q < 1.0))
            throw DomainError("radial_quantile_complement: q must be in (0,1)");
        return radial_from_core(radial_dist_.quantile_complement(q));
    }

    bool has_finite_fourth_moment() const {
        return kind_ != FamilyKind::student || param_ > 4.0;
    }

    /// Elliptical kurtosis kappa_k, computed from the fourth/second radial
    /// moments E_k and D_k by adaptive quadrature over the unit interval.
    /// Zero at the Gaussian; +infinity for Student nu <= 4.
    double kurtosis() const {
        if (kind_ == FamilyKind::gaussian) return 0.0;
        if (!has_finite_fourth_moment()) return std::numeric_limits<double>::infinity();
        const double ek = radial_moment(4);
        const double dk = radial_moment(2);
        return (dim_ / (dim_ + 2.0)) * ek / (dk * dk) - 1.0;
    }

    /// E_k (order 4) and D_k (order 2): integrals of the radial quantile
    /// raised to the given power.
    double radial_moment(int order) const {
        return quad::integrate_unit(
            [&](double u, double w) {
                const double r = (u < 0.5) ? radial_quantile(u) : radial_quantile_complement(w);
                return std::pow(r, order);
            },
            1e-9);
    }

    std::string name() const {
        switch (kind_) {
            case FamilyKind::gaussian: return "gaussian";
            case FamilyKind::student: return "student:" + format_param();
            case FamilyKind::powerexp: return "powerexp:" + format_param();
        }
        return "";
    }

private:
    EllipticalFamily(FamilyKind kind, int k, double param)
        : kind_(kind), dim_(k), param_(param), radial_dist_(make_core(kind, k, param)) {
        if (k < 1) throw InvalidParameterError("EllipticalFamily: dimension must be >= 1");
        c_ = radial_dist_.quantile(0.5);
        if (kind_ == FamilyKind::student) c_ *= dim_;
    }

    // Core variable whose distribution is parameter-free:
    //   gaussian:  a_k d^2            ~ chi-square(k)
    //   student:   (a_{k,nu}/k) d^2   ~ F(k, nu)
    //   powerexp:  b_{k,eta} d^{2eta} ~ gamma(k/(2 eta), 1)
    static DistributionHandle make_core(FamilyKind kind, int k, double param) {
        switch (kind) {
            case FamilyKind::gaussian: return DistributionHandle::chi_squared(k);
            case FamilyKind::student: return DistributionHandle::fisher_f(k, param);
            case FamilyKind::powerexp: return DistributionHandle::gamma(k / (2.0 * param));
        }
        throw InvalidParameterError("EllipticalFamily: unknown kind");
    }

    double radial_from_core(double core) const {
        switch (kind_) {
            case FamilyKind::gaussian: return std::sqrt(core / c_);
            case FamilyKind::student: return std::sqrt(dim_ * core / c_);
            case FamilyKind::powerexp: return std::pow(core / c_, 0.5 / param_);
        }
        return 0.0;
    }

    std::string format_param() const {
        double ip;
        if (std::modf(param_, &ip) == 0.0) return std::to_string(static_cast<long long>(ip));
        std::string s = std::to_string(param_);
        while (s.size() > 1 && s.back() == '0') s.pop_back();
        if (!s.empty() && s.back() == '.') s.pop_back();
        return s;
    }

    FamilyKind kind_;
    int dim_;
    double param_;
    DistributionHandle radial_dist_;
    double c_;
};

/// Sampling specification: location, scatter, radial family.
struct EllipticalSampleSpec {
    EllipticalFamily family;
    Vector location;
    Matrix scatter;
};

/// Draws a direction uniform on the unit sphere (normalized Gaussian vector).
inline Vector sphere_direction(int k, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector z(k);
    double norm2 = 0.0;
    do {
        for (int i = 0; i < k; ++i) z(i) = gauss(rng);
        norm2 = z.squaredNorm();
    } while (norm2 <= 0.0);
    return z / std::sqrt(norm2);
}

/// Draws n rows X = theta + d Sigma^{1/2} U with U uniform on the sphere and
/// d the radial quantile of a uniform draw. Deterministic given the engine.
inline Matrix sample(const EllipticalSampleSpec& spec, int n, std::mt19937_64& rng) {
    if (n < 1) throw InvalidParameterError("sample: n must be >= 1");
    const int k = spec.family.dim();
    if (spec.location.size() != k || spec.scatter.rows() != k)
        throw DimensionMismatchError("sample: spec dimensions disagree");
    const Matrix root = sym_sqrt(spec.scatter);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Matrix out(n, k);
    for (int i = 0; i < n; ++i) {
        const Vector u = sphere_direction(k, rng);
        double p;
        do {
            p = unif(rng);
        } while (p <= 0.0);
        const double d = spec.family.radial_quantile(p);
        out.row(i) = (spec.location + d * (root * u)).transpose();
    }
    return out;
}

}  // namespace scatterhom
