#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "scatterhom/distributions.hpp"
#include "scatterhom/elliptical.hpp"
#include "scatterhom/errors.hpp"
#include "scatterhom/quadrature.hpp"

namespace scatterhom {

enum class ScoreKind { vdw, student, powerexp, power };

/// Score function K on (0,1) used to weight the pooled ranks, together with
/// its constants J_k(K) = E[K^2(U)] and L_k(K) = J_k(K) - k^2. Score families:
///
///   vdw         K(u) = Psi_k^{-1}(u)                        (Gaussian scores)
///   student nu  K(u) = k(k+nu) q / (nu + k q), q = G_{k,nu}^{-1}(u)
///   powerexp h  K(u) = phi(r) r at r the radial e_h quantile
///   power a     K(u) = k(a+1) u^a        (a=1 Wilcoxon, a=2 Spearman)
///
/// All satisfy the normalization E[K(U)] = k.
class ScoreFunction {
public:
    static ScoreFunction van_der_waerden(int k) { return ScoreFunction(ScoreKind::vdw, k, 0.0); }
    static ScoreFunction student(int k, double nu) {
        if (!(nu > 0.0)) throw InvalidParameterError("student score: nu must be positive");
        return ScoreFunction(ScoreKind::student, k, nu);
    }
    static ScoreFunction power_exponential(int k, double eta) {
        if (!(eta > 0.0)) throw InvalidParameterError("powerexp score: eta must be positive");
        return ScoreFunction(ScoreKind::powerexp, k, eta);
    }
    static ScoreFunction power(int k, double a) {
        if (!(a > 0.0)) throw InvalidParameterError("power score: a must be positive");
        return ScoreFunction(ScoreKind::power, k, a);
    }
    static ScoreFunction wilcoxon(int k) { return power(k, 1.0); }
    static ScoreFunction spearman(int k) { return power(k, 2.0); }

    /// The locally optimal score K_{g1} of a standardized radial family.
    static ScoreFunction for_family(const EllipticalFamily& g) {
        switch (g.kind()) {
            case FamilyKind::gaussian: return van_der_waerden(g.dim());
            case FamilyKind::student: return student(g.dim(), g.parameter());
            case FamilyKind::powerexp: return power_exponential(g.dim(), g.parameter());
        }
        throw InvalidParameterError("for_family: unknown family");
    }

    ScoreKind kind() const { return kind_; }
    int dim() const { return dim_; }
    double parameter() const { return param_; }

    double operator()(double u) const { return evaluate(u, 1.0 - u); }

    /// Evaluation taking the complement 1-u explicitly, so callers working in
    /// the far upper tail keep full precision (u may round to 1.0 there).
    double evaluate(double u, double one_minus_u) const {
        if (!(u > 0.0) || !(one_minus_u > 0.0) || u > 1.0 || one_minus_u > 1.0)
            throw DomainError("score evaluate: u must be in (0,1)");
        switch (kind_) {
            case ScoreKind::vdw: {
                const auto chi2 = DistributionHandle::chi_squared(dim_);
                return (u < 0.5) ? chi2.quantile(u) : chi2.quantile_complement(one_minus_u);
            }
            case ScoreKind::student: {
                const auto f = DistributionHandle::fisher_f(dim_, param_);
                double q;
                if (u < 0.5) {
                    q = f.quantile(u);
                } else {
                    try {
                        q = f.quantile_complement(one_minus_u);
                    } catch (const std::exception&) {
                        // the F quantile inversion can give up deep in the
                        // tail, where the score has reached its k + nu limit
                        if (one_minus_u < 1e-15) return dim_ + param_;
                        throw;
                    }
                }
                if (std::isinf(q)) return dim_ + param_;
                return dim_ * (dim_ + param_) * q / (param_ + dim_ * q);
            }
            case ScoreKind::powerexp: {
                const EllipticalFamily fam = EllipticalFamily::power_exponential(dim_, param_);
                const double r = (u < 0.5) ? fam.radial_quantile(u)
                                           : fam.radial_quantile_complement(one_minus_u);
                // phi(r) r with phi(r) = 2 eta b r^{2 eta - 1}
                return 2.0 * param_ * fam.standardization_constant() *
                       std::pow(r, 2.0 * param_);
            }
            case ScoreKind::power:
                return dim_ * (param_ + 1.0) * std::pow(u, param_);
        }
        return 0.0;
    }

    /// (J_k(K), L_k(K)); closed forms where available, quadrature otherwise.
    std::pair<double, double> constants() const {
        const double k = dim_;
        switch (kind_) {
            case ScoreKind::vdw: return {k * (k + 2), 2 * k};
            case ScoreKind::student: {
                const double nu = param_;
                return {k * (k + 2) * (k + nu) / (k + nu + 2), 2 * k * nu / (k + nu + 2)};
            }
            case ScoreKind::power: {
                const double a = param_;
                return {k * k * (a + 1) * (a + 1) / (2 * a + 1), k * k * a * a / (2 * a + 1)};
            }
            case ScoreKind::powerexp: {
                const double j = quad::integrate_unit(
                    [&](double u, double w) {
                        const double v = evaluate(u, w);
                        return v * v;
                    },
                    1e-9);
                return {j, j - k * k};
            }
        }
        return {0.0, 0.0};
    }

    double jk() const { return constants().first; }
    double lk() const { return constants().second; }

    std::string name() const {
        switch (kind_) {
            case ScoreKind::vdw: return "vdw";
            case ScoreKind::student: return "student:" + format_param();
            case ScoreKind::powerexp: return "powerexp:" + format_param();
            case ScoreKind::power:
                if (param_ == 1.0) return "wilcoxon";
                if (param_ == 2.0) return "spearman";
                return "power:" + format_param();
        }
        return "";
    }

private:
    ScoreFunction(ScoreKind kind, int k, double param) : kind_(kind), dim_(k), param_(param) {
        if (k < 1) throw InvalidParameterError("ScoreFunction: dimension must be >= 1");
    }
    std::string format_param() const {
        double ip;
        if (std::modf(param_, &ip) == 0.0) return std::to_string(static_cast<long long>(ip));
        std::string s = std::to_string(param_);
        while (s.size() > 1 && s.back() == '0') s.pop_back();
        if (!s.empty() && s.back() == '.') s.pop_back();
        return s;
    }

    ScoreKind kind_;
    int dim_;
    double param_;
};

/// Score lookup by CLI/plan name: vdw, wilcoxon, spearman, student:<nu>,
/// power:<a>, powerexp:<eta>.
inline ScoreFunction score_from_name(const std::string& name, int k) {
    if (name == "vdw") return ScoreFunction::van_der_waerden(k);
    if (name == "wilcoxon") return ScoreFunction::wilcoxon(k);
    if (name == "spearman") return ScoreFunction::spearman(k);
    const auto parse_param = [&](std::size_t prefix_len) {
        try {
            std::size_t pos = 0;
            const std::string tail = name.substr(prefix_len);
            const double v = std::stod(tail, &pos);
            if (pos != tail.size()) throw std::invalid_argument(name);
            return v;
        } catch (const std::exception&) {
            throw InvalidParameterError("invalid score parameter in '" + name + "'");
        }
    };
    if (name.rfind("student:", 0) == 0) return ScoreFunction::student(k, parse_param(8));
    if (name.rfind("power:", 0) == 0) return ScoreFunction::power(k, parse_param(6));
    if (name.rfind("powerexp:", 0) == 0)
        return ScoreFunction::power_exponential(k, parse_param(9));
    throw InvalidParameterError("unknown score '" + name + "'");
}

/// Cross constants (J_k(K, g1), L_k(K, g1)) with L = J - k^2, by adaptive
/// quadrature of E[K(U) K_{g1}(U)] at tolerance 1e-9.
inline std::pair<double, double> cross_constants(const ScoreFunction& s,
                                                 const EllipticalFamily& g) {
    if (s.dim() != g.dim())
        throw DimensionMismatchError("cross_constants: score and family dimensions disagree");
    const ScoreFunction kg = ScoreFunction::for_family(g);
    const double j = quad::integrate_unit(
        [&](double u, double w) { return s.evaluate(u, w) * kg.evaluate(u, w); }, 1e-9);
    const double k = static_cast<double>(s.dim());
    return {j, j - k * k};
}

}  // namespace scatterhom
