#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "scatterhom/distributions.hpp"
#include "scatterhom/elliptical.hpp"
#include "scatterhom/errors.hpp"
#include "scatterhom/matrix_core.hpp"
#include "scatterhom/scores.hpp"

namespace scatterhom {

/// A local alternative direction: group weights l_i summing to one, scale
/// shifts s_i^2 and trace-constrained shape shifts v_i around a common
/// baseline (sigma^2, V).
struct LocalAlternative {
    std::vector<double> weights;
    std::vector<double> scale_shifts;
    std::vector<Matrix> shape_shifts;
    double sigma2;
    ShapeMatrix shape;

    int group_count() const { return static_cast<int>(weights.size()); }
    int dim() const { return shape.dim(); }
};

inline LocalAlternative make_local_alternative(std::vector<double> weights,
                                               std::vector<double> scale_shifts,
                                               std::vector<Matrix> shape_shifts,
                                               double sigma2, ShapeMatrix shape) {
    const auto m = weights.size();
    if (m < 2 || scale_shifts.size() != m || shape_shifts.size() != m)
        throw DimensionMismatchError("LocalAlternative: need m >= 2 aligned components");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w > 0.0 && w < 1.0))
            throw InvalidParameterError("LocalAlternative: weights must lie in (0,1)");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-10)
        throw InvalidParameterError("LocalAlternative: weights must sum to one");
    const Matrix vinv = sym_pow(shape.mat(), -1.0);
    for (const auto& v : shape_shifts) {
        detail::require_symmetric(v, "LocalAlternative shape shift");
        if (std::abs((vinv * v).trace()) > 1e-10)
            throw InvalidParameterError("LocalAlternative: shape shift violates tr(V^{-1}v)=0");
    }
    if (!(sigma2 > 0.0)) throw InvalidParameterError("LocalAlternative: sigma2 must be positive");
    return LocalAlternative{std::move(weights), std::move(scale_shifts), std::move(shape_shifts),
                            sigma2, std::move(shape)};
}

/// Noncentrality building blocks
///   r_II  = sum_{i<i'} (l_i l_{i'}/sigma^4) (s_i^2/sqrt(l_i) - s_{i'}^2/sqrt(l_{i'}))^2
///   r_III = sum_{i<i'} l_i l_{i'} tr[(V^{-1}(v_i/sqrt(l_i) - v_{i'}/sqrt(l_{i'})))^2]
inline std::pair<double, double> noncentrality_terms(const LocalAlternative& alt) {
    const int m = alt.group_count();
    const Matrix vinv = sym_pow(alt.shape.mat(), -1.0);
    double r2 = 0.0, r3 = 0.0;
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            const double li = alt.weights[i], lj = alt.weights[j];
            const double ds = alt.scale_shifts[i] / std::sqrt(li) -
                              alt.scale_shifts[j] / std::sqrt(lj);
            r2 += li * lj * ds * ds / (alt.sigma2 * alt.sigma2);
            const Matrix dv = alt.shape_shifts[i] / std::sqrt(li) -
                              alt.shape_shifts[j] / std::sqrt(lj);
            const Matrix t = vinv * dv;
            r3 += li * lj * (t * t).trace();
        }
    }
    return {r2, r3};
}

struct AreValues {
    double scale;
    double shape; // NaN in dimension 1 (no shape parameter)
};

/// Asymptotic relative efficiencies of the K-score rank test with respect to
/// the pseudo-Gaussian test under radial density g1:
///   scale: ((k+2) kappa + 2) L_k^2(K,g1) / (4k L_k(K))
///   shape: (1 + kappa) J_k^2(K,g1) / (k(k+2) J_k(K))
/// Both are +infinity when g1 has infinite fourth moments.
inline AreValues are_pair(const ScoreFunction& s, const EllipticalFamily& g) {
    const double k = s.dim();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (!g.has_finite_fourth_moment()) {
        const double inf = std::numeric_limits<double>::infinity();
        return {inf, k > 1 ? inf : nan};
    }
    const double kappa = g.kurtosis();
    const auto [jkg, lkg] = cross_constants(s, g);
    const auto [jk, lk] = s.constants();
    const double scale = ((k + 2) * kappa + 2) * lkg * lkg / (4 * k * lk);
    const double shape = k > 1 ? (1 + kappa) * jkg * jkg / (k * (k + 2) * jk) : nan;
    return {scale, shape};
}

/// Mixing weight xi in [0,1] between scale and shape alternatives:
/// 0 for pure scale, 1 for pure shape.
inline double mixing_weight(double r2, double r3, int k, double kappa) {
    if (!(r2 + r3 > 0.0))
        throw ZeroAlternativeError("mixing_weight: alternative lies in the null space");
    const double a = (k + 2.0) * kappa + 2.0;
    return a * r3 / (2.0 * k * (1.0 + kappa) * r2 + a * r3);
}

inline double mixing_weight(const LocalAlternative& alt, const EllipticalFamily& g) {
    const double kappa = g.kurtosis();
    if (std::isinf(kappa))
        throw InvalidParameterError("mixing_weight: infinite kurtosis");
    const auto [r2, r3] = noncentrality_terms(alt);
    return mixing_weight(r2, r3, alt.dim(), kappa);
}

/// Noncentrality parameter of the K-score rank test under g1-alternatives:
///   L_k^2(K,g1)/(4 L_k(K)) r_II + J_k^2(K,g1)/(2k(k+2) J_k(K)) r_III.
inline double rank_noncentrality(const ScoreFunction& s, const EllipticalFamily& g, double r2,
                                 double r3) {
    const double k = s.dim();
    const auto [jkg, lkg] = cross_constants(s, g);
    const auto [jk, lk] = s.constants();
    return lkg * lkg / (4 * lk) * r2 + jkg * jkg / (2 * k * (k + 2) * jk) * r3;
}

/// Noncentrality parameter of the pseudo-Gaussian test:
///   k/((k+2) kappa + 2) r_II + 1/(2(1 + kappa)) r_III.
inline double pseudo_gaussian_noncentrality(const EllipticalFamily& g, double r2, double r3) {
    const double kappa = g.kurtosis();
    if (std::isinf(kappa))
        throw InvalidParameterError("pseudo-Gaussian noncentrality: infinite kurtosis");
    const double k = g.dim();
    return k / ((k + 2) * kappa + 2) * r2 + r3 / (2 * (1 + kappa));
}

/// Asymptotic local power P[chi2_df(ncp) > chi2_{df;1-alpha}] with
/// df = (m-1) k(k+1)/2.
inline double local_power_from_ncp(double ncp, int m, int k, double alpha) {
    const int df = (m - 1) * k * (k + 1) / 2;
    const double cutoff = DistributionHandle::chi_squared(df).quantile(1.0 - alpha);
    return noncentral_chi_squared_upper(df, ncp, cutoff);
}

inline double local_power_rank(const ScoreFunction& s, const LocalAlternative& alt,
                               const EllipticalFamily& g, double alpha) {
    const auto [r2, r3] = noncentrality_terms(alt);
    return local_power_from_ncp(rank_noncentrality(s, g, r2, r3), alt.group_count(), alt.dim(),
                                alpha);
}

inline double local_power_pseudo_gaussian(const LocalAlternative& alt, const EllipticalFamily& g,
                                          double alpha) {
    const auto [r2, r3] = noncentrality_terms(alt);
    return local_power_from_ncp(pseudo_gaussian_noncentrality(g, r2, r3), alt.group_count(),
                                alt.dim(), alpha);
}

struct AreRow {
    std::string score;
    int k;
    std::string density;
    double are_scale;
    double are_shape; // NaN when k = 1
};

/// Full ARE grid over scores x dimensions x densities. Score/density factories
/// take the dimension, since scores are dimension-specific.
inline std::vector<AreRow> table1(
    const std::vector<int>& ks,
    const std::vector<std::function<EllipticalFamily(int)>>& densities,
    const std::vector<std::function<ScoreFunction(int)>>& scores) {
    std::vector<AreRow> rows;
    for (const auto& make_score : scores) {
        for (int k : ks) {
            const ScoreFunction s = make_score(k);
            for (const auto& make_density : densities) {
                const EllipticalFamily g = make_density(k);
                const AreValues v = are_pair(s, g);
                rows.push_back(AreRow{s.name(), k, g.name(), v.scale, v.shape});
            }
        }
    }
    return rows;
}

/// CSV with columns score,k,density,xi0_are,xi1_are. Undefined shape cells
/// (k = 1) are left empty.
inline void write_are_csv(std::ostream& os, const std::vector<AreRow>& rows) {
    os << "score,k,density,xi0_are,xi1_are\n";
    char buf[64];
    for (const auto& r : rows) {
        os << r.score << ',' << r.k << ',' << r.density << ',';
        std::snprintf(buf, sizeof buf, "%.3f", r.are_scale);
        os << buf << ',';
        if (!std::isnan(r.are_shape)) {
            std::snprintf(buf, sizeof buf, "%.3f", r.are_shape);
            os << buf;
        }
        os << '\n';
    }
}

}  // namespace scatterhom
