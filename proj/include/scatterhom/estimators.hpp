#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "scatterhom/errors.hpp"
#include "scatterhom/matrix_core.hpp"

namespace scatterhom {

/// m groups of k-dimensional observations, one matrix (rows = observations)
/// per group.
struct GroupedSample {
    std::vector<Matrix> groups;

    int dim() const { return groups.empty() ? 0 : static_cast<int>(groups.front().cols()); }
    int group_count() const { return static_cast<int>(groups.size()); }
    int size(int i) const { return static_cast<int>(groups[i].rows()); }
    int total() const {
        int n = 0;
        for (const auto& g : groups) n += static_cast<int>(g.rows());
        return n;
    }
};

inline GroupedSample make_grouped_sample(std::vector<Matrix> groups) {
    if (groups.empty()) throw DimensionMismatchError("GroupedSample: no groups");
    const auto k = groups.front().cols();
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const auto& g = groups[i];
        if (g.cols() != k)
            throw DimensionMismatchError("GroupedSample: inconsistent dimension in group " +
                                         std::to_string(i + 1));
        if (g.rows() < k + 1)
            throw DegenerateDataError("GroupedSample: group " + std::to_string(i + 1) +
                                      " needs at least k+1 observations");
        if (!g.allFinite())
            throw DomainError("GroupedSample: non-finite value in group " + std::to_string(i + 1));
    }
    return GroupedSample{std::move(groups)};
}

inline double median(Vector v) {
    const auto n = v.size();
    if (n == 0) throw DomainError("median of empty vector");
    std::nth_element(v.data(), v.data() + n / 2, v.data() + n);
    double hi = v(n / 2);
    if (n % 2 == 1) return hi;
    const double lo = *std::max_element(v.data(), v.data() + n / 2);
    return 0.5 * (lo + hi);
}

/// Pooled ranks in 1..n, midranks on ties.
inline Vector midranks(const Vector& values, bool* had_ties = nullptr) {
    const auto n = values.size();
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return values(a) < values(b); });
    Vector ranks(n);
    bool ties = false;
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && values(order[j + 1]) == values(order[i])) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Eigen::Index t = i; t <= j; ++t) ranks(order[t]) = r;
        if (j > i) ties = true;
        i = j + 1;
    }
    if (had_ties) *had_ties = ties;
    return ranks;
}

struct HrEstimate {
    Vector location;
    ShapeMatrix shape;
    int iterations;
    double sign_residual;
    double shape_residual;
};

namespace detail {

struct SignDecomposition {
    Matrix signs;     // n x k unit rows
    Vector distances; // n
};

inline SignDecomposition sign_decompose(const Matrix& data, const Vector& location,
                                        const Matrix& inv_root) {
    SignDecomposition out;
    out.signs = (data.rowwise() - location.transpose()) * inv_root;
    out.distances = out.signs.rowwise().norm();
    for (Eigen::Index i = 0; i < out.distances.size(); ++i) {
        if (!(out.distances(i) > 0.0))
            throw DegenerateDataError("observation coincides with the current center");
        out.signs.row(i) /= out.distances(i);
    }
    return out;
}

inline Vector coordinatewise_median(const Matrix& data) {
    Vector m(data.cols());
    for (Eigen::Index j = 0; j < data.cols(); ++j) m(j) = median(data.col(j));
    return m;
}

}  // namespace detail

namespace detail {

struct HrResiduals {
    SignDecomposition sd;
    Vector mean_sign;
    Matrix mean_outer;
    double sign_res;
    double shape_res;
    double merit;    // max of the two estimating-equation residuals
    Vector equation; // stacked (mean_sign, vech_reduced(mean UU' - I/k))
};

inline HrResiduals hr_residuals(const Matrix& data, const Vector& theta,
                                const Matrix& inv_root) {
    const int k = static_cast<int>(data.cols());
    HrResiduals r{sign_decompose(data, theta, inv_root), Vector(), Matrix(), 0, 0, 0,
                  Vector(k + shape_dim(k))};
    r.mean_sign = r.sd.signs.colwise().mean().transpose();
    r.mean_outer = r.sd.signs.transpose() * r.sd.signs / data.rows();
    const Matrix outer_res = r.mean_outer - Matrix::Identity(k, k) / k;
    r.sign_res = r.mean_sign.norm();
    r.shape_res = outer_res.norm();
    r.merit = std::max(r.sign_res, r.shape_res);
    r.equation.head(k) = r.mean_sign;
    r.equation.tail(shape_dim(k)) = vech_reduced(outer_res);
    return r;
}

/// Spatial median of the rows of data in the V-metric (V = root * root),
/// by Weiszfeld iteration with the Vardi-Zhang data-point handling: an
/// iterate captured by an observation either escapes along the residual
/// direction or, when the vertex optimality condition |sum_{i != j} U_i| <= 1
/// holds, identifies the observation as the median itself, which the signs
/// cannot accommodate (DegenerateData).
inline void weiszfeld_median(const Matrix& data, const Matrix& root, const Matrix& inv_root,
                             Vector& theta, double tol, int max_iter,
                             bool allow_vertex = false, bool* hit_vertex = nullptr) {
    const int n = static_cast<int>(data.rows());
    const int k = static_cast<int>(data.cols());
    Vector previous = theta;
    bool moved = false;
    for (int iter = 0; iter < max_iter; ++iter) {
        const Matrix z = (data.rowwise() - theta.transpose()) * inv_root;
        const Vector d = z.rowwise().norm();
        const double scale = std::max(median(d), 1e-300);
        int captured = -1;
        for (int i = 0; i < n; ++i)
            if (d(i) <= 1e-11 * scale) captured = i;
        if (captured >= 0) {
            Vector pull = Vector::Zero(k);
            double inv_sum = 0.0;
            for (int i = 0; i < n; ++i) {
                if (d(i) <= 1e-11 * scale) continue;
                pull += z.row(i).transpose() / d(i);
                inv_sum += 1.0 / d(i);
            }
            if (pull.norm() > 1.0 + 1e-9) {
                // escape the non-optimal vertex along the pull direction
                theta += ((pull.norm() - 1.0) / inv_sum) * (root * pull.normalized());
                continue;
            }
            // the observation itself is the median; exact signs do not exist
            if (!allow_vertex)
                throw DegenerateDataError("spatial median sits at an observation");
            if (moved) {
                theta = previous; // last iterate strictly off the observation
            } else if (((data.rowwise() - theta.transpose()) * inv_root)
                           .rowwise()
                           .norm()
                           .minCoeff() <= 0.0) {
                const Vector dir = pull.norm() > 0 ? pull.normalized() : Vector::Unit(k, 0);
                theta += (1e-9 * scale) * (root * dir);
            }
            if (hit_vertex) *hit_vertex = true;
            return;
        }
        Vector mean_sign = Vector::Zero(k);
        double inv_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            mean_sign += z.row(i).transpose() / d(i);
            inv_sum += 1.0 / d(i);
        }
        mean_sign /= n;
        inv_sum /= n;
        if (mean_sign.norm() <= tol) return;
        previous = theta;
        moved = true;
        theta += root * (mean_sign / inv_sum);
    }
}

// Chart around the current shape: symmetric perturbation with fixed (0,0)
// entry, renormalized to unit determinant. Coordinate c follows the
// vech_reduced ordering.
inline Matrix shape_chart(const Matrix& shape, const Vector& delta) {
    const int k = static_cast<int>(shape.rows());
    Matrix out = shape;
    int idx = 0;
    for (int j = 0; j < k; ++j) {
        for (int i = j; i < k; ++i) {
            if (i == 0 && j == 0) continue;
            out(i, j) += delta(idx);
            out(j, i) = out(i, j);
            ++idx;
        }
    }
    return ShapeMatrix(SpdMatrix(out)).mat();
}

}  // namespace detail

namespace detail {

inline HrEstimate hr_impl(const Matrix& data, double tol, int max_iter,
                          const Vector* initial_location, bool lenient) {
    const int k = static_cast<int>(data.cols());
    const int n = static_cast<int>(data.rows());
    const int k0 = shape_dim(k);
    if (n <= k) throw DegenerateDataError("hr_estimate: need more than k observations");

    Vector theta = initial_location ? *initial_location : detail::coordinatewise_median(data);
    Matrix shape = Matrix::Identity(k, k);
    auto roots = sym_sqrt_pair(shape);
    detail::HrResiduals current;
    // the coordinatewise median can coincide with an observation (sure to
    // happen for some datasets when n is odd); nudge the initializer off it
    for (int tries = 0;; ++tries) {
        try {
            current = detail::hr_residuals(data, theta, roots.second);
            break;
        } catch (const DegenerateDataError&) {
            if (tries >= 8) throw;
            const double spread =
                (data.rowwise() - theta.transpose()).rowwise().norm().mean();
            theta(0) += 1e-7 * spread * (tries + 1.0);
        }
    }
    int iter = 0;
    bool vertex = false; // the V-metric spatial median sits at an observation

    auto finished = [&] {
        return (current.sign_res <= tol || (lenient && vertex)) && current.shape_res <= tol;
    };
    auto result = [&] {
        return HrEstimate{theta, ShapeMatrix(shape), iter, current.sign_res,
                          current.shape_res};
    };

    // damped alternation warm-up
    double damping = 1.0;
    for (; iter < std::min(60, max_iter) && damping >= 1e-4; ++iter) {
        if (finished()) return result();
        const Vector full_step = (n / current.sd.distances.cwiseInverse().sum()) *
                                 (roots.first * current.mean_sign);
        for (; damping >= 1e-4; damping *= 0.5) {
            Matrix candidate_shape;
            try {
                const Matrix powered =
                    sym_pow(static_cast<double>(k) * current.mean_outer, damping);
                candidate_shape =
                    ShapeMatrix(SpdMatrix(roots.first * powered * roots.first)).mat();
            } catch (const NotPositiveDefiniteError&) {
                continue;
            }
            const auto candidate_roots = sym_sqrt_pair(candidate_shape);
            try {
                auto proposed = detail::hr_residuals(data, theta + damping * full_step,
                                                     candidate_roots.second);
                if (proposed.merit < current.merit) {
                    theta += damping * full_step;
                    shape = candidate_shape;
                    roots = candidate_roots;
                    current = std::move(proposed);
                    damping = std::min(1.0, 2.0 * damping);
                    break;
                }
            } catch (const DegenerateDataError&) {
                // proposed center landed on an observation; damp further
            }
        }
    }

    // Reduced-system polish. The location equation has a unique exact
    // solution at fixed shape (the spatial median in the V-metric, found by
    // Weiszfeld iteration), so the problem reduces to the k0 shape equations
    //   phi(V) := vech_reduced(mean UU'(theta*(V), V) - I/k) = 0,
    // solved by Levenberg-Marquardt with a finite-difference Jacobian. The
    // joint (theta, V) residual landscape has thin curved valleys that defeat
    // direct descent; the reduced map is well-conditioned.
    const double inner_tol = std::min(1e-13, 0.005 * tol);
    const double fd_step = 1e-7;
    const Matrix eye_over_k = Matrix::Identity(k, k) / k;
    auto reduced_residual = [&](const Matrix& candidate_shape, Vector& th) {
        const auto rts = sym_sqrt_pair(candidate_shape);
        detail::weiszfeld_median(data, rts.first, rts.second, th, inner_tol, 600, lenient,
                                 &vertex);
        return detail::hr_residuals(data, th, rts.second);
    };

    current = reduced_residual(shape, theta);
    double mu = 1e-6;
    for (; iter <= max_iter; ++iter) {
        if (finished()) return result();
        const Vector phi = vech_reduced(current.mean_outer - eye_over_k);
        Matrix jacobian(k0, k0);
        try {
            for (int c = 0; c < k0; ++c) {
                Vector delta = Vector::Zero(k0);
                delta(c) = fd_step;
                Vector th = theta;
                const auto probe = reduced_residual(detail::shape_chart(shape, delta), th);
                jacobian.col(c) =
                    (vech_reduced(probe.mean_outer - eye_over_k) - phi) / fd_step;
            }
        } catch (const Error&) {
            if (lenient) return result();
            throw;
        }
        const Matrix normal = jacobian.transpose() * jacobian;
        const Vector gradient = jacobian.transpose() * phi;
        const double diag_scale = std::max(normal.diagonal().maxCoeff(), 1e-300);

        bool accepted = false;
        while (!accepted) {
            Eigen::LLT<Matrix> llt(normal + mu * diag_scale * Matrix::Identity(k0, k0));
            const Vector step = llt.solve(-gradient);
            try {
                const Matrix candidate_shape = detail::shape_chart(shape, step);
                Vector th = theta;
                auto proposed = reduced_residual(candidate_shape, th);
                if (vech_reduced(proposed.mean_outer - eye_over_k).squaredNorm() <
                    phi.squaredNorm()) {
                    shape = candidate_shape;
                    theta = th;
                    current = std::move(proposed);
                    mu = std::max(1e-12, mu / 3.0);
                    accepted = true;
                }
            } catch (const Error&) {
                // infeasible candidate; raise the damping
            }
            if (!accepted) {
                mu *= 4.0;
                if (mu > 1e13) {
                    if (lenient) return result(); // best effort: honest residuals
                    throw ConvergenceFailureError("hr_estimate stalled", iter, current.merit);
                }
            }
        }
    }
    if (lenient) return result();
    throw ConvergenceFailureError("hr_estimate did not converge", max_iter, current.merit);
}

}  // namespace detail

/// Hettmansperger-Randles location/shape estimate for one group: the pair
/// (theta, V) with det V = 1 solving
///   mean_j U_j(theta, V) = 0   and   mean_j U_j U_j' = I/k.
/// Damped alternation warms up; the polish reduces the problem to the k0
/// shape equations (the location equation is solved exactly as the V-metric
/// spatial median) and runs Levenberg-Marquardt on them. Undamped
/// single-step alternation can cycle, and the joint residual landscape has
/// thin curved valleys, hence the reduction. The exact equations have no
/// solution when the spatial median sits at an observation (DegenerateData).
inline HrEstimate hr_estimate(const Matrix& data, double tol = 1e-8, int max_iter = 1000,
                              const Vector* initial_location = nullptr) {
    return detail::hr_impl(data, tol, max_iter, initial_location, false);
}

/// Best-effort variant: when the spatial median sits at an observation, the
/// location settles on the last iterate strictly off it and the sign
/// equation is accepted in its subgradient sense; the shape equation is
/// still driven to tolerance where possible. Residuals are reported
/// honestly. Intended for pipelines that must produce a frame for every
/// sample, such as the Monte Carlo engine.
inline HrEstimate hr_estimate_lenient(const Matrix& data, double tol = 1e-8,
                                      int max_iter = 1000,
                                      const Vector* initial_location = nullptr) {
    return detail::hr_impl(data, tol, max_iter, initial_location, true);
}

/// Tyler shape estimate with det V = 1 from pooled centered observations:
/// the fixed point of (k/n) sum_i z_i z_i' / |z_i|^2 = I for z = V^{-1/2} x.
inline ShapeMatrix tyler_pooled(const Matrix& centered, double tol = 1e-9, int max_iter = 500,
                                const Matrix* initial_shape = nullptr) {
    const int k = static_cast<int>(centered.cols());
    const int n = static_cast<int>(centered.rows());
    if (n <= k) throw DegenerateDataError("tyler_pooled: need more than k observations");

    Matrix shape = initial_shape ? *initial_shape : Matrix::Identity(k, k);
    double res = 0.0;
    for (int iter = 1; iter <= max_iter; ++iter) {
        auto [root, inv_root] = sym_sqrt_pair(shape);
        Matrix z = centered * inv_root;
        Matrix scatter = Matrix::Zero(k, k);
        for (int i = 0; i < n; ++i) {
            const double d2 = z.row(i).squaredNorm();
            if (!(d2 > 0.0))
                throw DegenerateDataError("tyler_pooled: zero centered observation");
            scatter.noalias() += z.row(i).transpose() * z.row(i) / d2;
        }
        scatter *= static_cast<double>(k) / n;
        res = (scatter - Matrix::Identity(k, k)).norm();
        if (res <= tol) return ShapeMatrix(shape);
        shape = ShapeMatrix(SpdMatrix(root * scatter * root)).mat();
    }
    throw ConvergenceFailureError("tyler_pooled did not converge", max_iter, res);
}

/// Everything the rank statistics consume: per-group locations, the pooled
/// shape, the per-observation signs, standardized distances, pooled midranks,
/// and the median-distance scale.
struct AlignedFrame {
    int dim;
    std::vector<int> sizes;
    std::vector<int> offsets;
    std::vector<Vector> locations;
    ShapeMatrix shape;
    double scale; // median distance
    Matrix signs;
    Vector distances;
    Vector ranks;
    bool had_ties;

    int total() const { return offsets.back() + sizes.back(); }
    int group_count() const { return static_cast<int>(sizes.size()); }
};

namespace detail {

inline AlignedFrame frame_from(const GroupedSample& sample, std::vector<Vector> locations,
                               const ShapeMatrix& shape) {
    const int k = sample.dim();
    const int m = sample.group_count();
    const int n = sample.total();
    AlignedFrame frame{k, {}, {}, std::move(locations), shape, 0.0,
                       Matrix(n, k), Vector(n), Vector(n), false};
    const Matrix inv_root = sym_inv_sqrt(shape.mat());
    int offset = 0;
    for (int i = 0; i < m; ++i) {
        const int ni = sample.size(i);
        frame.sizes.push_back(ni);
        frame.offsets.push_back(offset);
        auto sd = sign_decompose(sample.groups[i], frame.locations[i], inv_root);
        frame.signs.middleRows(offset, ni) = sd.signs;
        frame.distances.segment(offset, ni) = sd.distances;
        offset += ni;
    }
    frame.scale = median(frame.distances);
    frame.ranks = midranks(frame.distances, &frame.had_ties);
    return frame;
}

}  // namespace detail

/// Aligns a multisample: per-group HR locations, pooled Tyler shape on the
/// centered observations, standardized distances/signs, pooled ranks, and
/// the median-distance scale. The estimators are run well past their contract
/// tolerances so that aligned ranks are stable under affine transformations.
inline AlignedFrame align(const GroupedSample& sample, int attempt = 0) {
    const int m = sample.group_count();
    const int n = sample.total();
    const int k = sample.dim();
    std::vector<Vector> locations;
    locations.reserve(m);
    for (int i = 0; i < m; ++i) {
        if (attempt == 0) {
            // best-effort estimation: vertex samples (no exact solution) get
            // the subgradient-sense location instead of failing the frame
            locations.push_back(hr_estimate_lenient(sample.groups[i], 1e-11).location);
        } else {
            // retry with a deterministically perturbed initializer
            Vector init = detail::coordinatewise_median(sample.groups[i]);
            const double spread = (sample.groups[i].rowwise() - init.transpose())
                                      .rowwise()
                                      .norm()
                                      .mean();
            for (int j = 0; j < k; ++j)
                init(j) += 0.05 * spread * ((i + j + attempt) % 2 == 0 ? 1.0 : -1.0);
            locations.push_back(
                hr_estimate_lenient(sample.groups[i], 1e-11, 1000, &init).location);
        }
    }
    Matrix centered(n, k);
    int offset = 0;
    for (int i = 0; i < m; ++i) {
        centered.middleRows(offset, sample.size(i)) =
            sample.groups[i].rowwise() - locations[i].transpose();
        offset += sample.size(i);
    }
    const ShapeMatrix shape = tyler_pooled(centered, 1e-12);
    return detail::frame_from(sample, std::move(locations), shape);
}

/// Builds the frame from known locations and shape (estimation bypass).
inline AlignedFrame align_known(const GroupedSample& sample, std::vector<Vector> locations,
                                const ShapeMatrix& shape) {
    if (static_cast<int>(locations.size()) != sample.group_count())
        throw DimensionMismatchError("align_known: one location per group required");
    return detail::frame_from(sample, std::move(locations), shape);
}

/// Applies a monotone radial transform to the distances of a frame and
/// recomputes ranks and scale; signs are untouched.
template <typename G>
inline AlignedFrame transform_radial(const AlignedFrame& frame, G&& g) {
    AlignedFrame out = frame;
    for (Eigen::Index i = 0; i < out.distances.size(); ++i)
        out.distances(i) = g(frame.distances(i));
    out.scale = median(out.distances);
    out.ranks = midranks(out.distances, &out.had_ties);
    return out;
}

}  // namespace scatterhom
