#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>

#include "scatterhom/errors.hpp"

namespace scatterhom {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dimension of the shape parameter: k0 = k(k+1)/2 - 1.
inline int shape_dim(int k) { return k * (k + 1) / 2 - 1; }

namespace detail {

inline void require_square(const Matrix& m, const char* what) {
    if (m.rows() != m.cols() || m.rows() < 1)
        throw DimensionMismatchError(std::string(what) + ": matrix must be square, got " +
                                     std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

inline void require_symmetric(const Matrix& m, const char* what) {
    require_square(m, what);
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw DomainError(std::string(what) + ": matrix is not symmetric");
}

}  // namespace detail

/// Symmetric positive definite matrix; positivity is verified at
/// construction via eigendecomposition (lambda_min > 1e-12 * lambda_max).
class SpdMatrix {
public:
    explicit SpdMatrix(Matrix m) : m_(std::move(m)) {
        detail::require_symmetric(m_, "SpdMatrix");
        m_ = 0.5 * (m_ + m_.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
        const double lmax = es.eigenvalues().maxCoeff();
        if (!(lmax > 0) || es.eigenvalues().minCoeff() <= 1e-12 * lmax)
            throw NotPositiveDefiniteError("SpdMatrix: matrix is not positive definite");
    }

    const Matrix& mat() const { return m_; }
    int dim() const { return static_cast<int>(m_.rows()); }

private:
    Matrix m_;
};

/// Symmetric positive definite matrix with unit determinant.
class ShapeMatrix {
public:
    explicit ShapeMatrix(const SpdMatrix& a) : m_(a.mat()) {
        m_ /= std::exp(log_det(m_) / static_cast<double>(dim()));
        if (std::abs(det_after_normalize()) > 1e-10)
            throw NotPositiveDefiniteError("ShapeMatrix: determinant normalization failed");
    }
    explicit ShapeMatrix(const Matrix& m) : ShapeMatrix(SpdMatrix(m)) {}

    const Matrix& mat() const { return m_; }
    int dim() const { return static_cast<int>(m_.rows()); }

    static double log_det(const Matrix& spd) {
        Eigen::LLT<Matrix> llt(spd);
        if (llt.info() != Eigen::Success)
            throw NotPositiveDefiniteError("log_det: Cholesky factorization failed");
        return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    }

private:
    double det_after_normalize() const { return std::expm1(log_det(m_)); }
    Matrix m_;
};

/// Symmetric square root with power p in {1/2, -1/2, -1, ...} of an SPD
/// matrix, via full symmetric eigendecomposition.
inline Matrix sym_pow(const Matrix& a, double p) {
    detail::require_symmetric(a, "sym_pow");
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    const double lmax = es.eigenvalues().maxCoeff();
    if (!(lmax > 0) || es.eigenvalues().minCoeff() <= 1e-12 * lmax)
        throw NotPositiveDefiniteError("sym_pow: matrix is not positive definite");
    Vector d = es.eigenvalues().array().pow(p);
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

inline SpdMatrix sym_sqrt(const SpdMatrix& a) { return SpdMatrix(sym_pow(a.mat(), 0.5)); }
inline Matrix sym_sqrt(const Matrix& a) { return sym_pow(a, 0.5); }
inline Matrix sym_inv_sqrt(const Matrix& a) { return sym_pow(a, -0.5); }

/// (A^{1/2}, A^{-1/2}) from a single eigendecomposition.
inline std::pair<Matrix, Matrix> sym_sqrt_pair(const Matrix& a) {
    detail::require_symmetric(a, "sym_sqrt_pair");
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    const double lmax = es.eigenvalues().maxCoeff();
    if (!(lmax > 0) || es.eigenvalues().minCoeff() <= 1e-12 * lmax)
        throw NotPositiveDefiniteError("sym_sqrt_pair: matrix is not positive definite");
    const Vector d = es.eigenvalues().array().sqrt();
    const Matrix& q = es.eigenvectors();
    return {q * d.asDiagonal() * q.transpose(),
            q * d.cwiseInverse().asDiagonal() * q.transpose()};
}

/// Splits an SPD matrix into (shape, scale) with scale = det(a)^{1/k} and
/// shape = a / scale, so det(shape) = 1.
inline std::pair<ShapeMatrix, double> shape_normalize(const SpdMatrix& a) {
    const double scale = std::exp(ShapeMatrix::log_det(a.mat()) / static_cast<double>(a.dim()));
    return {ShapeMatrix(a), scale};
}

/// vech: column-stacked lower triangle, (0,0) first.
inline Vector vech(const Matrix& v) {
    detail::require_symmetric(v, "vech");
    const int k = static_cast<int>(v.rows());
    Vector out(k * (k + 1) / 2);
    int idx = 0;
    for (int j = 0; j < k; ++j)
        for (int i = j; i < k; ++i) out(idx++) = v(i, j);
    return out;
}

/// vech with the (0,0) entry removed (the free coordinates of a shape
/// perturbation). Ordering: (1,0), ..., (k-1,0), (1,1), (2,1), ...
inline Vector vech_reduced(const Matrix& v) {
    const Vector full = vech(v);
    return full.tail(full.size() - 1);
}

/// Kronecker product a (x) b.
inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Commutation matrix K_k of size k^2 x k^2: K_k vec(A) = vec(A').
inline Matrix commutation_matrix(int k) {
    Matrix km = Matrix::Zero(k * k, k * k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) km(j * k + i, i * k + j) = 1.0;
    return km;
}

/// Basis matrix M_k(V) of size k0 x k^2 mapping the reduced half-vectorized
/// coordinates of a trace-constrained symmetric perturbation v (that is,
/// tr(V^{-1} v) = 0) to its full vectorization: M_k(V)' vech_reduced(v) = vec(v).
/// The suppressed (0,0) entry is recovered linearly from the constraint.
class TraceFreeBasis {
public:
    explicit TraceFreeBasis(const ShapeMatrix& v) : base_(v) {
        const int k = v.dim();
        const int k0 = shape_dim(k);
        const Matrix vinv = sym_pow(v.mat(), -1.0);
        if (vinv(0, 0) <= 1e-300)
            throw DegenerateDataError("TraceFreeBasis: degenerate (V^{-1})_{00}");
        mk_.resize(k0, k * k);
        int row = 0;
        for (int j = 0; j < k; ++j) {
            for (int i = j; i < k; ++i) {
                if (i == 0 && j == 0) continue;
                Matrix b = Matrix::Zero(k, k);
                b(i, j) = b(j, i) = 1.0;
                b(0, 0) = (i == j) ? -vinv(i, i) / vinv(0, 0) : -2.0 * vinv(i, j) / vinv(0, 0);
                mk_.row(row++) = Eigen::Map<const Vector>(b.data(), k * k);
            }
        }
    }

    const Matrix& mk() const { return mk_; }
    const ShapeMatrix& base() const { return base_; }
    int dim() const { return base_.dim(); }

    /// Inverse of vech_reduced on the constrained subspace.
    Matrix lift(const Vector& coords) const {
        const int k = dim();
        Vector full = mk_.transpose() * coords;
        return Eigen::Map<const Matrix>(full.data(), k, k);
    }

private:
    ShapeMatrix base_;
    Matrix mk_;
};

inline TraceFreeBasis build_trace_free_basis(const ShapeMatrix& v) { return TraceFreeBasis(v); }

/// H_k(V) = M_k(V) [I_{k^2} + K_k] (V (x) V)^{-1} M_k(V)' / (4k(k+2)),
/// the k0 x k0 shape information kernel.
inline Matrix h_matrix(const ShapeMatrix& v) {
    const int k = v.dim();
    const Matrix vinv = sym_pow(v.mat(), -1.0);
    const Matrix vinv2 = kron(vinv, vinv);
    const TraceFreeBasis basis(v);
    const Matrix& m = basis.mk();
    Matrix h = m * (Matrix::Identity(k * k, k * k) + commutation_matrix(k)) * vinv2 *
               m.transpose() / (4.0 * k * (k + 2));
    return 0.5 * (h + h.transpose());
}

}  // namespace scatterhom
