#pragma once

#include <Eigen/Dense>

#include <string>

#include "prc/errors.hpp"

namespace prc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline bool is_square(const MatrixXd& m) { return m.rows() == m.cols(); }

// Relative asymmetry test: max |M - M^T| against the matrix scale.
inline bool is_symmetric(const MatrixXd& m, double rel_tol = 1e-10) {
    if (!is_square(m)) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

inline MatrixXd symmetrized(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

inline void require_symmetric(const MatrixXd& m, const std::string& name, double rel_tol = 1e-10) {
    if (!is_symmetric(m, rel_tol)) throw DomainError(name + " must be symmetric");
}

// Eigenvalues of the symmetrized input, ascending.
inline VectorXd symmetric_eigenvalues(const MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrized(m), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("symmetric eigendecomposition failed");
    return es.eigenvalues();
}

inline double min_eigenvalue(const MatrixXd& m) {
    if (m.rows() == 0) return 0.0;
    return symmetric_eigenvalues(m).minCoeff();
}

// Symmetric PSD square root. Eigenvalues in [-tol_scale, 0) are clipped to zero,
// anything below that rejects the input.
inline MatrixXd symmetric_sqrt_psd(const MatrixXd& m, double clip_rel_tol = 1e-10) {
    require_symmetric(m, "matrix for symmetric sqrt", 1e-8);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrized(m));
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed in symmetric sqrt");
    const VectorXd ev = es.eigenvalues();
    const double floor = -clip_rel_tol * std::max(1e-300, std::abs(ev.sum()));
    VectorXd root(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] < floor) throw NumericalError("matrix is indefinite beyond tolerance in symmetric sqrt");
        root[i] = std::sqrt(std::max(0.0, ev[i]));
    }
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

// Moore-Penrose pseudo-inverse of a symmetric matrix via eigendecomposition.
// Eigenvalues with |ev| <= cutoff_rel * max|ev| are treated as zero.
inline MatrixXd symmetric_pseudo_inverse(const MatrixXd& m, double cutoff_rel = 1e-12) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrized(m));
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed in pseudo-inverse");
    const VectorXd ev = es.eigenvalues();
    const double cutoff = cutoff_rel * std::max(1e-300, ev.cwiseAbs().maxCoeff());
    VectorXd inv(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) inv[i] = std::abs(ev[i]) > cutoff ? 1.0 / ev[i] : 0.0;
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

// Column-major flattening, matching Eigen's default storage.
inline VectorXd vec(const MatrixXd& m) {
    return Eigen::Map<const VectorXd>(m.data(), m.size());
}

inline MatrixXd unvec(const VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
    if (v.size() != rows * cols) throw DomainError("unvec size mismatch");
    return Eigen::Map<const MatrixXd>(v.data(), rows, cols);
}

}  // namespace prc
