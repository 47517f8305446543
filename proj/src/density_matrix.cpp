#include "qdet/density_matrix.hpp"

#include "qdet/errors.hpp"

#include <Eigen/Eigenvalues>

#include <sstream>

namespace qdet {

InvariantReport check_invariants(const ComplexMatrix& rho, double expected_trace) {
    InvariantReport r;
    r.hermiticity_error = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    r.trace_error = std::abs(rho.trace() - std::complex<double>(expected_trace, 0.0));
    const ComplexMatrix herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(herm, Eigen::EigenvaluesOnly);
    r.min_eigenvalue = es.eigenvalues().minCoeff();
    return r;
}

void add_relaxation(const ComplexMatrix& rho, double rate, ComplexMatrix& drho) {
    if (rate == 0.0)
        return;
    const Eigen::Index n = rho.rows();
    for (Eigen::Index kp = 0; kp < n; ++kp) {
        for (Eigen::Index k = 0; k < n; ++k) {
            const std::complex<double> feed =
                (k + 1 < n && kp + 1 < n) ? rho(k + 1, kp + 1) : std::complex<double>(0.0);
            const double loss = 0.5 * ((k > 0 ? 1.0 : 0.0) + (kp > 0 ? 1.0 : 0.0));
            drho(k, kp) += rate * (feed - loss * rho(k, kp));
        }
    }
}

DensityMatrix::DensityMatrix(ComplexMatrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0)
        throw DimensionError("density matrix must be square and non-empty");
}

DensityMatrix DensityMatrix::pure_level(int dim, int level) {
    if (level < 0 || level >= dim)
        throw DimensionError("level outside density matrix");
    ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
    m(level, level) = 1.0;
    return DensityMatrix(std::move(m));
}

void DensityMatrix::validate(const InvariantTolerances& tol) const {
    const InvariantReport r = invariants();
    if (!r.ok(tol)) {
        std::ostringstream msg;
        msg << "invalid density matrix: hermiticity " << r.hermiticity_error << ", trace error "
            << r.trace_error << ", min eigenvalue " << r.min_eigenvalue;
        throw DomainError(msg.str());
    }
}

} // namespace qdet
