#pragma once

#include <Eigen/Dense>

#include <complex>

namespace qdet {

using ComplexMatrix = Eigen::MatrixXcd;

struct InvariantTolerances {
    double hermiticity = 1e-10;
    double trace = 1e-8;
    double positivity = 1e-8;
};

struct InvariantReport {
    double hermiticity_error = 0.0;  // max |rho - rho^dagger|
    double trace_error = 0.0;        // |Tr rho - expected|
    double min_eigenvalue = 0.0;

    bool ok(const InvariantTolerances& tol = {}) const {
        return hermiticity_error < tol.hermiticity && trace_error < tol.trace &&
               min_eigenvalue > -tol.positivity;
    }
};

InvariantReport check_invariants(const ComplexMatrix& rho, double expected_trace = 1.0);

/// Adds the uniform nearest-neighbour downward cascade at rate (1/ns) to drho:
/// feed from rho_{k+1,k'+1} (none into the top level), loss at rate/2 per
/// index that can decay (the lowest level is stable).
void add_relaxation(const ComplexMatrix& rho, double rate, ComplexMatrix& drho);

/// Density matrix over qudit levels in an energy basis.
class DensityMatrix {
public:
    DensityMatrix() = default;
    explicit DensityMatrix(ComplexMatrix m);

    /// All weight in one (zero-based) level.
    static DensityMatrix pure_level(int dim, int level);

    int dim() const { return static_cast<int>(m_.rows()); }
    const ComplexMatrix& matrix() const { return m_; }
    std::complex<double> trace() const { return m_.trace(); }
    Eigen::VectorXd occupations() const { return m_.diagonal().real(); }
    InvariantReport invariants() const { return check_invariants(m_); }

    /// Throws DomainError if any invariant fails the tolerances.
    void validate(const InvariantTolerances& tol = {}) const;

private:
    ComplexMatrix m_;
};

} // namespace qdet
