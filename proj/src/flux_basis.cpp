#include "qdet/flux_basis.hpp"

#include "qdet/errors.hpp"

#include <Eigen/Eigenvalues>

#include <numbers>

namespace qdet {

namespace {
constexpr double kPi = std::numbers::pi;
}

ReducedFluxBasis::ReducedFluxBasis(const CircuitParams& p, const Grid& grid, double x_ref,
                                   int basis_size)
    : params_(p), x_ref_(x_ref) {
    p.validate();
    grid.validate();
    if (basis_size < 2 || basis_size > grid.n_points)
        throw DomainError("reduced basis size must lie in [2, n_points]");
    CircuitParams ref = p;
    ref.x_e = x_ref;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(discretized_hamiltonian(ref, grid));
    if (es.info() != Eigen::Success)
        throw ResolutionError("reference eigensolve did not converge");
    reference_energies_ = es.eigenvalues().head(basis_size);
    states_ = es.eigenvectors().leftCols(basis_size);
    const Eigen::VectorXd x = grid.points();
    position_ = states_.transpose() * x.asDiagonal() * states_;
    position_ = 0.5 * (position_ + position_.transpose()).eval();
}

double ReducedFluxBasis::flux_coupling() const {
    return -4.0 * kPi * kPi * params_.u0_K;
}

Eigen::MatrixXd ReducedFluxBasis::hamiltonian(double x_e) const {
    const double c = flux_coupling() * (x_e - x_ref_);
    const double d = 2.0 * kPi * kPi * params_.u0_K * (x_e * x_e - x_ref_ * x_ref_);
    Eigen::MatrixXd h = c * position_;
    h.diagonal() += reference_energies_;
    h.diagonal().array() += d;
    return h;
}

ReducedFluxBasis::Eigenpairs ReducedFluxBasis::solve(double x_e, int n_levels) const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hamiltonian(x_e));
    if (es.info() != Eigen::Success)
        throw ResolutionError("reduced eigensolve did not converge");
    return {es.eigenvalues().head(n_levels), es.eigenvectors().leftCols(n_levels)};
}

Eigen::VectorXd ReducedFluxBasis::energies(double x_e, int n_levels) const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hamiltonian(x_e), Eigen::EigenvaluesOnly);
    return es.eigenvalues().head(n_levels);
}

} // namespace qdet
