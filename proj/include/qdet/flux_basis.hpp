#pragma once

#include "qdet/circuit.hpp"
#include "qdet/spectral.hpp"

#include <Eigen/Dense>

namespace qdet {

/// Galerkin projection of the flux-dependent Hamiltonian onto the lowest
/// eigenvectors at a reference flux.
///
/// The potential depends on x_e only through
///   U(x; x_e) = U(x; x_ref) - 4 pi^2 U0 (x_e - x_ref) x + 2 pi^2 U0 (x_e^2 - x_ref^2),
/// so in any fixed basis H(x_e) = H_ref + c(x_e) X + d(x_e) 1. Projected onto a
/// few dozen reference states this reproduces the full-grid low-lying spectrum
/// to ~1e-13 K over the reset window at a tiny fraction of the cost.
class ReducedFluxBasis {
public:
    ReducedFluxBasis(const CircuitParams& p, const Grid& grid, double x_ref, int basis_size);

    struct Eigenpairs {
        Eigen::VectorXd energies;    // lowest n, ascending
        Eigen::MatrixXd coefficients; // basis_size x n, columns in reference-state coordinates
    };

    /// Projected Hamiltonian at external flux x_e.
    Eigen::MatrixXd hamiltonian(double x_e) const;
    Eigenpairs solve(double x_e, int n_levels) const;
    Eigen::VectorXd energies(double x_e, int n_levels) const;

    /// Position operator in reference-state coordinates.
    const Eigen::MatrixXd& position() const { return position_; }
    /// Reference states sampled on the grid (columns, unit Euclidean norm).
    const Eigen::MatrixXd& states() const { return states_; }
    /// d H / d x_e restricted to the operator part: -4 pi^2 U0 X.
    double flux_coupling() const;
    int size() const { return static_cast<int>(reference_energies_.size()); }
    double x_ref() const { return x_ref_; }
    const CircuitParams& params() const { return params_; }

private:
    CircuitParams params_;
    double x_ref_;
    Eigen::VectorXd reference_energies_;
    Eigen::MatrixXd states_;
    Eigen::MatrixXd position_;
};

} // namespace qdet
