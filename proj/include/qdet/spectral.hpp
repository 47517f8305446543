#pragma once

#include "qdet/circuit.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace qdet {

/// Uniform grid of interior points for the sine-basis discretization with
/// Dirichlet walls at x_min and x_max.
struct Grid {
    double x_min = -0.3;
    double x_max = 1.3;
    int n_points = 256;

    void validate() const;
    double spacing() const { return (x_max - x_min) / (n_points + 1); }
    double point(int i) const { return x_min + (i + 1) * spacing(); }
    Eigen::VectorXd points() const;
    Grid refined() const { return {x_min, x_max, 2 * n_points}; }
};

enum class Localization { Left, Right, Delocalized };

const char* to_string(Localization loc);

struct SpectrumOptions {
    /// Solve again on a doubled grid and require agreement to convergence_tol_K.
    bool check_convergence = true;
    double convergence_tol_K = 1e-9;
    /// Upper bound on |psi| (unit L2 norm) at the outermost grid points.
    double boundary_tol = 1e-10;
    /// Fraction of |psi|^2 on one side of the barrier needed to call a level localized.
    double localization_threshold = 0.8;
};

struct Spectrum {
    Grid grid;
    Eigen::VectorXd energies;       // K, ascending
    Eigen::MatrixXd wavefunctions;  // column k = psi_k(x_i), normalized so sum psi^2 dx = 1
    std::vector<Localization> localization;
    std::vector<double> mean_flux;
    std::vector<double> left_mass;
    double barrier_x = 0.5;

    int size() const { return static_cast<int>(energies.size()); }
};

/// Dense kinetic-plus-potential matrix of the discretized Schroedinger operator.
Eigen::MatrixXd discretized_hamiltonian(const CircuitParams& p, const Grid& grid);

/// Sine-DVR kinetic energy matrix for -(1/2M) d^2/dx^2 on the grid.
Eigen::MatrixXd kinetic_matrix(const Grid& grid, double mass_invK);

/// Lowest n_levels eigenpairs, localized against the barrier from classify_wells
/// (x = 1/2 when the potential has a single well).
Spectrum solve_spectrum(const CircuitParams& p, const Grid& grid, int n_levels,
                        const SpectrumOptions& opts = {});

/// solve_spectrum on the default grid, widening the window when the boundary
/// decay check fails.
Spectrum solve_spectrum_auto(const CircuitParams& p, int n_levels,
                             const SpectrumOptions& opts = {});

/// Lowest n_levels eigenvalues only, no post checks. Used by gap searches.
Eigen::VectorXd solve_energies(const CircuitParams& p, const Grid& grid, int n_levels);

/// Relabels the spectrum in place: Left/Right when the quadrature mass on that side of
/// barrier_x reaches the threshold, Delocalized otherwise.
void localize(Spectrum& spec, double barrier_x, double threshold = 0.8);

/// Number of levels below the barrier top classified as Left or Right.
int count_localized_below_barrier(const Spectrum& spec, const CircuitParams& p);

struct SpectrumFamily {
    std::vector<double> parameter;   // x_e or beta_L per step, monotone
    std::vector<Spectrum> spectra;
};

struct SweepOptions {
    SpectrumOptions spectrum;
    unsigned workers = 1;
    /// Convergence re-solve only at the two sweep endpoints.
    bool converge_endpoints_only = true;
};

/// Spectra on n_steps equally spaced x_e values over [x_e_from, x_e_to], with
/// eigenvector signs made continuous along the sweep.
SpectrumFamily sweep_flux(const CircuitParams& p, const Grid& grid, double x_e_from, double x_e_to,
                          int n_steps, int n_levels, const SweepOptions& opts = {});

/// Spectra over beta_L with U0 = u0_times_beta_K / beta_L and p's other fields.
SpectrumFamily sweep_beta(const CircuitParams& p, const Grid& grid, double u0_times_beta_K,
                          double beta_from, double beta_to, int n_steps, int n_levels,
                          const SweepOptions& opts = {});

/// Flips eigenvector signs so each level overlaps positively with the previous step.
void enforce_sign_continuity(std::vector<Spectrum>& family);

} // namespace qdet
