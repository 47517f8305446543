#pragma once

#include "qdet/circuit.hpp"
#include "qdet/density_matrix.hpp"
#include "qdet/flux_basis.hpp"
#include "qdet/ode.hpp"
#include "qdet/spectral.hpp"
#include "qdet/trajectory.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace qdet {

/// Linear downward flux ramp x_e(t) = x_e0 - v_e t, with v_e in flux quanta per ns.
struct RampSchedule {
    double x_e0 = 0.5001;
    double v_e = 0.454;
    double x_e_end = 0.491;

    void validate() const;
    double time_at(double x_e) const { return (x_e0 - x_e) / v_e; }
    double duration() const { return time_at(x_e_end); }
};

struct StepControl {
    double base_step = 1e-4;
    double refine_factor = 4.0;
    double min_step = 1e-11;
    /// Largest accepted rotation of any tracked eigenvector per step (rad).
    double max_rotation = 0.1;
    /// A step h is refined while gap < gap_factor * h * slope.
    double gap_factor = 100.0;
    /// Two overlaps of one state closer than this make the step ambiguous.
    double ambiguity = 1e-3;
    /// Nodes whose finite-difference B has relative asymmetry above this get neighbours.
    double asymmetry = 1e-3;
    int max_asymmetry_passes = 6;
    int basis_size = 48;
    /// Diabatic slope scale in K per unit x_e; 0 means estimate from the reference states.
    double slope_K = 0.0;
};

struct FrameNode {
    double x_e = 0.0;
    double t = 0.0;             // ns since the ramp start
    Eigen::VectorXd energies;   // tracked adiabatic energies (K)
    /// Rows are the adiabatic states in coordinates of the reference eigenstates
    /// at t = 0: transfer(k, k') = <E_k'(0)|E_k(t)>.
    Eigen::MatrixXd transfer;
};

/// Adiabatic eigenbasis along a ramp. The reference set holds all basis_size
/// eigenstates at x_e0, so transfer is n_levels x basis_size with orthonormal rows
/// and starts as [I | 0].
struct AdiabaticFrame {
    RampSchedule ramp;
    int n_levels = 0;
    Eigen::VectorXd reference_energies;
    std::vector<FrameNode> nodes;

    std::size_t size() const { return nodes.size(); }
};

AdiabaticFrame track_eigenbasis(const ReducedFluxBasis& basis, const RampSchedule& ramp, int n_levels,
                                const StepControl& sc = {});

/// Builds the reduced basis at x_e0 from the full grid and tracks n_levels states.
AdiabaticFrame track_eigenbasis(const CircuitParams& p, const RampSchedule& ramp, const Grid& grid,
                                int n_levels, const StepControl& sc = {});

struct NonadiabaticCoupling {
    Eigen::MatrixXd b;            // antisymmetrized, 1/ns
    double raw_asymmetry = 0.0;   // max |B + B^T| before projection
    double norm = 0.0;            // max |B_ij| after projection
};

/// Finite-difference estimate of B = (dA/dt) A^T at a node, without checks.
NonadiabaticCoupling raw_nonadiabatic_coupling(const AdiabaticFrame& frame, std::size_t step);

/// As above, but throws ResolutionError (a step-refinement request) when the
/// raw asymmetry exceeds tol * norm.
NonadiabaticCoupling nonadiabatic_coupling(const AdiabaticFrame& frame, std::size_t step,
                                           double tol = 1e-3);

/// The frame-rotation terms (B* rho)_kk' + (B rho*)_k'k, written element by element.
ComplexMatrix frame_rotation_terms(const Eigen::MatrixXd& b, const ComplexMatrix& rho);

/// Right-hand side of the reset equation in the adiabatic frame.
void reset_rhs(const ComplexMatrix& rho, const Eigen::MatrixXd& b, const Eigen::VectorXd& energies,
               double gamma_per_ns, ComplexMatrix& drho);

struct ResetRun {
    OdeOptions ode{};
    InvariantTolerances tolerances{};
    bool keep_matrices = false;
};

/// Integrates the reset equation across the frame; stamps are the x_e of the nodes.
/// B and E are interpolated linearly in t between nodes.
Trajectory evolve_reset(const DensityMatrix& rho0, const AdiabaticFrame& frame, double gamma_per_ns,
                        const ResetRun& run = {});

Trajectory evolve_reset(const DensityMatrix& rho0, const CircuitParams& p, const RampSchedule& ramp,
                        double gamma_per_ns, const Grid& grid, int n_levels,
                        const StepControl& sc = {}, const ResetRun& run = {});

struct TransitionWidth {
    int level = 0;         // zero-based level whose occupation rises
    double x_low = 0.0;    // flux where the rise reaches 10 %
    double x_high = 0.0;   // flux where it reaches 90 %
    double x_mid = 0.0;
    double width = 0.0;    // |x_high - x_low|, Phi0
    double jump = 0.0;
};

struct WidthReport {
    std::vector<TransitionWidth> widths;
    std::vector<std::string> notices;
};

/// 10-90 % widths of the steepest rise of every level above the first.
/// Rises smaller than min_jump are skipped with a notice; a rise resolved
/// within a single stamp interval has width 0.
WidthReport transition_widths(const Trajectory& traj, double min_jump = 1e-3);

} // namespace qdet
