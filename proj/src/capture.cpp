#include "qdet/capture.hpp"

#include "qdet/errors.hpp"
#include "qdet/units.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace qdet {

void CaptureParams::validate(int available_levels) const {
    if (!(g_K >= 0.0) || !(alpha >= 0.0) || !(gamma_K >= 0.0) || !(gamma_phi_K >= 0.0))
        throw DomainError("capture parameters g, alpha, gamma, gamma_phi must be non-negative");
    if (!std::isfinite(omega_d_per_ns))
        throw DomainError("drive frequency must be finite");
    if (n_levels < 2 || n_levels > available_levels)
        throw DimensionError("capture needs " + std::to_string(n_levels) + " levels, spectrum has " +
                             std::to_string(available_levels));
    if (lower_level < 0 || upper_level >= n_levels || lower_level == upper_level)
        throw DimensionError("working pair must be two distinct levels inside the capture space");
}

double resonant_drive(const Spectrum& spec, const CaptureParams& cp) {
    return (spec.energies(cp.upper_level) - spec.energies(cp.lower_level)) / kUnits.hbar_over_kB;
}

Eigen::MatrixXd build_capture_hamiltonian(const Spectrum& spec, const CaptureParams& cp) {
    cp.validate(spec.size());
    const int n = cp.n_levels;
    const double hbar_omega = kUnits.hbar_over_kB * cp.omega_d_per_ns;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j)
        h(j, j) = spec.energies(j) - hbar_omega * (j + 1);
    h(cp.lower_level, cp.upper_level) = cp.g_K * cp.alpha;
    h(cp.upper_level, cp.lower_level) = cp.g_K * cp.alpha;
    return h;
}

void lindblad_rhs(const ComplexMatrix& rho, const Eigen::MatrixXd& h, const CaptureParams& cp,
                  ComplexMatrix& drho) {
    const int n = static_cast<int>(rho.rows());
    if (rho.cols() != n || h.rows() != n || h.cols() != n)
        throw DimensionError("density matrix and Hamiltonian dimensions differ");
    const double inv_hbar = 1.0 / kUnits.hbar_over_kB;
    const double relax = cp.gamma_K * inv_hbar;
    const double dephase = cp.gamma_phi_K * inv_hbar;
    const std::complex<double> minus_i(0.0, -1.0);

    const ComplexMatrix hc = h.cast<std::complex<double>>();
    drho.noalias() = (minus_i * inv_hbar) * (hc * rho - rho * hc);
    add_relaxation(rho, relax, drho);
    if (dephase != 0.0) {
        for (int kp = 0; kp < n; ++kp)
            for (int k = 0; k < n; ++k) {
                const double dk = static_cast<double>(k - kp);
                drho(k, kp) -= 0.5 * dephase * dk * dk * rho(k, kp);
            }
    }
}

ComplexMatrix lindblad_rhs(const ComplexMatrix& rho, const Eigen::MatrixXd& h,
                           const CaptureParams& cp) {
    ComplexMatrix out(rho.rows(), rho.cols());
    lindblad_rhs(rho, h, cp, out);
    return out;
}

Trajectory evolve_capture(const DensityMatrix& rho0, const Spectrum& spec, const CaptureParams& cp,
                          const CaptureRun& run) {
    cp.validate(spec.size());
    if (rho0.dim() != cp.n_levels)
        throw DimensionError("initial state dimension must equal the capture level count");
    if (!(run.t_end_ns > 0.0) || !(run.stride_ns > 0.0) || !(run.dt_max_ns > 0.0))
        throw DomainError("t_end, stride and dt_max must be positive");
    rho0.validate(run.tolerances);

    const Eigen::MatrixXd h = build_capture_hamiltonian(spec, cp);
    OdeOptions ode = run.ode;
    ode.dt_max = std::min(ode.dt_max, run.dt_max_ns);
    MatrixIntegrator integrator(
        [&h, &cp](const ComplexMatrix& r, ComplexMatrix& d, double) { lindblad_rhs(r, h, cp, d); },
        cp.n_levels, ode);

    Trajectory traj;
    ComplexMatrix rho = rho0.matrix();
    double t = 0.0;
    double last_good = 0.0;
    traj.push(t, rho, run.keep_matrices);
    const auto n_stamps = static_cast<long>(std::ceil(run.t_end_ns / run.stride_ns - 1e-9));
    for (long s = 1; s <= n_stamps; ++s) {
        const double target = std::min(run.t_end_ns, s * run.stride_ns);
        integrator.advance(rho, t, target);
        const InvariantReport r = check_invariants(rho);
        if (!r.ok(run.tolerances)) {
            std::ostringstream msg;
            msg << "density-matrix invariant breached at t = " << t << " ns (hermiticity "
                << r.hermiticity_error << ", trace " << r.trace_error << ", min eigenvalue "
                << r.min_eigenvalue << ")";
            throw IntegrationError(msg.str(), last_good);
        }
        last_good = t;
        traj.push(t, rho, run.keep_matrices);
    }
    return traj;
}

double rabi_frequency(const Trajectory& traj, int a, int b) {
    if (traj.size() < 3)
        throw EstimateUnavailable("trajectory too short for a frequency estimate");
    std::vector<double> s(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i)
        s[i] = traj.occupation(i, a) - traj.occupation(i, b);
    std::vector<double> extrema;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        const bool peak = s[i] > s[i - 1] && s[i] >= s[i + 1];
        const bool trough = s[i] < s[i - 1] && s[i] <= s[i + 1];
        if (!peak && !trough)
            continue;
        // Vertex of the parabola through the three samples.
        const double t0 = traj.stamps[i - 1], t1 = traj.stamps[i], t2 = traj.stamps[i + 1];
        const double d1 = (s[i] - s[i - 1]) / (t1 - t0);
        const double d2 = (s[i + 1] - s[i]) / (t2 - t1);
        const double curv = (d2 - d1) / (0.5 * (t2 - t0));
        double tv = t1;
        if (curv != 0.0)
            tv = 0.5 * (t0 + t1) - d1 / curv;
        extrema.push_back(tv);
    }
    if (extrema.size() < 3)
        throw EstimateUnavailable("fewer than three extrema in the population difference");
    const double spacing = (extrema.back() - extrema.front()) / static_cast<double>(extrema.size() - 1);
    return std::numbers::pi / spacing;
}

} // namespace qdet
