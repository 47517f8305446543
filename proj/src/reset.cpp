#include "qdet/reset.hpp"

#include "qdet/errors.hpp"
#include "qdet/units.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace qdet {

void RampSchedule::validate() const {
    if (!(v_e > 0.0) || !std::isfinite(v_e))
        throw DomainError("ramp speed v_e must be positive");
    if (!std::isfinite(x_e0) || !std::isfinite(x_e_end))
        throw DomainError("ramp endpoints must be finite");
    // Equal endpoints are a degenerate zero-length ramp.
    if (x_e_end > x_e0)
        throw DomainError("the ramp runs downward: x_e_end must not exceed x_e0");
}

namespace {

double min_gap(const Eigen::VectorXd& e) {
    double g = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k + 1 < e.size(); ++k)
        g = std::min(g, e(k + 1) - e(k));
    return g;
}

struct StepCheck {
    double rotation = 0.0;
    bool ambiguous = false;
};

/// Fixes the signs of next against prev and measures the largest rotation of
/// the first n columns.
StepCheck align(const Eigen::MatrixXd& prev, Eigen::MatrixXd& next, int n, double ambiguity) {
    Eigen::MatrixXd o = prev.transpose() * next;
    StepCheck c;
    for (Eigen::Index k = 0; k < next.cols(); ++k) {
        if (o(k, k) < 0.0) {
            next.col(k) *= -1.0;
            o.col(k) *= -1.0;
        }
    }
    for (int k = 0; k < n; ++k) {
        c.rotation = std::max(c.rotation, std::acos(std::min(1.0, o(k, k))));
        double first = 0.0, second = 0.0;
        Eigen::Index arg = 0;
        for (Eigen::Index j = 0; j < o.rows(); ++j) {
            const double a = std::abs(o(j, k));
            if (a > first) {
                second = first;
                first = a;
                arg = j;
            } else if (a > second) {
                second = a;
            }
        }
        if (arg != k || first - second < ambiguity)
            c.ambiguous = true;
    }
    return c;
}

FrameNode make_node(double x_e, const RampSchedule& ramp, const Eigen::VectorXd& energies,
                    const Eigen::MatrixXd& coeffs, int n) {
    FrameNode node;
    node.x_e = x_e;
    node.t = ramp.time_at(x_e);
    node.energies = energies.head(n);
    node.transfer = coeffs.leftCols(n).transpose();
    return node;
}

/// Second-order finite-difference weights for d/dt at node i.
std::array<double, 3> fd_weights(const std::vector<FrameNode>& nodes, std::size_t i,
                                 std::array<std::size_t, 3>& idx) {
    const std::size_t n = nodes.size();
    if (n == 2) {
        const double h = nodes[1].t - nodes[0].t;
        idx = {0, 1, 1};
        return {-1.0 / h, 1.0 / h, 0.0};
    }
    if (i == 0) {
        const double h1 = nodes[1].t - nodes[0].t, h2 = nodes[2].t - nodes[1].t;
        idx = {0, 1, 2};
        return {-(2.0 * h1 + h2) / (h1 * (h1 + h2)), (h1 + h2) / (h1 * h2), -h1 / (h2 * (h1 + h2))};
    }
    if (i == n - 1) {
        const double h1 = nodes[n - 2].t - nodes[n - 3].t, h2 = nodes[n - 1].t - nodes[n - 2].t;
        idx = {n - 3, n - 2, n - 1};
        return {h2 / (h1 * (h1 + h2)), -(h1 + h2) / (h1 * h2), (h1 + 2.0 * h2) / (h2 * (h1 + h2))};
    }
    const double h1 = nodes[i].t - nodes[i - 1].t, h2 = nodes[i + 1].t - nodes[i].t;
    idx = {i - 1, i, i + 1};
    return {-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2))};
}

bool asymmetric(const NonadiabaticCoupling& b, double tol) {
    return b.raw_asymmetry > tol * b.norm + 1e-9;
}

} // namespace

AdiabaticFrame track_eigenbasis(const ReducedFluxBasis& basis, const RampSchedule& ramp, int n,
                                const StepControl& sc) {
    ramp.validate();
    if (n < 1 || n + 1 > basis.size())
        throw DimensionError("tracked levels plus one must fit in the reduced basis");
    if (std::abs(basis.x_ref() - ramp.x_e0) > 1e-14)
        throw DomainError("reduced basis must be built at the ramp start x_e0");
    if (!(sc.min_step > 0.0) || sc.base_step < sc.min_step || !(sc.refine_factor > 1.0))
        throw DomainError("invalid step control");

    const int m = n + 1;  // one spectator level resolves crossings of the top tracked level
    const int kdim = basis.size();

    double slope = sc.slope_K;
    if (!(slope > 0.0)) {
        const Eigen::VectorXd xd = basis.position().diagonal().head(m);
        slope = std::abs(basis.flux_coupling()) * (xd.maxCoeff() - xd.minCoeff());
        if (!(slope > 0.0))
            slope = std::abs(basis.flux_coupling());
    }

    AdiabaticFrame frame;
    frame.ramp = ramp;
    frame.n_levels = n;
    const ReducedFluxBasis::Eigenpairs e0 = basis.solve(ramp.x_e0, m);
    frame.reference_energies = e0.energies;

    // The reference states are the basis itself, so A(0) is exactly [I | 0].
    Eigen::MatrixXd prev = Eigen::MatrixXd::Identity(kdim, m);
    frame.nodes.push_back(make_node(ramp.x_e0, ramp, e0.energies, prev, n));
    double gap = min_gap(e0.energies);
    double x = ramp.x_e0;

    while (x > ramp.x_e_end) {
        double h = std::min(sc.base_step, 0.98 * gap / (sc.gap_factor * slope));
        h = std::max(h, sc.min_step);
        for (;;) {
            const double xn = (h >= x - ramp.x_e_end) ? ramp.x_e_end : x - h;
            const double step = x - xn;
            // x - xn can round above h, so the floor test uses h itself.
            const bool at_floor = h <= sc.min_step;
            ReducedFluxBasis::Eigenpairs e = basis.solve(xn, m);
            const StepCheck c = align(prev, e.coefficients, n, sc.ambiguity);
            const double gap_new = min_gap(e.energies);
            const bool resolved = gap_new >= sc.gap_factor * step * slope || at_floor;
            if (c.rotation < sc.max_rotation && !c.ambiguous && resolved) {
                frame.nodes.push_back(make_node(xn, ramp, e.energies, e.coefficients, n));
                prev = std::move(e.coefficients);
                gap = gap_new;
                x = xn;
                break;
            }
            if (at_floor) {
                std::ostringstream msg;
                msg << "eigenbasis tracking failed at x_e = " << xn << ": rotation " << c.rotation
                    << (c.ambiguous ? ", ambiguous overlaps" : "") << " at the minimum step";
                throw TrackingError(msg.str());
            }
            h = std::max(step / sc.refine_factor, sc.min_step);
        }
    }

    // Bisect intervals around nodes whose finite-difference B is not antisymmetric enough.
    for (int pass = 0; pass < sc.max_asymmetry_passes && frame.size() >= 3; ++pass) {
        std::vector<char> split(frame.size(), 0);  // split[i]: bisect (i, i + 1)
        bool any = false;
        for (std::size_t i = 0; i < frame.size(); ++i) {
            if (!asymmetric(raw_nonadiabatic_coupling(frame, i), sc.asymmetry))
                continue;
            if (i > 0)
                split[i - 1] = 1;
            if (i + 1 < frame.size())
                split[i] = 1;
            any = true;
        }
        if (!any)
            break;
        std::vector<FrameNode> refined;
        refined.reserve(frame.size() * 2);
        for (std::size_t i = 0; i < frame.size(); ++i) {
            refined.push_back(frame.nodes[i]);
            if (!split[i] || i + 1 == frame.size())
                continue;
            const double xm = 0.5 * (frame.nodes[i].x_e + frame.nodes[i + 1].x_e);
            ReducedFluxBasis::Eigenpairs e = basis.solve(xm, m);
            for (int k = 0; k < n; ++k)
                if (frame.nodes[i].transfer.row(k).dot(e.coefficients.col(k)) < 0.0)
                    e.coefficients.col(k) *= -1.0;
            refined.push_back(make_node(xm, ramp, e.energies, e.coefficients, n));
        }
        frame.nodes = std::move(refined);
    }
    return frame;
}

AdiabaticFrame track_eigenbasis(const CircuitParams& p, const RampSchedule& ramp, const Grid& grid,
                                int n_levels, const StepControl& sc) {
    ramp.validate();
    const ReducedFluxBasis basis(p, grid, ramp.x_e0, sc.basis_size);
    return track_eigenbasis(basis, ramp, n_levels, sc);
}

NonadiabaticCoupling raw_nonadiabatic_coupling(const AdiabaticFrame& frame, std::size_t step) {
    NonadiabaticCoupling out;
    const int n = frame.n_levels;
    if (frame.size() < 2) {
        out.b = Eigen::MatrixXd::Zero(n, n);
        return out;
    }
    if (step >= frame.size())
        throw DimensionError("frame step out of range");
    std::array<std::size_t, 3> idx{};
    const std::array<double, 3> w = fd_weights(frame.nodes, step, idx);
    Eigen::MatrixXd adot = w[0] * frame.nodes[idx[0]].transfer;
    adot += w[1] * frame.nodes[idx[1]].transfer;
    adot += w[2] * frame.nodes[idx[2]].transfer;
    const Eigen::MatrixXd raw = adot * frame.nodes[step].transfer.transpose();
    out.raw_asymmetry = (raw + raw.transpose()).cwiseAbs().maxCoeff();
    out.b = 0.5 * (raw - raw.transpose());
    out.norm = out.b.cwiseAbs().maxCoeff();
    return out;
}

NonadiabaticCoupling nonadiabatic_coupling(const AdiabaticFrame& frame, std::size_t step, double tol) {
    if (frame.size() < 2)
        throw DomainError("the nonadiabatic coupling needs at least two frame steps");
    NonadiabaticCoupling b = raw_nonadiabatic_coupling(frame, step);
    if (asymmetric(b, tol)) {
        std::ostringstream msg;
        msg << "B asymmetry " << b.raw_asymmetry << " exceeds " << tol << " x |B| = " << tol * b.norm
            << " at x_e = " << frame.nodes[step].x_e << "; refine the frame steps";
        throw ResolutionError(msg.str());
    }
    return b;
}

ComplexMatrix frame_rotation_terms(const Eigen::MatrixXd& b, const ComplexMatrix& rho) {
    const ComplexMatrix bc = b.cast<std::complex<double>>();
    const ComplexMatrix first = bc.conjugate() * rho;
    const ComplexMatrix second = bc * rho.conjugate();
    return first + second.transpose();
}

void reset_rhs(const ComplexMatrix& rho, const Eigen::MatrixXd& b, const Eigen::VectorXd& energies,
               double gamma_per_ns, ComplexMatrix& drho) {
    const Eigen::Index n = rho.rows();
    if (rho.cols() != n || b.rows() != n || b.cols() != n || energies.size() != n)
        throw DimensionError("reset equation operands differ in dimension");
    drho = frame_rotation_terms(b, rho);
    const std::complex<double> minus_i_over_hbar(0.0, -1.0 / kUnits.hbar_over_kB);
    for (Eigen::Index kp = 0; kp < n; ++kp)
        for (Eigen::Index k = 0; k < n; ++k)
            drho(k, kp) += minus_i_over_hbar * (energies(k) - energies(kp)) * rho(k, kp);
    add_relaxation(rho, gamma_per_ns, drho);
}

Trajectory evolve_reset(const DensityMatrix& rho0, const AdiabaticFrame& frame, double gamma_per_ns,
                        const ResetRun& run) {
    if (frame.size() == 0)
        throw DomainError("empty adiabatic frame");
    if (rho0.dim() != frame.n_levels)
        throw DimensionError("initial state dimension must equal the tracked level count");
    if (!(gamma_per_ns >= 0.0))
        throw DomainError("relaxation rate must be non-negative");
    rho0.validate(run.tolerances);

    const int n = frame.n_levels;
    std::vector<Eigen::MatrixXd> bs(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i)
        bs[i] = raw_nonadiabatic_coupling(frame, i).b;

    std::size_t seg = 0;
    Eigen::MatrixXd b(n, n);
    Eigen::VectorXd e(n);
    auto rhs = [&](const ComplexMatrix& r, ComplexMatrix& d, double t) {
        const FrameNode& a = frame.nodes[seg];
        const FrameNode& c = frame.nodes[seg + 1];
        const double w = std::clamp((t - a.t) / (c.t - a.t), 0.0, 1.0);
        b = (1.0 - w) * bs[seg] + w * bs[seg + 1];
        e = (1.0 - w) * a.energies + w * c.energies;
        reset_rhs(r, b, e, gamma_per_ns, d);
    };
    MatrixIntegrator integrator(rhs, n, run.ode);

    Trajectory traj;
    ComplexMatrix rho = rho0.matrix();
    double t = 0.0;
    traj.push(frame.nodes[0].x_e, rho, run.keep_matrices);
    for (seg = 0; seg + 1 < frame.size(); ++seg) {
        integrator.advance(rho, t, frame.nodes[seg + 1].t);
        const InvariantReport r = check_invariants(rho);
        if (!r.ok(run.tolerances)) {
            std::ostringstream msg;
            msg << "density-matrix invariant breached at x_e = " << frame.nodes[seg + 1].x_e
                << " (hermiticity " << r.hermiticity_error << ", trace " << r.trace_error
                << ", min eigenvalue " << r.min_eigenvalue << ")";
            throw IntegrationError(msg.str(), frame.nodes[seg].x_e);
        }
        traj.push(frame.nodes[seg + 1].x_e, rho, run.keep_matrices);
    }
    return traj;
}

Trajectory evolve_reset(const DensityMatrix& rho0, const CircuitParams& p, const RampSchedule& ramp,
                        double gamma_per_ns, const Grid& grid, int n_levels, const StepControl& sc,
                        const ResetRun& run) {
    if (rho0.dim() != n_levels)
        throw DimensionError("initial state dimension must equal the tracked level count");
    return evolve_reset(rho0, track_eigenbasis(p, ramp, grid, n_levels, sc), gamma_per_ns, run);
}

WidthReport transition_widths(const Trajectory& traj, double min_jump) {
    WidthReport rep;
    const std::size_t s = traj.size();
    if (s < 2)
        throw DomainError("trajectory too short for width measurement");
    constexpr double eps = 1e-12;
    for (int level = 1; level < traj.dim(); ++level) {
        auto occ = [&](std::size_t i) { return traj.occupation(i, level); };
        std::size_t best = s;
        double best_rate = 0.0;
        for (std::size_t i = 0; i + 1 < s; ++i) {
            const double dx = std::abs(traj.stamps[i + 1] - traj.stamps[i]);
            const double rise = occ(i + 1) - occ(i);
            if (rise <= 0.0)
                continue;
            const double rate = dx > 0.0 ? rise / dx : std::numeric_limits<double>::infinity();
            if (rate > best_rate) {
                best_rate = rate;
                best = i;
            }
        }
        if (best == s) {
            rep.notices.push_back("level " + std::to_string(level + 1) + ": occupation never rises");
            continue;
        }
        std::size_t lo = best, hi = best + 1;
        while (lo > 0 && occ(lo - 1) <= occ(lo) + eps)
            --lo;
        while (hi + 1 < s && occ(hi + 1) >= occ(hi) - eps)
            ++hi;
        const double base = occ(lo), top = occ(hi), jump = top - base;
        if (jump < min_jump) {
            std::ostringstream msg;
            msg << "level " << level + 1 << ": rise " << jump << " below " << min_jump << ", skipped";
            rep.notices.push_back(msg.str());
            continue;
        }
        auto crossing_x = [&](double frac) {
            const double target = base + frac * jump;
            for (std::size_t j = lo; j < hi; ++j) {
                if (occ(j + 1) >= target && occ(j) < target) {
                    const double w = (target - occ(j)) / (occ(j + 1) - occ(j));
                    return traj.stamps[j] + w * (traj.stamps[j + 1] - traj.stamps[j]);
                }
            }
            return traj.stamps[hi];
        };
        TransitionWidth tw;
        tw.level = level;
        tw.jump = jump;
        tw.x_mid = crossing_x(0.5);
        if (hi == lo + 1) {
            tw.x_low = tw.x_high = tw.x_mid;
            tw.width = 0.0;
        } else {
            tw.x_low = crossing_x(0.1);
            tw.x_high = crossing_x(0.9);
            tw.width = std::abs(tw.x_high - tw.x_low);
        }
        rep.widths.push_back(tw);
    }
    return rep;
}

} // namespace qdet
