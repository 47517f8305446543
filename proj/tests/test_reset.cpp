#include <catch_amalgamated.hpp>

#include "qdet/errors.hpp"
#include "qdet/flux_basis.hpp"
#include "qdet/reset.hpp"
#include "qdet/units.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

using namespace qdet;
using Catch::Approx;
using cd = std::complex<double>;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::MatrixXd random_antisymmetric(int n, std::mt19937& rng) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            b(i, j) = nd(rng);
            b(j, i) = -b(i, j);
        }
    return b;
}

ComplexMatrix random_density(int n, std::mt19937& rng) {
    std::normal_distribution<double> nd;
    ComplexMatrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            a(i, j) = cd(nd(rng), nd(rng));
    ComplexMatrix r = a * a.adjoint();
    return r / r.trace();
}

/// Two levels whose eigenvectors rotate rigidly at omega (rad/ns) with no energy splitting.
AdiabaticFrame rotating_frame(double omega, double t_end, int nodes) {
    AdiabaticFrame f;
    f.n_levels = 2;
    f.ramp.x_e0 = 0.0;
    f.ramp.x_e_end = -t_end;
    f.ramp.v_e = 1.0;
    f.reference_energies = Eigen::VectorXd::Zero(2);
    for (int i = 0; i < nodes; ++i) {
        const double t = t_end * i / (nodes - 1);
        FrameNode node;
        node.t = t;
        node.x_e = -t;
        node.energies = Eigen::VectorXd::Zero(2);
        const double c = std::cos(omega * t), s = std::sin(omega * t);
        node.transfer.resize(2, 2);
        node.transfer << c, s, -s, c;
        f.nodes.push_back(node);
    }
    return f;
}

} // namespace

TEST_CASE("frame rotation terms equal the commutator for antisymmetric B", "[reset][property]") {
    std::mt19937 rng(7);
    for (int n : {2, 3, 8}) {
        const Eigen::MatrixXd b = random_antisymmetric(n, rng);
        const ComplexMatrix rho = random_density(n, rng);
        const ComplexMatrix bc = b.cast<cd>();
        const ComplexMatrix comm = bc * rho - rho * bc;
        CHECK((frame_rotation_terms(b, rho) - comm).cwiseAbs().maxCoeff() < 1e-13);
        // The rotation alone is trace-free and keeps rho Hermitian.
        ComplexMatrix d;
        reset_rhs(rho, b, Eigen::VectorXd::Zero(n), 0.0, d);
        CHECK(std::abs(d.trace()) < 1e-13);
        CHECK((d - d.adjoint()).cwiseAbs().maxCoeff() < 1e-13);
    }
}

TEST_CASE("rigidly rotating frame transfers population as cos^2", "[reset][oracle]") {
    const double omega = 1.5, t_end = 2.0;
    const AdiabaticFrame f = rotating_frame(omega, t_end, 1501);
    const NonadiabaticCoupling b = raw_nonadiabatic_coupling(f, 700);
    CHECK(b.b(0, 1) == Approx(omega).epsilon(1e-6));
    CHECK(b.b(1, 0) == Approx(-omega).epsilon(1e-6));
    CHECK(b.raw_asymmetry < 1e-9);
    // Edge nodes use one-sided differences.
    CHECK(raw_nonadiabatic_coupling(f, 0).b(0, 1) == Approx(omega).epsilon(1e-5));
    CHECK(raw_nonadiabatic_coupling(f, 1500).b(0, 1) == Approx(omega).epsilon(1e-5));

    ResetRun run;
    run.ode.abs_tol = run.ode.rel_tol = 1e-12;
    const Trajectory t = evolve_reset(DensityMatrix::pure_level(2, 0), f, 0.0, run);
    REQUIRE(t.size() == f.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double c = std::cos(omega * f.nodes[i].t);
        worst = std::max(worst, std::abs(t.occupation(i, 0) - c * c));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("finite-difference B matches the Hellmann-Feynman coupling", "[reset][oracle]") {
    const CircuitParams p;
    RampSchedule ramp;
    ramp.x_e0 = 0.4996;
    ramp.x_e_end = 0.4988;
    const ReducedFluxBasis basis(p, Grid{}, ramp.x_e0, 48);
    const AdiabaticFrame f = track_eigenbasis(basis, ramp, 8);
    REQUIRE(f.size() > 4);
    const std::size_t mid = f.size() / 2;
    const FrameNode& node = f.nodes[mid];
    const Eigen::MatrixXd x = node.transfer * basis.position() * node.transfer.transpose();
    const Eigen::MatrixXd b = nonadiabatic_coupling(f, mid).b;
    // <j| dH/dt |k> / (E_k - E_j) with dH/dt = -v_e * flux_coupling * X.
    const double dh = -ramp.v_e * basis.flux_coupling();
    CHECK(dh == Approx(4 * kPi * kPi * p.u0_K * ramp.v_e));
    int compared = 0;
    for (int k = 0; k < 8; ++k)
        for (int j = 0; j < 8; ++j) {
            const double gap = node.energies(k) - node.energies(j);
            if (j == k || std::abs(gap) < 0.05)
                continue;
            const double ref = dh * x(j, k) / gap;
            CHECK(b(k, j) == Approx(ref).margin(1e-3 * std::abs(dh) + 1e-6));
            ++compared;
        }
    CHECK(compared > 40);
}

TEST_CASE("coupling stays antisymmetric along the reset frame", "[reset][property]") {
    const CircuitParams p;
    RampSchedule ramp;
    ramp.x_e0 = 0.4990;
    ramp.x_e_end = 0.4975;
    const AdiabaticFrame f = track_eigenbasis(p, ramp, Grid{}, 8);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const NonadiabaticCoupling b = raw_nonadiabatic_coupling(f, i);
        CHECK(b.raw_asymmetry <= 1e-3 * b.norm + 1e-9);
        CHECK((b.b + b.b.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
    // Nodes run down in flux and forward in time, with orthonormal transfer rows.
    for (std::size_t i = 1; i < f.size(); ++i) {
        CHECK(f.nodes[i].x_e < f.nodes[i - 1].x_e);
        CHECK(f.nodes[i].t == Approx(ramp.time_at(f.nodes[i].x_e)));
    }
    const Eigen::MatrixXd& a = f.nodes.back().transfer;
    CHECK((a * a.transpose() - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(f.nodes.back().x_e == ramp.x_e_end);
}

TEST_CASE("adiabatic-frame evolution agrees with a frame-free Schrodinger integration", "[reset][oracle]") {
    // A slow sweep through the widest crossing of the path, where the passage is partial.
    const CircuitParams p;
    RampSchedule ramp;
    ramp.x_e0 = 0.49145;
    ramp.x_e_end = 0.49137;
    ramp.v_e = 1e-6;
    const int kdim = 48;
    const ReducedFluxBasis basis(p, Grid{}, ramp.x_e0, kdim);

    ResetRun run;
    run.ode.abs_tol = run.ode.rel_tol = 1e-11;
    const Trajectory t = evolve_reset(DensityMatrix::pure_level(8, 5), track_eigenbasis(basis, ramp, 8), 0.0, run);

    const double hbar = kUnits.hbar_over_kB;
    const int steps = 20000;
    const double dt = ramp.duration() / steps;
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(kdim);
    psi(5) = 1.0;
    for (int i = 0; i < steps; ++i) {
        const double x = ramp.x_e0 - ramp.v_e * (i + 0.5) * dt;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(basis.hamiltonian(x));
        const Eigen::MatrixXcd v = es.eigenvectors().cast<cd>();
        const Eigen::VectorXcd phase = (es.eigenvalues().cast<cd>() * cd(0.0, -dt / hbar)).array().exp();
        psi = v * (phase.asDiagonal() * (v.adjoint() * psi));
    }
    const ReducedFluxBasis::Eigenpairs end = basis.solve(ramp.x_e_end, 8);
    const Eigen::VectorXd& p_frame = t.occupations.back();
    for (int k = 0; k < 8; ++k) {
        const double p_ref = std::norm(end.coefficients.col(k).cast<cd>().dot(psi));
        CHECK(p_frame(k) == Approx(p_ref).margin(1e-4));
    }
    // The sweep is slow enough that the passage is genuinely partial.
    CHECK(p_frame(6) > 0.1);
    CHECK(p_frame(5) > 0.1);
}

TEST_CASE("reset invariants hold with relaxation", "[reset][property]") {
    const CircuitParams p;
    RampSchedule ramp;
    ramp.x_e0 = 0.4935;
    ramp.x_e_end = 0.4925;
    ResetRun run;
    run.keep_matrices = true;
    const Trajectory t =
        evolve_reset(DensityMatrix::pure_level(8, 4), p, ramp, 22.7, Grid{}, 8, StepControl{}, run);
    REQUIRE(t.matrices.size() == t.size());
    for (const ComplexMatrix& m : t.matrices)
        CHECK(check_invariants(m).ok());
    for (std::size_t i = 1; i < t.size(); ++i)
        CHECK(t.stamps[i] < t.stamps[i - 1]);
}

TEST_CASE("transition widths of a synthetic tanh step", "[reset]") {
    const double x0 = 0.495, w = 2e-4;
    Trajectory t;
    for (int i = 0; i <= 1000; ++i) {
        const double x = 0.5 - 1e-5 * i;
        const double up = 0.5 * (1.0 + std::tanh((x0 - x) / w));
        ComplexMatrix r = ComplexMatrix::Zero(4, 4);
        r(0, 0) = 1.0 - up - (i >= 500 ? 1e-4 : 0.0);
        r(1, 1) = up;
        r(2, 2) = 0.0;
        r(3, 3) = i >= 500 ? 1e-4 : 0.0;
        t.push(x, r, false);
    }
    const WidthReport rep = transition_widths(t);
    REQUIRE(rep.widths.size() == 1);
    const TransitionWidth& tw = rep.widths.front();
    CHECK(tw.level == 1);
    CHECK(tw.x_mid == Approx(x0).margin(1e-7));
    CHECK(tw.width == Approx(2.0 * std::atanh(0.8) * w).epsilon(1e-3));
    CHECK(tw.x_low > tw.x_high);
    CHECK(tw.jump == Approx(1.0).margin(1e-9));
    // Level 3 never rises; level 4 jumps by less than the threshold.
    REQUIRE(rep.notices.size() == 2);
    CHECK(rep.notices[0].find("level 3") != std::string::npos);
    CHECK(rep.notices[1].find("level 4") != std::string::npos);
    CHECK(transition_widths(t, 1e-5).widths.size() == 2);
    CHECK(transition_widths(t, 1e-5).widths.back().width < 1e-5);

    Trajectory one;
    one.push(0.5, ComplexMatrix::Identity(2, 2) * 0.5, false);
    CHECK_THROWS_AS(transition_widths(one), DomainError);
}

TEST_CASE("ramp and reset inputs are validated", "[reset]") {
    RampSchedule r;
    CHECK_NOTHROW(r.validate());
    CHECK(r.duration() == Approx((0.5001 - 0.491) / 0.454));
    r.v_e = 0.0;
    CHECK_THROWS_AS(r.validate(), DomainError);
    r = {};
    r.x_e_end = 0.6;
    CHECK_THROWS_AS(r.validate(), DomainError);
    r = {};
    r.x_e_end = r.x_e0;
    CHECK_NOTHROW(r.validate());
    CHECK(r.duration() == 0.0);

    const ReducedFluxBasis basis(CircuitParams{}, Grid{}, 0.5001, 16);
    RampSchedule off;
    off.x_e0 = 0.5;
    CHECK_THROWS_AS(track_eigenbasis(basis, off, 8), DomainError);
    CHECK_THROWS_AS(track_eigenbasis(basis, RampSchedule{}, 16), DimensionError);

    const AdiabaticFrame f = rotating_frame(1.0, 1.0, 11);
    CHECK_THROWS_AS(evolve_reset(DensityMatrix::pure_level(3, 0), f, 0.0), DimensionError);
    CHECK_THROWS_AS(evolve_reset(DensityMatrix::pure_level(2, 0), f, -1.0), DomainError);
    CHECK_THROWS_AS(evolve_reset(DensityMatrix::pure_level(2, 0), AdiabaticFrame{}, 0.0), DomainError);
    CHECK_THROWS_AS(raw_nonadiabatic_coupling(f, 11), DimensionError);
    AdiabaticFrame single = f;
    single.nodes.resize(1);
    CHECK_THROWS_AS(nonadiabatic_coupling(single, 0), DomainError);
    ComplexMatrix d;
    CHECK_THROWS_AS(reset_rhs(ComplexMatrix::Zero(2, 2), Eigen::MatrixXd::Zero(3, 3), Eigen::VectorXd::Zero(2), 0.0, d),
                    DimensionError);
}
