#pragma once

#include "qdet/trajectory.hpp"

#include <Eigen/Dense>

#include <vector>

namespace qdet {

/// exp(-pi Delta^2 / (2 hbar v)), Delta in K, v in K/ns.
double lzsm_probability(double delta_K, double v_K_per_ns);

/// Smallest energy sweep rate (K/ns) giving lzsm_probability >= target for every gap <= delta_max.
double min_speed_for_target(double delta_max_K, double target);

struct FluxSpeed {
    double wb_per_s = 0.0;
    double phi0_per_us = 0.0;
};

/// dPhi_e/dt = v / (2 I_p) with v converted from K/ns to J/s.
FluxSpeed flux_speed(double v_K_per_ns, double persistent_current_A);

struct LzsmDesign {
    double persistent_current_A = 3e-6;
    double target = 0.99;
    double delta_max_K = 3e-3;
    double v_K_per_ns = 0.0;
    FluxSpeed speed;

    /// Time (us) to ramp between two flux values at the designed speed.
    double ramp_duration_us(double x_from, double x_to) const;
};

LzsmDesign design_speed(double delta_max_K, double target, double persistent_current_A);

struct ChainCrossing {
    double delta_K = 0.0;
    double slope_diff = 0.0;  // K per unit x_e
    double x_star = 0.0;
};

/// Sequential avoided crossings met by a linear downward ramp. Crossing n
/// (zero-based) couples levels n and n + 1.
struct CrossingChain {
    std::vector<ChainCrossing> crossings;
    double v_e = 0.454;          // flux quanta per ns
    double gamma_per_ns = 0.0;
    double x_e0 = 0.5001;        // ramp start
    double x_e_end = 0.491;      // ramp end

    void validate() const;
    int levels() const { return static_cast<int>(crossings.size()) + 1; }
    /// Energy sweep rate at crossing n: slope_diff * v_e.
    double sweep_rate(int n) const;
    /// Diabatic passage probability at crossing n.
    double passage(int n) const;
    /// Time of crossing n since the ramp start (ns).
    double time_of(int n) const;
};

/// Dissipation-free final occupations of the adiabatic-impulse chain.
Eigen::VectorXd aim_final_occupations(const CrossingChain& chain);
Eigen::VectorXd aim_final_occupations(const std::vector<double>& passages);

/// Closed-form cascade with equal rates: populations after time tau.
Eigen::VectorXd cascade_decay(const Eigen::VectorXd& p, double gamma_per_ns, double tau_ns);

/// Symmetric population exchange between levels n and n + 1 with probability passage.
void apply_crossing(Eigen::VectorXd& p, int n, double passage);

struct RateSolution {
    Trajectory trajectory;  // stamps are x_e
    Eigen::VectorXd final_occupations;
};

/// Rate equations between crossings, population splits at the crossings,
/// starting from level 1. samples_per_interval >= 2 points per adiabatic interval.
RateSolution rate_equation_evolve(const CrossingChain& chain, int samples_per_interval = 64);

/// prod P_n * exp(-gamma * sum(widths) / v_e), widths in flux quanta.
double reset_probability_estimate(const CrossingChain& chain, const std::vector<double>& widths);

/// Flux spans the path population spends above level 1: x*_n - x*_{n+1}, the
/// last one running to the ramp end.
std::vector<double> dwell_intervals(const CrossingChain& chain);

} // namespace qdet
