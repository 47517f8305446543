#include "qdet/lzsm.hpp"

#include "qdet/errors.hpp"
#include "qdet/units.hpp"

#include <cmath>
#include <numbers>

namespace qdet {

double lzsm_probability(double delta_K, double v) {
    if (!(v > 0.0))
        throw DomainError("sweep rate v must be positive");
    if (!(delta_K >= 0.0))
        throw DomainError("gap must be non-negative");
    return std::exp(-std::numbers::pi * delta_K * delta_K / (2.0 * kUnits.hbar_over_kB * v));
}

double min_speed_for_target(double delta_max_K, double target) {
    if (!(target > 0.0 && target < 1.0))
        throw DomainError("target probability must lie in (0, 1)");
    if (!(delta_max_K >= 0.0))
        throw DomainError("gap must be non-negative");
    return std::numbers::pi * delta_max_K * delta_max_K /
           (2.0 * kUnits.hbar_over_kB * std::log(1.0 / target));
}

FluxSpeed flux_speed(double v, double ip) {
    if (!(ip > 0.0))
        throw DomainError("persistent current must be positive");
    FluxSpeed s;
    s.wb_per_s = v * kUnits.boltzmann * 1e9 / (2.0 * ip);
    s.phi0_per_us = s.wb_per_s / kUnits.flux_quantum * 1e-6;
    return s;
}

double LzsmDesign::ramp_duration_us(double x_from, double x_to) const {
    if (!(speed.phi0_per_us > 0.0))
        throw DomainError("design has no speed");
    return std::abs(x_from - x_to) / speed.phi0_per_us;
}

LzsmDesign design_speed(double delta_max_K, double target, double ip) {
    LzsmDesign d;
    d.persistent_current_A = ip;
    d.target = target;
    d.delta_max_K = delta_max_K;
    d.v_K_per_ns = min_speed_for_target(delta_max_K, target);
    d.speed = flux_speed(d.v_K_per_ns, ip);
    return d;
}

void CrossingChain::validate() const {
    if (crossings.empty())
        throw DomainError("crossing chain is empty");
    if (!(v_e > 0.0))
        throw DomainError("ramp speed must be positive");
    if (!(gamma_per_ns >= 0.0))
        throw DomainError("relaxation rate must be non-negative");
    for (std::size_t n = 0; n < crossings.size(); ++n) {
        const ChainCrossing& c = crossings[n];
        if (!(c.delta_K > 0.0) || !(c.slope_diff > 0.0))
            throw DomainError("crossing gaps and slopes must be positive");
        const bool ordered = n == 0 ? c.x_star <= x_e0 : c.x_star < crossings[n - 1].x_star;
        if (!ordered)
            throw DomainError("crossings must be strictly ordered along the downward ramp");
    }
    if (x_e_end > crossings.back().x_star)
        throw DomainError("ramp must end after the last crossing");
}

double CrossingChain::sweep_rate(int n) const { return crossings.at(n).slope_diff * v_e; }

double CrossingChain::passage(int n) const {
    return lzsm_probability(crossings.at(n).delta_K, sweep_rate(n));
}

double CrossingChain::time_of(int n) const { return (x_e0 - crossings.at(n).x_star) / v_e; }

Eigen::VectorXd aim_final_occupations(const std::vector<double>& passages) {
    if (passages.empty())
        throw DomainError("crossing chain is empty");
    const auto n = static_cast<Eigen::Index>(passages.size());
    Eigen::VectorXd rho = Eigen::VectorXd::Zero(n + 1);
    double carried = 1.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double p = passages[static_cast<std::size_t>(k)];
        if (!(p >= 0.0 && p <= 1.0))
            throw DomainError("passage probabilities must lie in [0, 1]");
        rho(k) = carried * (1.0 - p);
        carried *= p;
    }
    rho(n) = carried;
    return rho;
}

Eigen::VectorXd aim_final_occupations(const CrossingChain& chain) {
    chain.validate();
    std::vector<double> p;
    for (int n = 0; n < static_cast<int>(chain.crossings.size()); ++n)
        p.push_back(chain.passage(n));
    return aim_final_occupations(p);
}

Eigen::VectorXd cascade_decay(const Eigen::VectorXd& p, double gamma, double tau) {
    const Eigen::Index n = p.size();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    const double g = gamma * tau;
    const double e = std::exp(-g);
    for (Eigen::Index m = 1; m < n; ++m) {
        if (p(m) == 0.0)
            continue;
        // Level m feeds level j >= 1 with the Poisson weight of m - j jumps.
        double w = e;
        double moved = 0.0;
        for (Eigen::Index j = m; j >= 1; --j) {
            out(j) += p(m) * w;
            moved += w;
            w *= g / static_cast<double>(m - j + 1);
        }
        out(0) += p(m) * (1.0 - moved);
    }
    out(0) += p(0);
    return out;
}

void apply_crossing(Eigen::VectorXd& p, int n, double passage) {
    const double lo = p(n), hi = p(n + 1);
    p(n) = (1.0 - passage) * lo + passage * hi;
    p(n + 1) = passage * lo + (1.0 - passage) * hi;
}

RateSolution rate_equation_evolve(const CrossingChain& chain, int samples) {
    chain.validate();
    if (samples < 2)
        throw DomainError("need at least two samples per interval");
    const int levels = chain.levels();
    RateSolution sol;
    Eigen::VectorXd p = Eigen::VectorXd::Zero(levels);
    p(0) = 1.0;

    auto push = [&](double x, const Eigen::VectorXd& q) {
        sol.trajectory.stamps.push_back(x);
        sol.trajectory.occupations.push_back(q);
    };
    auto sweep = [&](double x_from, double x_to) {
        // Populations at x_from are p; record the interval and leave p at x_to.
        const double tau = (x_from - x_to) / chain.v_e;
        for (int s = 0; s < samples; ++s) {
            const double f = static_cast<double>(s) / (samples - 1);
            push(x_from - f * (x_from - x_to), cascade_decay(p, chain.gamma_per_ns, f * tau));
        }
        p = cascade_decay(p, chain.gamma_per_ns, tau);
    };

    double x = chain.x_e0;
    for (int n = 0; n < static_cast<int>(chain.crossings.size()); ++n) {
        const double xs = chain.crossings[static_cast<std::size_t>(n)].x_star;
        if (xs < x)
            sweep(x, xs);
        apply_crossing(p, n, chain.passage(n));
        x = xs;
    }
    sweep(x, chain.x_e_end);
    sol.final_occupations = p;
    return sol;
}

double reset_probability_estimate(const CrossingChain& chain, const std::vector<double>& widths) {
    chain.validate();
    double prod = 1.0;
    for (int n = 0; n < static_cast<int>(chain.crossings.size()); ++n)
        prod *= chain.passage(n);
    double total = 0.0;
    for (double w : widths) {
        if (!(w >= 0.0))
            throw DomainError("widths must be non-negative");
        total += w;
    }
    return prod * std::exp(-chain.gamma_per_ns * total / chain.v_e);
}

std::vector<double> dwell_intervals(const CrossingChain& chain) {
    chain.validate();
    std::vector<double> out;
    for (std::size_t n = 0; n < chain.crossings.size(); ++n) {
        const double next =
            n + 1 < chain.crossings.size() ? chain.crossings[n + 1].x_star : chain.x_e_end;
        out.push_back(chain.crossings[n].x_star - next);
    }
    return out;
}

} // namespace qdet
