#include "qdet/crossings.hpp"

#include "qdet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace qdet {

namespace {

double gap_at(const EnergyFunction& energies, double x, int lower) {
    const Eigen::VectorXd e = energies(x);
    if (e.size() < lower + 2)
        throw DimensionError("energy function returned too few levels");
    return e(lower + 1) - e(lower);
}

/// Least-squares slope of y against x.
double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

struct Scan {
    std::vector<double> x;
    std::vector<Eigen::VectorXd> e;
};

Scan scan(const EnergyFunction& energies, double from, double to, int points) {
    Scan s;
    s.x.resize(points);
    s.e.resize(points);
    for (int i = 0; i < points; ++i) {
        s.x[i] = from + (to - from) * static_cast<double>(i) / (points - 1);
        s.e[i] = energies(s.x[i]);
    }
    return s;
}

AvoidedCrossing refine(const EnergyFunction& energies, double a, double b, int lower,
                       double scan_step, const CrossingSearchOptions& opts) {
    if (a > b)
        std::swap(a, b);
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double gc = gap_at(energies, c, lower);
    double gd = gap_at(energies, d, lower);
    while (b - a > opts.x_tol) {
        if (gc <= gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - invphi * (b - a);
            gc = gap_at(energies, c, lower);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + invphi * (b - a);
            gd = gap_at(energies, d, lower);
        }
        if (c >= d)
            break;
    }
    AvoidedCrossing ac;
    ac.lower_level = lower;
    ac.upper_level = lower + 1;
    ac.x_star = gc <= gd ? c : d;
    ac.delta_K = std::min(gc, gd);

    // Rough slope from one scan step away, then two-sided linear fits far out
    // on the flanks where the gap is linear in the control parameter.
    const double gl = gap_at(energies, ac.x_star - scan_step, lower);
    const double gr = gap_at(energies, ac.x_star + scan_step, lower);
    const double rough = 0.5 * (std::sqrt(std::max(0.0, gl * gl - ac.delta_K * ac.delta_K)) +
                                std::sqrt(std::max(0.0, gr * gr - ac.delta_K * ac.delta_K))) /
                         scan_step;
    if (!(rough > 0.0) || !std::isfinite(rough))
        throw NotFoundError("gap has no resolvable flank slope");
    const double width = ac.delta_K / rough;
    double slope_sum = 0.0;
    for (int side : {-1, 1}) {
        std::vector<double> xs, gs;
        for (int j = 0; j < opts.flank_samples; ++j) {
            const double dist =
                width * (opts.flank_near + (opts.flank_far - opts.flank_near) * j /
                                               std::max(1, opts.flank_samples - 1));
            const double x = ac.x_star + side * dist;
            xs.push_back(x);
            gs.push_back(gap_at(energies, x, lower));
        }
        slope_sum += std::abs(fitted_slope(xs, gs));
    }
    ac.slope_diff = 0.5 * slope_sum;
    return ac;
}

std::vector<int> local_minima(const Scan& s, int lower) {
    for (const Eigen::VectorXd& e : s.e)
        if (lower < 0 || e.size() < lower + 2)
            throw DimensionError("energy function returned too few levels");
    std::vector<int> idx;
    for (std::size_t i = 1; i + 1 < s.x.size(); ++i) {
        const double g0 = s.e[i - 1](lower + 1) - s.e[i - 1](lower);
        const double g1 = s.e[i](lower + 1) - s.e[i](lower);
        const double g2 = s.e[i + 1](lower + 1) - s.e[i + 1](lower);
        if (g1 < g0 && g1 < g2)
            idx.push_back(static_cast<int>(i));
    }
    return idx;
}

std::string pair_name(int lower) {
    std::ostringstream os;
    os << "levels " << lower + 1 << "-" << lower + 2;
    return os.str();
}

} // namespace

EnergyFunction full_grid_energies(const CircuitParams& p, const Grid& grid, int n_levels) {
    return [p, grid, n_levels](double x_e) {
        CircuitParams q = p;
        q.x_e = x_e;
        return solve_energies(q, grid, n_levels);
    };
}

AvoidedCrossing find_avoided_crossing(const EnergyFunction& energies, double from, double to,
                                      int lower_level, const CrossingSearchOptions& opts) {
    if (!(from != to) || opts.scan_points < 3)
        throw DomainError("crossing search needs a non-empty range and at least 3 scan points");
    const Scan s = scan(energies, from, to, opts.scan_points);
    const auto minima = local_minima(s, lower_level);
    if (minima.empty())
        throw NotFoundError("no interior gap minimum for " + pair_name(lower_level));
    int best = minima.front();
    for (int i : minima)
        if (s.e[i](lower_level + 1) - s.e[i](lower_level) <
            s.e[best](lower_level + 1) - s.e[best](lower_level))
            best = i;
    const double step = std::abs(s.x[1] - s.x[0]);
    return refine(energies, s.x[best - 1], s.x[best + 1], lower_level, step, opts);
}

std::vector<CrossingSearch> find_avoided_crossings(const CircuitParams& p, const Grid& grid,
                                                   double x_e_from, double x_e_to,
                                                   const std::vector<std::pair<int, int>>& pairs,
                                                   const CrossingSearchOptions& opts) {
    int top = 0;
    for (const auto& [lo, hi] : pairs) {
        if (lo < 0 || hi != lo + 1)
            throw DomainError("crossing pairs must be adjacent levels (n, n+1)");
        top = std::max(top, hi + 1);
    }
    const EnergyFunction fn = full_grid_energies(p, grid, top);
    std::vector<CrossingSearch> out;
    for (const auto& pr : pairs) {
        CrossingSearch cs;
        cs.pair = pr;
        try {
            cs.crossing = find_avoided_crossing(fn, x_e_from, x_e_to, pr.first, opts);
        } catch (const NotFoundError& e) {
            cs.error = e.what();
        }
        out.push_back(std::move(cs));
    }
    return out;
}

std::vector<AvoidedCrossing> trace_path_crossings(const EnergyFunction& energies, double x_start,
                                                  double x_end, int start_level, int n_crossings,
                                                  const CrossingSearchOptions& opts) {
    if (x_start == x_end || n_crossings < 1 || start_level < 0)
        throw DomainError("path trace needs a non-empty range and at least one crossing");
    const Scan s = scan(energies, x_start, x_end, opts.scan_points);
    const double step = std::abs(s.x[1] - s.x[0]);
    std::vector<AvoidedCrossing> path;
    std::size_t from_index = 0;
    for (int n = 0; n < n_crossings; ++n) {
        const int lower = start_level + n;
        const auto minima = local_minima(s, lower);
        auto it = std::find_if(minima.begin(), minima.end(),
                               [&](int i) { return static_cast<std::size_t>(i) >= from_index; });
        if (it == minima.end())
            throw NotFoundError("path crossing " + std::to_string(n + 1) + " (" +
                                pair_name(lower) + ") not found before x_e = " +
                                std::to_string(x_end));
        const int i = *it;
        AvoidedCrossing ac = refine(energies, s.x[i - 1], s.x[i + 1], lower, step, opts);
        path.push_back(ac);
        from_index = static_cast<std::size_t>(i);
    }
    return path;
}

std::vector<AvoidedCrossing> trace_path_crossings(const CircuitParams& p, const Grid& grid,
                                                  double x_start, double x_end, int start_level,
                                                  int n_crossings,
                                                  const CrossingSearchOptions& opts) {
    return trace_path_crossings(full_grid_energies(p, grid, start_level + n_crossings + 1),
                                x_start, x_end, start_level, n_crossings, opts);
}

} // namespace qdet
