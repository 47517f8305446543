#pragma once

#include "qdet/circuit.hpp"
#include "qdet/spectral.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qdet {

/// Minimal-gap point of an adjacent level pair. Level indices are zero-based
/// (level 1 of the qudit is index 0).
struct AvoidedCrossing {
    int lower_level = 0;
    int upper_level = 1;
    double x_star = 0.0;      // control parameter at the minimal gap
    double delta_K = 0.0;     // minimal gap
    double slope_diff = 0.0;  // |d gap / dx| on the flanks, K per unit parameter
};

/// Ascending energies (at least upper_level + 1 of them) at a control parameter value.
using EnergyFunction = std::function<Eigen::VectorXd(double)>;

struct CrossingSearchOptions {
    int scan_points = 401;
    /// Golden-section stopping width in the control parameter.
    double x_tol = 1e-12;
    /// Flank samples lie between flank_near and flank_far gap widths from x_star.
    double flank_near = 100.0;
    double flank_far = 200.0;
    int flank_samples = 5;
};

EnergyFunction full_grid_energies(const CircuitParams& p, const Grid& grid, int n_levels);

/// Deepest interior gap minimum of (lower_level, lower_level + 1) in [from, to],
/// refined by golden section. Throws NotFoundError when the sampled gap has no
/// interior local minimum.
AvoidedCrossing find_avoided_crossing(const EnergyFunction& energies, double from, double to,
                                      int lower_level, const CrossingSearchOptions& opts = {});

struct CrossingSearch {
    std::pair<int, int> pair;
    std::optional<AvoidedCrossing> crossing;
    std::string error;
};

/// One search per requested pair on the full-grid spectrum of p (x_e varied).
/// Pairs must be adjacent (n, n+1); failures are reported per pair.
std::vector<CrossingSearch> find_avoided_crossings(const CircuitParams& p, const Grid& grid,
                                                   double x_e_from, double x_e_to,
                                                   const std::vector<std::pair<int, int>>& pairs,
                                                   const CrossingSearchOptions& opts = {});

/// Follows a diabatic path through consecutive crossings: starting on
/// start_level at x_start and moving toward x_end, crossing n is the first gap
/// minimum of (start_level + n, start_level + n + 1) met beyond crossing n - 1.
std::vector<AvoidedCrossing> trace_path_crossings(const EnergyFunction& energies, double x_start,
                                                  double x_end, int start_level, int n_crossings,
                                                  const CrossingSearchOptions& opts = {});

std::vector<AvoidedCrossing> trace_path_crossings(const CircuitParams& p, const Grid& grid,
                                                  double x_start, double x_end, int start_level,
                                                  int n_crossings,
                                                  const CrossingSearchOptions& opts = {});

} // namespace qdet
