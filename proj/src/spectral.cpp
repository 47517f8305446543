#include "qdet/spectral.hpp"

#include "qdet/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <numbers>
#include <sstream>
#include <thread>

namespace qdet {

namespace {

constexpr double kPi = std::numbers::pi;

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v(imax) < 0.0)
        v = -v;
}

Spectrum assemble(const CircuitParams& p, const Grid& grid, const Eigen::VectorXd& energies,
                  const Eigen::MatrixXd& vectors, double threshold) {
    Spectrum spec;
    spec.grid = grid;
    spec.energies = energies;
    spec.wavefunctions = vectors / std::sqrt(grid.spacing());
    const WellStructure wells = classify_wells(p);
    localize(spec, wells.barrier_x.value_or(0.5), threshold);
    return spec;
}

template <class Fn>
std::vector<Spectrum> run_parallel(std::size_t n, unsigned workers, Fn&& solve_step) {
    std::vector<Spectrum> out(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                out[i] = solve_step(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned count = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
    if (count == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(count);
        for (unsigned w = 0; w < count; ++w)
            pool.emplace_back(worker);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!errors[i])
            continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const Error& e) {
            throw SweepError(e.category(), i, e.what());
        } catch (const std::exception& e) {
            throw SweepError(Error::Category::Numeric, i, e.what());
        }
    }
    return out;
}

} // namespace

const char* to_string(Localization loc) {
    switch (loc) {
    case Localization::Left: return "Left";
    case Localization::Right: return "Right";
    case Localization::Delocalized: return "Delocalized";
    }
    return "?";
}

void Grid::validate() const {
    if (!(x_min < x_max))
        throw DomainError("grid requires x_min < x_max");
    if (n_points < 64)
        throw DomainError("grid requires at least 64 points, got " + std::to_string(n_points));
}

Eigen::VectorXd Grid::points() const {
    Eigen::VectorXd x(n_points);
    for (int i = 0; i < n_points; ++i)
        x(i) = point(i);
    return x;
}

Eigen::MatrixXd kinetic_matrix(const Grid& grid, double mass_invK) {
    const int n = grid.n_points;
    const double N = n + 1;
    const double length = grid.x_max - grid.x_min;
    const double scale = kPi * kPi / (2.0 * length * length) / (2.0 * mass_invK);
    Eigen::MatrixXd t(n, n);
    for (int a = 0; a < n; ++a) {
        const int i = a + 1;
        const double si = std::sin(kPi * i / N);
        t(a, a) = scale * ((2.0 * N * N + 1.0) / 3.0 - 1.0 / (si * si));
        for (int b = a + 1; b < n; ++b) {
            const int j = b + 1;
            const double sm = std::sin(kPi * (i - j) / (2.0 * N));
            const double sp = std::sin(kPi * (i + j) / (2.0 * N));
            const double sign = ((i - j) % 2 == 0) ? 1.0 : -1.0;
            const double v = scale * sign * (1.0 / (sm * sm) - 1.0 / (sp * sp));
            t(a, b) = v;
            t(b, a) = v;
        }
    }
    return t;
}

Eigen::MatrixXd discretized_hamiltonian(const CircuitParams& p, const Grid& grid) {
    Eigen::MatrixXd h = kinetic_matrix(grid, p.mass_invK);
    for (int i = 0; i < grid.n_points; ++i)
        h(i, i) += potential_energy(grid.point(i), p);
    return h;
}

Eigen::VectorXd solve_energies(const CircuitParams& p, const Grid& grid, int n_levels) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(discretized_hamiltonian(p, grid),
                                                      Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw ResolutionError("eigenvalue solver did not converge");
    return es.eigenvalues().head(n_levels);
}

Spectrum solve_spectrum(const CircuitParams& p, const Grid& grid, int n_levels,
                        const SpectrumOptions& opts) {
    p.validate();
    grid.validate();
    if (n_levels < 1 || n_levels > grid.n_points / 8)
        throw DomainError("n_levels must lie in [1, n_points/8], got " + std::to_string(n_levels));

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(discretized_hamiltonian(p, grid));
    if (es.info() != Eigen::Success)
        throw ResolutionError("eigensolver did not converge");
    Eigen::VectorXd energies = es.eigenvalues().head(n_levels);
    Eigen::MatrixXd vectors = es.eigenvectors().leftCols(n_levels);
    for (int k = 0; k < n_levels; ++k)
        fix_sign(vectors.col(k));

    const int last = grid.n_points - 1;
    for (int k = 0; k < n_levels; ++k) {
        const double peak = vectors.col(k).cwiseAbs().maxCoeff();
        const double edge = std::max(std::abs(vectors(0, k)), std::abs(vectors(last, k)));
        if (edge > opts.boundary_tol * peak) {
            std::ostringstream msg;
            msg << "grid [" << grid.x_min << ", " << grid.x_max << "] too small: level " << k + 1
                << " has boundary amplitude " << edge / peak << " of its peak";
            throw GridTooSmallError(msg.str());
        }
    }

    if (opts.check_convergence) {
        const Eigen::VectorXd fine = solve_energies(p, grid.refined(), n_levels);
        const double worst = (fine - energies).cwiseAbs().maxCoeff();
        if (worst >= opts.convergence_tol_K) {
            std::ostringstream msg;
            msg << "energies change by " << worst << " K when doubling to "
                << 2 * grid.n_points << " points";
            throw ResolutionError(msg.str());
        }
    }
    return assemble(p, grid, energies, vectors, opts.localization_threshold);
}

Spectrum solve_spectrum_auto(const CircuitParams& p, int n_levels, const SpectrumOptions& opts) {
    Grid grid;
    for (int attempt = 0;; ++attempt) {
        try {
            return solve_spectrum(p, grid, n_levels, opts);
        } catch (const GridTooSmallError&) {
            if (attempt >= 4)
                throw;
            const double dx = grid.spacing();
            const double pad = 0.25 * (grid.x_max - grid.x_min);
            grid.x_min -= pad;
            grid.x_max += pad;
            grid.n_points = static_cast<int>(std::lround((grid.x_max - grid.x_min) / dx)) - 1;
        }
    }
}

void localize(Spectrum& spec, double barrier_x, double threshold) {
    const int n = spec.size();
    const double dx = spec.grid.spacing();
    spec.barrier_x = barrier_x;
    spec.localization.assign(n, Localization::Delocalized);
    spec.mean_flux.assign(n, 0.0);
    spec.left_mass.assign(n, 0.0);
    for (int k = 0; k < n; ++k) {
        double left = 0.0, total = 0.0, mean = 0.0;
        for (int i = 0; i < spec.grid.n_points; ++i) {
            const double x = spec.grid.point(i);
            const double w = spec.wavefunctions(i, k) * spec.wavefunctions(i, k) * dx;
            total += w;
            mean += x * w;
            if (x < barrier_x)
                left += w;
            else if (x == barrier_x)
                left += 0.5 * w;
        }
        left /= total;
        spec.left_mass[k] = left;
        spec.mean_flux[k] = mean / total;
        if (left >= threshold)
            spec.localization[k] = Localization::Left;
        else if (1.0 - left >= threshold)
            spec.localization[k] = Localization::Right;
    }
}

int count_localized_below_barrier(const Spectrum& spec, const CircuitParams& p) {
    const WellStructure wells = classify_wells(p);
    if (!wells.barrier_x)
        return 0;
    int count = 0;
    for (int k = 0; k < spec.size(); ++k)
        if (spec.energies(k) < wells.barrier_top_K &&
            spec.localization[k] != Localization::Delocalized)
            ++count;
    return count;
}

void enforce_sign_continuity(std::vector<Spectrum>& family) {
    for (std::size_t s = 1; s < family.size(); ++s) {
        const Spectrum& prev = family[s - 1];
        Spectrum& cur = family[s];
        const int n = std::min(prev.size(), cur.size());
        for (int k = 0; k < n; ++k)
            if (prev.wavefunctions.col(k).dot(cur.wavefunctions.col(k)) < 0.0)
                cur.wavefunctions.col(k) *= -1.0;
    }
}

namespace {

std::vector<double> linspace(double from, double to, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i)
        v[i] = from + (to - from) * static_cast<double>(i) / (n - 1);
    v.back() = to;
    return v;
}

SpectrumFamily sweep(const std::vector<double>& values, int n_levels, const SweepOptions& opts,
                     const std::function<CircuitParams(double)>& params_at, const Grid& grid) {
    SpectrumFamily fam;
    fam.parameter = values;
    const std::size_t n = values.size();
    fam.spectra = run_parallel(n, opts.workers, [&](std::size_t i) {
        SpectrumOptions so = opts.spectrum;
        if (opts.converge_endpoints_only)
            so.check_convergence = so.check_convergence && (i == 0 || i + 1 == n);
        return solve_spectrum(params_at(values[i]), grid, n_levels, so);
    });
    enforce_sign_continuity(fam.spectra);
    return fam;
}

void check_range(double from, double to, int n_steps, const char* what) {
    if (n_steps < 2)
        throw DomainError(std::string(what) + " sweep needs at least 2 steps");
    if (!std::isfinite(from) || !std::isfinite(to) || from == to)
        throw DomainError(std::string(what) + " sweep range is empty");
}

} // namespace

SpectrumFamily sweep_flux(const CircuitParams& p, const Grid& grid, double x_e_from,
                          double x_e_to, int n_steps, int n_levels, const SweepOptions& opts) {
    check_range(x_e_from, x_e_to, n_steps, "flux");
    return sweep(linspace(x_e_from, x_e_to, n_steps), n_levels, opts,
                 [&](double xe) {
                     CircuitParams q = p;
                     q.x_e = xe;
                     return q;
                 },
                 grid);
}

SpectrumFamily sweep_beta(const CircuitParams& p, const Grid& grid, double u0_times_beta_K,
                          double beta_from, double beta_to, int n_steps, int n_levels,
                          const SweepOptions& opts) {
    check_range(beta_from, beta_to, n_steps, "beta_L");
    if (std::min(beta_from, beta_to) <= 0.0 || std::max(beta_from, beta_to) > 2.48)
        throw DomainError("beta_L sweep range must lie in (0, 2.48]");
    if (!(u0_times_beta_K > 0.0))
        throw DomainError("U0 * beta_L must be positive");
    return sweep(linspace(beta_from, beta_to, n_steps), n_levels, opts,
                 [&](double beta) {
                     CircuitParams q = p;
                     q.beta_L = beta;
                     q.u0_K = u0_times_beta_K / beta;
                     return q;
                 },
                 grid);
}

} // namespace qdet
