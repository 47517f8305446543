#include "qdet/runner.hpp"

#include "qdet/errors.hpp"
#include "qdet/export.hpp"
#include "qdet/flux_basis.hpp"
#include "qdet/units.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#ifndef QDET_VERSION
#define QDET_VERSION "unknown"
#endif

namespace qdet {

using Json = nlohmann::ordered_json;

namespace {

constexpr std::pair<Stage, const char*> kStageNames[] = {
    {Stage::Spectrum, "spectrum"}, {Stage::SweepFlux, "sweep-flux"}, {Stage::SweepBeta, "sweep-beta"},
    {Stage::Crossings, "crossings"}, {Stage::Capture, "capture"},     {Stage::Reset, "reset"},
    {Stage::Aim, "aim"},           {Stage::DesignSpeed, "design-speed"},
};

void require(bool ok, const std::string& key, const std::string& why) {
    if (!ok)
        throw DomainError("key '" + key + "': " + why);
}

/// Runs a module-level validation and prefixes its message with the config block.
template <class F>
void validate_block(const std::string& block, F&& f) {
    try {
        f();
    } catch (const Error& e) {
        if (e.category() == Error::Category::Validation)
            throw DomainError("[" + block + "] " + e.what());
        throw;
    }
}

StepControl read_step_control(const Config& c, const std::string& s) {
    StepControl sc;
    sc.base_step = c.get_double(s + ".base_step", sc.base_step);
    sc.min_step = c.get_double(s + ".min_step", sc.min_step);
    sc.refine_factor = c.get_double(s + ".refine_factor", sc.refine_factor);
    sc.max_rotation = c.get_double(s + ".max_rotation", sc.max_rotation);
    sc.gap_factor = c.get_double(s + ".gap_factor", sc.gap_factor);
    sc.basis_size = c.get_int(s + ".basis_size", sc.basis_size);
    require(sc.min_step > 0.0 && sc.base_step >= sc.min_step, s + ".base_step",
            "need base_step >= min_step > 0");
    require(sc.refine_factor > 1.0, s + ".refine_factor", "must exceed 1");
    require(sc.basis_size >= 8, s + ".basis_size", "must be at least 8");
    return sc;
}

RampSchedule read_ramp(const Config& c, const std::string& s) {
    RampSchedule r;
    r.x_e0 = c.get_double(s + ".x_e0", r.x_e0);
    r.v_e = c.get_double(s + ".v_e", r.v_e);
    r.x_e_end = c.get_double(s + ".x_e_end", r.x_e_end);
    require(r.v_e > 0.0, s + ".v_e", "must be positive");
    require(r.x_e_end < r.x_e0, s + ".x_e_end", "the ramp must run downward over a non-empty range");
    return r;
}

Json vector_json(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

std::string trajectory_csv(const Trajectory& t, const std::string& stamp) {
    std::ostringstream out;
    write_trajectory_csv(out, t, stamp);
    return out.str();
}

struct Artifacts {
    std::vector<std::pair<std::string, std::string>> files;  // name, content
    Json summary = Json::object();
    Json invariants = Json::object();

    void add(const std::string& name, std::string content) { files.emplace_back(name, std::move(content)); }
};

/// Largest deviation of per-stamp occupation sums from one, and the occupation range.
Json trajectory_invariants(const Trajectory& t) {
    double sum_err = 0.0, lo = 1.0, hi = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        sum_err = std::max(sum_err, std::abs(t.occupations[i].sum() - 1.0));
        lo = std::min(lo, t.occupations[i].minCoeff());
        hi = std::max(hi, t.occupations[i].maxCoeff());
    }
    return Json{{"max_trace_error", sum_err},
                {"min_occupation", lo},
                {"max_occupation", hi},
                {"ok", sum_err < 1e-6 && lo > -1e-8 && hi < 1.0 + 1e-8}};
}

void stage_spectrum(const RunConfig& rc, Artifacts& a) {
    const Spectrum s = solve_spectrum(rc.circuit, rc.grid, rc.spectrum.levels, rc.spectrum_options);
    std::ostringstream csv;
    csv << "level,energy_K,localization,mean_flux,left_mass\n";
    for (int k = 0; k < s.size(); ++k)
        csv << k + 1 << ',' << format_double(s.energies(k)) << ',' << to_string(s.localization[k]) << ','
            << format_double(s.mean_flux[k]) << ',' << format_double(s.left_mass[k]) << '\n';
    a.add("spectrum.csv", csv.str());

    std::ostringstream wf;
    wf << "x";
    for (int k = 1; k <= s.size(); ++k)
        wf << ",psi_" << k;
    wf << '\n';
    for (int i = 0; i < s.grid.n_points; ++i) {
        wf << format_double(s.grid.point(i));
        for (int k = 0; k < s.size(); ++k)
            wf << ',' << format_double(s.wavefunctions(i, k));
        wf << '\n';
    }
    a.add("wavefunctions.csv", wf.str());

    const WellStructure w = classify_wells(rc.circuit);
    a.summary["localized_below_barrier"] = count_localized_below_barrier(s, rc.circuit);
    a.summary["barrier_top_K"] = w.barrier_top_K;
    a.summary["barrier_x"] = s.barrier_x;
    a.summary["energies_K"] = vector_json(s.energies);
}

void stage_sweep(const RunConfig& rc, Artifacts& a, bool beta) {
    SweepOptions so;
    so.spectrum = rc.spectrum_options;
    so.workers = rc.workers;
    const SweepStage& sw = rc.sweep;
    const SpectrumFamily fam =
        beta ? sweep_beta(rc.circuit, rc.grid, sw.u0_beta_K, sw.from, sw.to, sw.points, sw.levels, so)
             : sweep_flux(rc.circuit, rc.grid, sw.from, sw.to, sw.points, sw.levels, so);
    std::ostringstream csv;
    csv << (beta ? "beta_L" : "x_e");
    for (int k = 1; k <= sw.levels; ++k)
        csv << ",E_" << k;
    csv << '\n';
    for (std::size_t i = 0; i < fam.parameter.size(); ++i) {
        csv << format_double(fam.parameter[i]);
        for (int k = 0; k < sw.levels; ++k)
            csv << ',' << format_double(fam.spectra[i].energies(k));
        csv << '\n';
    }
    a.add(beta ? "sweep_beta.csv" : "sweep_flux.csv", csv.str());
    a.summary["steps"] = fam.parameter.size();
}

Json crossing_json(const ChainCrossing& c, int n) {
    return Json{{"levels", {n + 1, n + 2}}, {"x_star", c.x_star}, {"delta_K", c.delta_K}, {"slope_K", c.slope_diff}};
}

void stage_crossings(const RunConfig& rc, Artifacts& a) {
    const CrossingsStage& cs = rc.crossings;
    const ReducedFluxBasis basis(rc.circuit, rc.grid, cs.to, cs.basis_size);
    const int n_levels = cs.start_level + cs.count + 2;
    const EnergyFunction ef = [&basis, n_levels](double x) { return basis.energies(x, n_levels); };
    const std::vector<AvoidedCrossing> found =
        trace_path_crossings(ef, cs.to, cs.from, cs.start_level, cs.count);
    std::ostringstream csv;
    csv << "lower,upper,x_star,delta_K,slope_K\n";
    Json list = Json::array();
    for (const AvoidedCrossing& c : found) {
        csv << c.lower_level + 1 << ',' << c.upper_level + 1 << ',' << format_double(c.x_star) << ','
            << format_double(c.delta_K) << ',' << format_double(c.slope_diff) << '\n';
        list.push_back(Json{{"levels", {c.lower_level + 1, c.upper_level + 1}},
                            {"x_star", c.x_star},
                            {"delta_K", c.delta_K},
                            {"slope_K", c.slope_diff}});
    }
    a.add("crossings.csv", csv.str());
    a.add("crossings.json", Json{{"crossings", list}}.dump(2) + "\n");
    a.summary["count"] = found.size();
}

void stage_capture(const RunConfig& rc, Artifacts& a) {
    const CaptureStage& st = rc.capture;
    const Spectrum s = solve_spectrum(rc.circuit, rc.grid, st.params.n_levels, rc.spectrum_options);
    CaptureParams cp = st.params;
    if (st.resonant)
        cp.omega_d_per_ns = resonant_drive(s, cp);
    CaptureRun run = st.run;
    run.keep_matrices = st.dump_matrices;
    const Trajectory t =
        evolve_capture(DensityMatrix::pure_level(cp.n_levels, st.initial_level), s, cp, run);
    a.add("capture.csv", trajectory_csv(t, "t_ns"));
    if (st.dump_matrices) {
        std::ostringstream bin;
        write_matrix_dump(bin, t);
        a.add("capture_rho.bin", bin.str());
    }
    a.invariants["trajectory"] = trajectory_invariants(t);
    a.summary["omega_d_per_ns"] = cp.omega_d_per_ns;
    a.summary["final_occupations"] = vector_json(t.occupations.back());
    try {
        a.summary["rabi_frequency_per_ns"] = rabi_frequency(t, cp.lower_level, cp.upper_level);
    } catch (const EstimateUnavailable& e) {
        a.summary["rabi_frequency_per_ns"] = nullptr;
        a.summary["rabi_notice"] = e.what();
    }
    // The scalar drive term never enters the dynamics; recorded for completeness.
    a.summary["dropped_scalar_term"] = Json{{"drive_amplitude_K", cp.drive_amplitude_K},
                                            {"alpha", cp.alpha},
                                            {"signal_shape", cp.signal_shape ? "set" : "unset"}};
}

struct ResetOutcome {
    Trajectory trajectory;
    WidthReport widths;
    std::size_t nodes = 0;
};

ResetOutcome reset_numerics(const RunConfig& rc, const RampSchedule& ramp, double gamma, int levels,
                            int initial, const StepControl& sc) {
    const AdiabaticFrame frame = track_eigenbasis(rc.circuit, ramp, rc.grid, levels, sc);
    ResetOutcome out;
    out.nodes = frame.size();
    out.trajectory = evolve_reset(DensityMatrix::pure_level(levels, initial), frame, gamma);
    out.widths = transition_widths(out.trajectory);
    return out;
}

void stage_reset(const RunConfig& rc, Artifacts& a) {
    const ResetStage& st = rc.reset;
    const ResetOutcome r = reset_numerics(rc, st.ramp, st.gamma_per_ns, st.levels, st.initial_level, st.control);
    a.add("reset.csv", trajectory_csv(r.trajectory, "x_e"));
    const CrossingChain chain =
        path_chain(rc.circuit, rc.grid, st.ramp, st.gamma_per_ns, st.levels - 1, st.control.basis_size);
    Json list = Json::array();
    for (std::size_t n = 0; n < chain.crossings.size(); ++n) {
        Json j = crossing_json(chain.crossings[n], static_cast<int>(n));
        j["width"] = nullptr;
        for (const TransitionWidth& w : r.widths.widths)
            if (w.level == static_cast<int>(n) + 1)
                j["width"] = w.width;
        list.push_back(j);
    }
    a.add("reset_crossings.json", Json{{"crossings", list}, {"notices", r.widths.notices}}.dump(2) + "\n");
    a.invariants["trajectory"] = trajectory_invariants(r.trajectory);
    a.summary["frame_nodes"] = r.nodes;
    a.summary["final_occupations"] = vector_json(r.trajectory.occupations.back());
    a.summary["return_probability"] = r.trajectory.occupations.back()(st.levels - 1);
}

void stage_aim(const RunConfig& rc, Artifacts& a) {
    const AimStage& st = rc.aim;
    const int n_cross = st.levels - 1;
    CrossingChain chain = path_chain(rc.circuit, rc.grid, st.ramp, st.gamma_per_ns, n_cross, st.basis_size);
    if (!st.deltas_K.empty()) {
        require(static_cast<int>(st.deltas_K.size()) == n_cross, "aim.deltas_K",
                "needs one gap per crossing (" + std::to_string(n_cross) + ")");
        for (int n = 0; n < n_cross; ++n)
            chain.crossings[static_cast<std::size_t>(n)].delta_K = st.deltas_K[static_cast<std::size_t>(n)];
    }
    const RateSolution sol = rate_equation_evolve(chain, st.samples_per_interval);
    a.add("aim.csv", trajectory_csv(sol.trajectory, "x_e"));

    const std::vector<double> dwell = dwell_intervals(chain);
    double product = 1.0;
    Json per = Json::array();
    for (int n = 0; n < n_cross; ++n) {
        Json j = crossing_json(chain.crossings[static_cast<std::size_t>(n)], n);
        j["passage"] = chain.passage(n);
        j["dwell"] = dwell[static_cast<std::size_t>(n)];
        product *= chain.passage(n);
        per.push_back(j);
    }
    const double exposure = std::accumulate(dwell.begin(), dwell.end(), 0.0);
    const double estimate = reset_probability_estimate(chain, dwell);
    Json report{{"crossings", per},
                {"chain_product", product},
                {"decay_factor", std::exp(-chain.gamma_per_ns * exposure / chain.v_e)},
                {"estimate", estimate},
                {"dissipation_free", vector_json(aim_final_occupations(chain))},
                {"final_occupations", vector_json(sol.final_occupations)}};
    if (st.compare_numeric) {
        const ResetOutcome r = reset_numerics(rc, st.ramp, st.gamma_per_ns, st.levels, 0, st.control);
        const DeviationSummary d = compare_reports(r.trajectory, sol.trajectory);
        report["numeric_return_probability"] = r.trajectory.occupations.back()(st.levels - 1);
        report["deviation"] = Json{{"max_final", d.max_final},
                                   {"max_overall", d.max_overall},
                                   {"per_level_max", d.max_deviation},
                                   {"per_level_final", d.final_deviation},
                                   {"flagged", d.flagged}};
        a.add("reset.csv", trajectory_csv(r.trajectory, "x_e"));
    }
    a.add("aim.json", report.dump(2) + "\n");
    a.summary["estimate"] = estimate;
    a.summary["final_occupations"] = vector_json(sol.final_occupations);
}

void stage_design(const RunConfig& rc, Artifacts& a) {
    const DesignStage& st = rc.design;
    const LzsmDesign d = design_speed(st.delta_max_K, st.target, st.persistent_current_A);
    const Json j{{"delta_max_K", d.delta_max_K},
                 {"target", d.target},
                 {"persistent_current_A", d.persistent_current_A},
                 {"v_K_per_ns", d.v_K_per_ns},
                 {"dphi_dt_wb_per_s", d.speed.wb_per_s},
                 {"dphi_dt_phi0_per_us", d.speed.phi0_per_us},
                 {"ramp", {st.ramp_from, st.ramp_to}},
                 {"ramp_duration_us", d.ramp_duration_us(st.ramp_from, st.ramp_to)},
                 {"achieved_probability", lzsm_probability(d.delta_max_K, d.v_K_per_ns)}};
    a.add("design.json", j.dump(2) + "\n");
    a.summary = j;
}

/// Linear interpolation of one level on a trajectory with monotone stamps.
struct Interpolant {
    std::vector<double> x;
    std::vector<Eigen::VectorXd> y;

    explicit Interpolant(const Trajectory& t) {
        std::vector<std::size_t> idx(t.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&t](std::size_t i, std::size_t j) { return t.stamps[i] < t.stamps[j]; });
        for (std::size_t i : idx) {
            x.push_back(t.stamps[i]);
            y.push_back(t.occupations[i]);
        }
    }

    double at(double q, int level) const {
        const auto it = std::upper_bound(x.begin(), x.end(), q);
        if (it == x.begin())
            return y.front()(level);
        if (it == x.end())
            return y.back()(level);
        const auto j = static_cast<std::size_t>(it - x.begin());
        const double w = (q - x[j - 1]) / (x[j] - x[j - 1]);
        return (1.0 - w) * y[j - 1](level) + w * y[j](level);
    }
};

} // namespace

const char* to_string(Stage s) {
    for (const auto& [st, name] : kStageNames)
        if (st == s)
            return name;
    return "?";
}

Stage parse_stage(const std::string& name) {
    for (const auto& [st, n] : kStageNames)
        if (name == n)
            return st;
    throw DomainError("key 'stage': unknown stage '" + name +
                      "' (spectrum, sweep-flux, sweep-beta, crossings, capture, reset, aim, design-speed)");
}

RunConfig make_run_config(const Config& c, const std::optional<std::string>& stage_override,
                          const std::optional<std::string>& out_override,
                          std::optional<unsigned> workers_override) {
    RunConfig rc;
    for (const auto& kv : c.entries())
        rc.source.emplace_back(kv.first, kv.second);

    const std::string from_file = c.get_string("stage", "");
    const std::string stage_name = stage_override ? *stage_override : from_file;
    require(!stage_name.empty(), "stage", "exactly one stage must be selected");
    rc.stage = parse_stage(stage_name);
    rc.output_dir = out_override ? *out_override : c.get_string("output.dir", rc.output_dir);
    const int workers = c.get_int("workers", 1);
    require(workers >= 1, "workers", "must be at least 1");
    rc.workers = workers_override ? *workers_override : static_cast<unsigned>(workers);
    require(rc.workers >= 1, "workers", "must be at least 1");
    rc.deterministic = c.get_bool("deterministic", true);

    rc.circuit.u0_K = c.get_double("circuit.u0_K", 32.68);
    rc.circuit.beta_L = c.get_double("circuit.beta_L", 1.28);
    rc.circuit.mass_invK = c.get_double("circuit.mass_invK", 955.0);
    rc.circuit.x_e = c.get_double("circuit.x_e", 0.5087);
    validate_block("circuit", [&] { rc.circuit.validate(); });

    rc.grid.x_min = c.get_double("grid.x_min", rc.grid.x_min);
    rc.grid.x_max = c.get_double("grid.x_max", rc.grid.x_max);
    rc.grid.n_points = c.get_int("grid.n_points", rc.grid.n_points);
    validate_block("grid", [&] { rc.grid.validate(); });

    SpectrumOptions& so = rc.spectrum_options;
    so.check_convergence = c.get_bool("spectrum.check_convergence", so.check_convergence);
    so.convergence_tol_K = c.get_double("spectrum.convergence_tol_K", so.convergence_tol_K);
    so.localization_threshold = c.get_double("spectrum.localization_threshold", so.localization_threshold);
    require(so.localization_threshold > 0.5 && so.localization_threshold <= 1.0,
            "spectrum.localization_threshold", "must lie in (0.5, 1]");

    switch (rc.stage) {
    case Stage::Spectrum:
        rc.spectrum.levels = c.get_int("spectrum.levels", rc.spectrum.levels);
        require(rc.spectrum.levels >= 1 && rc.spectrum.levels <= rc.grid.n_points, "spectrum.levels",
                "must lie in [1, n_points]");
        break;
    case Stage::SweepFlux:
    case Stage::SweepBeta: {
        SweepStage& sw = rc.sweep;
        const bool beta = rc.stage == Stage::SweepBeta;
        sw.from = c.get_double("sweep.from", beta ? 0.5 : sw.from);
        sw.to = c.get_double("sweep.to", beta ? 2.4 : sw.to);
        sw.points = c.get_int("sweep.points", sw.points);
        sw.levels = c.get_int("sweep.levels", sw.levels);
        sw.u0_beta_K = c.get_double("sweep.u0_beta_K", rc.circuit.u0_K * rc.circuit.beta_L);
        require(sw.from != sw.to, "sweep.to", "empty sweep range");
        require(sw.points >= 2, "sweep.points", "need at least two points");
        require(sw.levels >= 1, "sweep.levels", "must be positive");
        if (beta)
            require(sw.from > 0.0 && sw.to > 0.0 && sw.u0_beta_K > 0.0, "sweep.from",
                    "beta_L and U0*beta_L must be positive");
        break;
    }
    case Stage::Crossings: {
        CrossingsStage& cs = rc.crossings;
        cs.from = c.get_double("crossings.from", cs.from);
        cs.to = c.get_double("crossings.to", cs.to);
        cs.start_level = c.get_int("crossings.start_level", cs.start_level + 1) - 1;
        cs.count = c.get_int("crossings.count", cs.count);
        cs.basis_size = c.get_int("crossings.basis_size", cs.basis_size);
        require(cs.from < cs.to, "crossings.from", "empty sweep range (need from < to)");
        require(cs.start_level >= 0, "crossings.start_level", "levels are counted from 1");
        require(cs.count >= 1, "crossings.count", "must be positive");
        require(cs.basis_size >= cs.start_level + cs.count + 2 && cs.basis_size <= rc.grid.n_points,
                "crossings.basis_size", "too small for the requested crossings or larger than the grid");
        break;
    }
    case Stage::Capture: {
        CaptureStage& st = rc.capture;
        CaptureParams& cp = st.params;
        cp.g_K = c.get_double("capture.g_K", cp.g_K);
        cp.alpha = c.get_double("capture.alpha", cp.alpha);
        cp.gamma_K = c.get_double("capture.gamma_K", cp.gamma_K);
        cp.gamma_phi_K = c.get_double("capture.gamma_phi_K", cp.gamma_phi_K);
        cp.drive_amplitude_K = c.get_double("capture.drive_amplitude_K", cp.drive_amplitude_K);
        st.resonant = !c.has("capture.omega_d_per_ns");
        cp.omega_d_per_ns = c.get_double("capture.omega_d_per_ns", 0.0);
        st.run.t_end_ns = c.get_double("capture.t_end_ns", st.run.t_end_ns);
        st.run.stride_ns = c.get_double("capture.stride_ns", st.run.stride_ns);
        st.run.dt_max_ns = c.get_double("capture.dt_max_ns", st.run.dt_max_ns);
        st.initial_level = c.get_int("capture.initial_level", st.initial_level + 1) - 1;
        st.dump_matrices = c.get_bool("capture.dump_matrices", st.dump_matrices);
        validate_block("capture", [&] { cp.validate(cp.n_levels); });
        require(st.run.t_end_ns > 0.0, "capture.t_end_ns", "must be positive");
        require(st.run.stride_ns > 0.0, "capture.stride_ns", "must be positive");
        require(st.run.dt_max_ns > 0.0, "capture.dt_max_ns", "must be positive");
        require(st.initial_level >= 0 && st.initial_level < cp.n_levels, "capture.initial_level",
                "must lie in 1..8");
        break;
    }
    case Stage::Reset: {
        ResetStage& st = rc.reset;
        st.ramp = read_ramp(c, "reset");
        st.gamma_per_ns = c.get_double("reset.gamma_per_ns", st.gamma_per_ns);
        st.levels = c.get_int("reset.levels", st.levels);
        st.initial_level = c.get_int("reset.initial_level", st.initial_level + 1) - 1;
        st.control = read_step_control(c, "reset");
        require(st.gamma_per_ns >= 0.0, "reset.gamma_per_ns", "must be non-negative");
        require(st.levels >= 2 && st.levels + 1 < st.control.basis_size, "reset.levels",
                "must lie in [2, basis_size - 2]");
        require(st.initial_level >= 0 && st.initial_level < st.levels, "reset.initial_level",
                "must lie inside the tracked levels");
        break;
    }
    case Stage::Aim: {
        AimStage& st = rc.aim;
        st.ramp = read_ramp(c, "aim");
        st.gamma_per_ns = c.get_double("aim.gamma_per_ns", st.gamma_per_ns);
        st.deltas_K = c.get_list("aim.deltas_K", {});
        st.samples_per_interval = c.get_int("aim.samples_per_interval", st.samples_per_interval);
        st.levels = c.get_int("aim.levels", st.levels);
        st.compare_numeric = c.get_bool("aim.compare_numeric", st.compare_numeric);
        st.control = read_step_control(c, "aim");
        st.basis_size = st.control.basis_size;
        require(st.gamma_per_ns >= 0.0, "aim.gamma_per_ns", "must be non-negative");
        require(st.samples_per_interval >= 2, "aim.samples_per_interval", "must be at least 2");
        require(st.levels >= 2 && st.levels + 1 < st.basis_size, "aim.levels", "must lie in [2, basis_size - 2]");
        for (double d : st.deltas_K)
            require(d > 0.0, "aim.deltas_K", "gaps must be positive");
        break;
    }
    case Stage::DesignSpeed: {
        DesignStage& st = rc.design;
        st.delta_max_K = c.get_double("design.delta_max_K", st.delta_max_K);
        st.target = c.get_double("design.target", st.target);
        st.persistent_current_A = c.get_double("design.persistent_current_A", st.persistent_current_A);
        st.ramp_from = c.get_double("design.ramp_from", st.ramp_from);
        st.ramp_to = c.get_double("design.ramp_to", st.ramp_to);
        require(st.target > 0.0 && st.target < 1.0, "design.target", "must lie in (0, 1)");
        require(st.delta_max_K >= 0.0, "design.delta_max_K", "must be non-negative");
        require(st.persistent_current_A > 0.0, "design.persistent_current_A", "must be positive");
        require(st.ramp_from != st.ramp_to, "design.ramp_to", "empty ramp");
        break;
    }
    }

    const std::vector<std::string> unused = c.unused();
    for (const std::string& k : unused) {
        // Blocks of other stages may share one file; only unknown top-level keys are errors.
        if (k.find('.') == std::string::npos)
            throw DomainError("key '" + k + "': unknown setting");
    }
    return rc;
}

CrossingChain path_chain(const CircuitParams& p, const Grid& grid, const RampSchedule& ramp, double gamma,
                         int n_crossings, int basis_size) {
    const ReducedFluxBasis basis(p, grid, ramp.x_e0, basis_size);
    const int n_levels = n_crossings + 2;
    const EnergyFunction ef = [&basis, n_levels](double x) { return basis.energies(x, n_levels); };
    const std::vector<AvoidedCrossing> found = trace_path_crossings(ef, ramp.x_e0, ramp.x_e_end, 0, n_crossings);
    CrossingChain chain;
    for (const AvoidedCrossing& c : found)
        chain.crossings.push_back({c.delta_K, c.slope_diff, c.x_star});
    chain.v_e = ramp.v_e;
    chain.gamma_per_ns = gamma;
    chain.x_e0 = ramp.x_e0;
    chain.x_e_end = ramp.x_e_end;
    return chain;
}

DeviationSummary compare_reports(const Trajectory& numeric, const Trajectory& analytic, double threshold,
                                 int grid_points) {
    if (numeric.size() < 2 || analytic.size() < 2)
        throw DomainError("trajectories need at least two stamps");
    const auto [na, nb] = std::minmax_element(numeric.stamps.begin(), numeric.stamps.end());
    const auto [aa, ab] = std::minmax_element(analytic.stamps.begin(), analytic.stamps.end());
    const double lo = std::max(*na, *aa), hi = std::min(*nb, *ab);
    if (!(lo < hi))
        throw DomainError("trajectories cover disjoint ranges");
    const int levels = std::min(numeric.dim(), analytic.dim());
    const Interpolant in(numeric), ia(analytic);
    // The numeric trajectory's direction of travel decides which end is final.
    const double end = numeric.stamps.back() <= numeric.stamps.front() ? lo : hi;

    DeviationSummary d;
    d.max_deviation.assign(static_cast<std::size_t>(levels), 0.0);
    d.final_deviation.assign(static_cast<std::size_t>(levels), 0.0);
    for (int i = 0; i < grid_points; ++i) {
        const double q = lo + (hi - lo) * static_cast<double>(i) / (grid_points - 1);
        for (int k = 0; k < levels; ++k) {
            const double dev = std::abs(in.at(q, k) - ia.at(q, k));
            auto& m = d.max_deviation[static_cast<std::size_t>(k)];
            m = std::max(m, dev);
        }
    }
    for (int k = 0; k < levels; ++k) {
        const double dev = std::abs(in.at(end, k) - ia.at(end, k));
        d.final_deviation[static_cast<std::size_t>(k)] = dev;
        d.max_final = std::max(d.max_final, dev);
        d.max_overall = std::max(d.max_overall, d.max_deviation[static_cast<std::size_t>(k)]);
    }
    d.flagged = d.max_final > threshold;
    return d;
}

std::vector<std::string> run(const RunConfig& rc, std::ostream& log) {
    Artifacts a;
    switch (rc.stage) {
    case Stage::Spectrum: stage_spectrum(rc, a); break;
    case Stage::SweepFlux: stage_sweep(rc, a, false); break;
    case Stage::SweepBeta: stage_sweep(rc, a, true); break;
    case Stage::Crossings: stage_crossings(rc, a); break;
    case Stage::Capture: stage_capture(rc, a); break;
    case Stage::Reset: stage_reset(rc, a); break;
    case Stage::Aim: stage_aim(rc, a); break;
    case Stage::DesignSpeed: stage_design(rc, a); break;
    }

    Json manifest;
    manifest["code"] = "qdet";
    manifest["version"] = QDET_VERSION;
    manifest["stage"] = to_string(rc.stage);
    manifest["workers"] = rc.workers;
    manifest["deterministic"] = rc.deterministic;
    Json src = Json::object();
    for (const auto& [k, v] : rc.source)
        src[k] = v;
    manifest["config"] = src;
    manifest["parameters"] = Json{{"circuit",
                                   {{"u0_K", rc.circuit.u0_K},
                                    {"beta_L", rc.circuit.beta_L},
                                    {"mass_invK", rc.circuit.mass_invK},
                                    {"x_e", rc.circuit.x_e}}},
                                  {"grid",
                                   {{"x_min", rc.grid.x_min},
                                    {"x_max", rc.grid.x_max},
                                    {"n_points", rc.grid.n_points}}}};
    const InvariantTolerances tol;
    const OdeOptions ode;
    manifest["tolerances"] = Json{{"hermiticity", tol.hermiticity},
                                  {"trace", tol.trace},
                                  {"positivity", tol.positivity},
                                  {"ode_abs", ode.abs_tol},
                                  {"ode_rel", ode.rel_tol},
                                  {"spectrum_convergence_K", rc.spectrum_options.convergence_tol_K},
                                  {"hbar_over_kB", kUnits.hbar_over_kB}};
    manifest["invariants"] = a.invariants;
    manifest["summary"] = a.summary;
    Json names = Json::array();
    for (const auto& f : a.files)
        names.push_back(f.first);
    manifest["artifacts"] = names;

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(rc.output_dir, ec);
    if (ec)
        throw DomainError("key 'output.dir': cannot create '" + rc.output_dir + "': " + ec.message());
    std::vector<std::string> written;
    for (const auto& [name, content] : a.files) {
        const std::string path = (fs::path(rc.output_dir) / name).string();
        write_text_file(path, content);
        written.push_back(path);
    }
    const std::string mpath = (fs::path(rc.output_dir) / "manifest.json").string();
    write_text_file(mpath, manifest.dump(2) + "\n");
    written.push_back(mpath);
    for (const std::string& p : written)
        log << "wrote " << p << '\n';
    return written;
}

bool run_checks(const RunConfig& rc, std::ostream& log) {
    bool all = true;
    auto report = [&](const std::string& name, bool ok, const std::string& detail) {
        log << (ok ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
        all = all && ok;
    };
    auto guarded = [&](const std::string& name, auto&& body) {
        try {
            body();
        } catch (const std::exception& e) {
            report(name, false, e.what());
        }
    };

    guarded("capture invariants", [&] {
        const Spectrum s = solve_spectrum(rc.circuit, rc.grid, 8, rc.spectrum_options);
        CaptureParams cp;
        cp.omega_d_per_ns = resonant_drive(s, cp);
        CaptureRun run;
        run.t_end_ns = 0.5;
        run.stride_ns = 5e-3;
        const Trajectory t = evolve_capture(DensityMatrix::pure_level(8, 6), s, cp, run);
        const Json j = trajectory_invariants(t);
        report("capture invariants", j["ok"].get<bool>(), j.dump());
    });

    guarded("aim probability vector", [&] {
        double worst = 0.0;
        for (int i = 0; i <= 10; ++i) {
            std::vector<double> p(6);
            for (int n = 0; n < 6; ++n)
                p[static_cast<std::size_t>(n)] = std::fmod(0.137 * (i + 1) * (n + 3), 1.0);
            worst = std::max(worst, std::abs(aim_final_occupations(p).sum() - 1.0));
        }
        report("aim probability vector", worst < 1e-14, "max |sum - 1| = " + format_double(worst));
    });

    guarded("rate equations at zero relaxation", [&] {
        CrossingChain chain;
        chain.crossings = {{3e-3, 470.0, 0.5}, {5e-3, 470.0, 0.498}, {8e-3, 470.0, 0.496}};
        chain.x_e0 = 0.5001;
        chain.x_e_end = 0.495;
        chain.v_e = 0.01;
        const Eigen::VectorXd a = aim_final_occupations(chain);
        const Eigen::VectorXd r = rate_equation_evolve(chain).final_occupations;
        const double dev = (a - r).cwiseAbs().maxCoeff();
        report("rate equations at zero relaxation", dev == 0.0, "max deviation " + format_double(dev));
    });

    guarded("B antisymmetry", [&] {
        RampSchedule ramp{0.4916, 0.454, 0.4912};
        StepControl sc;
        sc.basis_size = 32;
        const AdiabaticFrame f = track_eigenbasis(rc.circuit, ramp, rc.grid, 7, sc);
        double worst = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const NonadiabaticCoupling b = raw_nonadiabatic_coupling(f, i);
            if (b.norm > 0.0)
                worst = std::max(worst, b.raw_asymmetry / b.norm);
        }
        report("B antisymmetry", worst < 1e-3, "max relative asymmetry " + format_double(worst));
    });

    guarded("sweep determinism", [&] {
        SweepOptions one, many;
        one.workers = 1;
        many.workers = std::max(2u, rc.workers);
        const SpectrumFamily a = sweep_flux(rc.circuit, rc.grid, 0.49, 0.51, 9, 9, one);
        const SpectrumFamily b = sweep_flux(rc.circuit, rc.grid, 0.49, 0.51, 9, 9, many);
        bool same = a.parameter == b.parameter;
        for (std::size_t i = 0; same && i < a.spectra.size(); ++i)
            same = a.spectra[i].energies == b.spectra[i].energies &&
                   a.spectra[i].wavefunctions == b.spectra[i].wavefunctions;
        report("sweep determinism", same, same ? "identical" : "outputs differ");
    });
    return all;
}

} // namespace qdet
