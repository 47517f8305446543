#pragma once

#include "qdet/capture.hpp"
#include "qdet/circuit.hpp"
#include "qdet/config.hpp"
#include "qdet/crossings.hpp"
#include "qdet/lzsm.hpp"
#include "qdet/reset.hpp"
#include "qdet/spectral.hpp"
#include "qdet/trajectory.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace qdet {

enum class Stage { Spectrum, SweepFlux, SweepBeta, Crossings, Capture, Reset, Aim, DesignSpeed };

const char* to_string(Stage s);
Stage parse_stage(const std::string& name);

struct SpectrumStage {
    int levels = 9;
};

struct SweepStage {
    double from = 0.4905;
    double to = 0.5087;
    int points = 181;
    int levels = 9;
    double u0_beta_K = 32.68 * 1.28;  // beta sweeps hold U0 * beta_L fixed
};

struct CrossingsStage {
    double from = 0.491;
    double to = 0.5001;
    int start_level = 0;  // zero-based
    int count = 6;
    int basis_size = 48;
};

struct CaptureStage {
    CaptureParams params;
    bool resonant = true;
    CaptureRun run;
    int initial_level = 6;  // zero-based
    bool dump_matrices = false;
};

struct ResetStage {
    RampSchedule ramp;
    double gamma_per_ns = 22.7;
    int levels = 7;
    int initial_level = 0;
    StepControl control;
};

struct AimStage {
    /// Gaps to use instead of the computed ones (empty: computed).
    std::vector<double> deltas_K;
    RampSchedule ramp;
    double gamma_per_ns = 22.7;
    int samples_per_interval = 64;
    int basis_size = 48;
    /// Also run the reset numerics and compare.
    bool compare_numeric = false;
    int levels = 7;
    StepControl control;
};

struct DesignStage {
    double delta_max_K = 3e-3;
    double target = 0.99;
    double persistent_current_A = 3e-6;
    double ramp_from = 0.5087;
    double ramp_to = 0.4913;
};

struct RunConfig {
    Stage stage = Stage::Spectrum;
    CircuitParams circuit;
    Grid grid;
    SpectrumOptions spectrum_options;
    std::string output_dir = "out";
    unsigned workers = 1;
    bool deterministic = true;

    SpectrumStage spectrum;
    SweepStage sweep;
    CrossingsStage crossings;
    CaptureStage capture;
    ResetStage reset;
    AimStage aim;
    DesignStage design;

    /// Flat key/value record of the source configuration, for the manifest.
    std::vector<std::pair<std::string, std::string>> source;
};

/// Reads and validates every block needed by the selected stage. Throws
/// DomainError naming the offending key.
RunConfig make_run_config(const Config& cfg, const std::optional<std::string>& stage_override = {},
                          const std::optional<std::string>& out_override = {},
                          std::optional<unsigned> workers_override = {});

struct DeviationSummary {
    std::vector<double> max_deviation;    // per level, over the common grid
    std::vector<double> final_deviation;  // per level, at the common end point
    double max_final = 0.0;
    double max_overall = 0.0;
    bool flagged = false;  // max_final above the threshold
};

/// Per-level occupation deviations on a common flux grid spanning the overlap
/// of the two trajectories. Throws DomainError when their ranges are disjoint.
DeviationSummary compare_reports(const Trajectory& numeric, const Trajectory& analytic,
                                 double threshold = 0.05, int grid_points = 2001);

/// Runs the stage, writes its artifacts and manifest.json into output_dir.
/// Returns the list of files written.
std::vector<std::string> run(const RunConfig& config, std::ostream& log);

/// Fast invariant suite; prints one line per check and returns true when all pass.
bool run_checks(const RunConfig& config, std::ostream& log);

/// The path crossings of the reset ramp computed on the reduced basis.
CrossingChain path_chain(const CircuitParams& p, const Grid& grid, const RampSchedule& ramp,
                         double gamma_per_ns, int n_crossings, int basis_size);

} // namespace qdet
