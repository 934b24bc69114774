#pragma once

#include "spikeloop/net_builders.hpp"
#include "spikeloop/robot_sim.hpp"
#include "spikeloop/simulator.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace spikeloop {

// Model parameters and simulation options shared by every experiment.
struct ExperimentContext {
    ModelDefaults defaults{};
    SimOptions sim{};
};

// Sequential stimulation protocol used by both sweeps.
struct SweepConfig {
    double dwell_ms = 300.0;
    double gap_ms = 200.0;
    double rate_hz = 200.0;
    double max_sim_time = 60.0; // s, simulation budget

    void validate() const;
};

// --- shifted WTA sweep ----------------------------------------------------------

struct WtaSweepResult {
    NetworkSpec network;
    std::vector<Event> spikes;
    std::vector<int> inputs;
    std::vector<int> winners;                   // -1 when the inner ring stayed silent
    std::vector<std::vector<int>> inner_counts; // [stimulus][inner neuron]

    // Winner count divided by the largest other inner count (infinity when
    // the others are silent, 0 when the winner is).
    double selectivity(std::size_t stimulus) const;
};

// Stimulates outR_i for each i in `inputs` (default 0..N-1), one dwell period
// each, separated by silent gaps. Throws TimeoutError if the protocol needs
// more than max_sim_time.
WtaSweepResult run_wta_sweep(const ShiftedWtaConfig& cfg, const SweepConfig& sweep,
                             const ExperimentContext& ctx, std::vector<int> inputs = {});

// --- comparator sweep -------------------------------------------------------------

struct ComparatorSweepResult {
    NetworkSpec network;
    std::vector<Event> spikes;
    std::vector<std::vector<int>> counts; // [robot][reference], coarse-stage output spikes
    std::vector<std::vector<bool>> truth; // counts >= threshold

    // Active on exactly the diagonal with >= threshold spikes there and no
    // spikes anywhere else.
    bool diagonal_only(int threshold) const;
};

// Drives every (robot coarse, reference) pair in row-major order.
ComparatorSweepResult run_comparator_sweep(const ComparatorConfig& cfg, const SweepConfig& sweep,
                                           const ExperimentContext& ctx, int threshold);

// --- closed loop -------------------------------------------------------------------

struct Trajectory {
    std::string name = "ascending";
    std::vector<int> points{0, 1, 2, 3};
};

struct LoopConfig {
    int next_request_threshold = 3;
    double next_request_window_ms = 100.0;
    double max_sim_time = 60.0;     // s
    double hold_ms = 200.0;         // ignore next-request spikes after an advance
    double winner_window_ms = 50.0; // inner-ring window for reading the setpoint
    double initial_angle = 0.0;     // deg
    // Experimental: subtract the offset on descending segments and drop it at
    // direction changes. Off by default.
    bool direction_aware = false;

    void validate() const;
};

struct ClosedLoopSetup {
    ShiftedWtaConfig wta{};
    ComparatorConfig comparator{};
    JointParams joint{};
    SpidParams spid{};
    EncoderConfig encoder{};
    LoopConfig loop{};

    // Checks each part and their mutual consistency (matching position counts
    // and joint ranges) and every trajectory point. Throws
    // InvalidParameterError.
    void validate(const Trajectory& trajectory) const;
};

struct NextRequestRecord {
    TimeUs time = 0;
    int point_index = 0;
};

struct PointRecord {
    int point_index = 0;
    int reference = 0;
    int wta_input = 0;         // outR neuron driven for this point
    int intended_setpoint = 0; // shifted target, or the point itself at the end
    int setpoint = -1;         // most frequent inner-ring winner read during the point
    TimeUs started = 0;        // when the point's reference was first emitted
};

struct ClosedLoopResult {
    bool completed = false;
    TimeUs end_time = 0;
    NetworkSpec network;
    std::vector<Event> spikes;
    std::vector<JointTraceRow> trace;
    std::vector<NextRequestRecord> next_requests;
    std::vector<PointRecord> points;

    // Human-readable list of run-level invariant violations (empty when all
    // hold): next-requests only while the robot's coarse position equals the
    // current reference, setpoints match the interpolation rule, and points
    // advance strictly in order.
    std::vector<std::string> invariant_violations() const;
};

ClosedLoopResult run_closed_loop(const Trajectory& trajectory, const ClosedLoopSetup& setup,
                                 const ExperimentContext& ctx);

// Setpoint the loop intends for point `n`: shifted_target(p, x, N) except at
// the final point (and, in direction-aware mode, at direction changes), where
// it is p itself.
int intended_setpoint(const Trajectory& trajectory, std::size_t n, int offset, int num_pos,
                      bool direction_aware);

// --- mismatch report ----------------------------------------------------------------

struct MismatchReportRow {
    double cv = 0;
    double pass_fraction = 0;
    int n_seeds = 0;
    int timeouts = 0;
};

// For each cv, runs the comparator sweep under `n_seeds` mismatch draws (seeds
// seed0 .. seed0+n_seeds-1, shared across cv values) and reports the
// fraction that keep the diagonal-only truth table. Runs spread over
// `threads` workers (0 = hardware concurrency); results do not depend on it.
std::vector<MismatchReportRow> mismatch_report(const ComparatorConfig& cfg, const SweepConfig& sweep,
                                               const ExperimentContext& ctx, int threshold,
                                               const std::vector<double>& cv_list, int n_seeds,
                                               std::uint64_t seed0, unsigned threads = 0);

// `cv,pass_fraction,n_seeds`
void write_mismatch_csv(std::ostream& out, std::span<const MismatchReportRow> rows);

// `time_us,population,neuron` with population names.
void write_raster_csv(std::ostream& out, std::span<const RasterRecord> raster);
// `time_us,point_index`
void write_next_request_csv(std::ostream& out, std::span<const NextRequestRecord> rows);

} // namespace spikeloop
