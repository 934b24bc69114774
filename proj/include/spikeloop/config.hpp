#pragma once

// Run configuration for the command-line tool: a flat `section.key = value`
// file, flag overrides on top, and a manifest that writes every resolved key
// back out in the same format.

#include "spikeloop/loop.hpp"

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace spikeloop {

enum class Experiment { WtaSweep, CmpSweep, ClosedLoop, Calibrate, MismatchReport };

std::string_view experiment_name(Experiment e);
Experiment parse_experiment(std::string_view name); // throws InvalidParameterError

struct RunConfig {
    Experiment experiment = Experiment::ClosedLoop;
    std::uint64_t seed = 1;
    double dt = 1e-4; // s
    double cv = 0.0;
    double synaptic_delay = 1e-3; // s
    std::set<std::string> mismatch_parameters = MismatchSpec::default_mask();
    std::string output_dir = "out";
    bool svg = true;

    ModelDefaults defaults{};
    ShiftedWtaConfig wta{};
    ComparatorConfig comparator{}; // num_coarse follows wta.num_pos_ref
    int cmp_threshold = 3;         // output spikes for an active truth-table cell
    JointParams joint{};
    SpidParams spid{};
    EncoderConfig encoder{}; // positions follow the comparator, range follows the joint
    LoopConfig loop{};
    Trajectory trajectory{};
    SweepConfig sweep{};
    std::vector<int> wta_inputs; // empty: every outR neuron once

    std::vector<double> cv_list{0.0, 0.1, 0.2, 0.4};
    int n_seeds = 100;
    unsigned threads = 0;

    CalibrationGrid calib_grid{};
    UnitProbe calib_probe{};
    int calib_check_seeds = 50;
    double calib_check_cv = 0.1;

    // Copies the shared sizes into the comparator and encoder sub-configs.
    void sync();
    // Throws InvalidParameterError.
    void validate() const;

    ExperimentContext context() const;
    ClosedLoopSetup closed_loop_setup() const;
};

using ConfigOverride = std::pair<std::string, std::string>;

// Starts from `base`, reads `in` (may be null for "no file"), then applies
// `overrides` in order.
// Unknown keys, malformed values and out-of-range values throw ConfigError
// carrying the key (and the line for file entries); the assembled config is
// validated last.
RunConfig parse_config(std::istream* in, const std::vector<ConfigOverride>& overrides = {},
                       RunConfig base = {});

// Every key with its resolved value, preceded by `run.version`. Loading the
// result with parse_config gives back the same RunConfig.
void write_manifest(std::ostream& out, const RunConfig& cfg);

// Keys accepted by parse_config, in manifest order.
std::vector<std::string> config_keys();

} // namespace spikeloop
