#pragma once

#include "spikeloop/network.hpp"
#include "spikeloop/simulator.hpp"

#include <array>
#include <string>
#include <vector>

namespace spikeloop {

// Population and port names used by the builders.
namespace names {
inline constexpr const char* kOuterRing = "outR";
inline constexpr const char* kInnerRing = "inR";
inline constexpr const char* kRobotCoarse = "robot_coarse";
inline constexpr const char* kRobotFine = "robot_fine";
inline constexpr const char* kReference = "reference";
inline constexpr const char* kStaticRef = "static_ref";
inline constexpr const char* kNextRequest = "next_request";
inline constexpr const char* kCoarseOut = "cmp1_out";
inline constexpr const char* kCoarseInh = "cmp1_linh";
inline constexpr const char* kFineOut = "cmp2_out";
inline constexpr const char* kFineInh = "cmp2_linh";
inline constexpr const char* kJoinInh = "cmp3_linh";
} // namespace names

struct ShiftedWtaConfig {
    int num_pos_ref = 4;
    int offset = 1;
    double ff_weight = 4.0;
    double lat_inh_weight = 2.0;

    void validate() const;
};

struct ComparatorUnitConfig {
    double exc_a_weight = 1.75;
    double exc_b_weight = 1.75;
    double inh_gaba_weight = 0.25;
    double inh_shunt_weight = 0.5;
    double linh_drive_weight = 4.0;
    double window_ms = 20.0;

    void validate() const;
    bool operator==(const ComparatorUnitConfig&) const = default;
};

struct ComparatorConfig {
    int num_coarse = 4;
    int num_fine = 4;
    int fine_static_ref = 1;
    ComparatorUnitConfig unit{};
    // Regular rate of the internal static-reference generator.
    double static_drive_rate = 200.0;
    // Multiplies the unit's excitatory and linh-drive weights in the joining
    // unit, whose inputs are the (slower, irregular) outputs of the first two
    // comparison stages instead of regular input trains.
    double join_weight_scale = 3.5;

    void validate() const;
};

int shifted_target(int i, int x, int n);

NetworkSpec build_shifted_wta(const ShiftedWtaConfig& cfg);

// Standalone comparison unit `i`: externally driven relays cmprobp_i and
// cmprefp_i, inhibitory interneuron linh_i, output cmpout_i.
NetworkSpec build_comparator_unit(int i, const ComparatorUnitConfig& cfg);

// Wires one comparison unit into `net`. `a` and `b` are the excitatory
// sources (more than one source per side acts as an OR).
void wire_comparator_unit(NetworkSpec& net, const std::vector<Address>& a,
                          const std::vector<Address>& b, Address linh, Address out,
                          const ComparatorUnitConfig& cfg, double exc_scale = 1.0);

// Three-stage comparator: coarse diagonal units, fine-vs-static-reference unit
// and a joining unit whose output is the next-request signal.
NetworkSpec build_comparator(const ComparatorConfig& cfg);

// --- truth-table evaluation and calibration ---------------------------------

struct UnitProbe {
    double rate_hz = 200.0;
    double duration_ms = 200.0;
    double settle_ms = 100.0;
    int min_active_spikes = 3;
};

// Output spike counts of a standalone unit for the cases
// {both inputs, only A, only B, none}. In the both-inputs case B starts
// `window_ms` after A.
struct UnitTruthTable {
    std::array<int, 4> counts{};
    int score(int min_active_spikes) const; // passing cases, 0..4
    bool passes(int min_active_spikes) const { return score(min_active_spikes) == 4; }
};

UnitTruthTable evaluate_unit(const ComparatorUnitConfig& cfg, const ModelDefaults& defaults,
                             const SimOptions& options, const UnitProbe& probe);

struct CalibrationGrid {
    std::vector<double> exc_weights{1.0, 1.25, 1.5, 1.75, 2.0};
    std::vector<double> linh_drive_weights{2.0, 4.0};
    std::vector<double> gaba_weights{0.25, 0.5, 1.0};
    std::vector<double> shunt_weights{0.25, 0.5, 1.0};
    double window_ms = 20.0;

    std::size_t size() const;
    // Scan order: exc (outermost), linh drive, GABA, SHUNT (innermost).
    // exc_a_weight = exc_b_weight = exc.
    ComparatorUnitConfig at(std::size_t index) const;
};

struct CalibrationResult {
    ComparatorUnitConfig config;
    std::size_t grid_index = 0;
    UnitTruthTable table;
};

// First grid point whose unit passes the full truth table. Throws
// CalibrationError naming the best candidate otherwise.
CalibrationResult calibrate_unit(const CalibrationGrid& grid, const ModelDefaults& defaults,
                                 const SimOptions& options, const UnitProbe& probe);

// Fraction of `n_seeds` mismatch draws (seeds seed0 .. seed0+n-1) under which
// the unit still passes its truth table.
double unit_pass_fraction(const ComparatorUnitConfig& cfg, const ModelDefaults& defaults,
                          const SimOptions& options, const UnitProbe& probe, double cv,
                          int n_seeds, std::uint64_t seed0);

} // namespace spikeloop
