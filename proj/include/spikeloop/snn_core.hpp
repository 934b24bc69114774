#pragma once

// Neuron and synapse dynamics.
//
// Membrane: adaptive exponential integrate-and-fire (Brette & Gerstner form)
//
//   C dv/dt   = -(g_L + g_shunt)(v - E_L) + g_L D_T [exp((v - V_T)/D_T) - exp((E_L - V_T)/D_T)]
//               + I_ampa + I_nmda - I_gaba - w
//   tau_w dw/dt = a (v - E_L) - w
//
// with C = membrane_tau * g_L. On v >= peak: v <- reset, w <- w + b, and v is
// held at reset for the refractory period.
//
// Synapses: one first-order low-pass filter per channel (DPI abstraction).
// Each input spike adds gain*weight to the filter state, which then decays
// with the channel time constant.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace spikeloop {

enum class Channel : std::uint8_t { Ampa = 0, Nmda = 1, Gaba = 2, Shunt = 3 };

inline constexpr std::size_t kNumChannels = 4;
inline constexpr std::array<Channel, kNumChannels> kAllChannels = {
    Channel::Ampa, Channel::Nmda, Channel::Gaba, Channel::Shunt};

enum class ChannelMode : std::uint8_t {
    ExcitatoryCurrent,
    SubtractiveInhibition,
    DivisiveShunt,
};

std::string_view channel_name(Channel c);
Channel parse_channel(std::string_view name); // throws InvalidParameterError
ChannelMode channel_mode(Channel c);

inline constexpr std::size_t index_of(Channel c) { return static_cast<std::size_t>(c); }

struct NeuronParams {
    double membrane_tau = 0.010;       // s
    double leak_conductance = 10e-9;   // S
    double rest_potential = -0.070;    // V
    double threshold_potential = -0.050; // V, exponential onset
    double sharpness = 0.002;          // V, 0 disables the exponential term
    double peak_potential = -0.030;    // V, spike cutoff
    double reset_potential = -0.070;   // V
    double refractory_period = 0.002;  // s
    double adapt_coupling = 0.0;       // S
    double adapt_increment = 2e-12;    // A
    double adapt_tau = 0.100;          // s

    double capacitance() const { return membrane_tau * leak_conductance; }
    void validate() const; // throws InvalidParameterError

    bool operator==(const NeuronParams&) const = default;
};

struct SynapseChannelParams {
    Channel channel = Channel::Ampa;
    double tau = 0.005; // s
    // A per unit weight for current channels, S per unit weight for SHUNT.
    double gain = 100e-12;
    // NMDA only: Mg2+ voltage gate. Ignored for the other channels.
    bool voltage_gate = false;

    ChannelMode mode() const { return channel_mode(channel); }
    void validate() const; // throws InvalidParameterError

    bool operator==(const SynapseChannelParams&) const = default;
};

using ChannelSet = std::array<SynapseChannelParams, kNumChannels>;

struct NeuronState {
    double v = -0.070;
    double w_adapt = 0.0;
    std::array<double, kNumChannels> channel_currents{};
    double refractory_until = 0.0; // s
    double t = 0.0;                // local clock, s

    static NeuronState at_rest(const NeuronParams& p);
    double current(Channel c) const { return channel_currents[index_of(c)]; }
};

struct StepResult {
    NeuronState state;
    bool spiked = false;
};

// Filter update over dt: decay, then add gain*spike_weight_sum for input
// spikes arriving at the end of the interval. The linear decay is integrated
// exactly.
double dpi_step(double current, const SynapseChannelParams& params, double dt,
                double spike_weight_sum);

// Adds the jump of `weight` input spikes to a filter state in place.
inline void dpi_inject(double& current, const SynapseChannelParams& params, double weight)
{
    current += params.gain * weight;
}

// Advances one neuron by dt with explicit Euler on (v, w). Channel currents
// are read at the start of the interval and decayed with dpi_step afterwards.
StepResult step_neuron(const NeuronState& state, const NeuronParams& params,
                       const ChannelSet& channels, double dt);

// Nominal parameter set for every neuron of a network.
struct ModelDefaults {
    static constexpr int kVersion = 1;

    NeuronParams neuron{};
    ChannelSet channels = default_channels();

    static ChannelSet default_channels();
    void validate() const;

    bool operator==(const ModelDefaults&) const = default;
};

// Named scalar view of ModelDefaults: `neuron.<field>` and
// `<channel>.{tau,gain}`, plus `nmda.voltage_gate` as 0/1.
struct DefaultsField {
    std::string key;
    std::function<double(const ModelDefaults&)> get;
    std::function<void(ModelDefaults&, double)> set;
};
std::vector<DefaultsField> defaults_fields();

// Line-based `key = value` defaults table (SI units, `#` comments).
void write_defaults_table(std::ostream& out, const ModelDefaults& defaults);
ModelDefaults read_defaults_table(std::istream& in);

// --- device mismatch -------------------------------------------------------

struct MismatchSpec {
    double cv = 0.0;
    std::uint64_t seed = 0;
    std::set<std::string> parameter_mask = default_mask();

    static std::set<std::string> default_mask();
};

// Mismatchable parameter names, in the order their multipliers are drawn.
const std::array<std::string_view, 6>& neuron_mismatch_names();
const std::array<std::string_view, 2>& synapse_mismatch_names();

// Multiplier m = max(0.05, 1 + cv*z), z ~ N(0,1).
double mismatch_multiplier(double cv, double z);

// One standard normal draw per mismatchable parameter is always consumed, so
// the stream position does not depend on the mask. Multiplying by the same z
// for different cv values gives common random numbers across a cv sweep.
NeuronParams apply_mismatch(const NeuronParams& params, const MismatchSpec& spec,
                            std::mt19937_64& rng);
SynapseChannelParams apply_mismatch(const SynapseChannelParams& params,
                                    const MismatchSpec& spec, std::mt19937_64& rng);

} // namespace spikeloop
