#pragma once

#include "spikeloop/event_fabric.hpp"
#include "spikeloop/network.hpp"
#include "spikeloop/snn_core.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spikeloop {

struct SimOptions {
    double dt = 1e-4;            // s, must be a whole number of microseconds
    double synaptic_delay = 1e-3; // s per routing hop
    std::optional<MismatchSpec> mismatch;
};

// One named spike, as logged in rasters.
struct RasterRecord {
    TimeUs time = 0;
    std::string population;
    int neuron = 0;

    bool operator==(const RasterRecord&) const = default;
};

// Fixed-step simulation of a NetworkSpec.
//
// Each step at time t:
//   1. stimulus events and drive spikes with time < t + dt fire;
//   2. synaptic deliveries due at <= t are applied to the target filters;
//   3. every simulated neuron advances by dt; spikes are stamped t + dt;
//   4. every spike schedules one delivery per routing entry at spike + delay.
class NetworkSimulator {
public:
    NetworkSimulator(NetworkSpec net, const ModelDefaults& defaults, const SimOptions& options);

    // External spike of an externally driven neuron. Throws CausalityError if
    // e.time is earlier than the current time, InvalidParameterError if the
    // target is a simulated neuron.
    void inject(const Event& e);
    void inject(std::span<const Event> events);

    void step();
    void run_until(TimeUs t);

    TimeUs now() const { return now_; }
    TimeUs dt_us() const { return dt_us_; }

    // Spikes emitted during the most recent step, in (time, address) order.
    std::span<const Event> last_spikes() const { return last_spikes_; }
    // Every spike so far, in (time, address) order.
    const std::vector<Event>& spikes() const { return spikes_; }
    std::vector<RasterRecord> raster() const;
    std::uint64_t deliveries() const { return deliveries_; }

    const NetworkSpec& network() const { return net_; }
    const NeuronState& state(Address a) const;
    const NeuronParams& params(Address a) const;
    const ChannelSet& channels(Address a) const;

private:
    std::size_t flat(Address a) const;
    void emit(const Event& e);

    NetworkSpec net_;
    TimeUs dt_us_ = 100;
    double dt_ = 1e-4;
    TimeUs delay_us_ = 1000;
    TimeUs now_ = 0;

    std::vector<std::size_t> offsets_;
    std::vector<bool> virtual_pop_;
    std::vector<NeuronParams> params_;
    std::vector<ChannelSet> channels_;
    std::vector<NeuronState> states_;

    struct DriveState {
        Address address;
        double period_us = 0;
        std::uint64_t next_k = 0;
    };
    std::vector<DriveState> drives_;

    EventQueue stimulus_;
    EventQueue pending_;
    std::vector<Event> last_spikes_;
    std::vector<Event> spikes_;
    std::uint64_t deliveries_ = 0;
};

std::vector<RasterRecord> to_raster(const NetworkSpec& net, std::span<const Event> spikes);

} // namespace spikeloop
