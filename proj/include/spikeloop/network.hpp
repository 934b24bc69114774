#pragma once

#include "spikeloop/event_fabric.hpp"
#include "spikeloop/snn_core.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace spikeloop {

struct Population {
    std::string name;
    int size = 0;

    bool operator==(const Population&) const = default;
};

enum class PortDirection { In, Out };

struct Port {
    PortDirection direction = PortDirection::In;
    std::string name;
    std::string population;

    bool operator==(const Port&) const = default;
};

// Always-on regular spike source attached to one neuron of the network.
struct Drive {
    std::string population;
    int neuron = 0;
    double rate_hz = 0.0;

    bool operator==(const Drive&) const = default;
};

// Populations bound to an input port or targeted by a Drive carry no
// dynamics: their spikes come from outside (stimulus events or the drive).
// Every other population is simulated with the model defaults, or with the
// per-population override in `neuron_params`.
struct NetworkSpec {
    std::vector<Population> populations;
    RoutingTable routing;
    std::vector<Port> ports;
    std::vector<Drive> drives;
    std::map<std::string, NeuronParams> neuron_params;

    // Returns the new population's id. Throws on a duplicate name, a size
    // outside [1, 256] or more than 256 populations.
    std::uint8_t add_population(const std::string& name, int size);
    void add_edge(const std::string& src_pop, int src_idx, const std::string& dst_pop,
                  int dst_idx, Channel channel, double weight);
    void add_port(PortDirection dir, const std::string& name, const std::string& population);
    void add_drive(const std::string& population, int neuron, double rate_hz);

    std::optional<std::uint8_t> find_population(const std::string& name) const;
    std::uint8_t population_id(const std::string& name) const; // throws RangeError
    Address address(const std::string& population, int neuron) const;
    const Port* find_port(const std::string& name) const;
    bool is_virtual(std::uint8_t population) const;
    int total_neurons() const;

    void validate() const;

    bool operator==(const NetworkSpec&) const = default;
};

// Text form, one record per line:
//   population <name> <size>
//   edge <srcPop> <srcIdx> <dstPop> <dstIdx> <channel> <weight>
//   port <in|out> <name> <population>
//   drive <population> <neuron> <rate_hz>
//   param <population> <key> <value>
void write_network(std::ostream& out, const NetworkSpec& net);
NetworkSpec read_network(std::istream& in);

// Copies every population, edge, port and drive of `part` into `into`.
// Population names must not collide.
void merge_network(NetworkSpec& into, const NetworkSpec& part);

} // namespace spikeloop
