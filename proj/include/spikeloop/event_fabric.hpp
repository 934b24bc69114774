#pragma once

#include "spikeloop/snn_core.hpp"

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <queue>
#include <span>
#include <vector>

namespace spikeloop {

using TimeUs = std::uint32_t;

struct Address {
    std::uint8_t population = 0;
    std::uint8_t neuron = 0;

    auto operator<=>(const Address&) const = default;
};

struct Event {
    TimeUs time = 0;
    Address address;

    auto operator<=>(const Event&) const = default;
};

// Min-queue over (time, population, neuron). Scheduling before the current
// time (the last popped time, or a time set with advance_to) is a causality
// error.
class EventQueue {
public:
    void schedule(const Event& e);
    Event pop_next();
    const Event& peek() const;
    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }
    TimeUs now() const { return now_; }
    void advance_to(TimeUs t);

private:
    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> heap_;
    TimeUs now_ = 0;
};

struct Synapse {
    Address target;
    Channel channel = Channel::Ampa;
    double weight = 0.0;

    bool operator==(const Synapse&) const = default;
};

class RoutingTable {
public:
    // Throws InvalidParameterError on a negative/non-finite weight or a
    // duplicate (source, target, channel) triple.
    void add(Address source, const Synapse& synapse);
    std::span<const Synapse> targets(Address source) const;
    const std::map<Address, std::vector<Synapse>>& entries() const { return entries_; }
    std::size_t edge_count() const;

    bool operator==(const RoutingTable&) const = default;

private:
    std::map<Address, std::vector<Synapse>> entries_;
};

// --- AER wire format ---------------------------------------------------------
//
//   63..32 time (us) | 31..24 reserved (0) | 23..16 population | 15..8 0 | 7..0 neuron

std::uint64_t encode_aer(const Event& e);
Event decode_aer(std::uint64_t word); // throws MalformedWordError

// Binary log: little-endian 64-bit words, no header.
void write_aer_log(std::ostream& out, std::span<const Event> events);
std::vector<Event> read_aer_log(std::istream& in);
// CSV twin: `time_us,population,neuron` with numeric ids.
void write_aer_csv(std::ostream& out, std::span<const Event> events);

// --- one-hot position codec --------------------------------------------------

Address one_hot_encode(int position_index, std::uint8_t base_population, int population_size);
int one_hot_decode(Address address, int population_size);

// --- spike generators --------------------------------------------------------

enum class TrainKind { Regular, Poisson };

struct SpikeTrainSpec {
    TrainKind kind = TrainKind::Regular;
    double rate = 0.0; // Hz
    TimeUs start = 0;
    TimeUs stop = 0;   // exclusive
    Address target;
    std::uint64_t seed = 0;
};

std::vector<Event> gen_spike_train(const SpikeTrainSpec& spec);

// Sorted merge of event streams.
std::vector<Event> merge_events(std::vector<Event> a, std::span<const Event> b);

} // namespace spikeloop
