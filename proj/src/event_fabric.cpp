#include "spikeloop/event_fabric.hpp"

#include "spikeloop/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>

namespace spikeloop {

void EventQueue::schedule(const Event& e)
{
    if (e.time < now_)
        throw CausalityError(
            fmt::format("event at t={} us scheduled before current time {} us", e.time, now_));
    heap_.push(e);
}

Event EventQueue::pop_next()
{
    if (heap_.empty())
        throw RangeError("pop_next on an empty event queue");
    Event e = heap_.top();
    heap_.pop();
    now_ = e.time;
    return e;
}

const Event& EventQueue::peek() const
{
    if (heap_.empty())
        throw RangeError("peek on an empty event queue");
    return heap_.top();
}

void EventQueue::advance_to(TimeUs t)
{
    if (t < now_)
        throw CausalityError(fmt::format("cannot move clock back from {} to {} us", now_, t));
    if (!heap_.empty() && heap_.top().time < t)
        throw CausalityError("advance_to would skip pending events");
    now_ = t;
}

void RoutingTable::add(Address source, const Synapse& synapse)
{
    if (!std::isfinite(synapse.weight) || synapse.weight < 0)
        throw InvalidParameterError("routing weight must be finite and >= 0");
    auto& list = entries_[source];
    for (const auto& s : list)
        if (s.target == synapse.target && s.channel == synapse.channel)
            throw InvalidParameterError(fmt::format(
                "duplicate route ({},{}) -> ({},{}) on {}", source.population, source.neuron,
                synapse.target.population, synapse.target.neuron, channel_name(synapse.channel)));
    list.push_back(synapse);
}

std::span<const Synapse> RoutingTable::targets(Address source) const
{
    auto it = entries_.find(source);
    if (it == entries_.end())
        return {};
    return it->second;
}

std::size_t RoutingTable::edge_count() const
{
    std::size_t n = 0;
    for (const auto& [src, list] : entries_)
        n += list.size();
    return n;
}

std::uint64_t encode_aer(const Event& e)
{
    return (std::uint64_t{e.time} << 32) | (std::uint64_t{e.address.population} << 16)
           | std::uint64_t{e.address.neuron};
}

Event decode_aer(std::uint64_t word)
{
    constexpr std::uint64_t kMustBeZero = 0xFF00FF00ULL;
    if (word & kMustBeZero)
        throw MalformedWordError(fmt::format("AER word {:#018x} has reserved bits set", word));
    Event e;
    e.time = static_cast<TimeUs>(word >> 32);
    e.address.population = static_cast<std::uint8_t>((word >> 16) & 0xFF);
    e.address.neuron = static_cast<std::uint8_t>(word & 0xFF);
    return e;
}

void write_aer_log(std::ostream& out, std::span<const Event> events)
{
    std::array<char, 8> buf{};
    for (const auto& e : events) {
        std::uint64_t w = encode_aer(e);
        for (auto& b : buf) {
            b = static_cast<char>(w & 0xFF);
            w >>= 8;
        }
        out.write(buf.data(), buf.size());
    }
}

std::vector<Event> read_aer_log(std::istream& in)
{
    std::vector<Event> out;
    std::array<unsigned char, 8> buf{};
    while (in.read(reinterpret_cast<char*>(buf.data()), buf.size())) {
        std::uint64_t w = 0;
        for (int i = 7; i >= 0; --i)
            w = (w << 8) | buf[static_cast<std::size_t>(i)];
        out.push_back(decode_aer(w));
    }
    if (in.gcount() != 0)
        throw MalformedWordError("AER log length is not a multiple of 8 bytes");
    return out;
}

void write_aer_csv(std::ostream& out, std::span<const Event> events)
{
    out << "time_us,population,neuron\n";
    for (const auto& e : events)
        out << fmt::format("{},{},{}\n", e.time, e.address.population, e.address.neuron);
}

Address one_hot_encode(int position_index, std::uint8_t base_population, int population_size)
{
    if (population_size < 1 || population_size > 256)
        throw RangeError(fmt::format("population size {} outside [1, 256]", population_size));
    if (position_index < 0 || position_index >= population_size)
        throw RangeError(fmt::format("position {} outside [0, {})", position_index, population_size));
    return {base_population, static_cast<std::uint8_t>(position_index)};
}

int one_hot_decode(Address address, int population_size)
{
    if (population_size < 1 || population_size > 256)
        throw RangeError(fmt::format("population size {} outside [1, 256]", population_size));
    if (address.neuron >= population_size)
        throw RangeError(
            fmt::format("neuron {} outside a population of {}", address.neuron, population_size));
    return address.neuron;
}

std::vector<Event> gen_spike_train(const SpikeTrainSpec& spec)
{
    if (!std::isfinite(spec.rate) || spec.rate < 0)
        throw RangeError(fmt::format("spike rate {} must be >= 0", spec.rate));
    if (spec.stop < spec.start)
        throw RangeError("spike train stop precedes start");

    std::vector<Event> out;
    if (spec.rate == 0 || spec.stop == spec.start)
        return out;

    const double period_us = 1e6 / spec.rate;
    if (spec.kind == TrainKind::Regular) {
        for (std::uint64_t k = 0;; ++k) {
            const double t = spec.start + std::floor(static_cast<double>(k) * period_us + 1e-6);
            if (t >= spec.stop)
                break;
            out.push_back({static_cast<TimeUs>(t), spec.target});
        }
    } else {
        std::mt19937_64 rng(spec.seed);
        std::exponential_distribution<double> isi(1.0); // unit mean, scaled below
        double t = spec.start;
        while (true) {
            t += isi(rng) * period_us;
            const double tf = std::floor(t);
            if (tf >= spec.stop)
                break;
            out.push_back({static_cast<TimeUs>(tf), spec.target});
        }
    }
    return out;
}

std::vector<Event> merge_events(std::vector<Event> a, std::span<const Event> b)
{
    const auto mid = a.size();
    a.insert(a.end(), b.begin(), b.end());
    std::inplace_merge(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(mid), a.end());
    return a;
}

} // namespace spikeloop
