#include "spikeloop/simulator.hpp"

#include "spikeloop/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace spikeloop {

NetworkSimulator::NetworkSimulator(NetworkSpec net, const ModelDefaults& defaults,
                                   const SimOptions& options)
    : net_(std::move(net))
{
    net_.validate();
    defaults.validate();

    const double dt_us = options.dt * 1e6;
    if (!(options.dt > 0) || std::abs(dt_us - std::round(dt_us)) > 1e-6)
        throw InvalidParameterError(
            fmt::format("dt={} s is not a positive whole number of microseconds", options.dt));
    if (!(options.synaptic_delay >= 0))
        throw InvalidParameterError("synaptic delay must be >= 0");
    dt_us_ = static_cast<TimeUs>(std::lround(dt_us));
    dt_ = dt_us_ * 1e-6;
    delay_us_ = static_cast<TimeUs>(std::lround(options.synaptic_delay * 1e6));

    std::optional<std::mt19937_64> rng;
    if (options.mismatch)
        rng.emplace(options.mismatch->seed);

    std::size_t offset = 0;
    for (std::size_t p = 0; p < net_.populations.size(); ++p) {
        offsets_.push_back(offset);
        const auto& pop = net_.populations[p];
        const bool is_virtual = net_.is_virtual(static_cast<std::uint8_t>(p));
        virtual_pop_.push_back(is_virtual);
        NeuronParams base = defaults.neuron;
        if (auto it = net_.neuron_params.find(pop.name); it != net_.neuron_params.end())
            base = it->second;
        for (int i = 0; i < pop.size; ++i) {
            NeuronParams np = base;
            ChannelSet cs = defaults.channels;
            if (rng && !is_virtual) {
                np = apply_mismatch(np, *options.mismatch, *rng);
                for (auto& ch : cs)
                    ch = apply_mismatch(ch, *options.mismatch, *rng);
            }
            if (!is_virtual && dt_ > np.membrane_tau / 10.0 * (1.0 + 1e-12))
                throw StabilityError(fmt::format("dt={} s exceeds membrane_tau/10 for '{}'[{}]",
                                                 dt_, pop.name, i));
            states_.push_back(NeuronState::at_rest(np));
            params_.push_back(np);
            channels_.push_back(cs);
        }
        offset += static_cast<std::size_t>(pop.size);
    }

    for (const auto& d : net_.drives)
        drives_.push_back({net_.address(d.population, d.neuron), 1e6 / d.rate_hz, 0});
}

std::size_t NetworkSimulator::flat(Address a) const
{
    return offsets_.at(a.population) + a.neuron;
}

const NeuronState& NetworkSimulator::state(Address a) const { return states_.at(flat(a)); }
const NeuronParams& NetworkSimulator::params(Address a) const { return params_.at(flat(a)); }
const ChannelSet& NetworkSimulator::channels(Address a) const { return channels_.at(flat(a)); }

void NetworkSimulator::inject(const Event& e)
{
    if (e.address.population >= net_.populations.size()
        || e.address.neuron >= net_.populations[e.address.population].size)
        throw RangeError(fmt::format("stimulus to missing neuron ({},{})", e.address.population,
                                     e.address.neuron));
    if (!virtual_pop_[e.address.population])
        throw InvalidParameterError(fmt::format("stimulus targets simulated population '{}'",
                                                net_.populations[e.address.population].name));
    if (e.time < now_)
        throw CausalityError(fmt::format("stimulus at {} us is before current time {} us",
                                         e.time, now_));
    stimulus_.schedule(e);
}

void NetworkSimulator::inject(std::span<const Event> events)
{
    for (const auto& e : events)
        inject(e);
}

void NetworkSimulator::emit(const Event& e)
{
    last_spikes_.push_back(e);
    if (!net_.routing.targets(e.address).empty())
        pending_.schedule({e.time + delay_us_, e.address});
}

void NetworkSimulator::step()
{
    last_spikes_.clear();
    const TimeUs t = now_;
    const TimeUs t_end = t + dt_us_;

    while (!stimulus_.empty() && stimulus_.peek().time < t_end)
        emit(stimulus_.pop_next());
    for (auto& d : drives_) {
        while (true) {
            const double ts = std::floor(static_cast<double>(d.next_k) * d.period_us + 1e-6);
            if (ts >= t_end)
                break;
            if (ts >= t)
                emit({static_cast<TimeUs>(ts), d.address});
            ++d.next_k;
        }
    }

    while (!pending_.empty() && pending_.peek().time <= t) {
        const Event src = pending_.pop_next();
        for (const auto& syn : net_.routing.targets(src.address)) {
            const auto idx = flat(syn.target);
            dpi_inject(states_[idx].channel_currents[index_of(syn.channel)],
                       channels_[idx][index_of(syn.channel)], syn.weight);
            ++deliveries_;
        }
    }

    const double t_s = t * 1e-6;
    for (std::size_t p = 0; p < net_.populations.size(); ++p) {
        if (virtual_pop_[p])
            continue;
        for (int i = 0; i < net_.populations[p].size; ++i) {
            const auto idx = offsets_[p] + static_cast<std::size_t>(i);
            NeuronState& s = states_[idx];
            s.t = t_s;
            auto r = step_neuron(s, params_[idx], channels_[idx], dt_);
            s = r.state;
            if (r.spiked)
                emit({t_end, {static_cast<std::uint8_t>(p), static_cast<std::uint8_t>(i)}});
        }
    }

    std::sort(last_spikes_.begin(), last_spikes_.end());
    if (!last_spikes_.empty()) {
        const auto old_size = spikes_.size();
        spikes_.insert(spikes_.end(), last_spikes_.begin(), last_spikes_.end());
        auto first = std::lower_bound(spikes_.begin(),
                                      spikes_.begin() + static_cast<std::ptrdiff_t>(old_size),
                                      last_spikes_.front());
        std::inplace_merge(first, spikes_.begin() + static_cast<std::ptrdiff_t>(old_size),
                           spikes_.end());
    }
    now_ = t_end;
}

void NetworkSimulator::run_until(TimeUs t)
{
    while (now_ < t)
        step();
}

std::vector<RasterRecord> NetworkSimulator::raster() const
{
    return to_raster(net_, spikes_);
}

std::vector<RasterRecord> to_raster(const NetworkSpec& net, std::span<const Event> spikes)
{
    std::vector<RasterRecord> out;
    out.reserve(spikes.size());
    for (const auto& e : spikes)
        out.push_back({e.time, net.populations.at(e.address.population).name, e.address.neuron});
    return out;
}

} // namespace spikeloop
