#include "spikeloop/snn_core.hpp"

#include "spikeloop/errors.hpp"
#include "spikeloop/kv_text.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <ostream>

namespace spikeloop {

namespace {

void require(bool ok, const char* what)
{
    if (!ok)
        throw InvalidParameterError(what);
}

// Keeps exp() finite; any argument this large is past the spike cutoff anyway.
constexpr double kMaxExpArgument = 30.0;

// Mg2+ block (Jahr & Stevens), 1 mM.
double nmda_gate(double v)
{
    return 1.0 / (1.0 + std::exp(-62.0 * v) / 3.57);
}

} // namespace

std::string_view channel_name(Channel c)
{
    switch (c) {
    case Channel::Ampa: return "AMPA";
    case Channel::Nmda: return "NMDA";
    case Channel::Gaba: return "GABA";
    case Channel::Shunt: return "SHUNT";
    }
    return "?";
}

Channel parse_channel(std::string_view name)
{
    for (Channel c : kAllChannels)
        if (channel_name(c) == name)
            return c;
    throw InvalidParameterError(fmt::format("unknown synapse channel '{}'", name));
}

ChannelMode channel_mode(Channel c)
{
    switch (c) {
    case Channel::Ampa:
    case Channel::Nmda: return ChannelMode::ExcitatoryCurrent;
    case Channel::Gaba: return ChannelMode::SubtractiveInhibition;
    case Channel::Shunt: return ChannelMode::DivisiveShunt;
    }
    return ChannelMode::ExcitatoryCurrent;
}

void NeuronParams::validate() const
{
    const double all[] = {membrane_tau, leak_conductance, rest_potential, threshold_potential,
                          sharpness, peak_potential, reset_potential, refractory_period,
                          adapt_coupling, adapt_increment, adapt_tau};
    for (double x : all)
        require(std::isfinite(x), "neuron parameter is not finite");
    require(membrane_tau > 0 && adapt_tau > 0, "neuron time constants must be > 0");
    require(leak_conductance > 0, "leak_conductance must be > 0");
    require(reset_potential < threshold_potential && threshold_potential < peak_potential,
            "require reset_potential < threshold_potential < peak_potential");
    require(refractory_period >= 0, "refractory_period must be >= 0");
    require(sharpness >= 0, "sharpness must be >= 0");
}

void SynapseChannelParams::validate() const
{
    require(std::isfinite(tau) && std::isfinite(gain), "synapse parameter is not finite");
    require(tau > 0, "synapse tau must be > 0");
    require(gain >= 0, "synapse gain must be >= 0");
}

NeuronState NeuronState::at_rest(const NeuronParams& p)
{
    NeuronState s;
    s.v = p.rest_potential;
    return s;
}

double dpi_step(double current, const SynapseChannelParams& params, double dt,
                double spike_weight_sum)
{
    if (!std::isfinite(current) || !std::isfinite(dt) || !std::isfinite(spike_weight_sum))
        throw InvalidParameterError("dpi_step: non-finite input");
    if (!(dt > 0))
        throw InvalidParameterError("dpi_step: dt must be > 0");
    if (current < 0)
        throw InvalidParameterError("dpi_step: filter state must be >= 0");
    return current * std::exp(-dt / params.tau) + params.gain * spike_weight_sum;
}

StepResult step_neuron(const NeuronState& state, const NeuronParams& p,
                       const ChannelSet& channels, double dt)
{
    if (!std::isfinite(dt) || !(dt > 0))
        throw InvalidParameterError("step_neuron: dt must be > 0");
    if (dt > p.membrane_tau / 10.0 * (1.0 + 1e-12))
        throw StabilityError(fmt::format("step_neuron: dt={} s exceeds membrane_tau/10={} s", dt,
                                         p.membrane_tau / 10.0));
    if (!std::isfinite(state.v) || !std::isfinite(state.w_adapt))
        throw InvalidStateError("step_neuron: non-finite membrane state");

    StepResult out{state, false};
    NeuronState& s = out.state;

    const double i_ampa = state.current(Channel::Ampa);
    double i_nmda = state.current(Channel::Nmda);
    if (channels[index_of(Channel::Nmda)].voltage_gate)
        i_nmda *= nmda_gate(state.v);
    const double i_gaba = state.current(Channel::Gaba);
    const double g_shunt = state.current(Channel::Shunt);

    const double v = state.v;
    const double w = state.w_adapt;
    const double dw = (p.adapt_coupling * (v - p.rest_potential) - w) / p.adapt_tau * dt;

    // 1 ns slack absorbs clock round-off when t is rebuilt from step counts.
    const bool refractory = state.t + 1e-9 < state.refractory_until;
    const double t_next = state.t + dt;

    if (refractory) {
        s.v = p.reset_potential;
        s.w_adapt = w + dw;
    } else {
        double exp_term = 0.0;
        if (p.sharpness > 0) {
            // Offset by the term's value at rest so that E_L stays an exact fixed point.
            const double arg = std::min((v - p.threshold_potential) / p.sharpness, kMaxExpArgument);
            const double at_rest = (p.rest_potential - p.threshold_potential) / p.sharpness;
            exp_term = p.leak_conductance * p.sharpness * (std::exp(arg) - std::exp(at_rest));
        }
        const double dv = (-(p.leak_conductance + g_shunt) * (v - p.rest_potential) + exp_term
                           + i_ampa + i_nmda - i_gaba - w)
                          / p.capacitance() * dt;
        s.v = v + dv;
        s.w_adapt = w + dw;
        if (s.v >= p.peak_potential) {
            out.spiked = true;
            s.v = p.reset_potential;
            s.w_adapt += p.adapt_increment;
            s.refractory_until = t_next + p.refractory_period;
        }
    }
    s.t = t_next;

    for (Channel c : kAllChannels) {
        auto& cur = s.channel_currents[index_of(c)];
        cur = dpi_step(cur, channels[index_of(c)], dt, 0.0);
    }

    if (!std::isfinite(s.v) || !std::isfinite(s.w_adapt))
        throw InvalidStateError("step_neuron: integration produced a non-finite state");
    return out;
}

// --- defaults ---------------------------------------------------------------

ChannelSet ModelDefaults::default_channels()
{
    return {{
        {Channel::Ampa, 0.005, 100e-12, false},
        {Channel::Nmda, 0.050, 100e-12, false},
        {Channel::Gaba, 0.020, 100e-12, false},
        {Channel::Shunt, 0.005, 1e-9, false},
    }};
}

void ModelDefaults::validate() const
{
    neuron.validate();
    for (Channel c : kAllChannels) {
        const auto& ch = channels[index_of(c)];
        if (ch.channel != c)
            throw InvalidParameterError("channel table out of order");
        ch.validate();
    }
}

std::vector<DefaultsField> defaults_fields()
{
    std::vector<DefaultsField> f;
    auto neuron = [&](const char* name, double NeuronParams::*m) {
        f.push_back({fmt::format("neuron.{}", name),
                     [m](const ModelDefaults& d) { return d.neuron.*m; },
                     [m](ModelDefaults& d, double v) { d.neuron.*m = v; }});
    };
    neuron("membrane_tau", &NeuronParams::membrane_tau);
    neuron("leak_conductance", &NeuronParams::leak_conductance);
    neuron("rest_potential", &NeuronParams::rest_potential);
    neuron("threshold_potential", &NeuronParams::threshold_potential);
    neuron("sharpness", &NeuronParams::sharpness);
    neuron("peak_potential", &NeuronParams::peak_potential);
    neuron("reset_potential", &NeuronParams::reset_potential);
    neuron("refractory_period", &NeuronParams::refractory_period);
    neuron("adapt_coupling", &NeuronParams::adapt_coupling);
    neuron("adapt_increment", &NeuronParams::adapt_increment);
    neuron("adapt_tau", &NeuronParams::adapt_tau);

    for (Channel c : kAllChannels) {
        std::string prefix(channel_name(c));
        std::transform(prefix.begin(), prefix.end(), prefix.begin(),
                       [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
        const std::size_t i = index_of(c);
        f.push_back({prefix + ".tau", [i](const ModelDefaults& d) { return d.channels[i].tau; },
                     [i](ModelDefaults& d, double v) { d.channels[i].tau = v; }});
        f.push_back({prefix + ".gain", [i](const ModelDefaults& d) { return d.channels[i].gain; },
                     [i](ModelDefaults& d, double v) { d.channels[i].gain = v; }});
    }
    const std::size_t nmda = index_of(Channel::Nmda);
    f.push_back({"nmda.voltage_gate",
                 [nmda](const ModelDefaults& d) { return d.channels[nmda].voltage_gate ? 1.0 : 0.0; },
                 [nmda](ModelDefaults& d, double v) {
                     if (v != 0.0 && v != 1.0)
                         throw InvalidParameterError("nmda.voltage_gate must be 0 or 1");
                     d.channels[nmda].voltage_gate = v != 0.0;
                 }});
    return f;
}

void write_defaults_table(std::ostream& out, const ModelDefaults& defaults)
{
    out << "# spikeloop nominal parameters, SI units\n";
    out << "defaults.version = " << ModelDefaults::kVersion << "\n";
    for (const auto& field : defaults_fields())
        out << fmt::format("{} = {}\n", field.key, field.get(defaults));
}

ModelDefaults read_defaults_table(std::istream& in)
{
    ModelDefaults d;
    const auto fields = defaults_fields();
    for (const auto& line : read_kv_lines(in)) {
        if (line.key == "defaults.version") {
            if (line.value != std::to_string(ModelDefaults::kVersion))
                throw ConfigError(line.key, line.line_no,
                                  fmt::format("unsupported defaults version '{}'", line.value));
            continue;
        }
        auto it = std::find_if(fields.begin(), fields.end(),
                               [&](const auto& f) { return f.key == line.key; });
        if (it == fields.end())
            throw ConfigError(line.key, line.line_no, fmt::format("unknown key '{}'", line.key));
        try {
            it->set(d, parse_double(line.value, line.key, line.line_no));
        } catch (const InvalidParameterError& e) {
            throw ConfigError(line.key, line.line_no, e.what());
        }
    }
    try {
        d.validate();
    } catch (const InvalidParameterError& e) {
        throw ConfigError("", 0, e.what());
    }
    return d;
}

// --- mismatch ---------------------------------------------------------------

std::set<std::string> MismatchSpec::default_mask()
{
    return {"leak_conductance", "refractory_period", "gain", "tau"};
}

const std::array<std::string_view, 6>& neuron_mismatch_names()
{
    static constexpr std::array<std::string_view, 6> names = {
        "membrane_tau", "leak_conductance", "refractory_period",
        "adapt_coupling", "adapt_increment", "adapt_tau"};
    return names;
}

const std::array<std::string_view, 2>& synapse_mismatch_names()
{
    static constexpr std::array<std::string_view, 2> names = {"tau", "gain"};
    return names;
}

double mismatch_multiplier(double cv, double z)
{
    return std::max(0.05, 1.0 + cv * z);
}

namespace {

double standard_normal(std::mt19937_64& rng)
{
    // Fresh distribution per draw: libstdc++ caches the second polar-method
    // value inside the distribution object.
    std::normal_distribution<double> n(0.0, 1.0);
    return n(rng);
}

void scale_if_masked(double& value, std::string_view name, const MismatchSpec& spec,
                     std::mt19937_64& rng)
{
    const double z = standard_normal(rng);
    if (spec.cv > 0 && spec.parameter_mask.count(std::string(name)))
        value *= mismatch_multiplier(spec.cv, z);
}

} // namespace

NeuronParams apply_mismatch(const NeuronParams& params, const MismatchSpec& spec,
                            std::mt19937_64& rng)
{
    if (!(spec.cv >= 0))
        throw InvalidParameterError("mismatch cv must be >= 0");
    NeuronParams out = params;
    double* slots[] = {&out.membrane_tau,   &out.leak_conductance, &out.refractory_period,
                       &out.adapt_coupling, &out.adapt_increment,  &out.adapt_tau};
    const auto& names = neuron_mismatch_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        scale_if_masked(*slots[i], names[i], spec, rng);
    return out;
}

SynapseChannelParams apply_mismatch(const SynapseChannelParams& params, const MismatchSpec& spec,
                                    std::mt19937_64& rng)
{
    if (!(spec.cv >= 0))
        throw InvalidParameterError("mismatch cv must be >= 0");
    SynapseChannelParams out = params;
    scale_if_masked(out.tau, "tau", spec, rng);
    scale_if_masked(out.gain, "gain", spec, rng);
    return out;
}

} // namespace spikeloop
