#include "spikeloop/errors.hpp"
#include "spikeloop/snn_core.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace spikeloop;

namespace {

SynapseChannelParams ampa() { return ModelDefaults::default_channels()[index_of(Channel::Ampa)]; }

// Closed-form LIF period with the spike cutoff as threshold.
double lif_rate(const NeuronParams& p, double current)
{
    const double v_inf = p.rest_potential + current / p.leak_conductance;
    return 1.0 / (p.refractory_period +
                  p.membrane_tau * std::log((v_inf - p.reset_potential) / (v_inf - p.peak_potential)));
}

double simulated_rate(const NeuronParams& p, double current, double dt, double duration)
{
    const ChannelSet ch = ModelDefaults::default_channels();
    NeuronState s = NeuronState::at_rest(p);
    double first = -1, last = -1;
    int n = 0;
    const long steps = std::lround(duration / dt);
    for (long k = 0; k < steps; ++k) {
        s.channel_currents[index_of(Channel::Ampa)] = current;
        auto r = step_neuron(s, p, ch, dt);
        s = r.state;
        if (r.spiked) {
            if (first < 0)
                first = s.t;
            last = s.t;
            ++n;
        }
    }
    REQUIRE(n >= 3);
    return (n - 1) / (last - first);
}

NeuronParams lif_params()
{
    NeuronParams p;
    p.sharpness = 0.0;
    p.adapt_coupling = 0.0;
    p.adapt_increment = 0.0;
    return p;
}

int count_spikes(double shunt_weight)
{
    const NeuronParams p;
    const ChannelSet ch = ModelDefaults::default_channels();
    NeuronState s = NeuronState::at_rest(p);
    const double dt = 1e-4;
    int spikes = 0;
    for (int k = 0; k < 5000; ++k) {
        if (k % 50 == 0) {
            dpi_inject(s.channel_currents[index_of(Channel::Ampa)], ch[0], 3.0);
            dpi_inject(s.channel_currents[index_of(Channel::Shunt)], ch[3], shunt_weight);
        }
        auto r = step_neuron(s, p, ch, dt);
        s = r.state;
        spikes += r.spiked;
    }
    return spikes;
}

} // namespace

TEST_CASE("dpi filter stays at zero without input")
{
    for (double dt : {1e-5, 1e-4, 1e-2, 1.0})
        CHECK(dpi_step(0.0, ampa(), dt, 0.0) == 0.0);
}

TEST_CASE("dpi single spike response follows the exponential")
{
    const auto p = ampa();
    const double dt = 1e-4;
    double i = dpi_step(0.0, p, dt, 0.0);
    dpi_inject(i, p, 1.0);
    const double w0 = p.gain;
    double t = 0.0;
    for (double sample : {p.tau / 2, p.tau, 2 * p.tau}) {
        while (t + dt / 2 < sample) {
            i = dpi_step(i, p, dt, 0.0);
            t += dt;
        }
        const double expected = w0 * std::exp(-sample / p.tau);
        CHECK(std::abs(i - expected) / expected < 0.01);
    }
}

TEST_CASE("dpi steady poisson input averages gain * rate * tau")
{
    const auto p = ampa();
    const double dt = 1e-4, rate = 200.0;
    std::mt19937_64 rng(7);
    std::bernoulli_distribution spike(rate * dt);
    double i = 0, sum = 0;
    long n = 0;
    for (long k = 0; k < 400000; ++k) {
        i = dpi_step(i, p, dt, spike(rng) ? 1.0 : 0.0);
        if (k * dt > 5 * p.tau) {
            sum += i;
            ++n;
        }
    }
    CHECK(sum / n == doctest::Approx(p.gain * rate * p.tau).epsilon(0.03));
}

TEST_CASE("dpi rejects bad input")
{
    CHECK_THROWS_AS(dpi_step(NAN, ampa(), 1e-4, 0), InvalidParameterError);
    CHECK_THROWS_AS(dpi_step(0, ampa(), 0.0, 0), InvalidParameterError);
    CHECK_THROWS_AS(dpi_step(0, ampa(), 1e-4, INFINITY), InvalidParameterError);
    CHECK_THROWS_AS(dpi_step(-1e-12, ampa(), 1e-4, 0), InvalidParameterError);
}

TEST_CASE("dpi state is never negative")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> w(0, 5);
    double i = 0;
    for (int k = 0; k < 10000; ++k) {
        i = dpi_step(i, ampa(), 1e-4, k % 7 == 0 ? w(rng) : 0.0);
        REQUIRE(i >= 0);
    }
}

TEST_CASE("neuron at rest without input never spikes")
{
    const NeuronParams p;
    const ChannelSet ch = ModelDefaults::default_channels();
    NeuronState s = NeuronState::at_rest(p);
    for (int k = 0; k < 20000; ++k) {
        auto r = step_neuron(s, p, ch, 1e-4);
        REQUIRE_FALSE(r.spiked);
        s = r.state;
    }
    CHECK(s.v == p.rest_potential);
}

TEST_CASE("lif reduction matches the analytic rate")
{
    const NeuronParams p = lif_params();
    // Rheobase is g_L * (peak - E_L) = 400 pA.
    for (double current : {500e-12, 800e-12, 1500e-12}) {
        CAPTURE(current);
        const double expected = lif_rate(p, current);
        const double got = simulated_rate(p, current, 1e-4, 3.0);
        CHECK(std::abs(got - expected) / expected < 0.02);
    }
}

TEST_CASE("subthreshold input settles at rest + I/g_L")
{
    const NeuronParams p = lif_params();
    const double current = 150e-12;
    const ChannelSet ch = ModelDefaults::default_channels();
    NeuronState s = NeuronState::at_rest(p);
    for (int k = 0; k < 20000; ++k) {
        s.channel_currents[index_of(Channel::Ampa)] = current;
        auto r = step_neuron(s, p, ch, 1e-4);
        REQUIRE_FALSE(r.spiked);
        s = r.state;
    }
    CHECK(s.v == doctest::Approx(p.rest_potential + current / p.leak_conductance).epsilon(1e-6));
}

TEST_CASE("spike resets and holds the membrane for the refractory period")
{
    const NeuronParams p = lif_params();
    const ChannelSet ch = ModelDefaults::default_channels();
    NeuronState s = NeuronState::at_rest(p);
    s.v = p.peak_potential - 1e-6;
    s.channel_currents[index_of(Channel::Ampa)] = 1e-9;
    auto r = step_neuron(s, p, ch, 1e-4);
    REQUIRE(r.spiked);
    CHECK(r.state.v == p.reset_potential);
    CHECK(r.state.refractory_until == doctest::Approx(1e-4 + p.refractory_period));
    s = r.state;
    for (int k = 0; k < 20; ++k) {
        s.channel_currents[index_of(Channel::Ampa)] = 1e-9;
        s = step_neuron(s, p, ch, 1e-4).state;
        CHECK(s.v == p.reset_potential);
    }
    s.channel_currents[index_of(Channel::Ampa)] = 1e-9;
    s = step_neuron(s, p, ch, 1e-4).state;
    CHECK(s.v > p.reset_potential);
}

TEST_CASE("step_neuron guards")
{
    const NeuronParams p;
    const ChannelSet ch = ModelDefaults::default_channels();
    NeuronState s = NeuronState::at_rest(p);
    CHECK_THROWS_AS(step_neuron(s, p, ch, p.membrane_tau / 5), StabilityError);
    CHECK_NOTHROW(step_neuron(s, p, ch, p.membrane_tau / 10));
    CHECK_THROWS_AS(step_neuron(s, p, ch, 0.0), InvalidParameterError);
    s.v = NAN;
    CHECK_THROWS_AS(step_neuron(s, p, ch, 1e-4), InvalidStateError);
}

TEST_CASE("integration is bit-exact repeatable")
{
    CHECK(count_spikes(0.5) == count_spikes(0.5));
    const NeuronParams p;
    const ChannelSet ch = ModelDefaults::default_channels();
    NeuronState a = NeuronState::at_rest(p), b = a;
    for (int k = 0; k < 3000; ++k) {
        a.channel_currents[0] = b.channel_currents[0] = 300e-12 + 1e-13 * (k % 17);
        a = step_neuron(a, p, ch, 1e-4).state;
        b = step_neuron(b, p, ch, 1e-4).state;
        REQUIRE(a.v == b.v);
        REQUIRE(a.w_adapt == b.w_adapt);
    }
}

TEST_CASE("shunting input never increases the spike count")
{
    int previous = count_spikes(0.0);
    CHECK(previous > 0);
    for (double w : {0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
        CAPTURE(w);
        const int n = count_spikes(w);
        CHECK(n <= previous);
        previous = n;
    }
    CHECK(previous < count_spikes(0.0));
}

TEST_CASE("nmda voltage gate scales the current")
{
    NeuronParams p = lif_params();
    ChannelSet gated = ModelDefaults::default_channels();
    gated[index_of(Channel::Nmda)].voltage_gate = true;
    const ChannelSet open = ModelDefaults::default_channels();
    NeuronState s = NeuronState::at_rest(p);
    s.channel_currents[index_of(Channel::Nmda)] = 300e-12;
    const double dv_open = step_neuron(s, p, open, 1e-4).state.v - s.v;
    const double dv_gated = step_neuron(s, p, gated, 1e-4).state.v - s.v;
    CHECK(dv_gated > 0);
    CHECK(dv_gated < dv_open);
}

TEST_CASE("channel names and modes")
{
    for (Channel c : kAllChannels)
        CHECK(parse_channel(channel_name(c)) == c);
    CHECK(channel_mode(Channel::Ampa) == ChannelMode::ExcitatoryCurrent);
    CHECK(channel_mode(Channel::Nmda) == ChannelMode::ExcitatoryCurrent);
    CHECK(channel_mode(Channel::Gaba) == ChannelMode::SubtractiveInhibition);
    CHECK(channel_mode(Channel::Shunt) == ChannelMode::DivisiveShunt);
    CHECK_THROWS_AS(parse_channel("glutamate"), InvalidParameterError);
}

TEST_CASE("parameter validation")
{
    NeuronParams p;
    CHECK_NOTHROW(p.validate());
    p.reset_potential = p.threshold_potential + 0.001;
    CHECK_THROWS_AS(p.validate(), InvalidParameterError);
    p = {};
    p.membrane_tau = 0;
    CHECK_THROWS_AS(p.validate(), InvalidParameterError);
    SynapseChannelParams c = ampa();
    c.gain = -1;
    CHECK_THROWS_AS(c.validate(), InvalidParameterError);
}

TEST_CASE("mismatch with cv 0 is the identity")
{
    std::mt19937_64 rng(11);
    MismatchSpec spec{0.0, 11, {}};
    for (auto n : neuron_mismatch_names())
        spec.parameter_mask.emplace(n);
    const NeuronParams p;
    CHECK(apply_mismatch(p, spec, rng) == p);
}

TEST_CASE("mismatch draws have the requested coefficient of variation")
{
    MismatchSpec spec{0.2, 42, {"leak_conductance"}};
    std::mt19937_64 rng(spec.seed);
    const NeuronParams p;
    double sum = 0, sum2 = 0;
    const int n = 10000;
    for (int k = 0; k < n; ++k) {
        const double g = apply_mismatch(p, spec, rng).leak_conductance;
        sum += g;
        sum2 += g * g;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sum2 / n - mean * mean);
    CHECK(sd / mean >= 0.18);
    CHECK(sd / mean <= 0.22);
}

TEST_CASE("mismatch is deterministic, masked and clamped")
{
    MismatchSpec spec{0.3, 5, MismatchSpec::default_mask()};
    const NeuronParams p;
    std::mt19937_64 a(5), b(5);
    const auto pa = apply_mismatch(p, spec, a);
    const auto pb = apply_mismatch(p, spec, b);
    CHECK(pa == pb);
    CHECK(pa.membrane_tau == p.membrane_tau); // not in the default mask
    CHECK(pa.leak_conductance != p.leak_conductance);
    CHECK(mismatch_multiplier(1.0, -10.0) == 0.05);
    CHECK(mismatch_multiplier(0.2, 1.0) == doctest::Approx(1.2));
    const auto sa = apply_mismatch(ampa(), spec, a);
    const auto sb = apply_mismatch(ampa(), spec, b);
    CHECK(sa == sb);
    CHECK(sa.gain > 0);
}

TEST_CASE("defaults table round-trips")
{
    ModelDefaults d;
    d.neuron.membrane_tau = 0.0123456789;
    d.channels[index_of(Channel::Gaba)].gain = 3.3e-10;
    d.channels[index_of(Channel::Nmda)].voltage_gate = true;
    std::stringstream ss;
    write_defaults_table(ss, d);
    CHECK(read_defaults_table(ss) == d);
}

TEST_CASE("defaults table errors carry the line")
{
    std::stringstream unknown("defaults.version = 1\nneuron.bogus = 1\n");
    try {
        read_defaults_table(unknown);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.line() == 2);
        CHECK(e.key() == "neuron.bogus");
    }
    std::stringstream bad("# comment\n\nneuron.membrane_tau = fast\n");
    CHECK_THROWS_AS(read_defaults_table(bad), ConfigError);
    std::stringstream invalid("neuron.membrane_tau = -1\n");
    CHECK_THROWS_AS(read_defaults_table(invalid), Error);
}
