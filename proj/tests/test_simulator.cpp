#include "spikeloop/errors.hpp"
#include "spikeloop/simulator.hpp"

#include <doctest.h>

using namespace spikeloop;

namespace {

NetworkSpec relay(double weight)
{
    NetworkSpec net;
    net.add_population("in", 1);
    net.add_population("out", 2);
    net.add_edge("in", 0, "out", 0, Channel::Ampa, weight);
    net.add_edge("in", 0, "out", 1, Channel::Ampa, weight);
    net.add_port(PortDirection::In, "input", "in");
    return net;
}

} // namespace

TEST_CASE("virtual populations replay stimuli as spikes")
{
    NetworkSimulator sim(relay(0.0), {}, {});
    sim.inject(gen_spike_train({TrainKind::Regular, 100.0, 0, 50000, {0, 0}, 0}));
    sim.run_until(60000);
    CHECK(sim.spikes().size() == 5);
    CHECK(sim.spikes()[1].time == 10000);
}

TEST_CASE("every spike produces one delivery per routing entry")
{
    NetworkSimulator sim(relay(0.1), {}, {});
    sim.inject(gen_spike_train({TrainKind::Regular, 100.0, 0, 50000, {0, 0}, 0}));
    sim.run_until(100000);
    CHECK(sim.deliveries() == 10);
}

TEST_CASE("strong input drives the targets after the synaptic delay")
{
    SimOptions opt;
    opt.synaptic_delay = 2e-3;
    NetworkSimulator sim(relay(20.0), {}, opt);
    sim.inject(Event{1000, {0, 0}});
    sim.run_until(20000);
    bool out_spike = false;
    for (const auto& e : sim.spikes())
        if (e.address.population == 1) {
            CHECK(e.time > 3000);
            out_spike = true;
        }
    CHECK(out_spike);
}

TEST_CASE("injection guards")
{
    NetworkSimulator sim(relay(1.0), {}, {});
    sim.run_until(5000);
    CHECK_THROWS_AS(sim.inject(Event{1000, {0, 0}}), CausalityError);
    CHECK_THROWS_AS(sim.inject(Event{6000, {1, 0}}), InvalidParameterError);
    CHECK_THROWS_AS(sim.inject(Event{6000, {0, 3}}), RangeError);
}

TEST_CASE("dt must suit the neurons")
{
    SimOptions opt;
    opt.dt = 5e-3;
    CHECK_THROWS_AS(NetworkSimulator(relay(1.0), {}, opt), StabilityError);
    opt.dt = 1.5e-7;
    CHECK_THROWS_AS(NetworkSimulator(relay(1.0), {}, opt), InvalidParameterError);
}

TEST_CASE("drives fire at their rate")
{
    NetworkSpec net;
    net.add_population("gen", 1);
    net.add_drive("gen", 0, 200.0);
    NetworkSimulator sim(net, {}, {});
    sim.run_until(100000);
    CHECK(sim.spikes().size() == 20);
}

TEST_CASE("runs are deterministic, also under mismatch")
{
    SimOptions opt;
    opt.mismatch = MismatchSpec{0.2, 99, MismatchSpec::default_mask()};
    auto run = [&] {
        NetworkSimulator sim(relay(3.0), {}, opt);
        sim.inject(gen_spike_train({TrainKind::Poisson, 300.0, 0, 500000, {0, 0}, 4}));
        sim.run_until(500000);
        return sim.spikes();
    };
    const auto a = run();
    CHECK(a == run());
    CHECK(std::is_sorted(a.begin(), a.end()));
}

TEST_CASE("raster records use population names")
{
    NetworkSimulator sim(relay(0.0), {}, {});
    sim.inject(Event{0, {0, 0}});
    sim.run_until(1000);
    const auto r = sim.raster();
    REQUIRE(r.size() == 1);
    CHECK(r[0].population == "in");
    CHECK(r[0].neuron == 0);
}
