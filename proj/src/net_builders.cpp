#include "spikeloop/net_builders.hpp"

#include "spikeloop/errors.hpp"

#include <fmt/format.h>

#include <cmath>

namespace spikeloop {

namespace {

void require(bool ok, const std::string& what)
{
    if (!ok)
        throw InvalidParameterError(what);
}

bool finite_nonneg(double w) { return std::isfinite(w) && w >= 0; }

TimeUs ms_to_us(double ms) { return static_cast<TimeUs>(std::lround(ms * 1e3)); }

} // namespace

void ShiftedWtaConfig::validate() const
{
    require(num_pos_ref >= 2 && num_pos_ref <= 256, "wta: num_pos_ref must be in [2, 256]");
    require(offset >= 0 && offset < num_pos_ref, "wta: offset must be in [0, num_pos_ref)");
    require(finite_nonneg(ff_weight) && finite_nonneg(lat_inh_weight),
            "wta: weights must be >= 0");
}

void ComparatorUnitConfig::validate() const
{
    for (double w : {exc_a_weight, exc_b_weight, inh_gaba_weight, inh_shunt_weight,
                     linh_drive_weight})
        require(finite_nonneg(w), "comparator unit: weights must be >= 0");
    require(std::isfinite(window_ms) && window_ms > 0, "comparator unit: window must be > 0");
}

void ComparatorConfig::validate() const
{
    require(num_coarse >= 2 && num_coarse <= 256, "comparator: num_coarse must be in [2, 256]");
    require(num_fine >= 2 && num_fine <= 256, "comparator: num_fine must be in [2, 256]");
    require(fine_static_ref >= 0 && fine_static_ref < num_fine,
            "comparator: fine_static_ref must be in [0, num_fine)");
    require(std::isfinite(static_drive_rate) && static_drive_rate > 0,
            "comparator: static_drive_rate must be > 0");
    require(finite_nonneg(join_weight_scale), "comparator: join_weight_scale must be >= 0");
    unit.validate();
}

int shifted_target(int i, int x, int n)
{
    if (n < 1 || i < 0 || i >= n || x < 0 || x >= n)
        throw RangeError(fmt::format("shifted_target({}, {}, {}) out of range", i, x, n));
    return (i + x) % n;
}

NetworkSpec build_shifted_wta(const ShiftedWtaConfig& cfg)
{
    cfg.validate();
    const int n = cfg.num_pos_ref;
    NetworkSpec net;
    net.add_population(names::kOuterRing, n);
    net.add_population(names::kInnerRing, n);
    for (int i = 0; i < n; ++i)
        net.add_edge(names::kOuterRing, i, names::kInnerRing, shifted_target(i, cfg.offset, n),
                     Channel::Ampa, cfg.ff_weight);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            if (j != k)
                net.add_edge(names::kInnerRing, j, names::kInnerRing, k, Channel::Shunt,
                             cfg.lat_inh_weight);
    net.add_port(PortDirection::In, "input", names::kOuterRing);
    net.add_port(PortDirection::Out, "output", names::kInnerRing);
    return net;
}

void wire_comparator_unit(NetworkSpec& net, const std::vector<Address>& a,
                          const std::vector<Address>& b, Address linh, Address out,
                          const ComparatorUnitConfig& cfg, double exc_scale)
{
    auto connect = [&](Address src, Address dst, Channel c, double w) {
        net.routing.add(src, {dst, c, w});
    };
    for (Address s : a) {
        connect(s, out, Channel::Ampa, cfg.exc_a_weight * exc_scale);
        connect(s, linh, Channel::Ampa, cfg.linh_drive_weight * exc_scale);
    }
    for (Address s : b) {
        connect(s, out, Channel::Ampa, cfg.exc_b_weight * exc_scale);
        connect(s, linh, Channel::Ampa, cfg.linh_drive_weight * exc_scale);
    }
    connect(linh, out, Channel::Gaba, cfg.inh_gaba_weight);
    connect(linh, out, Channel::Shunt, cfg.inh_shunt_weight);
}

NetworkSpec build_comparator_unit(int i, const ComparatorUnitConfig& cfg)
{
    cfg.validate();
    if (i < 0)
        throw RangeError("comparator unit index must be >= 0");
    NetworkSpec net;
    const auto robp = fmt::format("cmprobp_{}", i);
    const auto refp = fmt::format("cmprefp_{}", i);
    const auto linh = fmt::format("linh_{}", i);
    const auto out = fmt::format("cmpout_{}", i);
    for (const auto& name : {robp, refp, linh, out})
        net.add_population(name, 1);
    wire_comparator_unit(net, {net.address(robp, 0)}, {net.address(refp, 0)},
                         net.address(linh, 0), net.address(out, 0), cfg);
    net.add_port(PortDirection::In, "a", robp);
    net.add_port(PortDirection::In, "b", refp);
    net.add_port(PortDirection::Out, "out", out);
    return net;
}

NetworkSpec build_comparator(const ComparatorConfig& cfg)
{
    cfg.validate();
    const int n = cfg.num_coarse;
    NetworkSpec net;
    net.add_population(names::kRobotCoarse, n);
    net.add_population(names::kReference, n);
    net.add_population(names::kRobotFine, cfg.num_fine);
    net.add_population(names::kStaticRef, 1);
    net.add_population(names::kCoarseInh, n);
    net.add_population(names::kCoarseOut, n);
    net.add_population(names::kFineInh, 1);
    net.add_population(names::kFineOut, 1);
    net.add_population(names::kJoinInh, 1);
    net.add_population(names::kNextRequest, 1);

    // Stage 1: one unit per coarse position, robot_i vs reference_i.
    for (int i = 0; i < n; ++i)
        wire_comparator_unit(net, {net.address(names::kRobotCoarse, i)},
                             {net.address(names::kReference, i)},
                             net.address(names::kCoarseInh, i), net.address(names::kCoarseOut, i),
                             cfg.unit);

    // Stage 2: robot fine position vs the static reference generator.
    wire_comparator_unit(net, {net.address(names::kRobotFine, cfg.fine_static_ref)},
                         {net.address(names::kStaticRef, 0)}, net.address(names::kFineInh, 0),
                         net.address(names::kFineOut, 0), cfg.unit);
    net.add_drive(names::kStaticRef, 0, cfg.static_drive_rate);

    // Stage 3: any coarse match AND fine match.
    std::vector<Address> coarse_outs;
    for (int i = 0; i < n; ++i)
        coarse_outs.push_back(net.address(names::kCoarseOut, i));
    wire_comparator_unit(net, coarse_outs, {net.address(names::kFineOut, 0)},
                         net.address(names::kJoinInh, 0), net.address(names::kNextRequest, 0),
                         cfg.unit, cfg.join_weight_scale);

    net.add_port(PortDirection::In, names::kRobotCoarse, names::kRobotCoarse);
    net.add_port(PortDirection::In, names::kRobotFine, names::kRobotFine);
    net.add_port(PortDirection::In, names::kReference, names::kReference);
    net.add_port(PortDirection::Out, names::kNextRequest, names::kNextRequest);
    net.add_port(PortDirection::Out, "coarse_match", names::kCoarseOut);
    net.add_port(PortDirection::Out, "fine_match", names::kFineOut);
    return net;
}

// --- evaluation ---------------------------------------------------------------

int UnitTruthTable::score(int min_active_spikes) const
{
    int s = counts[0] >= min_active_spikes ? 1 : 0;
    for (std::size_t i = 1; i < counts.size(); ++i)
        s += counts[i] == 0 ? 1 : 0;
    return s;
}

UnitTruthTable evaluate_unit(const ComparatorUnitConfig& cfg, const ModelDefaults& defaults,
                             const SimOptions& options, const UnitProbe& probe)
{
    const NetworkSpec net = build_comparator_unit(0, cfg);
    const Address a = net.address("cmprobp_0", 0);
    const Address b = net.address("cmprefp_0", 0);
    const Address out = net.address("cmpout_0", 0);
    const TimeUs dur = ms_to_us(probe.duration_ms);
    const TimeUs lag = ms_to_us(cfg.window_ms);
    const TimeUs end = dur + lag + ms_to_us(probe.settle_ms);

    UnitTruthTable table;
    for (std::size_t c = 0; c < 4; ++c) {
        NetworkSimulator sim(net, defaults, options);
        const bool use_a = c == 0 || c == 1;
        const bool use_b = c == 0 || c == 2;
        if (use_a)
            sim.inject(gen_spike_train({TrainKind::Regular, probe.rate_hz, 0, dur, a, 0}));
        if (use_b) {
            const TimeUs start = c == 0 ? lag : 0;
            sim.inject(gen_spike_train({TrainKind::Regular, probe.rate_hz, start,
                                        static_cast<TimeUs>(start + dur), b, 0}));
        }
        sim.run_until(end);
        int count = 0;
        for (const auto& e : sim.spikes())
            count += e.address == out ? 1 : 0;
        table.counts[c] = count;
    }
    return table;
}

std::size_t CalibrationGrid::size() const
{
    return exc_weights.size() * linh_drive_weights.size() * gaba_weights.size()
           * shunt_weights.size();
}

ComparatorUnitConfig CalibrationGrid::at(std::size_t index) const
{
    if (index >= size())
        throw RangeError("calibration grid index out of range");
    ComparatorUnitConfig cfg;
    cfg.window_ms = window_ms;
    cfg.inh_shunt_weight = shunt_weights[index % shunt_weights.size()];
    index /= shunt_weights.size();
    cfg.inh_gaba_weight = gaba_weights[index % gaba_weights.size()];
    index /= gaba_weights.size();
    cfg.linh_drive_weight = linh_drive_weights[index % linh_drive_weights.size()];
    index /= linh_drive_weights.size();
    cfg.exc_a_weight = cfg.exc_b_weight = exc_weights[index];
    return cfg;
}

CalibrationResult calibrate_unit(const CalibrationGrid& grid, const ModelDefaults& defaults,
                                 const SimOptions& options, const UnitProbe& probe)
{
    if (grid.size() == 0)
        throw InvalidParameterError("calibration grid is empty");
    CalibrationResult best;
    int best_score = -1;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto cfg = grid.at(i);
        const auto table = evaluate_unit(cfg, defaults, options, probe);
        if (table.passes(probe.min_active_spikes))
            return {cfg, i, table};
        if (const int s = table.score(probe.min_active_spikes); s > best_score) {
            best_score = s;
            best = {cfg, i, table};
        }
    }
    const auto& c = best.config;
    throw CalibrationError(fmt::format(
        "no grid point passes the truth table; best candidate #{} (exc={}, linh_drive={}, "
        "gaba={}, shunt={}) scores {}/4 with counts both={} a={} b={} none={}",
        best.grid_index, c.exc_a_weight, c.linh_drive_weight, c.inh_gaba_weight,
        c.inh_shunt_weight, best_score, best.table.counts[0], best.table.counts[1],
        best.table.counts[2], best.table.counts[3]));
}

double unit_pass_fraction(const ComparatorUnitConfig& cfg, const ModelDefaults& defaults,
                          const SimOptions& options, const UnitProbe& probe, double cv,
                          int n_seeds, std::uint64_t seed0)
{
    if (n_seeds < 1)
        throw InvalidParameterError("n_seeds must be >= 1");
    int pass = 0;
    for (int s = 0; s < n_seeds; ++s) {
        SimOptions opt = options;
        MismatchSpec m = options.mismatch.value_or(MismatchSpec{});
        m.cv = cv;
        m.seed = seed0 + static_cast<std::uint64_t>(s);
        opt.mismatch = m;
        pass += evaluate_unit(cfg, defaults, opt, probe).passes(probe.min_active_spikes) ? 1 : 0;
    }
    return static_cast<double>(pass) / n_seeds;
}

} // namespace spikeloop
