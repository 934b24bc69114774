#include "spikeloop/config.hpp"

#include "spikeloop/errors.hpp"
#include "spikeloop/kv_text.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>

namespace spikeloop {

namespace {

constexpr std::array<std::pair<Experiment, std::string_view>, 5> kExperiments{{
    {Experiment::WtaSweep, "wta-sweep"},
    {Experiment::CmpSweep, "cmp-sweep"},
    {Experiment::ClosedLoop, "closed-loop"},
    {Experiment::Calibrate, "calibrate"},
    {Experiment::MismatchReport, "mismatch-report"},
}};

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Entry {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string& value, int line)> set;
};

[[noreturn]] void bad_value(const std::string& key, int line, const std::string& value,
                            const std::string& why)
{
    throw ConfigError(key, line, fmt::format("invalid value '{}' for '{}': {}", value, key, why));
}

template <typename F>
Entry real(std::string key, F field, double lo = -kInf, double hi = kInf)
{
    return {key, [field](const RunConfig& c) { return fmt::format("{}", field(const_cast<RunConfig&>(c))); },
            [key, field, lo, hi](RunConfig& c, const std::string& v, int line) {
                const double x = parse_double(v, key, line);
                if (x < lo || x > hi)
                    bad_value(key, line, v, fmt::format("must be in [{}, {}]", lo, hi));
                field(c) = x;
            }};
}

template <typename F>
Entry integer(std::string key, F field, std::int64_t lo, std::int64_t hi = 1 << 30)
{
    return {key, [field](const RunConfig& c) { return fmt::format("{}", field(const_cast<RunConfig&>(c))); },
            [key, field, lo, hi](RunConfig& c, const std::string& v, int line) {
                const auto x = parse_int(v, key, line);
                if (x < lo || x > hi)
                    bad_value(key, line, v, fmt::format("must be in [{}, {}]", lo, hi));
                field(c) = static_cast<std::remove_reference_t<decltype(field(c))>>(x);
            }};
}

template <typename F>
Entry boolean(std::string key, F field)
{
    return {key, [field](const RunConfig& c) { return std::string(field(const_cast<RunConfig&>(c)) ? "true" : "false"); },
            [key, field](RunConfig& c, const std::string& v, int line) {
                field(c) = parse_bool(v, key, line);
            }};
}

template <typename F>
Entry real_list(std::string key, F field, double lo = -kInf)
{
    return {key, [field](const RunConfig& c) { return fmt::format("{}", fmt::join(field(const_cast<RunConfig&>(c)), ",")); },
            [key, field, lo](RunConfig& c, const std::string& v, int line) {
                std::vector<double> out;
                for (const auto& item : split_list(v)) {
                    const double x = parse_double(item, key, line);
                    if (x < lo)
                        bad_value(key, line, v, fmt::format("items must be >= {}", lo));
                    out.push_back(x);
                }
                field(c) = std::move(out);
            }};
}

template <typename F>
Entry int_list(std::string key, F field, std::int64_t lo, std::int64_t hi)
{
    return {key, [field](const RunConfig& c) { return fmt::format("{}", fmt::join(field(const_cast<RunConfig&>(c)), ",")); },
            [key, field, lo, hi](RunConfig& c, const std::string& v, int line) {
                std::vector<int> out;
                for (const auto& item : split_list(v)) {
                    const auto x = parse_int(item, key, line);
                    if (x < lo || x > hi)
                        bad_value(key, line, v, fmt::format("items must be in [{}, {}]", lo, hi));
                    out.push_back(static_cast<int>(x));
                }
                field(c) = std::move(out);
            }};
}

std::vector<Entry> build_registry()
{
    std::vector<Entry> r;
    r.push_back({"run.experiment",
                 [](const RunConfig& c) { return std::string(experiment_name(c.experiment)); },
                 [](RunConfig& c, const std::string& v, int line) {
                     try {
                         c.experiment = parse_experiment(v);
                     } catch (const InvalidParameterError& e) {
                         bad_value("run.experiment", line, v, "unknown experiment");
                     }
                 }});
    r.push_back({"run.seed", [](const RunConfig& c) { return fmt::format("{}", c.seed); },
                 [](RunConfig& c, const std::string& v, int line) {
                     c.seed = parse_u64(v, "run.seed", line);
                 }});
    r.push_back(real("run.dt", [](RunConfig& c) -> double& { return c.dt; }, 1e-6, 1e-2));
    r.push_back(real("run.cv", [](RunConfig& c) -> double& { return c.cv; }, 0.0));
    r.push_back(real("run.synaptic_delay", [](RunConfig& c) -> double& { return c.synaptic_delay; }, 0.0));
    r.push_back({"run.mismatch_parameters",
                 [](const RunConfig& c) { return fmt::format("{}", fmt::join(c.mismatch_parameters, ",")); },
                 [](RunConfig& c, const std::string& v, int line) {
                     std::set<std::string> known;
                     for (auto n : neuron_mismatch_names())
                         known.emplace(n);
                     for (auto n : synapse_mismatch_names())
                         known.emplace(n);
                     std::set<std::string> mask;
                     for (const auto& item : split_list(v)) {
                         if (!known.count(item))
                             bad_value("run.mismatch_parameters", line, v,
                                       fmt::format("unknown parameter '{}'", item));
                         mask.insert(item);
                     }
                     c.mismatch_parameters = std::move(mask);
                 }});
    r.push_back({"run.out", [](const RunConfig& c) { return c.output_dir; },
                 [](RunConfig& c, const std::string& v, int line) {
                     if (v.empty())
                         bad_value("run.out", line, v, "must not be empty");
                     c.output_dir = v;
                 }});
    r.push_back(boolean("run.svg", [](RunConfig& c) -> bool& { return c.svg; }));

    for (const auto& f : defaults_fields()) {
        r.push_back({f.key, [get = f.get](const RunConfig& c) { return fmt::format("{}", get(c.defaults)); },
                     [key = f.key, set = f.set](RunConfig& c, const std::string& v, int line) {
                         set(c.defaults, parse_double(v, key, line));
                     }});
    }

    r.push_back(integer("wta.num_pos_ref", [](RunConfig& c) -> int& { return c.wta.num_pos_ref; }, 1, 256));
    r.push_back(integer("wta.offset", [](RunConfig& c) -> int& { return c.wta.offset; }, 0, 255));
    r.push_back(real("wta.ff_weight", [](RunConfig& c) -> double& { return c.wta.ff_weight; }, 0.0));
    r.push_back(real("wta.lat_inh_weight", [](RunConfig& c) -> double& { return c.wta.lat_inh_weight; }, 0.0));
    r.push_back(int_list("wta.inputs", [](RunConfig& c) -> std::vector<int>& { return c.wta_inputs; }, 0, 255));

    r.push_back(integer("cmp.num_fine", [](RunConfig& c) -> int& { return c.comparator.num_fine; }, 1, 256));
    r.push_back(integer("cmp.fine_static_ref", [](RunConfig& c) -> int& { return c.comparator.fine_static_ref; }, 0, 255));
    r.push_back(real("cmp.exc_a_weight", [](RunConfig& c) -> double& { return c.comparator.unit.exc_a_weight; }, 0.0));
    r.push_back(real("cmp.exc_b_weight", [](RunConfig& c) -> double& { return c.comparator.unit.exc_b_weight; }, 0.0));
    r.push_back(real("cmp.inh_gaba_weight", [](RunConfig& c) -> double& { return c.comparator.unit.inh_gaba_weight; }, 0.0));
    r.push_back(real("cmp.inh_shunt_weight", [](RunConfig& c) -> double& { return c.comparator.unit.inh_shunt_weight; }, 0.0));
    r.push_back(real("cmp.linh_drive_weight", [](RunConfig& c) -> double& { return c.comparator.unit.linh_drive_weight; }, 0.0));
    r.push_back(real("cmp.window_ms", [](RunConfig& c) -> double& { return c.comparator.unit.window_ms; }, 0.0));
    r.push_back(real("cmp.static_drive_rate", [](RunConfig& c) -> double& { return c.comparator.static_drive_rate; }, 0.0));
    r.push_back(real("cmp.join_weight_scale", [](RunConfig& c) -> double& { return c.comparator.join_weight_scale; }, 0.0));
    r.push_back(integer("cmp.threshold", [](RunConfig& c) -> int& { return c.cmp_threshold; }, 1));

    r.push_back(real("robot.velocity_gain", [](RunConfig& c) -> double& { return c.joint.velocity_gain; }, 0.0));
    r.push_back(real("robot.damping_tau", [](RunConfig& c) -> double& { return c.joint.damping_tau; }, 0.0));
    r.push_back(real("robot.angle_min", [](RunConfig& c) -> double& { return c.joint.angle_min; }));
    r.push_back(real("robot.angle_max", [](RunConfig& c) -> double& { return c.joint.angle_max; }));
    r.push_back(real("robot.update_dt", [](RunConfig& c) -> double& { return c.joint.update_dt; }, 0.0));
    r.push_back(real("robot.kp", [](RunConfig& c) -> double& { return c.spid.kp; }, 0.0));
    r.push_back(real("robot.ki", [](RunConfig& c) -> double& { return c.spid.ki; }, 0.0));
    r.push_back(real("robot.kd", [](RunConfig& c) -> double& { return c.spid.kd; }, 0.0));
    r.push_back(real("robot.pfm_max_rate", [](RunConfig& c) -> double& { return c.spid.pfm_max_rate; }, 0.0));
    r.push_back(real("robot.rate_window_ms", [](RunConfig& c) -> double& { return c.spid.rate_window_ms; }, 0.0));
    r.push_back(real("robot.integral_clamp", [](RunConfig& c) -> double& { return c.spid.integral_clamp; }, 0.0));
    r.push_back(real("robot.report_period_ms", [](RunConfig& c) -> double& { return c.encoder.report_period_ms; }, 0.0));
    r.push_back(real("robot.burst_rate", [](RunConfig& c) -> double& { return c.encoder.burst_rate; }, 0.0));

    r.push_back(integer("loop.next_request_threshold", [](RunConfig& c) -> int& { return c.loop.next_request_threshold; }, 1));
    r.push_back(real("loop.next_request_window_ms", [](RunConfig& c) -> double& { return c.loop.next_request_window_ms; }, 0.0));
    r.push_back(real("loop.max_sim_time", [](RunConfig& c) -> double& { return c.loop.max_sim_time; }, 0.0));
    r.push_back(real("loop.hold_ms", [](RunConfig& c) -> double& { return c.loop.hold_ms; }, 0.0));
    r.push_back(real("loop.winner_window_ms", [](RunConfig& c) -> double& { return c.loop.winner_window_ms; }, 0.0));
    r.push_back(real("loop.initial_angle", [](RunConfig& c) -> double& { return c.loop.initial_angle; }));
    r.push_back(boolean("loop.direction_aware", [](RunConfig& c) -> bool& { return c.loop.direction_aware; }));
    r.push_back(int_list("loop.trajectory", [](RunConfig& c) -> std::vector<int>& { return c.trajectory.points; }, 0, 255));
    r.push_back({"loop.trajectory_name", [](const RunConfig& c) { return c.trajectory.name; },
                 [](RunConfig& c, const std::string& v, int) { c.trajectory.name = v; }});

    r.push_back(real("sweep.dwell_ms", [](RunConfig& c) -> double& { return c.sweep.dwell_ms; }, 0.0));
    r.push_back(real("sweep.gap_ms", [](RunConfig& c) -> double& { return c.sweep.gap_ms; }, 0.0));
    r.push_back(real("sweep.rate_hz", [](RunConfig& c) -> double& { return c.sweep.rate_hz; }, 0.0));
    r.push_back(real("sweep.max_sim_time", [](RunConfig& c) -> double& { return c.sweep.max_sim_time; }, 0.0));

    r.push_back(real_list("mismatch.cv_list", [](RunConfig& c) -> std::vector<double>& { return c.cv_list; }, 0.0));
    r.push_back(integer("mismatch.n_seeds", [](RunConfig& c) -> int& { return c.n_seeds; }, 1));
    r.push_back(integer("mismatch.threads", [](RunConfig& c) -> unsigned& { return c.threads; }, 0, 1024));

    r.push_back(real_list("calib.exc_weights", [](RunConfig& c) -> std::vector<double>& { return c.calib_grid.exc_weights; }, 0.0));
    r.push_back(real_list("calib.linh_drive_weights", [](RunConfig& c) -> std::vector<double>& { return c.calib_grid.linh_drive_weights; }, 0.0));
    r.push_back(real_list("calib.gaba_weights", [](RunConfig& c) -> std::vector<double>& { return c.calib_grid.gaba_weights; }, 0.0));
    r.push_back(real_list("calib.shunt_weights", [](RunConfig& c) -> std::vector<double>& { return c.calib_grid.shunt_weights; }, 0.0));
    r.push_back(real("calib.window_ms", [](RunConfig& c) -> double& { return c.calib_grid.window_ms; }, 0.0));
    r.push_back(real("calib.rate_hz", [](RunConfig& c) -> double& { return c.calib_probe.rate_hz; }, 0.0));
    r.push_back(real("calib.duration_ms", [](RunConfig& c) -> double& { return c.calib_probe.duration_ms; }, 0.0));
    r.push_back(real("calib.settle_ms", [](RunConfig& c) -> double& { return c.calib_probe.settle_ms; }, 0.0));
    r.push_back(integer("calib.min_active_spikes", [](RunConfig& c) -> int& { return c.calib_probe.min_active_spikes; }, 1));
    r.push_back(integer("calib.check_seeds", [](RunConfig& c) -> int& { return c.calib_check_seeds; }, 1));
    r.push_back(real("calib.check_cv", [](RunConfig& c) -> double& { return c.calib_check_cv; }, 0.0));
    return r;
}

const std::vector<Entry>& registry()
{
    static const std::vector<Entry> r = build_registry();
    return r;
}

const Entry* find_entry(const std::string& key)
{
    for (const auto& e : registry())
        if (e.key == key)
            return &e;
    return nullptr;
}

void apply(RunConfig& cfg, const std::string& key, const std::string& value, int line)
{
    if (key == "run.version" || key == "defaults.version")
        return;
    const Entry* e = find_entry(key);
    if (!e)
        throw ConfigError(key, line, fmt::format("unknown key '{}'", key));
    e->set(cfg, value, line);
}

} // namespace

std::string_view experiment_name(Experiment e)
{
    for (const auto& [k, name] : kExperiments)
        if (k == e)
            return name;
    return "unknown";
}

Experiment parse_experiment(std::string_view name)
{
    for (const auto& [k, n] : kExperiments)
        if (n == name)
            return k;
    throw InvalidParameterError(fmt::format("unknown experiment '{}'", name));
}

void RunConfig::sync()
{
    comparator.num_coarse = wta.num_pos_ref;
    encoder.num_coarse = wta.num_pos_ref;
    encoder.num_fine = comparator.num_fine;
    encoder.angle_min = joint.angle_min;
    encoder.angle_max = joint.angle_max;
}

void RunConfig::validate() const
{
    auto require = [](bool ok, const char* what) {
        if (!ok)
            throw InvalidParameterError(what);
    };
    defaults.validate();
    wta.validate();
    comparator.validate();
    joint.validate();
    spid.validate();
    encoder.validate();
    loop.validate();
    sweep.validate();
    require(comparator.num_coarse == wta.num_pos_ref, "comparator and wta sizes differ");
    require(cmp_threshold >= 1, "cmp.threshold must be >= 1");
    require(!cv_list.empty(), "mismatch.cv_list must not be empty");
    require(n_seeds >= 1, "mismatch.n_seeds must be >= 1");
    require(!calib_grid.exc_weights.empty() && !calib_grid.linh_drive_weights.empty() &&
                !calib_grid.gaba_weights.empty() && !calib_grid.shunt_weights.empty(),
            "calibration grid axes must not be empty");
    require(calib_check_seeds >= 1, "calib.check_seeds must be >= 1");
    for (int i : wta_inputs)
        require(i < wta.num_pos_ref, "wta.inputs must be < wta.num_pos_ref");
    require(!trajectory.points.empty(), "loop.trajectory must not be empty");
    for (int p : trajectory.points)
        require(p < wta.num_pos_ref, "loop.trajectory points must be < wta.num_pos_ref");
}

ExperimentContext RunConfig::context() const
{
    ExperimentContext ctx;
    ctx.defaults = defaults;
    ctx.sim.dt = dt;
    ctx.sim.synaptic_delay = synaptic_delay;
    if (cv > 0)
        ctx.sim.mismatch = MismatchSpec{cv, seed, mismatch_parameters};
    return ctx;
}

ClosedLoopSetup RunConfig::closed_loop_setup() const
{
    return {wta, comparator, joint, spid, encoder, loop};
}

RunConfig parse_config(std::istream* in, const std::vector<ConfigOverride>& overrides,
                       RunConfig base)
{
    RunConfig cfg = std::move(base);
    if (in)
        for (const auto& line : read_kv_lines(*in))
            apply(cfg, line.key, line.value, line.line_no);
    for (const auto& [key, value] : overrides)
        apply(cfg, key, value, 0);
    cfg.sync();
    try {
        cfg.validate();
    } catch (const InvalidParameterError& e) {
        throw ConfigError("", 0, e.what());
    }
    return cfg;
}

void write_manifest(std::ostream& out, const RunConfig& cfg)
{
    out << "# spikeloop run manifest\n";
    out << fmt::format("run.version = {}\n", SPIKELOOP_VERSION);
    for (const auto& e : registry())
        out << e.key << " = " << e.get(cfg) << '\n';
}

std::vector<std::string> config_keys()
{
    std::vector<std::string> keys;
    for (const auto& e : registry())
        keys.push_back(e.key);
    return keys;
}

} // namespace spikeloop
