// spikeloop: run the sweeps, the closed loop, calibration and the mismatch
// report, writing CSV/AER logs, SVG figures and a manifest per run.

#include "spikeloop/config.hpp"
#include "spikeloop/errors.hpp"
#include "spikeloop/kv_text.hpp"
#include "spikeloop/loop.hpp"
#include "spikeloop/plot.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace spikeloop;

namespace {

enum Exit { kOk = 0, kInvariant = 1, kUsage = 2, kRuntime = 3 };

struct Flags {
    std::string config;
    std::string defaults;
    std::optional<std::uint64_t> seed;
    std::optional<double> dt;
    std::optional<double> cv;
    std::optional<int> offset;
    std::string out;
    std::optional<bool> svg;
    std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Flags& f)
{
    cmd->add_option("--config", f.config, "run config or manifest (section.key = value)");
    cmd->add_option("--defaults", f.defaults, "neuron/synapse defaults table");
    cmd->add_option("--seed", f.seed, "64-bit seed");
    cmd->add_option("--dt", f.dt, "integration step, seconds");
    cmd->add_option("--cv", f.cv, "mismatch coefficient of variation");
    cmd->add_option("--offset", f.offset, "shifted-WTA offset");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_flag("--svg,!--no-svg", f.svg, "emit SVG figures");
    cmd->add_option("--set", f.sets, "extra override KEY=VALUE (repeatable)");
}

RunConfig resolve(Experiment exp, const Flags& f)
{
    RunConfig base;
    if (!f.defaults.empty()) {
        std::ifstream in(f.defaults);
        if (!in)
            throw ConfigError("", 0, fmt::format("cannot open defaults table '{}'", f.defaults));
        base.defaults = read_defaults_table(in);
    }
    std::vector<ConfigOverride> ov;
    ov.emplace_back("run.experiment", std::string(experiment_name(exp)));
    if (f.seed)
        ov.emplace_back("run.seed", std::to_string(*f.seed));
    if (f.dt)
        ov.emplace_back("run.dt", fmt::format("{}", *f.dt));
    if (f.cv)
        ov.emplace_back("run.cv", fmt::format("{}", *f.cv));
    if (f.offset)
        ov.emplace_back("wta.offset", std::to_string(*f.offset));
    if (!f.out.empty())
        ov.emplace_back("run.out", f.out);
    if (f.svg)
        ov.emplace_back("run.svg", *f.svg ? "true" : "false");
    for (const auto& s : f.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError(s, 0, fmt::format("--set expects KEY=VALUE, got '{}'", s));
        ov.emplace_back(std::string(trim(std::string_view(s).substr(0, eq))),
                        std::string(trim(std::string_view(s).substr(eq + 1))));
    }
    if (f.config.empty())
        return parse_config(nullptr, ov, base);
    std::ifstream in(f.config);
    if (!in)
        throw ConfigError("", 0, fmt::format("cannot open config '{}'", f.config));
    return parse_config(&in, ov, base);
}

class RunDir {
public:
    explicit RunDir(const RunConfig& cfg) : dir_(cfg.output_dir)
    {
        fs::create_directories(dir_);
        auto& m = open("manifest.txt");
        write_manifest(m, cfg);
        m.close();
    }

    std::ofstream& open(const std::string& name, bool binary = false)
    {
        file_.close();
        file_.clear();
        file_.open(dir_ / name, binary ? std::ios::binary : std::ios::out);
        if (!file_)
            throw Error(fmt::format("cannot write '{}'", (dir_ / name).string()));
        return file_;
    }

    template <typename Fn>
    void write(const std::string& name, Fn&& fn, bool binary = false)
    {
        auto& f = open(name, binary);
        fn(f);
        f.close();
        if (!f)
            throw Error(fmt::format("error writing '{}'", (dir_ / name).string()));
    }

    const fs::path& path() const { return dir_; }

private:
    fs::path dir_;
    std::ofstream file_;
};

void write_spike_logs(RunDir& dir, const NetworkSpec& net, const std::vector<Event>& spikes,
                      const RunConfig& cfg, const RasterLayout& layout)
{
    const auto raster = to_raster(net, spikes);
    dir.write("network.txt", [&](std::ostream& o) { write_network(o, net); });
    dir.write("raster.csv", [&](std::ostream& o) { write_raster_csv(o, raster); });
    dir.write("spikes.aer", [&](std::ostream& o) { write_aer_log(o, spikes); }, true);
    dir.write("spikes_aer.csv", [&](std::ostream& o) { write_aer_csv(o, spikes); });
    if (cfg.svg)
        dir.write("raster.svg", [&](std::ostream& o) { o << emit_raster_svg(raster, layout); });
}

int run_wta(const RunConfig& cfg)
{
    RunDir dir(cfg);
    const auto res = run_wta_sweep(cfg.wta, cfg.sweep, cfg.context(), cfg.wta_inputs);
    auto layout = layout_for(res.network, {names::kOuterRing, names::kInnerRing});
    layout.title = fmt::format("shifted WTA sweep, N={} x={}", cfg.wta.num_pos_ref, cfg.wta.offset);
    write_spike_logs(dir, res.network, res.spikes, cfg, layout);

    bool ok = true;
    dir.write("winners.csv", [&](std::ostream& o) {
        o << "input,expected,winner,selectivity\n";
        for (std::size_t k = 0; k < res.inputs.size(); ++k) {
            const int expected = shifted_target(res.inputs[k], cfg.wta.offset, cfg.wta.num_pos_ref);
            ok = ok && res.winners[k] == expected;
            o << fmt::format("{},{},{},{}\n", res.inputs[k], expected, res.winners[k],
                             res.selectivity(k));
            fmt::print("input {} -> winner {} (expected {}), selectivity {}\n", res.inputs[k],
                       res.winners[k], expected, res.selectivity(k));
        }
    });
    return ok ? kOk : kInvariant;
}

int run_cmp(const RunConfig& cfg)
{
    RunDir dir(cfg);
    const auto res = run_comparator_sweep(cfg.comparator, cfg.sweep, cfg.context(), cfg.cmp_threshold);
    auto layout = layout_for(res.network, {names::kRobotCoarse, names::kReference, names::kCoarseInh,
                                           names::kCoarseOut});
    layout.title = fmt::format("comparator sweep, N={}", cfg.comparator.num_coarse);
    write_spike_logs(dir, res.network, res.spikes, cfg, layout);
    dir.write("truth_table.csv", [&](std::ostream& o) {
        o << "robot,reference,count,active\n";
        for (std::size_t i = 0; i < res.counts.size(); ++i)
            for (std::size_t j = 0; j < res.counts[i].size(); ++j)
                o << fmt::format("{},{},{},{}\n", i, j, res.counts[i][j], res.truth[i][j] ? 1 : 0);
    });
    for (const auto& row : res.counts) {
        for (int c : row)
            fmt::print("{:5}", c);
        fmt::print("\n");
    }
    const bool ok = res.diagonal_only(cfg.cmp_threshold);
    fmt::print("diagonal only: {}\n", ok ? "yes" : "no");
    return ok ? kOk : kInvariant;
}

int run_loop(const RunConfig& cfg)
{
    RunDir dir(cfg);
    const auto res = run_closed_loop(cfg.trajectory, cfg.closed_loop_setup(), cfg.context());
    auto layout = layout_for(res.network,
                             {names::kOuterRing, names::kInnerRing, names::kReference, names::kRobotCoarse,
                              names::kRobotFine, names::kCoarseOut, names::kFineOut, names::kNextRequest});
    layout.title = fmt::format("closed loop, trajectory {}", cfg.trajectory.name);
    write_spike_logs(dir, res.network, res.spikes, cfg, layout);
    dir.write("trace.csv", [&](std::ostream& o) { write_joint_trace_csv(o, res.trace); });
    dir.write("next_requests.csv", [&](std::ostream& o) { write_next_request_csv(o, res.next_requests); });
    dir.write("points.csv", [&](std::ostream& o) {
        o << "point_index,reference,wta_input,intended_setpoint,setpoint,started_us\n";
        for (const auto& p : res.points)
            o << fmt::format("{},{},{},{},{},{}\n", p.point_index, p.reference, p.wta_input,
                             p.intended_setpoint, p.setpoint, p.started);
    });
    if (cfg.svg)
        dir.write("trace.svg", [&](std::ostream& o) {
            o << emit_trace_svg(res.trace, cfg.encoder, fmt::format("joint angle, trajectory {}", cfg.trajectory.name));
        });

    for (const auto& p : res.points)
        fmt::print("point {} ref {} setpoint {} (intended {})\n", p.point_index, p.reference,
                   p.setpoint, p.intended_setpoint);
    fmt::print("next-requests: {}, completed: {}, end {} s\n", res.next_requests.size(),
               res.completed ? "yes" : "no", res.end_time * 1e-6);
    const auto violations = res.invariant_violations();
    for (const auto& v : violations)
        fmt::print(stderr, "invariant: {}\n", v);
    if (!res.completed) {
        fmt::print(stderr, "timeout: trajectory not completed within {} s\n", cfg.loop.max_sim_time);
        return kInvariant;
    }
    return violations.empty() ? kOk : kInvariant;
}

int run_calibrate(const RunConfig& cfg)
{
    RunDir dir(cfg);
    const auto ctx = cfg.context();
    CalibrationResult res;
    try {
        res = calibrate_unit(cfg.calib_grid, ctx.defaults, ctx.sim, cfg.calib_probe);
    } catch (const CalibrationError& e) {
        fmt::print(stderr, "{}\n", e.what());
        return kInvariant;
    }
    const double frac = unit_pass_fraction(res.config, ctx.defaults, ctx.sim, cfg.calib_probe,
                                           cfg.calib_check_cv, cfg.calib_check_seeds, cfg.seed);
    const auto& u = res.config;
    dir.write("calibrated.conf", [&](std::ostream& o) {
        o << fmt::format("# grid point {} of {}\n", res.grid_index, cfg.calib_grid.size());
        o << fmt::format("cmp.exc_a_weight = {}\ncmp.exc_b_weight = {}\ncmp.linh_drive_weight = {}\n"
                         "cmp.inh_gaba_weight = {}\ncmp.inh_shunt_weight = {}\ncmp.window_ms = {}\n",
                         u.exc_a_weight, u.exc_b_weight, u.linh_drive_weight, u.inh_gaba_weight,
                         u.inh_shunt_weight, u.window_ms);
    });
    dir.write("calibration.csv", [&](std::ostream& o) {
        o << "grid_index,both,a_only,b_only,none,check_cv,check_seeds,pass_fraction\n";
        const auto& c = res.table.counts;
        o << fmt::format("{},{},{},{},{},{},{},{}\n", res.grid_index, c[0], c[1], c[2], c[3],
                         cfg.calib_check_cv, cfg.calib_check_seeds, frac);
    });
    fmt::print("grid point {}: exc {} linh {} gaba {} shunt {}; counts {} {} {} {}\n", res.grid_index,
               u.exc_a_weight, u.linh_drive_weight, u.inh_gaba_weight, u.inh_shunt_weight,
               res.table.counts[0], res.table.counts[1], res.table.counts[2], res.table.counts[3]);
    fmt::print("pass fraction at cv={} over {} seeds: {}\n", cfg.calib_check_cv, cfg.calib_check_seeds, frac);
    return kOk;
}

int run_mismatch(const RunConfig& cfg)
{
    RunDir dir(cfg);
    auto ctx = cfg.context();
    ctx.sim.mismatch = MismatchSpec{0.0, cfg.seed, cfg.mismatch_parameters};
    const auto rows = mismatch_report(cfg.comparator, cfg.sweep, ctx, cfg.cmp_threshold, cfg.cv_list,
                                      cfg.n_seeds, cfg.seed, cfg.threads);
    dir.write("mismatch.csv", [&](std::ostream& o) { write_mismatch_csv(o, rows); });
    for (const auto& r : rows) {
        fmt::print("cv {}: pass fraction {} over {} seeds", r.cv, r.pass_fraction, r.n_seeds);
        if (r.timeouts)
            fmt::print(" ({} timed out, counted as failures)", r.timeouts);
        fmt::print("\n");
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"spiking trajectory-interpolation loop simulator"};
    app.set_version_flag("--version", SPIKELOOP_VERSION);
    app.require_subcommand(1);

    Flags flags;
    struct Cmd {
        Experiment exp;
        const char* help;
        int (*run)(const RunConfig&);
    };
    const Cmd cmds[] = {
        {Experiment::WtaSweep, "stimulate each outer-ring input in turn", run_wta},
        {Experiment::CmpSweep, "drive every (robot, reference) coarse pair", run_cmp},
        {Experiment::ClosedLoop, "run the trajectory through the SNN and the joint", run_loop},
        {Experiment::Calibrate, "grid-search the comparison unit weights", run_calibrate},
        {Experiment::MismatchReport, "comparator pass fraction versus mismatch cv", run_mismatch},
    };
    std::vector<std::pair<CLI::App*, const Cmd*>> subs;
    for (const auto& c : cmds) {
        auto* sub = app.add_subcommand(std::string(experiment_name(c.exp)), c.help);
        add_common(sub, flags);
        subs.emplace_back(sub, &c);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    for (const auto& [sub, cmd] : subs) {
        if (!sub->parsed())
            continue;
        try {
            const RunConfig cfg = resolve(cmd->exp, flags);
            return cmd->run(cfg);
        } catch (const ConfigError& e) {
            if (!e.key().empty() && std::string(e.what()).find(e.key()) == std::string::npos)
                fmt::print(stderr, "config error ({}): {}\n", e.key(), e.what());
            else
                fmt::print(stderr, "config error: {}\n", e.what());
            return kUsage;
        } catch (const std::exception& e) {
            fmt::print(stderr, "error: {}\n", e.what());
            return kRuntime;
        }
    }
    return kUsage;
}
