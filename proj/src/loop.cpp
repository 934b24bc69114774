#include "spikeloop/loop.hpp"

#include "spikeloop/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <thread>

namespace spikeloop {

namespace {

TimeUs ms_to_us(double ms) { return static_cast<TimeUs>(std::lround(ms * 1e3)); }
TimeUs s_to_us(double s) { return static_cast<TimeUs>(std::llround(s * 1e6)); }

void require(bool ok, const std::string& what)
{
    if (!ok)
        throw InvalidParameterError(what);
}

int argmax_or_none(const std::vector<double>& v)
{
    int best = -1;
    double best_v = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] > best_v) {
            best_v = v[i];
            best = static_cast<int>(i);
        }
    return best;
}

int sign(int v) { return (v > 0) - (v < 0); }

// Replayable list of timed events with a read cursor.
struct EventSource {
    std::vector<Event> events;
    std::size_t cursor = 0;

    void reset(std::vector<Event> e)
    {
        events = std::move(e);
        cursor = 0;
    }

    template <typename Fn>
    void drain_before(TimeUs t_end, Fn&& fn)
    {
        while (cursor < events.size() && events[cursor].time < t_end)
            fn(events[cursor++]);
    }
};

} // namespace

void SweepConfig::validate() const
{
    require(dwell_ms > 0 && gap_ms >= 0, "sweep: dwell must be > 0 and gap >= 0");
    require(rate_hz > 0, "sweep: rate must be > 0");
    require(max_sim_time > 0, "sweep: max_sim_time must be > 0");
}

double WtaSweepResult::selectivity(std::size_t stimulus) const
{
    const int w = winners.at(stimulus);
    if (w < 0)
        return 0.0;
    const auto& c = inner_counts.at(stimulus);
    int other = 0;
    for (std::size_t j = 0; j < c.size(); ++j)
        if (static_cast<int>(j) != w)
            other = std::max(other, c[j]);
    if (other == 0)
        return std::numeric_limits<double>::infinity();
    return static_cast<double>(c[static_cast<std::size_t>(w)]) / other;
}

WtaSweepResult run_wta_sweep(const ShiftedWtaConfig& cfg, const SweepConfig& sweep,
                             const ExperimentContext& ctx, std::vector<int> inputs)
{
    cfg.validate();
    sweep.validate();
    const int n = cfg.num_pos_ref;
    if (inputs.empty())
        for (int i = 0; i < n; ++i)
            inputs.push_back(i);
    for (int i : inputs)
        if (i < 0 || i >= n)
            throw RangeError(fmt::format("wta sweep input {} outside [0, {})", i, n));

    const TimeUs dwell = ms_to_us(sweep.dwell_ms);
    const TimeUs slot = dwell + ms_to_us(sweep.gap_ms);
    const double total_s = static_cast<double>(slot) * 1e-6 * static_cast<double>(inputs.size());
    if (total_s > sweep.max_sim_time)
        throw TimeoutError(fmt::format("wta sweep needs {} s, budget is {} s", total_s,
                                       sweep.max_sim_time));

    WtaSweepResult res;
    res.network = build_shifted_wta(cfg);
    res.inputs = inputs;
    NetworkSimulator sim(res.network, ctx.defaults, ctx.sim);
    const auto outer = res.network.population_id(names::kOuterRing);
    const auto inner = res.network.population_id(names::kInnerRing);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const TimeUs start = slot * static_cast<TimeUs>(k);
        sim.inject(gen_spike_train({TrainKind::Regular, sweep.rate_hz, start,
                                    static_cast<TimeUs>(start + dwell),
                                    one_hot_encode(inputs[k], outer, n), 0}));
    }
    sim.run_until(slot * static_cast<TimeUs>(inputs.size()));
    res.spikes = sim.spikes();

    res.inner_counts.assign(inputs.size(), std::vector<int>(static_cast<std::size_t>(n), 0));
    for (const auto& e : res.spikes) {
        if (e.address.population != inner)
            continue;
        const std::size_t k = e.time / slot;
        if (k < inputs.size())
            ++res.inner_counts[k][e.address.neuron];
    }
    for (const auto& counts : res.inner_counts) {
        int w = -1;
        int best = 0;
        for (std::size_t j = 0; j < counts.size(); ++j)
            if (counts[j] > best) {
                best = counts[j];
                w = static_cast<int>(j);
            }
        res.winners.push_back(w);
    }
    return res;
}

bool ComparatorSweepResult::diagonal_only(int threshold) const
{
    for (std::size_t i = 0; i < counts.size(); ++i)
        for (std::size_t j = 0; j < counts[i].size(); ++j) {
            if (i == j && counts[i][j] < threshold)
                return false;
            if (i != j && counts[i][j] != 0)
                return false;
        }
    return true;
}

ComparatorSweepResult run_comparator_sweep(const ComparatorConfig& cfg, const SweepConfig& sweep,
                                           const ExperimentContext& ctx, int threshold)
{
    cfg.validate();
    sweep.validate();
    require(threshold >= 1, "comparator sweep: threshold must be >= 1");
    const int n = cfg.num_coarse;
    const TimeUs dwell = ms_to_us(sweep.dwell_ms);
    const TimeUs slot = dwell + ms_to_us(sweep.gap_ms);
    const std::size_t pairs = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
    const double total_s = static_cast<double>(slot) * 1e-6 * static_cast<double>(pairs);
    if (total_s > sweep.max_sim_time)
        throw TimeoutError(fmt::format("comparator sweep needs {} s, budget is {} s", total_s,
                                       sweep.max_sim_time));

    ComparatorSweepResult res;
    res.network = build_comparator(cfg);
    NetworkSimulator sim(res.network, ctx.defaults, ctx.sim);
    const auto robot = res.network.population_id(names::kRobotCoarse);
    const auto ref = res.network.population_id(names::kReference);
    const auto out = res.network.population_id(names::kCoarseOut);

    for (std::size_t k = 0; k < pairs; ++k) {
        const int i = static_cast<int>(k) / n;
        const int j = static_cast<int>(k) % n;
        const TimeUs start = slot * static_cast<TimeUs>(k);
        const TimeUs stop = start + dwell;
        auto a = gen_spike_train(
            {TrainKind::Regular, sweep.rate_hz, start, stop, one_hot_encode(i, robot, n), 0});
        auto b = gen_spike_train(
            {TrainKind::Regular, sweep.rate_hz, start, stop, one_hot_encode(j, ref, n), 0});
        sim.inject(merge_events(std::move(a), b));
    }
    sim.run_until(slot * static_cast<TimeUs>(pairs));
    res.spikes = sim.spikes();

    res.counts.assign(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(n), 0));
    for (const auto& e : res.spikes) {
        if (e.address.population != out)
            continue;
        const std::size_t k = e.time / slot;
        if (k < pairs)
            ++res.counts[k / static_cast<std::size_t>(n)][k % static_cast<std::size_t>(n)];
    }
    res.truth.assign(static_cast<std::size_t>(n), std::vector<bool>(static_cast<std::size_t>(n)));
    for (std::size_t i = 0; i < res.counts.size(); ++i)
        for (std::size_t j = 0; j < res.counts[i].size(); ++j)
            res.truth[i][j] = res.counts[i][j] >= threshold;
    return res;
}

// --- closed loop ------------------------------------------------------------------

void LoopConfig::validate() const
{
    require(next_request_threshold >= 1, "loop: next_request_threshold must be >= 1");
    require(next_request_window_ms > 0, "loop: next_request_window must be > 0");
    require(max_sim_time > 0, "loop: max_sim_time must be > 0");
    require(hold_ms >= 0, "loop: hold must be >= 0");
    require(winner_window_ms > 0, "loop: winner_window must be > 0");
}

void ClosedLoopSetup::validate(const Trajectory& trajectory) const
{
    wta.validate();
    comparator.validate();
    joint.validate();
    spid.validate();
    encoder.validate();
    loop.validate();
    require(comparator.num_coarse == wta.num_pos_ref && encoder.num_coarse == wta.num_pos_ref,
            "closed loop: wta, comparator and encoder must agree on the number of coarse positions");
    require(comparator.num_fine == encoder.num_fine,
            "closed loop: comparator and encoder must agree on the number of fine positions");
    require(encoder.angle_min == joint.angle_min && encoder.angle_max == joint.angle_max,
            "closed loop: encoder and joint ranges differ");
    require(loop.initial_angle >= joint.angle_min && loop.initial_angle <= joint.angle_max,
            "closed loop: initial angle outside the joint range");
    require(!trajectory.points.empty(), "trajectory is empty");
    for (int p : trajectory.points)
        require(p >= 0 && p < wta.num_pos_ref,
                fmt::format("trajectory point {} outside [0, {})", p, wta.num_pos_ref));
}

int intended_setpoint(const Trajectory& trajectory, std::size_t n, int offset, int num_pos,
                      bool direction_aware)
{
    const auto& pts = trajectory.points;
    const int p = pts.at(n);
    if (n + 1 == pts.size())
        return p;
    if (!direction_aware)
        return shifted_target(p, offset, num_pos);
    const int next_dir = sign(pts[n + 1] - p);
    const int prev_dir = n > 0 ? sign(p - pts[n - 1]) : next_dir;
    if (next_dir == 0 || (prev_dir != 0 && prev_dir != next_dir))
        return p;
    if (next_dir > 0)
        return (p + offset) % num_pos;
    return ((p - offset) % num_pos + num_pos) % num_pos;
}

std::vector<std::string> ClosedLoopResult::invariant_violations() const
{
    std::vector<std::string> out;
    auto coarse_at = [&](TimeUs t) -> int {
        int c = -1;
        for (const auto& row : trace) {
            if (row.time > t)
                break;
            c = row.coarse;
        }
        return c;
    };
    for (std::size_t k = 0; k < next_requests.size(); ++k) {
        const auto& nr = next_requests[k];
        if (nr.point_index != static_cast<int>(k))
            out.push_back(fmt::format("next-request #{} is for point {}", k, nr.point_index));
        if (nr.point_index < 0 || static_cast<std::size_t>(nr.point_index) >= points.size())
            continue;
        const int ref = points[static_cast<std::size_t>(nr.point_index)].reference;
        const int c = coarse_at(nr.time);
        if (c != ref)
            out.push_back(fmt::format("next-request at {} us while robot coarse {} != reference {}",
                                      nr.time, c, ref));
    }
    for (std::size_t n = 0; n < points.size(); ++n) {
        const auto& p = points[n];
        if (p.setpoint != p.intended_setpoint)
            out.push_back(fmt::format("point {}: setpoint {} != intended {}", n, p.setpoint,
                                      p.intended_setpoint));
        if (n > 0) {
            if (n - 1 >= next_requests.size())
                out.push_back(fmt::format("point {} emitted without a next-request", n));
            else if (p.started < next_requests[n - 1].time)
                out.push_back(fmt::format("point {} emitted before the next-request for point {}",
                                          n, n - 1));
        }
    }
    return out;
}

ClosedLoopResult run_closed_loop(const Trajectory& trajectory, const ClosedLoopSetup& setup,
                                 const ExperimentContext& ctx)
{
    setup.validate(trajectory);
    const auto& enc = setup.encoder;
    const auto& loop = setup.loop;
    const int n_pos = setup.wta.num_pos_ref;
    const int offset = setup.wta.offset;

    ClosedLoopResult res;
    res.network = build_shifted_wta(setup.wta);
    merge_network(res.network, build_comparator(setup.comparator));
    NetworkSimulator sim(res.network, ctx.defaults, ctx.sim);
    const auto& net = res.network;
    const auto outer = net.population_id(names::kOuterRing);
    const auto inner = net.population_id(names::kInnerRing);
    const auto ref_pop = net.population_id(names::kReference);
    const auto coarse_pop = net.population_id(names::kRobotCoarse);
    const auto fine_pop = net.population_id(names::kRobotFine);
    const Address next_req = net.address(names::kNextRequest, 0);

    const TimeUs dt = sim.dt_us();
    const TimeUs period = ms_to_us(enc.report_period_ms);
    const TimeUs robot_dt = s_to_us(setup.joint.update_dt);
    const TimeUs t_max = s_to_us(loop.max_sim_time);
    const TimeUs nr_window = ms_to_us(loop.next_request_window_ms);
    const TimeUs hold = ms_to_us(loop.hold_ms);
    require(period > 0 && robot_dt > 0, "closed loop: report period and update_dt must be >= 1 us");

    EventSource host;     // trajectory generator -> outR, reference
    EventSource robot;    // encoder -> robot_coarse, robot_fine
    EventSource setpoint; // inner-ring winner -> SPID setpoint code
    EventSource feedback; // encoder -> SPID feedback code (fine-bin grid)
    RateEstimator setpoint_rates(n_pos, setup.spid.rate_window_ms);
    RateEstimator feedback_rates(enc.num_bins(), setup.spid.rate_window_ms);
    RateEstimator winner_rates(n_pos, loop.winner_window_ms);

    // Setpoint code: coarse position c stands for fine bin c*F + fine_static_ref.
    const double sp_origin = setup.comparator.fine_static_ref;
    const double sp_spacing = enc.num_fine;

    std::size_t point = 0;
    TimeUs hold_until = 0;
    TimeUs next_report = 0;
    TimeUs next_robot = 0;
    JointState joint;
    joint.angle = loop.initial_angle;
    double drive = 0;
    int current_setpoint = -1;
    std::deque<TimeUs> nr_spikes;
    std::vector<std::vector<int>> votes(trajectory.points.size(),
                                        std::vector<int>(static_cast<std::size_t>(n_pos), 0));

    auto host_trains = [&](TimeUs from, TimeUs to) {
        const auto& rec = res.points[point];
        auto a = gen_spike_train({TrainKind::Regular, enc.burst_rate, from, to,
                                  one_hot_encode(rec.wta_input, outer, n_pos), 0});
        auto b = gen_spike_train({TrainKind::Regular, enc.burst_rate, from, to,
                                  one_hot_encode(rec.reference, ref_pop, n_pos), 0});
        host.reset(merge_events(std::move(a), b));
    };
    auto begin_point = [&](TimeUs t) {
        PointRecord rec;
        rec.point_index = static_cast<int>(point);
        rec.reference = trajectory.points[point];
        rec.intended_setpoint =
            intended_setpoint(trajectory, point, offset, n_pos, loop.direction_aware);
        rec.wta_input = ((rec.intended_setpoint - offset) % n_pos + n_pos) % n_pos;
        rec.started = t;
        res.points.push_back(rec);
    };

    begin_point(0);
    while (sim.now() < t_max) {
        const TimeUs t = sim.now();
        if (t >= next_report) {
            robot.reset(encode_position_burst(joint.angle, t, enc, coarse_pop, fine_pop));
            const auto pos = encode_position(joint.angle, enc);
            feedback.reset(gen_spike_train(
                {TrainKind::Regular, enc.burst_rate, t, static_cast<TimeUs>(t + period),
                 {0, static_cast<std::uint8_t>(pos.bin(enc.num_fine))}, 0}));
            host_trains(t, t + period);
            if (const int w = argmax_or_none(winner_rates.rates(t)); w >= 0) {
                current_setpoint = w;
                ++votes[point][static_cast<std::size_t>(w)];
            }
            if (current_setpoint >= 0)
                setpoint.reset(reference_to_spiketrain(current_setpoint, t, period, enc, 0));
            next_report += period;
        }

        const TimeUs t_end = t + dt;
        host.drain_before(t_end, [&](const Event& e) { sim.inject(e); });
        robot.drain_before(t_end, [&](const Event& e) { sim.inject(e); });
        setpoint.drain_before(t_end, [&](const Event& e) { setpoint_rates.record(e.time, e.address.neuron); });
        feedback.drain_before(t_end, [&](const Event& e) { feedback_rates.record(e.time, e.address.neuron); });

        sim.step();
        const TimeUs now = sim.now();
        for (const auto& e : sim.last_spikes()) {
            if (e.address.population == inner)
                winner_rates.record(e.time, e.address.neuron);
            else if (e.address == next_req && e.time >= hold_until)
                nr_spikes.push_back(e.time);
        }

        while (next_robot <= now) {
            PositionRates sp{setpoint_rates.rates(next_robot), sp_origin, sp_spacing};
            PositionRates fb{feedback_rates.rates(next_robot), 0.0, 1.0};
            const auto out = spid_step(sp, fb, joint, setup.spid, setup.joint.update_dt);
            drive = out.drive_hz;
            joint = joint_dynamics_step(out.state, drive, setup.joint, setup.spid.pfm_max_rate,
                                        setup.joint.update_dt);
            const auto pos = encode_position(joint.angle, enc);
            res.trace.push_back(
                {next_robot, joint.angle, joint.velocity, drive, pos.coarse, pos.fine});
            next_robot += robot_dt;
        }

        while (!nr_spikes.empty() && nr_spikes.front() + nr_window <= now)
            nr_spikes.pop_front();
        if (static_cast<int>(nr_spikes.size()) >= loop.next_request_threshold) {
            res.next_requests.push_back({now, static_cast<int>(point)});
            nr_spikes.clear();
            if (point + 1 == trajectory.points.size()) {
                res.completed = true;
                break;
            }
            ++point;
            hold_until = now + hold;
            begin_point(now);
            host_trains(now, next_report);
        }
    }

    res.end_time = sim.now();
    res.spikes = sim.spikes();
    for (std::size_t n = 0; n < res.points.size(); ++n) {
        const auto& v = votes[n];
        const auto best = std::max_element(v.begin(), v.end());
        res.points[n].setpoint = *best > 0 ? static_cast<int>(best - v.begin()) : -1;
    }
    return res;
}

// --- mismatch report --------------------------------------------------------------

std::vector<MismatchReportRow> mismatch_report(const ComparatorConfig& cfg, const SweepConfig& sweep,
                                               const ExperimentContext& ctx, int threshold,
                                               const std::vector<double>& cv_list, int n_seeds,
                                               std::uint64_t seed0, unsigned threads)
{
    if (n_seeds < 1)
        throw InvalidParameterError("mismatch report: n_seeds must be >= 1");
    for (double cv : cv_list)
        require(std::isfinite(cv) && cv >= 0, "mismatch report: cv values must be >= 0");

    const std::size_t n_tasks = cv_list.size() * static_cast<std::size_t>(n_seeds);
    // 1 pass, 0 fail, -1 timeout
    std::vector<int> outcome(n_tasks, 0);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < n_tasks; k = next++) {
            ExperimentContext local = ctx;
            MismatchSpec m = ctx.sim.mismatch.value_or(MismatchSpec{});
            m.cv = cv_list[k / static_cast<std::size_t>(n_seeds)];
            m.seed = seed0 + k % static_cast<std::size_t>(n_seeds);
            local.sim.mismatch = m;
            try {
                outcome[k] = run_comparator_sweep(cfg, sweep, local, threshold).diagonal_only(threshold)
                                 ? 1
                                 : 0;
            } catch (const TimeoutError&) {
                outcome[k] = -1;
            }
        }
    };
    if (threads == 0)
        threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n_tasks, 1)));
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < threads; ++i)
        pool.emplace_back(worker);
    worker();
    for (auto& th : pool)
        th.join();

    std::vector<MismatchReportRow> rows;
    for (std::size_t c = 0; c < cv_list.size(); ++c) {
        MismatchReportRow row{cv_list[c], 0.0, n_seeds, 0};
        int pass = 0;
        for (int s = 0; s < n_seeds; ++s) {
            const int o = outcome[c * static_cast<std::size_t>(n_seeds) + static_cast<std::size_t>(s)];
            pass += o == 1 ? 1 : 0;
            row.timeouts += o == -1 ? 1 : 0;
        }
        row.pass_fraction = static_cast<double>(pass) / n_seeds;
        rows.push_back(row);
    }
    return rows;
}

void write_mismatch_csv(std::ostream& out, std::span<const MismatchReportRow> rows)
{
    out << "cv,pass_fraction,n_seeds\n";
    for (const auto& r : rows)
        out << fmt::format("{},{},{}\n", r.cv, r.pass_fraction, r.n_seeds);
}

void write_raster_csv(std::ostream& out, std::span<const RasterRecord> raster)
{
    out << "time_us,population,neuron\n";
    for (const auto& r : raster)
        out << fmt::format("{},{},{}\n", r.time, r.population, r.neuron);
}

void write_next_request_csv(std::ostream& out, std::span<const NextRequestRecord> rows)
{
    out << "time_us,point_index\n";
    for (const auto& r : rows)
        out << fmt::format("{},{}\n", r.time, r.point_index);
}

} // namespace spikeloop
