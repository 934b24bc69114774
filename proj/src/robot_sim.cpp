#include "spikeloop/robot_sim.hpp"

#include "spikeloop/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace spikeloop {

namespace {

void require(bool ok, const char* what)
{
    if (!ok)
        throw InvalidParameterError(what);
}

TimeUs ms_to_us(double ms) { return static_cast<TimeUs>(std::lround(ms * 1e3)); }

} // namespace

void JointParams::validate() const
{
    require(angle_min < angle_max, "joint: angle_min must be < angle_max");
    require(velocity_gain > 0, "joint: velocity_gain must be > 0");
    require(damping_tau > 0, "joint: damping_tau must be > 0");
    require(update_dt > 0, "joint: update_dt must be > 0");
}

void SpidParams::validate() const
{
    require(kp >= 0 && ki >= 0 && kd >= 0, "spid: gains must be >= 0");
    require(pfm_max_rate > 0, "spid: pfm_max_rate must be > 0");
    require(rate_window_ms > 0, "spid: rate_window must be > 0");
    require(integral_clamp >= 0, "spid: integral_clamp must be >= 0");
}

void EncoderConfig::validate() const
{
    require(num_coarse >= 1 && num_coarse <= 256, "encoder: num_coarse must be in [1, 256]");
    require(num_fine >= 1 && num_fine <= 256, "encoder: num_fine must be in [1, 256]");
    require(report_period_ms > 0, "encoder: report_period must be > 0");
    require(burst_rate >= 0, "encoder: burst_rate must be >= 0");
    require(angle_min < angle_max, "encoder: angle_min must be < angle_max");
}

std::vector<Event> reference_to_spiketrain(int position_index, TimeUs start, TimeUs duration,
                                           const EncoderConfig& encoder, std::uint8_t population)
{
    const Address target = one_hot_encode(position_index, population, encoder.num_coarse);
    return gen_spike_train({TrainKind::Regular, encoder.burst_rate, start,
                            static_cast<TimeUs>(start + duration), target, 0});
}

std::optional<double> PositionRates::centroid() const
{
    double total = 0;
    double moment = 0;
    for (std::size_t k = 0; k < rate_hz.size(); ++k) {
        total += rate_hz[k];
        moment += rate_hz[k] * static_cast<double>(k);
    }
    if (total <= 0)
        return std::nullopt;
    return origin + spacing * moment / total;
}

SpidOutput spid_step(const PositionRates& setpoint, const PositionRates& feedback,
                     const JointState& state, const SpidParams& params, double dt)
{
    if (!(dt > 0))
        throw InvalidParameterError("spid_step: dt must be > 0");
    SpidOutput out{state, 0.0};
    const auto sp = setpoint.centroid();
    const auto fb = feedback.centroid();
    if (!sp || !fb)
        return out;

    const double error = *sp - *fb;
    JointState& s = out.state;
    s.spid_integral =
        std::clamp(s.spid_integral + error * dt, -params.integral_clamp, params.integral_clamp);
    const double derivative = (error - state.last_error) / dt;
    s.last_error = error;
    const double raw = params.kp * error + params.ki * s.spid_integral + params.kd * derivative;
    out.drive_hz = std::clamp(raw, -params.pfm_max_rate, params.pfm_max_rate);
    return out;
}

JointState joint_dynamics_step(const JointState& state, double drive_hz, const JointParams& params,
                               double pfm_max_rate, double dt)
{
    if (!(dt > 0))
        throw InvalidParameterError("joint_dynamics_step: dt must be > 0");
    JointState s = state;
    const double target = params.velocity_gain * drive_hz / pfm_max_rate;
    const double decay = std::exp(-dt / params.damping_tau);
    const double v_next = target + (state.velocity - target) * decay;
    // Exact displacement of the first-order velocity over dt.
    const double displacement = target * dt + (state.velocity - target) * params.damping_tau * (1 - decay);
    s.velocity = v_next;
    s.angle = state.angle + displacement;
    if (s.angle >= params.angle_max) {
        s.angle = params.angle_max;
        s.velocity = std::min(s.velocity, 0.0);
    } else if (s.angle <= params.angle_min) {
        s.angle = params.angle_min;
        s.velocity = std::max(s.velocity, 0.0);
    }
    return s;
}

PositionIndex encode_position(double angle, const EncoderConfig& encoder)
{
    const int bins = encoder.num_bins();
    const double rel = (angle - encoder.angle_min) / encoder.bin_width();
    const int bin = std::clamp(static_cast<int>(std::floor(rel)), 0, bins - 1);
    return {bin / encoder.num_fine, bin % encoder.num_fine};
}

std::vector<Event> encode_position_burst(double angle, TimeUs start, const EncoderConfig& encoder,
                                         std::uint8_t coarse_population,
                                         std::uint8_t fine_population)
{
    const auto pos = encode_position(angle, encoder);
    const TimeUs stop = start + ms_to_us(encoder.report_period_ms);
    auto coarse = gen_spike_train({TrainKind::Regular, encoder.burst_rate, start, stop,
                                   one_hot_encode(pos.coarse, coarse_population, encoder.num_coarse),
                                   0});
    auto fine = gen_spike_train({TrainKind::Regular, encoder.burst_rate, start, stop,
                                 one_hot_encode(pos.fine, fine_population, encoder.num_fine), 0});
    return merge_events(std::move(coarse), fine);
}

RateEstimator::RateEstimator(int num_addresses, double window_ms)
    : num_addresses_(num_addresses), window_us_(ms_to_us(window_ms))
{
    if (num_addresses < 1 || window_us_ == 0)
        throw InvalidParameterError("rate estimator needs >= 1 address and a window > 0");
}

void RateEstimator::record(TimeUs t, int index)
{
    if (index < 0 || index >= num_addresses_)
        throw RangeError(fmt::format("rate estimator index {} out of range", index));
    events_.emplace_back(t, index);
}

void RateEstimator::expire(TimeUs now)
{
    while (!events_.empty() && events_.front().first + window_us_ <= now)
        events_.pop_front();
}

std::vector<double> RateEstimator::rates(TimeUs now)
{
    expire(now);
    std::vector<double> r(static_cast<std::size_t>(num_addresses_), 0.0);
    const double scale = 1e6 / window_us_;
    for (const auto& [t, idx] : events_)
        if (t <= now)
            r[static_cast<std::size_t>(idx)] += scale;
    return r;
}

void write_joint_trace_csv(std::ostream& out, std::span<const JointTraceRow> rows)
{
    out << "time_us,angle_deg,velocity_dps,drive_hz,coarse,fine\n";
    for (const auto& r : rows)
        out << fmt::format("{},{:.6f},{:.6f},{:.6f},{},{}\n", r.time, r.angle, r.velocity,
                           r.drive_hz, r.coarse, r.fine);
}

} // namespace spikeloop
