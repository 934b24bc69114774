#pragma once

// Single-joint stand-in for the event-driven robot: a rate-domain spiking PID
// with pulse-frequency-modulated output, a first-order velocity servo, and the
// coarse/fine one-hot position encoder.

#include "spikeloop/event_fabric.hpp"

#include <deque>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace spikeloop {

struct JointParams {
    double velocity_gain = 40.0; // deg/s at full drive
    double damping_tau = 0.05;   // s
    double angle_min = 0.0;      // deg
    double angle_max = 160.0;    // deg
    double update_dt = 0.001;    // s

    void validate() const;
};

struct SpidParams {
    double kp = 400.0;          // Hz per position unit
    double ki = 0.0;            // Hz per position unit-second
    double kd = 0.0;            // Hz per position unit/s
    double pfm_max_rate = 1000.0; // Hz
    double rate_window_ms = 20.0;
    double integral_clamp = 10.0; // position unit-seconds

    void validate() const;
};

struct JointState {
    double angle = 0.0;    // deg
    double velocity = 0.0; // deg/s
    double spid_integral = 0.0;
    double last_error = 0.0;

    bool operator==(const JointState&) const = default;
};

struct EncoderConfig {
    int num_coarse = 4;
    int num_fine = 4;
    double report_period_ms = 50.0;
    double burst_rate = 200.0; // Hz
    double angle_min = 0.0;
    double angle_max = 160.0;

    int num_bins() const { return num_coarse * num_fine; }
    double bin_width() const { return (angle_max - angle_min) / num_bins(); }
    void validate() const;
};

struct PositionIndex {
    int coarse = 0;
    int fine = 0;

    int bin(int num_fine) const { return coarse * num_fine + fine; }
    bool operator==(const PositionIndex&) const = default;
};

// Regular burst on the one-hot address of `position_index` in `population`,
// covering [start, start + duration).
std::vector<Event> reference_to_spiketrain(int position_index, TimeUs start, TimeUs duration,
                                           const EncoderConfig& encoder, std::uint8_t population);

// Spike rates over a one-hot position code. Entry k stands for position
// origin + k * spacing (in position units).
struct PositionRates {
    std::vector<double> rate_hz;
    double origin = 0.0;
    double spacing = 1.0;

    // Rate-weighted mean position; nullopt when every rate is zero.
    std::optional<double> centroid() const;
};

struct SpidOutput {
    JointState state;
    double drive_hz = 0.0; // signed PFM frequency, |drive| <= pfm_max_rate
};

// error = centroid(setpoint) - centroid(feedback). With a silent setpoint or
// feedback code the drive is 0 and the controller state is held.
SpidOutput spid_step(const PositionRates& setpoint, const PositionRates& feedback,
                     const JointState& state, const SpidParams& params, double dt);

// Velocity relaxes toward velocity_gain * drive / pfm_max_rate with time
// constant damping_tau (integrated exactly); the angle integrates velocity
// and is clamped to the joint limits, where the velocity is zeroed.
JointState joint_dynamics_step(const JointState& state, double drive_hz, const JointParams& params,
                               double pfm_max_rate, double dt);

PositionIndex encode_position(double angle, const EncoderConfig& encoder);

// One report period of feedback: regular bursts on the coarse and fine
// one-hot addresses of the sampled angle.
std::vector<Event> encode_position_burst(double angle, TimeUs start, const EncoderConfig& encoder,
                                         std::uint8_t coarse_population,
                                         std::uint8_t fine_population);

// Sliding-window spike counter over `num_addresses` one-hot lines.
class RateEstimator {
public:
    RateEstimator(int num_addresses, double window_ms);

    void record(TimeUs t, int index);
    // Rates over (now - window, now], in Hz.
    std::vector<double> rates(TimeUs now);
    void clear() { events_.clear(); }

private:
    void expire(TimeUs now);

    int num_addresses_;
    TimeUs window_us_;
    std::deque<std::pair<TimeUs, int>> events_;
};

struct JointTraceRow {
    TimeUs time = 0;
    double angle = 0;
    double velocity = 0;
    double drive_hz = 0;
    int coarse = 0;
    int fine = 0;

    bool operator==(const JointTraceRow&) const = default;
};

// `time_us,angle_deg,velocity_dps,drive_hz,coarse,fine`
void write_joint_trace_csv(std::ostream& out, std::span<const JointTraceRow> rows);

} // namespace spikeloop
