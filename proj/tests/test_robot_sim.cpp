#include "spikeloop/errors.hpp"
#include "spikeloop/robot_sim.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace spikeloop;

namespace {

PositionRates one_hot(int n, int idx, double origin = 0.0, double spacing = 1.0)
{
    PositionRates r{std::vector<double>(static_cast<std::size_t>(n), 0.0), origin, spacing};
    r.rate_hz[static_cast<std::size_t>(idx)] = 200.0;
    return r;
}

} // namespace

TEST_CASE("reference spike train")
{
    const EncoderConfig enc;
    const auto ev = reference_to_spiketrain(2, 0, 100000, enc, 3);
    CHECK(ev.size() == 20);
    for (const auto& e : ev)
        CHECK(e.address == Address{3, 2});
    CHECK(reference_to_spiketrain(2, 0, 0, enc, 3).empty());
    CHECK_THROWS_AS(reference_to_spiketrain(enc.num_coarse, 0, 1000, enc, 3), RangeError);
}

TEST_CASE("position rates centroid")
{
    PositionRates r{{0, 100, 100, 0}, 1.0, 4.0};
    CHECK(*r.centroid() == doctest::Approx(1.0 + 4.0 * 1.5));
    PositionRates silent{{0, 0, 0}, 0, 1};
    CHECK_FALSE(silent.centroid().has_value());
}

TEST_CASE("spid arithmetic")
{
    SpidParams p;
    p.kp = 100;
    const JointState s;
    const auto zero = spid_step(one_hot(16, 5), one_hot(16, 5), s, p, 1e-3);
    CHECK(zero.drive_hz == 0.0);

    const auto kp_only = spid_step(one_hot(16, 7), one_hot(16, 5), s, p, 1e-3);
    CHECK(kp_only.drive_hz == doctest::Approx(200.0));
    CHECK(kp_only.state.last_error == 2.0);

    const auto clamped = spid_step(one_hot(16, 15), one_hot(16, 0), s, p, 1e-3);
    CHECK(clamped.drive_hz == p.pfm_max_rate);
    const auto clamped_neg = spid_step(one_hot(16, 0), one_hot(16, 15), s, p, 1e-3);
    CHECK(clamped_neg.drive_hz == -p.pfm_max_rate);

    PositionRates silent{std::vector<double>(16, 0.0), 0, 1};
    const auto held = spid_step(silent, one_hot(16, 3), kp_only.state, p, 1e-3);
    CHECK(held.drive_hz == 0.0);
    CHECK(held.state == kp_only.state);
    CHECK_THROWS_AS(spid_step(one_hot(16, 1), one_hot(16, 1), s, p, 0.0), InvalidParameterError);
}

TEST_CASE("spid integral and derivative terms")
{
    SpidParams p;
    p.kp = 0;
    p.ki = 10;
    p.kd = 0.5;
    p.integral_clamp = 0.01;
    JointState s;
    auto out = spid_step(one_hot(16, 4), one_hot(16, 3), s, p, 1e-3);
    // integral 1e-3, derivative (1 - 0)/1e-3
    CHECK(out.drive_hz == doctest::Approx(10 * 1e-3 + 0.5 * 1000));
    for (int k = 0; k < 100; ++k)
        out = spid_step(one_hot(16, 4), one_hot(16, 3), out.state, p, 1e-3);
    CHECK(out.state.spid_integral == doctest::Approx(0.01));
    CHECK(out.drive_hz == doctest::Approx(10 * 0.01));
}

TEST_CASE("joint dynamics")
{
    const JointParams jp;
    const double pfm = 1000.0;
    JointState s;
    CHECK(joint_dynamics_step(s, 0.0, jp, pfm, jp.update_dt) == s);

    const int steps = static_cast<int>(std::lround(jp.damping_tau / jp.update_dt));
    for (int k = 0; k < steps; ++k)
        s = joint_dynamics_step(s, pfm, jp, pfm, jp.update_dt);
    const double frac = s.velocity / jp.velocity_gain;
    CHECK(frac >= 0.632 * 0.95);
    CHECK(frac <= 0.632 * 1.05);

    JointState top;
    top.angle = jp.angle_max;
    top = joint_dynamics_step(top, pfm, jp, pfm, jp.update_dt);
    CHECK(top.angle == jp.angle_max);
    CHECK(top.velocity <= 0.0);
    JointState bottom;
    bottom = joint_dynamics_step(bottom, -pfm, jp, pfm, jp.update_dt);
    CHECK(bottom.angle == jp.angle_min);
    CHECK_THROWS_AS(joint_dynamics_step(s, 0, jp, pfm, 0.0), InvalidParameterError);
}

TEST_CASE("position encoder")
{
    const EncoderConfig enc;
    CHECK(encode_position(enc.angle_min, enc) == PositionIndex{0, 0});
    CHECK(encode_position(10.5 * enc.bin_width(), enc) == PositionIndex{2, 2});
    CHECK(encode_position(enc.angle_max, enc) == PositionIndex{3, 3});
    CHECK(encode_position(-5.0, enc) == PositionIndex{0, 0});
    int prev = 0;
    for (double a = enc.angle_min; a <= enc.angle_max; a += 0.37) {
        const int bin = encode_position(a, enc).bin(enc.num_fine);
        REQUIRE(bin >= prev);
        prev = bin;
    }
    CHECK(prev == enc.num_bins() - 1);
}

TEST_CASE("position bursts")
{
    const EncoderConfig enc;
    const auto ev = encode_position_burst(95.0, 50000, enc, 4, 5);
    int coarse = 0, fine = 0;
    for (const auto& e : ev) {
        CHECK(e.time >= 50000);
        CHECK(e.time < 100000);
        if (e.address.population == 4) {
            CHECK(e.address.neuron == 2);
            ++coarse;
        } else {
            CHECK(e.address == Address{5, 1});
            ++fine;
        }
    }
    CHECK(coarse == 10);
    CHECK(fine == 10);
}

TEST_CASE("rate estimator window")
{
    RateEstimator r(4, 20.0);
    r.record(1000, 1);
    r.record(5000, 1);
    r.record(15000, 3);
    auto rates = r.rates(15000);
    CHECK(rates[1] == doctest::Approx(100.0));
    CHECK(rates[3] == doctest::Approx(50.0));
    rates = r.rates(21000);
    CHECK(rates[1] == doctest::Approx(50.0));
    CHECK_THROWS_AS(r.record(0, 4), RangeError);
    CHECK_THROWS_AS(RateEstimator(0, 20.0), InvalidParameterError);
}

TEST_CASE("joint loop with a fixed setpoint converges")
{
    const EncoderConfig enc;
    const JointParams jp;
    const SpidParams sp;
    for (int target : {0, 5, 9, 13, 15}) {
        CAPTURE(target);
        JointState s;
        s.angle = target < 8 ? 150.0 : 3.0;
        const double center = enc.angle_min + (target + 0.5) * enc.bin_width();
        double worst_late = 0;
        const int steps = static_cast<int>(5.0 / jp.update_dt);
        for (int k = 0; k < steps; ++k) {
            const int bin = encode_position(s.angle, enc).bin(enc.num_fine);
            const auto out = spid_step(one_hot(enc.num_bins(), target), one_hot(enc.num_bins(), bin), s, sp,
                                       jp.update_dt);
            REQUIRE(std::abs(out.drive_hz) <= sp.pfm_max_rate);
            s = joint_dynamics_step(out.state, out.drive_hz, jp, sp.pfm_max_rate, jp.update_dt);
            if (k * jp.update_dt >= 4.0)
                worst_late = std::max(worst_late, std::abs(s.angle - center));
        }
        CHECK(std::abs(s.angle - center) <= enc.bin_width());
        CHECK(worst_late <= enc.bin_width());
    }
}

TEST_CASE("joint trace csv")
{
    const std::vector<JointTraceRow> rows{{1000, 12.5, -3.25, 400.0, 0, 1}};
    std::stringstream ss;
    write_joint_trace_csv(ss, rows);
    CHECK(ss.str() == "time_us,angle_deg,velocity_dps,drive_hz,coarse,fine\n"
                      "1000,12.500000,-3.250000,400.000000,0,1\n");
}

TEST_CASE("robot config validation")
{
    JointParams jp;
    jp.angle_max = jp.angle_min;
    CHECK_THROWS_AS(jp.validate(), InvalidParameterError);
    SpidParams sp;
    sp.kp = -1;
    CHECK_THROWS_AS(sp.validate(), InvalidParameterError);
    EncoderConfig enc;
    enc.report_period_ms = 0;
    CHECK_THROWS_AS(enc.validate(), InvalidParameterError);
}
