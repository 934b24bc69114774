#include "spikeloop/errors.hpp"
#include "spikeloop/loop.hpp"

#include <doctest.h>

#include <sstream>

using namespace spikeloop;

TEST_CASE("wta sweep N=4 x=1")
{
    const auto res = run_wta_sweep({4, 1, 4.0, 2.0}, {}, {});
    CHECK(res.winners == std::vector<int>{1, 2, 3, 0});
    for (std::size_t k = 0; k < 4; ++k)
        CHECK(res.selectivity(k) >= 10.0);
}

TEST_CASE("wta sweep without offset is the identity")
{
    const auto res = run_wta_sweep({4, 0, 4.0, 2.0}, {}, {});
    CHECK(res.winners == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("wta sweep N=8 x=3 input 6")
{
    const auto res = run_wta_sweep({8, 3, 4.0, 2.0}, {}, {}, {6});
    CHECK(res.winners == std::vector<int>{1});
}

TEST_CASE("sweeps respect the simulation budget")
{
    SweepConfig s;
    s.max_sim_time = 1.0;
    CHECK_THROWS_AS(run_wta_sweep({4, 1, 4.0, 2.0}, s, {}), TimeoutError);
    CHECK_THROWS_AS(run_comparator_sweep({}, s, {}, 3), TimeoutError);
    CHECK_THROWS_AS(run_wta_sweep({4, 1, 4.0, 2.0}, {}, {}, {4}), RangeError);
}

TEST_CASE("comparator sweep is active on the diagonal only")
{
    const auto res = run_comparator_sweep({}, {}, {}, 3);
    CHECK(res.diagonal_only(3));
    CHECK(res.truth[0][0]);
    CHECK_FALSE(res.truth[1][3]);
    int active = 0;
    for (const auto& row : res.truth)
        for (bool b : row)
            active += b;
    CHECK(active == 4);
}

TEST_CASE("intended setpoints")
{
    const Trajectory up{"up", {0, 1, 2, 3}};
    CHECK(intended_setpoint(up, 0, 1, 4, false) == 1);
    CHECK(intended_setpoint(up, 2, 1, 4, false) == 3);
    CHECK(intended_setpoint(up, 3, 1, 4, false) == 3);
    const Trajectory zigzag{"zigzag", {0, 2, 1, 0}};
    CHECK(intended_setpoint(zigzag, 0, 1, 4, true) == 1);
    CHECK(intended_setpoint(zigzag, 1, 1, 4, true) == 2); // direction change
    CHECK(intended_setpoint(zigzag, 2, 1, 4, true) == 0); // descending
    CHECK(intended_setpoint(zigzag, 3, 1, 4, true) == 0);
}

TEST_CASE("closed loop interpolates the ascending trajectory")
{
    const auto res = run_closed_loop({}, {}, {});
    REQUIRE(res.completed);
    CHECK(res.end_time <= 60000000u);
    REQUIRE(res.next_requests.size() == 4);
    for (int k = 0; k < 4; ++k)
        CHECK(res.next_requests[static_cast<std::size_t>(k)].point_index == k);
    REQUIRE(res.points.size() == 4);
    const int expected[] = {1, 2, 3, 3};
    for (std::size_t k = 0; k < 4; ++k)
        CHECK(res.points[k].setpoint == expected[k]);
    CHECK(res.trace.back().coarse == 3);
    CHECK(res.invariant_violations().empty());
}

TEST_CASE("closed loop already at a single-point target")
{
    ClosedLoopSetup setup;
    const EncoderConfig& enc = setup.encoder;
    setup.loop.initial_angle =
        enc.angle_min + (2 * enc.num_fine + setup.comparator.fine_static_ref + 0.5) * enc.bin_width();
    const auto res = run_closed_loop({"hold", {2}}, setup, {});
    CHECK(res.completed);
    CHECK(res.next_requests.size() == 1);
    for (const auto& row : res.trace) {
        CHECK(row.coarse == 2);
        CHECK(row.fine == setup.comparator.fine_static_ref);
    }
    CHECK(res.invariant_violations().empty());
}

TEST_CASE("closed loop validation and timeout")
{
    CHECK_THROWS_AS(run_closed_loop({"bad", {0, 4}}, {}, {}), InvalidParameterError);
    CHECK_THROWS_AS(run_closed_loop({"empty", {}}, {}, {}), InvalidParameterError);
    ClosedLoopSetup setup;
    setup.loop.max_sim_time = 0.5;
    const auto res = run_closed_loop({}, setup, {});
    CHECK_FALSE(res.completed);
    CHECK(res.end_time == 500000u);
    CHECK_FALSE(res.trace.empty());
    CHECK_FALSE(res.spikes.empty());
}

TEST_CASE("closed loop is deterministic")
{
    ExperimentContext ctx;
    ctx.sim.mismatch = MismatchSpec{0.05, 3, MismatchSpec::default_mask()};
    const auto a = run_closed_loop({}, {}, ctx);
    const auto b = run_closed_loop({}, {}, ctx);
    CHECK(a.spikes == b.spikes);
    CHECK(a.trace == b.trace);
}

TEST_CASE("mismatch report")
{
    CHECK_THROWS_AS(mismatch_report({}, {}, {}, 3, {0.0}, 0, 1), InvalidParameterError);
    const auto one = mismatch_report({}, {}, {}, 3, {0.0, 0.1, 0.4}, 6, 10, 1);
    const auto many = mismatch_report({}, {}, {}, 3, {0.0, 0.1, 0.4}, 6, 10, 3);
    REQUIRE(one.size() == 3);
    CHECK(one[0].pass_fraction == 1.0);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(one[k].pass_fraction == many[k].pass_fraction);
        CHECK(one[k].n_seeds == 6);
    }
    CHECK(one[2].pass_fraction <= one[0].pass_fraction);
    std::stringstream ss;
    write_mismatch_csv(ss, one);
    CHECK(ss.str().rfind("cv,pass_fraction,n_seeds\n0,1,6\n", 0) == 0);
}

TEST_CASE("log writers")
{
    std::stringstream r;
    const std::vector<RasterRecord> raster{{10, "inR", 2}};
    write_raster_csv(r, raster);
    CHECK(r.str() == "time_us,population,neuron\n10,inR,2\n");
    std::stringstream n;
    const std::vector<NextRequestRecord> nr{{1500, 0}};
    write_next_request_csv(n, nr);
    CHECK(n.str() == "time_us,point_index\n1500,0\n");
}
