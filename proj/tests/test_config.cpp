#include "spikeloop/config.hpp"
#include "spikeloop/errors.hpp"

#include <doctest.h>

#include <sstream>

using namespace spikeloop;

namespace {

RunConfig parse_text(const std::string& text, const std::vector<ConfigOverride>& overrides = {})
{
    std::istringstream in(text);
    return parse_config(&in, overrides);
}

std::string manifest_of(const RunConfig& cfg)
{
    std::ostringstream out;
    write_manifest(out, cfg);
    return out.str();
}

} // namespace

TEST_CASE("empty config gives the defaults")
{
    const RunConfig cfg = parse_text("");
    const RunConfig def;
    CHECK(cfg.wta.num_pos_ref == def.wta.num_pos_ref);
    CHECK(cfg.seed == def.seed);
    CHECK(cfg.dt == def.dt);
    CHECK(cfg.comparator.num_coarse == cfg.wta.num_pos_ref);
    CHECK(cfg.encoder.num_fine == cfg.comparator.num_fine);
    CHECK(manifest_of(cfg) == manifest_of(parse_config(nullptr)));
}

TEST_CASE("file values and overrides")
{
    const RunConfig cfg = parse_text("# comment\nwta.num_pos_ref = 4\nrun.seed = 9\n",
                                     {{"wta.offset", "1"}, {"run.seed", "11"}});
    CHECK(cfg.wta.num_pos_ref == 4);
    CHECK(cfg.wta.offset == 1);
    CHECK(cfg.seed == 11);
}

TEST_CASE("base config is the starting point")
{
    RunConfig base;
    base.cv = 0.2;
    base.experiment = Experiment::WtaSweep;
    const RunConfig cfg = parse_config(nullptr, {{"run.dt", "0.0002"}}, base);
    CHECK(cfg.cv == 0.2);
    CHECK(cfg.experiment == Experiment::WtaSweep);
    CHECK(cfg.dt == 0.0002);
}

TEST_CASE("negative offset names the key")
{
    try {
        parse_text("wta.offset = -1\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.key() == "wta.offset");
        CHECK(e.line() == 1);
        CHECK(std::string(e.what()).find("wta.offset") != std::string::npos);
    }
}

TEST_CASE("unknown keys and malformed lines")
{
    try {
        parse_text("run.seed = 1\nwta.bogus = 3\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.key() == "wta.bogus");
        CHECK(e.line() == 2);
    }
    try {
        parse_text("run.seed = 1\n\nnot a pair\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(parse_text("run.seed = x\n"), ConfigError);
    CHECK_THROWS_AS(parse_text("run.svg = maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse_text("run.experiment = nope\n"), ConfigError);
    CHECK_THROWS_AS(parse_config(nullptr, {{"nope.key", "1"}}), ConfigError);
}

TEST_CASE("whole-config validation is reported as a config error")
{
    try {
        parse_text("wta.num_pos_ref = 4\nloop.trajectory = 0, 5\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.line() == 0);
    }
}

TEST_CASE("manifest round-trips")
{
    const RunConfig cfg = parse_text("run.experiment = wta-sweep\nwta.num_pos_ref = 6\nwta.offset = 2\n"
                                     "run.cv = 0.15\nloop.trajectory = 0, 3, 5\nmismatch.cv_list = 0, 0.3\n"
                                     "run.svg = false\n");
    const std::string m1 = manifest_of(cfg);
    std::istringstream in(m1);
    const RunConfig back = parse_config(&in);
    CHECK(manifest_of(back) == m1);
    CHECK(back.experiment == Experiment::WtaSweep);
    CHECK(back.trajectory.points == std::vector<int>{0, 3, 5});
    CHECK_FALSE(back.svg);
}

TEST_CASE("manifest lists every key")
{
    const std::string m = manifest_of(RunConfig{});
    CHECK(m.rfind("# spikeloop run manifest\nrun.version = ", 0) == 0);
    for (const auto& key : config_keys())
        CHECK(m.find("\n" + key + " = ") != std::string::npos);
}

TEST_CASE("context carries mismatch only when cv is positive")
{
    RunConfig cfg;
    CHECK_FALSE(cfg.context().sim.mismatch.has_value());
    cfg.cv = 0.1;
    cfg.seed = 5;
    const auto ctx = cfg.context();
    REQUIRE(ctx.sim.mismatch.has_value());
    CHECK(ctx.sim.mismatch->cv == 0.1);
    CHECK(ctx.sim.mismatch->seed == 5u);
}

TEST_CASE("experiment names")
{
    for (auto e : {Experiment::WtaSweep, Experiment::CmpSweep, Experiment::ClosedLoop,
                   Experiment::Calibrate, Experiment::MismatchReport})
        CHECK(parse_experiment(experiment_name(e)) == e);
    CHECK_THROWS_AS(parse_experiment("fly"), InvalidParameterError);
}
