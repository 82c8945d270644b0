#include <doctest.h>

#include <random>
#include <sstream>

#include "madql/env.hpp"

using namespace madql;

namespace {

struct Fixture {
    CityMap map = generate_city(21, 500, 500, BlockSpec{});
    NodeSet nodes = place_nodes(21, map, 6, 2, 25, 60);
    ChannelParams channel;
    RadioParams radio;
    MissionSpec mission{{100, 100, 60}, {300, 400, 60}, 60, 50, 20, 20};
    RealWorld world{map, channel, nodes};

    Environment env(EnvSettings s = {}) const { return {world, mission, radio, 500, 500, s}; }
};

}  // namespace

TEST_CASE("safety filter: zero slack forces the shortest path")
{
    const MissionSpec m{{100, 100, 60}, {300, 400, 60}, 60, 50, 20, 20};
    const State tight{{100, 100, 60}, 10.0};

    const SafetyDecision on_path = safety_filter(tight, Action::kRight, m);
    CHECK(on_path.action == Action::kRight);
    CHECK_FALSE(on_path.overridden);
    CHECK_FALSE(on_path.penalized);

    const SafetyDecision off = safety_filter(tight, Action::kHover, m);
    CHECK(off.action == Action::kRight);
    CHECK(off.overridden);
    CHECK(off.penalized);

    const SafetyDecision formula = safety_filter(tight, Action::kUp, m, PenaltyMode::kOnTightBudget);
    CHECK(formula.action == Action::kUp);
    CHECK(formula.penalized);
}

TEST_CASE("safety filter: slack below one move")
{
    const MissionSpec m{{100, 100, 60}, {300, 400, 60}, 60, 50, 20, 20};
    const State s{{100, 100, 60}, 10.5};
    CHECK(safety_filter(s, Action::kHover, m).action == Action::kHover);
    const SafetyDecision away = safety_filter(s, Action::kLeft, m);
    CHECK(away.overridden);
    CHECK(away.action == Action::kRight);

    const State done{{300, 400, 60}, 0.5};
    CHECK(safety_filter(done, Action::kHover, m).action == Action::kHover);
    CHECK(safety_filter(done, Action::kUp, m).action == Action::kHover);
    CHECK_THROWS_AS(safety_filter({{100, 100, 60}, 9.0}, Action::kRight, m), InvariantViolation);
}

TEST_CASE("step: exact battery and displacement semantics")
{
    const Fixture f;
    const Environment env = f.env();
    const State s0 = env.reset();
    CHECK(s0.battery == 20.0);
    CHECK(s0.pos == f.mission.start);

    const StepOutcome h = env.step(s0, Action::kHover);
    CHECK(h.next.battery == 19.5);
    CHECK(h.next.pos == s0.pos);
    const StepOutcome r = env.step(s0, Action::kRight);
    CHECK(r.next.battery == 19.0);
    CHECK(r.next.pos == Vec3{150, 100, 60});
    const StepOutcome d = env.step(s0, Action::kDown);
    CHECK(d.next.pos == Vec3{100, 50, 60});
}

TEST_CASE("step: leaving the map becomes hover without penalty")
{
    Fixture f;
    f.mission.start = {0, 0, 60};
    const Environment env = f.env();
    const StepOutcome out = env.step(env.reset(), Action::kLeft);
    CHECK(out.action == Action::kHover);
    CHECK(out.next.pos == Vec3{0, 0, 60});
    CHECK(out.next.battery == 19.5);
    CHECK_FALSE(out.penalized);
}

TEST_CASE("step: reward is the TDMA sum-rate at the new position minus the penalty")
{
    const Fixture f;
    const Environment env = f.env({2.5, PenaltyMode::kOnOverride, false});
    const State tight{{100, 100, 60}, 10.0};
    const StepOutcome out = env.step(tight, Action::kHover);
    double expected = 0.0;
    for (int k = 0; k < f.nodes.size(); ++k)
        expected += throughput(true_gain(f.channel, f.map, out.next.pos, f.nodes.positions[k]).db, f.radio);
    CHECK(out.collected == doctest::Approx(expected).epsilon(1e-15));
    CHECK(out.penalized);
    CHECK(out.reward == doctest::Approx(expected - 2.5).epsilon(1e-15));
    CHECK(out.ground_truth);
}

TEST_CASE("terminal states")
{
    const Fixture f;
    const Environment env = f.env();
    CHECK(env.is_terminal({{300, 400, 60}, 0.0}));
    CHECK_FALSE(env.is_terminal({{300, 400, 60}, 0.5}));
    CHECK_THROWS_AS(env.step({{300, 400, 60}, 0.0}, Action::kHover), UsageError);
}

TEST_CASE("1000 random-policy episodes end at the end point with non-negative battery")
{
    const Fixture f;
    const Environment env = f.env();
    Rng rng(123);
    std::uniform_int_distribution<int> pick(0, kNumActions - 1);
    const Policy random = [&](const State&) { return static_cast<Action>(pick(rng)); };
    for (int i = 0; i < 1000; ++i) {
        const EpisodeRecord ep = run_episode(env, random);
        const State& last = ep.trajectory.back();
        REQUIRE(last.pos == f.mission.end);
        REQUIRE(last.battery >= 0.0);
        REQUIRE(last.battery == 0.0);
        double spent = 0.0;
        for (Action a : ep.actions)
            spent += battery_cost(a);
        CHECK(spent == f.mission.battery_max);
        for (const State& s : ep.trajectory) {
            CHECK(s.pos.x >= 0.0);
            CHECK(s.pos.x <= 500.0);
            CHECK(s.pos.y >= 0.0);
            CHECK(s.pos.y <= 500.0);
            CHECK(s.battery >= shortest_path_cost(s.pos, f.mission.end, f.mission.step));
        }
    }
}

TEST_CASE("run_episode: hook sees every transition, recorder collects measurements")
{
    const Fixture f;
    const Environment env = f.env();
    Rng shadow(9);
    MeasurementRecorder rec{f.map, f.channel, f.nodes, {}, shadow, 100};
    int seen = 0;
    const Policy hover_then_go = [](const State&) { return Action::kHover; };
    const EpisodeRecord ep = run_episode(env, hover_then_go, &rec, nullptr, [&](const Transition&) { ++seen; });
    CHECK(seen == ep.length());
    CHECK(ep.transitions.back().terminal);
    CHECK(ep.measurements.front().step == 100);
    // Only the first 10 steps can hover (battery 20, path 10); every move yields 10 samples.
    int moves = 0, hovers = 0;
    for (Action a : ep.actions)
        (a == Action::kHover ? hovers : moves)++;
    CHECK(moves == 10);
    CHECK(hovers == 20);
    CHECK(ep.measurements.size() == static_cast<std::size_t>(6 * (moves * 10 + hovers)));

    std::ostringstream json;
    write_episode_json(json, ep);
    CHECK(json.str().find("\"total_collected\"") != std::string::npos);
}

TEST_CASE("noiseless rewards are deterministic; noisy rewards use the supplied stream")
{
    const Fixture f;
    const Policy go = [](const State&) { return Action::kRight; };
    const EpisodeRecord a = run_episode(f.env(), go);
    const EpisodeRecord b = run_episode(f.env(), go);
    CHECK(a.rewards == b.rewards);

    const Environment noisy = f.env({1.0, PenaltyMode::kOnOverride, true});
    Rng r1(4), r2(4);
    const EpisodeRecord c = run_episode(noisy, go, nullptr, &r1);
    const EpisodeRecord d = run_episode(noisy, go, nullptr, &r2);
    CHECK(c.rewards == d.rewards);
    CHECK(c.rewards != a.rewards);
}
