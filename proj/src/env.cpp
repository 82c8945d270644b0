#include "madql/env.hpp"

#include <algorithm>
#include <fmt/format.h>
#include "json.hpp"

namespace madql {

SafetyDecision safety_filter(const State& state, Action proposed, const MissionSpec& mission, PenaltyMode mode)
{
    const ShortestPath sp = shortest_path(state.pos, mission.end, mission.step);
    if (state.battery < sp.cost)
        throw InvariantViolation(fmt::format("safety: battery {} below shortest-path cost {} at ({}, {})",
                                             state.battery, sp.cost, state.pos.x, state.pos.y));
    const bool tight = state.battery <= sp.cost;
    bool accepted = true;
    if (tight) {
        accepted = sp.actions.empty() || std::find(sp.actions.begin(), sp.actions.end(), proposed) != sp.actions.end();
    } else {
        const Vec3 next = state.pos + displacement(proposed, mission.step);
        accepted = state.battery - battery_cost(proposed) >= shortest_path_cost(next, mission.end, mission.step);
    }

    SafetyDecision d{proposed, false, false};
    if (!accepted) {
        d.action = sp.actions.empty() ? Action::kHover : sp.actions.front();
        d.overridden = true;
    }
    d.penalized = mode == PenaltyMode::kOnOverride ? d.overridden : tight;
    return d;
}

double RealWorld::gain_for(int node, const Vec3& uav) const
{
    return true_gain(channel_, map_, uav, nodes_.positions.at(node)).db;
}

double RealWorld::sample_gain_for(int node, const Vec3& uav, Rng& rng) const
{
    return true_gain(channel_, map_, uav, nodes_.positions.at(node), rng).db;
}

Environment::Environment(const WorldModel& world, const MissionSpec& mission, const RadioParams& radio, double width,
                         double depth, EnvSettings settings)
    : world_(world), mission_(mission), radio_(radio), width_(width), depth_(depth), settings_(settings)
{}

double Environment::collected_at(const Vec3& pos, Rng* rng) const
{
    double total = 0.0;
    for (int k = 0; k < world_.num_nodes(); ++k) {
        const double g = settings_.noisy_reward && rng ? world_.sample_gain_for(k, pos, *rng) : world_.gain_for(k, pos);
        total += throughput(g, radio_);
    }
    return total;
}

StepOutcome Environment::step(const State& state, Action proposed, Rng* rng) const
{
    if (is_terminal(state))
        throw UsageError("step: state is terminal");

    Action candidate = proposed;
    const Vec3 moved = state.pos + displacement(candidate, mission_.step);
    if (moved.x < 0.0 || moved.x > width_ || moved.y < 0.0 || moved.y > depth_)
        candidate = Action::kHover;

    const SafetyDecision d = safety_filter(state, candidate, mission_, settings_.penalty_mode);

    StepOutcome out;
    out.action = d.action;
    out.penalized = d.penalized;
    out.overridden = d.overridden;
    out.next.pos = state.pos + displacement(d.action, mission_.step);
    out.next.battery = state.battery - battery_cost(d.action);
    if (out.next.battery < shortest_path_cost(out.next.pos, mission_.end, mission_.step))
        throw InvariantViolation("step: battery no longer covers the shortest path to the end point");
    out.collected = collected_at(out.next.pos, rng);
    out.reward = out.collected - (d.penalized ? settings_.penalty : 0.0);
    out.terminal = is_terminal(out.next);
    out.ground_truth = world_.is_ground_truth();
    return out;
}

EpisodeRecord run_episode(const Environment& env, const Policy& policy, MeasurementRecorder* recorder, Rng* reward_rng,
                          const StepHook& hook)
{
    EpisodeRecord rec;
    rec.ground_truth_rewards = env.world().is_ground_truth();
    State s = env.reset();
    rec.trajectory.push_back(s);
    // Every step consumes at least 0.5 battery units.
    const int max_steps = static_cast<int>(2.0 * env.mission().battery_max) + 1;
    for (int n = 0; !env.is_terminal(s); ++n) {
        if (n >= max_steps)
            throw InvariantViolation("run_episode: episode did not terminate");
        const Action proposed = policy(s);
        const StepOutcome out = env.step(s, proposed, reward_rng);
        if (recorder) {
            auto m = collect_measurements(recorder->map, recorder->channel, s.pos, out.next.pos, recorder->nodes,
                                          recorder->sampling, recorder->rng, recorder->step_offset + n);
            rec.measurements.insert(rec.measurements.end(), m.begin(), m.end());
        }
        rec.proposed.push_back(proposed);
        rec.actions.push_back(out.action);
        rec.rewards.push_back(out.reward);
        rec.collected.push_back(out.collected);
        rec.penalized.push_back(out.penalized);
        rec.transitions.push_back({s, out.action, out.reward, out.next, out.terminal});
        if (hook)
            hook(rec.transitions.back());
        rec.total_collected += out.collected;
        rec.total_reward += out.reward;
        s = out.next;
        rec.trajectory.push_back(s);
    }
    return rec;
}

void write_episode_json(std::ostream& out, const EpisodeRecord& record)
{
    nlohmann::json j;
    auto& traj = j["trajectory"] = nlohmann::json::array();
    for (const State& s : record.trajectory)
        traj.push_back({s.pos.x, s.pos.y, s.pos.z, s.battery});
    auto names = [](const std::vector<Action>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (Action x : v)
            a.push_back(action_name(x));
        return a;
    };
    j["proposed"] = names(record.proposed);
    j["actions"] = names(record.actions);
    j["rewards"] = record.rewards;
    j["collected"] = record.collected;
    j["penalized"] = record.penalized;
    j["total_collected"] = record.total_collected;
    j["total_reward"] = record.total_reward;
    j["length"] = record.length();
    out << j.dump(2) << '\n';
}

}  // namespace madql
