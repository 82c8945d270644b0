#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "madql/radio.hpp"
#include "madql/scenario.hpp"

namespace madql {

struct State {
    Vec3 pos;
    double battery = 0.0;

    friend bool operator==(const State&, const State&) = default;
};

/// When the safety penalty lambda is charged.
enum class PenaltyMode {
    kOnOverride,     // only when the proposed action is actually replaced
    kOnTightBudget,  // whenever b_n <= b_sc_n
};

struct EnvSettings {
    double penalty = 1.0;
    PenaltyMode penalty_mode = PenaltyMode::kOnOverride;
    bool noisy_reward = false;
};

struct SafetyDecision {
    Action action = Action::kHover;
    bool penalized = false;
    bool overridden = false;
};

// Shortest-path watchdog. With zero slack (b == b_sc) any action outside the
// remaining shortest path is replaced by its first move. With positive slack,
// actions whose cost would leave less battery than the new shortest path needs
// are replaced as well; otherwise the half-unit hover cost could strand the UAV.
SafetyDecision safety_filter(const State& state, Action proposed, const MissionSpec& mission,
                             PenaltyMode mode = PenaltyMode::kOnOverride);

/// Source of per-node channel gains for reward computation.
class WorldModel {
public:
    virtual ~WorldModel() = default;
    virtual int num_nodes() const = 0;
    /// Shadowing-free gain in dB between node k and a UAV position.
    virtual double gain_for(int node, const Vec3& uav) const = 0;
    /// Gain including shadowing; defaults to the expected gain.
    virtual double sample_gain_for(int node, const Vec3& uav, Rng&) const { return gain_for(node, uav); }
    /// True when gains come from the ground-truth channel and node positions.
    virtual bool is_ground_truth() const = 0;
};

class RealWorld final : public WorldModel {
public:
    RealWorld(const CityMap& map, const ChannelParams& channel, const NodeSet& nodes)
        : map_(map), channel_(channel), nodes_(nodes)
    {}

    int num_nodes() const override { return nodes_.size(); }
    double gain_for(int node, const Vec3& uav) const override;
    double sample_gain_for(int node, const Vec3& uav, Rng& rng) const override;
    bool is_ground_truth() const override { return true; }

    const CityMap& map() const { return map_; }
    const ChannelParams& channel() const { return channel_; }
    const NodeSet& nodes() const { return nodes_; }

private:
    const CityMap& map_;
    const ChannelParams& channel_;
    const NodeSet& nodes_;
};

struct StepOutcome {
    State next;
    double reward = 0.0;
    double collected = 0.0;
    bool penalized = false;
    bool overridden = false;
    Action action = Action::kHover;  // action actually executed
    bool terminal = false;
    bool ground_truth = false;       // reward produced by the ground-truth world
};

struct Transition {
    State s;
    Action a = Action::kHover;
    double r = 0.0;
    State next;
    bool terminal = false;
};

class Environment {
public:
    Environment(const WorldModel& world, const MissionSpec& mission, const RadioParams& radio, double width,
                double depth, EnvSettings settings = {});

    State reset() const { return {mission_.start, mission_.battery_max}; }
    bool is_terminal(const State& s) const { return s.battery <= 0.0; }

    // Executes one MDP step. Moves leaving the map are turned into hover before
    // the safety check. `rng` is only used when noisy rewards are enabled.
    StepOutcome step(const State& state, Action proposed, Rng* rng = nullptr) const;

    // Sum over nodes of per-node throughput at `pos`.
    double collected_at(const Vec3& pos, Rng* rng = nullptr) const;

    const WorldModel& world() const { return world_; }
    const MissionSpec& mission() const { return mission_; }
    const RadioParams& radio() const { return radio_; }
    const EnvSettings& settings() const { return settings_; }
    double width() const { return width_; }
    double depth() const { return depth_; }

private:
    const WorldModel& world_;
    MissionSpec mission_;
    RadioParams radio_;
    double width_;
    double depth_;
    EnvSettings settings_;
};

using Policy = std::function<Action(const State&)>;

struct EpisodeRecord {
    std::vector<State> trajectory;  // includes the initial state
    std::vector<Action> proposed;
    std::vector<Action> actions;
    std::vector<double> rewards;
    std::vector<double> collected;
    std::vector<bool> penalized;
    std::vector<Transition> transitions;
    std::vector<Measurement> measurements;
    double total_collected = 0.0;
    double total_reward = 0.0;
    bool ground_truth_rewards = false;

    int length() const { return static_cast<int>(actions.size()); }
};

/// Optional real-world measurement collection during a rollout.
struct MeasurementRecorder {
    const CityMap& map;
    const ChannelParams& channel;
    const NodeSet& nodes;
    SamplingSettings sampling;
    Rng& rng;
    int step_offset = 0;  // added to the in-episode step index of each measurement
};

using StepHook = std::function<void(const Transition&)>;

// Rolls out `policy` from the initial state until battery exhaustion. `hook`,
// if set, sees every transition right after it happens.
EpisodeRecord run_episode(const Environment& env, const Policy& policy, MeasurementRecorder* recorder = nullptr,
                          Rng* reward_rng = nullptr, const StepHook& hook = nullptr);

void write_episode_json(std::ostream& out, const EpisodeRecord& record);

}  // namespace madql
