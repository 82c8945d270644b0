#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "madql/channel_model.hpp"
#include "madql/dqn.hpp"
#include "madql/env.hpp"
#include "madql/localizer.hpp"
#include "madql/radio.hpp"
#include "madql/scenario.hpp"

namespace madql {

struct HyperParams {
    DqnSettings dqn;
    ChannelTrainSettings channel;
    PsoParams pso;
    int sim_episodes = 30;         // I, per real episode
    int real_episodes = 50;        // E_max for model-aided and oracle runs
    int baseline_episodes = 1000;  // real-episode budget of the baseline
    double penalty = 1.0;          // lambda
    PenaltyMode penalty_mode = PenaltyMode::kOnOverride;
    bool noisy_reward = false;
    SamplingSettings sampling;
    int trajectory_log_every = 10;  // real episodes between trajectory dumps; 0 disables

    void validate() const;
};

struct ScenarioConfig {
    CityMap map;
    NodeSet nodes;
    MissionSpec mission;
    ChannelParams channel_truth;
    RadioParams radio;
    HyperParams hyper;
    std::uint64_t seed = 0;

    // Throws ConfigError naming the offending field.
    void validate() const;

    EnvSettings env_settings() const { return {hyper.penalty, hyper.penalty_mode, hyper.noisy_reward}; }
    Sigmas sigmas() const { return {channel_truth.los.sigma_db, channel_truth.nlos.sigma_db}; }
};

struct ScenarioTemplate {
    double width = 500.0;
    double depth = 500.0;
    BlockSpec blocks;
    int nodes = 6;
    int anchors = 2;
    double node_margin = 25.0;
    double node_separation = 60.0;
};

// Default scenario: grid city, mission from [100,100,60] to [300,400,60] with
// 50 m steps and a battery of 20 units, default channel and hyperparameters.
ScenarioConfig default_scenario(std::uint64_t seed, const ScenarioTemplate& tmpl = {});

nlohmann::json to_json(const ScenarioConfig& config);
ScenarioConfig config_from_json(const nlohmann::json& j);

std::string emit_config(const ScenarioConfig& config);
ScenarioConfig parse_config(std::string_view text);
ScenarioConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ScenarioConfig& config);

// Applies "/json/pointer=value" overrides; the value is parsed as JSON and
// falls back to a plain string.
nlohmann::json apply_overrides(nlohmann::json j, const std::vector<std::string>& overrides);

std::string_view penalty_mode_name(PenaltyMode m);
PenaltyMode penalty_mode_from_name(std::string_view name);

nlohmann::json mlp_to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);
nlohmann::json channel_net_to_json(const ChannelNet& net);
ChannelNet channel_net_from_json(const nlohmann::json& j);

}  // namespace madql
