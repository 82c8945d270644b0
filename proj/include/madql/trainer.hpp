#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "madql/config.hpp"

namespace madql {

/// World model built from the learned channel and the current node estimates.
class LearnedWorld final : public WorldModel {
public:
    LearnedWorld(const CityMap& map, ChannelNet channel, NodeSet estimates);

    int num_nodes() const override { return estimates_.size(); }
    double gain_for(int node, const Vec3& uav) const override;
    bool is_ground_truth() const override { return false; }

    const NodeSet& estimates() const { return estimates_; }
    const ChannelNet& channel() const { return channel_; }

private:
    const CityMap& map_;
    ChannelNet channel_;
    NodeSet estimates_;
};

enum class Algorithm { kModelAided, kBaseline, kOracle };

std::string_view algorithm_name(Algorithm a);
Algorithm algorithm_from_name(std::string_view name);

enum class EpisodeKind { kReal, kSimulated };

struct EpisodeRow {
    long t = 0;  // shared episode counter
    EpisodeKind kind = EpisodeKind::kReal;
    int real_episode = 0;  // real episodes consumed so far (1-based for real rows)
    double total_collected = 0.0;
    double total_reward = 0.0;
    double epsilon = 0.0;
    std::optional<double> mean_loss;
    // Greedy real-world rollout after this real episode's training; not counted
    // as a real-world sample.
    std::optional<double> greedy_collected;
    int length = 0;
    double wall_seconds = 0.0;
};

struct LocalizationRow {
    int iteration = 0;
    int node = 0;
    Vec2 estimate;
    Vec2 truth;
    double error = 0.0;
    double score = 0.0;
    int measurements = 0;
};

struct ChannelReport {
    int iteration = 0;
    std::vector<EpochStats> curve;
    ResidualStats train;
    ResidualStats validation;
    std::size_t anchor_measurements = 0;
};

struct ExperimentLog {
    Algorithm algorithm = Algorithm::kModelAided;
    std::vector<EpisodeRow> rows;
    std::vector<LocalizationRow> localization;
    std::vector<ChannelReport> channel;
    std::vector<std::pair<int, EpisodeRecord>> trajectories;  // (real episode index, episode)
    EpisodeRecord final_greedy;
    Mlp q_network;
    std::optional<ChannelNet> channel_net;
    std::optional<NodeSet> node_estimates;
    std::vector<Measurement> measurements;
    long real_transitions = 0;
    // Simulated-buffer transitions whose rewards came from the ground-truth world.
    long ground_truth_sim_transitions = 0;

    int real_episodes() const;
    std::vector<double> greedy_curve() const;  // greedy_collected per real episode
};

using ProgressFn = std::function<void(const EpisodeRow&)>;

ExperimentLog run_model_aided(const ScenarioConfig& config, const ProgressFn& progress = nullptr);
ExperimentLog run_baseline_dql(const ScenarioConfig& config, const ProgressFn& progress = nullptr);
// Model-aided loop whose simulated world is the ground truth from the start.
ExperimentLog run_oracle_dql(const ScenarioConfig& config, const ProgressFn& progress = nullptr);
ExperimentLog run_algorithm(Algorithm algo, const ScenarioConfig& config, const ProgressFn& progress = nullptr);

struct EvaluationSummary {
    int episodes = 0;
    double mean_collected = 0.0;
    double std_collected = 0.0;
    double min_final_battery = 0.0;
    int violations = 0;  // episodes not ending at the end point with b >= 0
    std::vector<EpisodeRecord> records;
};

// Greedy rollouts in the real world; the network is read-only.
EvaluationSummary evaluate_policy(const Mlp& net, const ScenarioConfig& config, int episodes,
                                  std::uint64_t seed_offset = 0);

// Channel fit on every anchor measurement, followed by localization of the
// unknown nodes. Shared by the model-aided loop and the CLI.
struct EnvironmentEstimate {
    ChannelFit fit;
    NodeSet estimates;
    std::vector<NodeEstimate> details;
};

EnvironmentEstimate learn_environment(const ScenarioConfig& config, const std::vector<Measurement>& measurements,
                                      const NodeSet& prior, bool warm, int iteration);

// Writes learning_curve.csv, timing.csv, trajectories, checkpoints, config
// snapshot and, when present, localization and channel reports.
void write_run(const std::filesystem::path& dir, const ScenarioConfig& config, const ExperimentLog& log);

void write_learning_curve_csv(std::ostream& out, const ExperimentLog& log);

}  // namespace madql
