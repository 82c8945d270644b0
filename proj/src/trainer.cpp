#include "madql/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <memory>
#include <spdlog/spdlog.h>

namespace madql {

namespace fs = std::filesystem;

LearnedWorld::LearnedWorld(const CityMap& map, ChannelNet channel, NodeSet estimates)
    : map_(map), channel_(std::move(channel)), estimates_(std::move(estimates))
{}

double LearnedWorld::gain_for(int node, const Vec3& uav) const
{
    const Vec2 u = estimates_.positions.at(node);
    const bool los = is_los(map_, uav, {u.x, u.y, 0.0});
    return channel_.predict(geometry_features(uav, u, los));
}

std::string_view algorithm_name(Algorithm a)
{
    switch (a) {
    case Algorithm::kModelAided: return "model-aided";
    case Algorithm::kBaseline: return "baseline";
    case Algorithm::kOracle: return "oracle";
    }
    return "?";
}

Algorithm algorithm_from_name(std::string_view name)
{
    if (name == "model-aided")
        return Algorithm::kModelAided;
    if (name == "baseline")
        return Algorithm::kBaseline;
    if (name == "oracle")
        return Algorithm::kOracle;
    throw ConfigError(fmt::format("unknown algorithm '{}'", name));
}

int ExperimentLog::real_episodes() const
{
    int n = 0;
    for (const EpisodeRow& r : rows)
        n += r.kind == EpisodeKind::kReal;
    return n;
}

std::vector<double> ExperimentLog::greedy_curve() const
{
    std::vector<double> out;
    for (const EpisodeRow& r : rows)
        if (r.kind == EpisodeKind::kReal && r.greedy_collected)
            out.push_back(*r.greedy_collected);
    return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Agent {
    explicit Agent(const ScenarioConfig& c)
        : settings(c.hyper.dqn),
          enc{c.map.width(), c.map.depth(), c.mission.battery_max},
          adam(settings.learning_rate),
          explore(make_stream(c.seed, "exploration")),
          replay(make_stream(c.seed, "replay")),
          real(settings.replay_capacity_real),
          sim(settings.replay_capacity_sim)
    {
        Rng init = make_stream(c.seed, "init");
        primary = make_q_network(settings, init);
        target = primary;
    }

    double eps() const { return epsilon(t, settings); }

    Action greedy(const State& s) const { return greedy_action(primary, enc, s); }

    Action explore_act(const State& s, double e) { return act_eps_greedy(primary, enc, s, e, explore); }

    void learn(bool with_sim)
    {
        const auto batch = sample_union(real, with_sim ? &sim : nullptr, settings.batch_size, replay);
        if (const auto loss = train_step(primary, target, batch, enc, settings.gamma, adam)) {
            loss_sum += *loss;
            ++loss_count;
        }
    }

    std::optional<double> take_mean_loss()
    {
        std::optional<double> m;
        if (loss_count > 0)
            m = loss_sum / static_cast<double>(loss_count);
        loss_sum = 0.0;
        loss_count = 0;
        return m;
    }

    void end_episode()
    {
        ++t;
        if (t % settings.target_sync_period == 0)
            sync_target(primary, target);
    }

    DqnSettings settings;
    StateEncoder enc;
    Mlp primary;
    Mlp target;
    Adam adam;
    Rng explore;
    Rng replay;
    ReplayBuffer real;
    ReplayBuffer sim;
    long t = 0;
    double loss_sum = 0.0;
    long loss_count = 0;
};

bool log_trajectory(const ScenarioConfig& c, int e)
{
    const int every = c.hyper.trajectory_log_every;
    return every > 0 && (e == 1 || e % every == 0);
}

EpisodeRow row_for(const EpisodeRecord& ep, long t, EpisodeKind kind, int real_episode, double eps)
{
    EpisodeRow r;
    r.t = t;
    r.kind = kind;
    r.real_episode = real_episode;
    r.total_collected = ep.total_collected;
    r.total_reward = ep.total_reward;
    r.epsilon = eps;
    r.length = ep.length();
    return r;
}

std::vector<Measurement> filter_nodes(const std::vector<Measurement>& all, const NodeSet& nodes, bool anchors)
{
    std::vector<Measurement> out;
    for (const Measurement& m : all)
        if (nodes.is_anchor(m.node) == anchors)
            out.push_back(m);
    return out;
}

ExperimentLog run_dyna(Algorithm algo, const ScenarioConfig& config, const ProgressFn& progress)
{
    config.validate();
    const HyperParams& h = config.hyper;
    ExperimentLog log;
    log.algorithm = algo;

    Agent agent(config);
    RealWorld real(config.map, config.channel_truth, config.nodes);
    const Environment real_env(real, config.mission, config.radio, config.map.width(), config.map.depth(),
                               config.env_settings());
    Rng shadowing = make_stream(config.seed, "shadowing");
    Rng real_noise = make_stream(config.seed, "reward-noise", 0);
    Rng sim_noise = make_stream(config.seed, "reward-noise", 1);

    NodeSet estimates = config.nodes;
    for (int k : estimates.unknowns())
        estimates.positions[k] = {config.map.width() / 2.0, config.map.depth() / 2.0};
    bool have_estimates = false;
    std::unique_ptr<WorldModel> sim_world;
    if (algo == Algorithm::kOracle)
        sim_world = std::make_unique<RealWorld>(config.map, config.channel_truth, config.nodes);

    const Policy greedy = [&](const State& s) { return agent.greedy(s); };
    int real_steps = 0;

    for (int e = 1; e <= h.real_episodes; ++e) {
        const auto t0 = Clock::now();

        // Phase 1: greedy real-world flight with measurement collection.
        MeasurementRecorder recorder{config.map, config.channel_truth, config.nodes, h.sampling, shadowing,
                                     real_steps};
        EpisodeRecord ep = run_episode(real_env, greedy, algo == Algorithm::kModelAided ? &recorder : nullptr,
                                       &real_noise);
        real_steps += ep.length();
        for (const Transition& tr : ep.transitions)
            agent.real.push(tr);
        log.real_transitions += ep.length();
        log.measurements.insert(log.measurements.end(), ep.measurements.begin(), ep.measurements.end());
        const std::size_t real_row = log.rows.size();
        log.rows.push_back(row_for(ep, agent.t, EpisodeKind::kReal, e, 0.0));
        if (log_trajectory(config, e))
            log.trajectories.emplace_back(e, ep);
        agent.end_episode();

        // Phase 2: refresh the learned world.
        if (algo == Algorithm::kModelAided) {
            try {
                EnvironmentEstimate est = learn_environment(config, log.measurements, estimates, have_estimates, e);
                estimates = est.estimates;
                have_estimates = true;
                for (const NodeEstimate& d : est.details) {
                    if (config.nodes.is_anchor(d.node))
                        continue;
                    const Vec2 truth = config.nodes.positions[d.node];
                    log.localization.push_back(
                        {e, d.node, d.position, truth, distance(d.position, truth), d.score, d.measurements});
                }
                log.channel.push_back({e, est.fit.curve, est.fit.train, est.fit.validation,
                                       filter_nodes(log.measurements, config.nodes, true).size()});
                log.channel_net = est.fit.net;
                sim_world = std::make_unique<LearnedWorld>(config.map, std::move(est.fit.net), estimates);
            } catch (const ConfigError& err) {
                spdlog::error("iteration {}: environment learning failed ({}); skipping simulated training", e,
                              err.what());
                sim_world.reset();
            }
            agent.sim.clear();
        }

        // Phase 3: simulated training.
        if (sim_world) {
            const Environment sim_env(*sim_world, config.mission, config.radio, config.map.width(),
                                      config.map.depth(), config.env_settings());
            const bool ground_truth = sim_world->is_ground_truth();
            for (int i = 0; i < h.sim_episodes; ++i) {
                const auto ts = Clock::now();
                const double eps = agent.eps();
                const EpisodeRecord sim_ep = run_episode(
                    sim_env, [&](const State& s) { return agent.explore_act(s, eps); }, nullptr, &sim_noise,
                    [&](const Transition& tr) {
                        agent.sim.push(tr);
                        log.ground_truth_sim_transitions += ground_truth;
                        agent.learn(true);
                    });
                EpisodeRow row = row_for(sim_ep, agent.t, EpisodeKind::kSimulated, e, eps);
                row.mean_loss = agent.take_mean_loss();
                row.wall_seconds = seconds_since(ts);
                log.rows.push_back(row);
                agent.end_episode();
                if (progress)
                    progress(row);
            }
        }

        EpisodeRow& row = log.rows[real_row];
        row.greedy_collected = run_episode(real_env, greedy).total_collected;
        row.wall_seconds = seconds_since(t0);
        spdlog::info("{} real episode {}: collected {:.3f}, greedy {:.3f}", algorithm_name(algo), e,
                     row.total_collected, *row.greedy_collected);
        if (progress)
            progress(row);
    }

    log.final_greedy = run_episode(real_env, greedy);
    log.q_network = agent.primary;
    if (algo == Algorithm::kModelAided && have_estimates)
        log.node_estimates = estimates;
    return log;
}

}  // namespace

EnvironmentEstimate learn_environment(const ScenarioConfig& config, const std::vector<Measurement>& measurements,
                                      const NodeSet& prior, bool warm, int iteration)
{
    const auto anchor_meas = filter_nodes(measurements, config.nodes, true);
    if (anchor_meas.empty())
        throw ConfigError("no anchor measurements to train the channel model");
    const ClassifiedDataset data = classify_anchor_measurements(config.map, config.nodes, anchor_meas);
    EnvironmentEstimate out;
    out.fit = train_channel(data, config.sigmas(), config.hyper.channel, config.map.diagonal(),
                            stream_seed(config.seed, "channel", static_cast<std::uint64_t>(iteration)));
    out.estimates = localize_all(out.fit.net, filter_nodes(measurements, config.nodes, false), config.map, prior, warm,
                                 config.sigmas(), config.hyper.pso,
                                 stream_seed(config.seed, "pso-iteration", static_cast<std::uint64_t>(iteration)),
                                 &out.details);
    return out;
}

ExperimentLog run_model_aided(const ScenarioConfig& config, const ProgressFn& progress)
{
    return run_dyna(Algorithm::kModelAided, config, progress);
}

ExperimentLog run_oracle_dql(const ScenarioConfig& config, const ProgressFn& progress)
{
    return run_dyna(Algorithm::kOracle, config, progress);
}

ExperimentLog run_baseline_dql(const ScenarioConfig& config, const ProgressFn& progress)
{
    config.validate();
    ExperimentLog log;
    log.algorithm = Algorithm::kBaseline;
    Agent agent(config);
    RealWorld real(config.map, config.channel_truth, config.nodes);
    const Environment env(real, config.mission, config.radio, config.map.width(), config.map.depth(),
                          config.env_settings());
    Rng noise = make_stream(config.seed, "reward-noise", 0);
    const Policy greedy = [&](const State& s) { return agent.greedy(s); };

    for (int e = 1; e <= config.hyper.baseline_episodes; ++e) {
        const auto t0 = Clock::now();
        const double eps = agent.eps();
        const EpisodeRecord ep = run_episode(
            env, [&](const State& s) { return agent.explore_act(s, eps); }, nullptr, &noise,
            [&](const Transition& tr) {
                agent.real.push(tr);
                agent.learn(false);
            });
        log.real_transitions += ep.length();
        EpisodeRow row = row_for(ep, agent.t, EpisodeKind::kReal, e, eps);
        row.mean_loss = agent.take_mean_loss();
        agent.end_episode();
        row.greedy_collected = run_episode(env, greedy).total_collected;
        row.wall_seconds = seconds_since(t0);
        if (log_trajectory(config, e))
            log.trajectories.emplace_back(e, ep);
        log.rows.push_back(row);
        if (e % 50 == 0)
            spdlog::info("baseline real episode {}: collected {:.3f}, greedy {:.3f}", e, row.total_collected,
                         *row.greedy_collected);
        if (progress)
            progress(row);
    }
    log.final_greedy = run_episode(env, greedy);
    log.q_network = agent.primary;
    return log;
}

ExperimentLog run_algorithm(Algorithm algo, const ScenarioConfig& config, const ProgressFn& progress)
{
    switch (algo) {
    case Algorithm::kModelAided: return run_model_aided(config, progress);
    case Algorithm::kBaseline: return run_baseline_dql(config, progress);
    case Algorithm::kOracle: return run_oracle_dql(config, progress);
    }
    throw UsageError("run_algorithm: unknown algorithm");
}

EvaluationSummary evaluate_policy(const Mlp& net, const ScenarioConfig& config, int episodes,
                                  std::uint64_t seed_offset)
{
    config.validate();
    RealWorld real(config.map, config.channel_truth, config.nodes);
    const Environment env(real, config.mission, config.radio, config.map.width(), config.map.depth(),
                          config.env_settings());
    const StateEncoder enc{config.map.width(), config.map.depth(), config.mission.battery_max};
    const Policy greedy = [&](const State& s) { return greedy_action(net, enc, s); };

    EvaluationSummary out;
    out.episodes = episodes;
    out.min_final_battery = config.mission.battery_max;
    std::vector<double> totals;
    for (int i = 0; i < episodes; ++i) {
        Rng noise = make_stream(config.seed, "evaluation", seed_offset + static_cast<std::uint64_t>(i));
        EpisodeRecord ep = run_episode(env, greedy, nullptr, &noise);
        const State& last = ep.trajectory.back();
        if (!(last.pos == config.mission.end) || last.battery < 0.0)
            ++out.violations;
        out.min_final_battery = std::min(out.min_final_battery, last.battery);
        totals.push_back(ep.total_collected);
        out.records.push_back(std::move(ep));
    }
    if (!totals.empty()) {
        out.mean_collected = exact_sum(totals) / static_cast<double>(totals.size());
        double ss = 0.0;
        for (double v : totals)
            ss += (v - out.mean_collected) * (v - out.mean_collected);
        out.std_collected = std::sqrt(ss / static_cast<double>(totals.size()));
    }
    return out;
}

namespace {

std::string opt_str(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); }

std::ofstream open_out(const fs::path& p)
{
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw ConfigError(fmt::format("cannot write '{}'", p.string()));
    return out;
}

}  // namespace

void write_learning_curve_csv(std::ostream& out, const ExperimentLog& log)
{
    out << "t,episode_kind,real_episode_index,total_collected,total_reward,epsilon,mean_loss,greedy_collected\n";
    for (const EpisodeRow& r : log.rows)
        out << fmt::format("{},{},{},{},{},{},{},{}\n", r.t, r.kind == EpisodeKind::kReal ? "real" : "simulated",
                           r.real_episode, r.total_collected, r.total_reward, r.epsilon, opt_str(r.mean_loss),
                           opt_str(r.greedy_collected));
}

void write_run(const fs::path& dir, const ScenarioConfig& config, const ExperimentLog& log)
{
    fs::create_directories(dir / "checkpoints");
    save_config(dir / "config.json", config);
    {
        auto out = open_out(dir / "learning_curve.csv");
        write_learning_curve_csv(out, log);
    }
    {
        auto out = open_out(dir / "timing.csv");
        out << "t,episode_kind,wall_seconds\n";
        for (const EpisodeRow& r : log.rows)
            out << fmt::format("{},{},{}\n", r.t, r.kind == EpisodeKind::kReal ? "real" : "simulated",
                               r.wall_seconds);
    }
    if (!log.trajectories.empty()) {
        fs::create_directories(dir / "trajectories");
        for (const auto& [e, ep] : log.trajectories) {
            auto out = open_out(dir / "trajectories" / fmt::format("real_{:04d}.json", e));
            write_episode_json(out, ep);
        }
    }
    {
        auto out = open_out(dir / "final_trajectory.json");
        write_episode_json(out, log.final_greedy);
    }
    {
        auto out = open_out(dir / "checkpoints" / "q_network.json");
        out << mlp_to_json(log.q_network).dump() << '\n';
    }
    if (log.channel_net) {
        auto out = open_out(dir / "checkpoints" / "channel_net.json");
        out << channel_net_to_json(*log.channel_net).dump() << '\n';
    }
    if (log.algorithm == Algorithm::kModelAided) {
        auto out = open_out(dir / "localization.csv");
        out << "iteration,node_id,est_x,est_y,true_x,true_y,error_m,score,num_measurements\n";
        for (const LocalizationRow& r : log.localization)
            out << fmt::format("{},{},{},{},{},{},{},{},{}\n", r.iteration, r.node, r.estimate.x, r.estimate.y,
                               r.truth.x, r.truth.y, r.error, r.score, r.measurements);
    }
    if (!log.channel.empty()) {
        auto loss = open_out(dir / "channel_loss.csv");
        loss << "iteration,epoch,train_loss,validation_loss,learning_rate\n";
        auto fit = open_out(dir / "channel_fit.csv");
        fit << "iteration,anchor_measurements,rmse_los_train,rmse_nlos_train,rmse_los_validation,rmse_nlos_validation\n";
        for (const ChannelReport& c : log.channel) {
            for (const EpochStats& s : c.curve)
                loss << fmt::format("{},{},{},{},{}\n", c.iteration, s.epoch, s.train_loss, s.validation_loss,
                                    s.learning_rate);
            fit << fmt::format("{},{},{},{},{},{}\n", c.iteration, c.anchor_measurements, c.train.rmse_los,
                               c.train.rmse_nlos, c.validation.rmse_los, c.validation.rmse_nlos);
        }
    }
    if (!log.measurements.empty()) {
        auto out = open_out(dir / "measurements.csv");
        write_measurements_csv(out, log.measurements);
    }
    {
        nlohmann::json s;
        s["algorithm"] = algorithm_name(log.algorithm);
        s["real_episodes"] = log.real_episodes();
        s["real_transitions"] = log.real_transitions;
        s["ground_truth_sim_transitions"] = log.ground_truth_sim_transitions;
        s["final_greedy_collected"] = log.final_greedy.total_collected;
        if (log.node_estimates) {
            nlohmann::json nodes = nlohmann::json::array();
            for (int k = 0; k < log.node_estimates->size(); ++k)
                nodes.push_back({{"id", k},
                                 {"anchor", log.node_estimates->is_anchor(k)},
                                 {"x", log.node_estimates->positions[k].x},
                                 {"y", log.node_estimates->positions[k].y}});
            s["node_estimates"] = nodes;
        }
        auto out = open_out(dir / "summary.json");
        out << s.dump(2) << '\n';
    }
}

}  // namespace madql
