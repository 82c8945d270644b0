#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "madql/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace madql;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInvariant = 3;

void setup_logging()
{
    auto logger = spdlog::stderr_color_mt("madql");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
    const char* level = std::getenv("MADQL_LOG_LEVEL");
    spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw ConfigError(fmt::format("cannot read '{}'", p.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& p)
{
    json j = json::parse(read_file(p), nullptr, false);
    if (j.is_discarded())
        throw ConfigError(fmt::format("'{}' is not valid JSON", p.string()));
    return j;
}

void write_text(const fs::path& p, const std::string& text)
{
    if (p.has_parent_path())
        fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw ConfigError(fmt::format("cannot write '{}'", p.string()));
    out << text;
}

struct GenOptions {
    std::uint64_t seed = 1;
    int nodes = 6;
    int anchors = 2;
    std::vector<std::string> overrides;
    std::string out;
};

int cmd_gen_scenario(const GenOptions& o)
{
    ScenarioTemplate tmpl;
    tmpl.nodes = o.nodes;
    tmpl.anchors = o.anchors;
    const ScenarioConfig base = default_scenario(o.seed, tmpl);
    const ScenarioConfig config = config_from_json(apply_overrides(to_json(base), o.overrides));
    const std::string text = emit_config(config);
    if (o.out.empty())
        std::cout << text;
    else
        write_text(o.out, text);
    return 0;
}

struct TrainOptions {
    std::string config;
    std::string algo = "model-aided";
    std::string out;
    int episodes = 0;
};

int cmd_train(const TrainOptions& o)
{
    ScenarioConfig config = load_config(o.config);
    const Algorithm algo = algorithm_from_name(o.algo);
    if (o.episodes > 0)
        (algo == Algorithm::kBaseline ? config.hyper.baseline_episodes : config.hyper.real_episodes) = o.episodes;
    config.validate();
    const ExperimentLog log = run_algorithm(algo, config);
    write_run(o.out, config, log);
    spdlog::info("{}: {} real episodes, final greedy collected {:.4f}; results in {}", o.algo, log.real_episodes(),
                 log.final_greedy.total_collected, o.out);
    return 0;
}

struct EvalOptions {
    std::string config;
    std::string checkpoint;
    int episodes = 100;
    std::string out;
};

int cmd_evaluate(const EvalOptions& o)
{
    const ScenarioConfig config = load_config(o.config);
    const Mlp net = mlp_from_json(read_json(o.checkpoint));
    const EvaluationSummary s = evaluate_policy(net, config, o.episodes);
    json j{{"episodes", s.episodes},
           {"mean_collected", s.mean_collected},
           {"std_collected", s.std_collected},
           {"min_final_battery", s.min_final_battery},
           {"violations", s.violations},
           {"safe", s.violations == 0}};
    std::cout << j.dump(2) << '\n';
    if (!o.out.empty()) {
        fs::create_directories(o.out);
        write_text(fs::path(o.out) / "evaluation.json", j.dump(2) + "\n");
        if (!s.records.empty()) {
            std::ofstream traj(fs::path(o.out) / "evaluation_trajectory.json", std::ios::binary);
            write_episode_json(traj, s.records.front());
        }
    }
    if (s.violations > 0) {
        spdlog::error("{} of {} evaluation episodes violated the terminal constraint", s.violations, s.episodes);
        return kExitInvariant;
    }
    return 0;
}

struct LocalizeOptions {
    std::string config;
    std::string measurements;
    std::string channel;
    std::string out;
};

int cmd_localize(const LocalizeOptions& o)
{
    const ScenarioConfig config = load_config(o.config);
    std::ifstream in(o.measurements);
    if (!in)
        throw ConfigError(fmt::format("cannot read '{}'", o.measurements));
    const std::vector<Measurement> meas = read_measurements_csv(in);
    for (const Measurement& m : meas)
        if (m.node < 0 || m.node >= config.nodes.size())
            throw ConfigError(fmt::format("measurements: node id {} not in the scenario", m.node));

    NodeSet prior = config.nodes;
    for (int k : prior.unknowns())
        prior.positions[k] = {config.map.width() / 2.0, config.map.depth() / 2.0};

    std::vector<NodeEstimate> details;
    ChannelNet net;
    if (o.channel.empty()) {
        EnvironmentEstimate est = learn_environment(config, meas, prior, false, 1);
        net = est.fit.net;
        details = est.details;
    } else {
        net = channel_net_from_json(read_json(o.channel));
        std::vector<Measurement> unknown;
        for (const Measurement& m : meas)
            if (!config.nodes.is_anchor(m.node))
                unknown.push_back(m);
        localize_all(net, unknown, config.map, prior, false, config.sigmas(), config.hyper.pso,
                     stream_seed(config.seed, "pso-iteration", 1), &details);
    }

    fs::create_directories(o.out);
    std::ostringstream csv;
    csv << "iteration,node_id,est_x,est_y,true_x,true_y,error_m,score,num_measurements\n";
    for (const NodeEstimate& d : details) {
        if (config.nodes.is_anchor(d.node))
            continue;
        const Vec2 t = config.nodes.positions[d.node];
        csv << fmt::format("1,{},{},{},{},{},{},{},{}\n", d.node, d.position.x, d.position.y, t.x, t.y,
                           distance(d.position, t), d.score, d.measurements);
    }
    write_text(fs::path(o.out) / "localization.csv", csv.str());
    write_text(fs::path(o.out) / "channel_net.json", channel_net_to_json(net).dump() + "\n");
    std::cout << csv.str();
    return 0;
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& p, std::vector<std::string>& header)
{
    std::istringstream in(read_file(p));
    std::string line;
    std::vector<std::vector<std::string>> rows;
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(s);
        while (std::getline(ls, cell, ','))
            cells.push_back(cell);
        if (!s.empty() && s.back() == ',')
            cells.emplace_back();
        return cells;
    };
    if (std::getline(in, line))
        header = split(line);
    while (std::getline(in, line))
        if (!line.empty())
            rows.push_back(split(line));
    return rows;
}

int column(const std::vector<std::string>& header, const std::string& name)
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return static_cast<int>(i);
    throw ConfigError(fmt::format("csv: missing column '{}'", name));
}

struct ExportOptions {
    std::string run;
    std::string out;
};

int cmd_export_plots(const ExportOptions& o)
{
    const fs::path root(o.run);
    std::vector<fs::path> runs;
    if (fs::exists(root / "learning_curve.csv"))
        runs.push_back(root);
    else if (fs::is_directory(root))
        for (const auto& entry : fs::directory_iterator(root))
            if (entry.is_directory() && fs::exists(entry.path() / "learning_curve.csv"))
                runs.push_back(entry.path());
    std::sort(runs.begin(), runs.end());
    if (runs.empty()) {
        spdlog::warn("export-plots: no completed run found under '{}'", o.run);
        return kExitConfig;
    }
    const fs::path out_dir = o.out.empty() ? root : fs::path(o.out);
    fs::create_directories(out_dir);

    std::ostringstream curve;
    curve << "algorithm,real_episode_index,total_collected,greedy_collected\n";
    bool partial = false;
    for (const fs::path& run : runs) {
        std::string algo = run.filename().string();
        if (fs::exists(run / "summary.json"))
            algo = read_json(run / "summary.json").value("algorithm", algo);
        std::vector<std::string> header;
        const auto rows = read_csv_rows(run / "learning_curve.csv", header);
        const int kind = column(header, "episode_kind"), idx = column(header, "real_episode_index"),
                  tot = column(header, "total_collected"), greedy = column(header, "greedy_collected");
        for (const auto& r : rows)
            if (r.at(kind) == "real")
                curve << fmt::format("{},{},{},{}\n", algo, r.at(idx), r.at(tot), r.at(greedy));

        if (!fs::exists(run / "config.json")) {
            spdlog::warn("export-plots: {} has no config.json; skipping the overlay", run.string());
            partial = true;
            continue;
        }
        const ScenarioConfig config = load_config(run / "config.json");
        json overlay;
        json buildings = json::array();
        for (const Building& b : config.map.buildings())
            buildings.push_back(
                {{"x_min", b.x_min}, {"y_min", b.y_min}, {"x_max", b.x_max}, {"y_max", b.y_max}, {"height", b.height}});
        overlay["algorithm"] = algo;
        overlay["map"] = {{"width", config.map.width()}, {"depth", config.map.depth()}, {"buildings", buildings}};
        overlay["mission"] = {{"start", {config.mission.start.x, config.mission.start.y, config.mission.start.z}},
                              {"end", {config.mission.end.x, config.mission.end.y, config.mission.end.z}}};

        std::map<int, Vec2> estimates;
        if (fs::exists(run / "summary.json")) {
            const json summary = read_json(run / "summary.json");
            if (summary.contains("node_estimates"))
                for (const json& n : summary["node_estimates"])
                    estimates[n["id"].get<int>()] = {n["x"].get<double>(), n["y"].get<double>()};
        }
        json nodes = json::array();
        for (int k = 0; k < config.nodes.size(); ++k) {
            json n{{"id", k},
                   {"anchor", config.nodes.is_anchor(k)},
                   {"true_x", config.nodes.positions[k].x},
                   {"true_y", config.nodes.positions[k].y}};
            if (!config.nodes.is_anchor(k) && estimates.count(k)) {
                n["est_x"] = estimates[k].x;
                n["est_y"] = estimates[k].y;
            }
            nodes.push_back(n);
        }
        overlay["nodes"] = nodes;
        if (fs::exists(run / "final_trajectory.json")) {
            overlay["trajectory"] = read_json(run / "final_trajectory.json")["trajectory"];
        } else {
            spdlog::warn("export-plots: {} has no final_trajectory.json", run.string());
            partial = true;
        }
        const std::string name = runs.size() == 1 ? "plot_overlay.json" : fmt::format("plot_overlay_{}.json", algo);
        write_text(out_dir / name, overlay.dump(2) + "\n");
    }
    write_text(out_dir / "plot_curve.csv", curve.str());
    if (partial)
        spdlog::warn("export-plots: partial export");
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    setup_logging();
    CLI::App app{"Model-aided deep Q-learning UAV data-collection simulator"};
    app.require_subcommand(1);

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen-scenario", "Write a default scenario config");
    gen_cmd->add_option("--seed", gen.seed, "Experiment seed");
    gen_cmd->add_option("--nodes", gen.nodes, "Number of ground nodes")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--anchors", gen.anchors, "Number of anchor nodes")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--set", gen.overrides, "Override a field: /json/pointer=value");
    gen_cmd->add_option("--out,-o", gen.out, "Output file (default: stdout)");

    TrainOptions train;
    auto* train_cmd = app.add_subcommand("train", "Run a training pipeline");
    train_cmd->add_option("--config,-c", train.config, "Scenario config")->required();
    train_cmd->add_option("--algo", train.algo, "model-aided | baseline | oracle")
        ->check(CLI::IsMember({"model-aided", "baseline", "oracle"}));
    train_cmd->add_option("--out,-o", train.out, "Output directory")->required();
    train_cmd->add_option("--episodes", train.episodes, "Override the real-episode budget");

    EvalOptions eval;
    auto* eval_cmd = app.add_subcommand("evaluate", "Greedy evaluation of a trained Q-network");
    eval_cmd->add_option("--config,-c", eval.config, "Scenario config")->required();
    eval_cmd->add_option("--checkpoint", eval.checkpoint, "q_network.json")->required();
    eval_cmd->add_option("--episodes", eval.episodes, "Number of episodes")->check(CLI::PositiveNumber);
    eval_cmd->add_option("--out,-o", eval.out, "Output directory");

    LocalizeOptions loc;
    auto* loc_cmd = app.add_subcommand("localize", "Fit the channel and localize unknown nodes from measurements");
    loc_cmd->add_option("--config,-c", loc.config, "Scenario config")->required();
    loc_cmd->add_option("--measurements,-m", loc.measurements, "measurements.csv")->required();
    loc_cmd->add_option("--channel", loc.channel, "Pretrained channel_net.json (skips channel fitting)");
    loc_cmd->add_option("--out,-o", loc.out, "Output directory")->required();

    ExportOptions exp;
    auto* exp_cmd = app.add_subcommand("export-plots", "Export plot-ready curve and overlay files");
    exp_cmd->add_option("--run,-r", exp.run, "Run directory, or a directory of runs")->required();
    exp_cmd->add_option("--out,-o", exp.out, "Output directory (default: the run directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*gen_cmd)
            return cmd_gen_scenario(gen);
        if (*train_cmd)
            return cmd_train(train);
        if (*eval_cmd)
            return cmd_evaluate(eval);
        if (*loc_cmd)
            return cmd_localize(loc);
        if (*exp_cmd)
            return cmd_export_plots(exp);
    } catch (const ConfigError& e) {
        spdlog::error("{}", e.what());
        return kExitConfig;
    } catch (const InvariantViolation& e) {
        spdlog::error("invariant violation: {}", e.what());
        return kExitInvariant;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
