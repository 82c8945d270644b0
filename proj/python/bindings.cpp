#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "madql/trainer.hpp"

namespace py = pybind11;
using namespace madql;

namespace {

using Xy = std::pair<double, double>;
using Xyz = std::tuple<double, double, double>;

Vec2 vec2(const Xy& p) { return {p.first, p.second}; }
Vec3 vec3(const Xyz& p) { return {std::get<0>(p), std::get<1>(p), std::get<2>(p)}; }

// Scenario configs cross the boundary as JSON text, the same schema the CLI reads.
ScenarioConfig config_arg(const std::string& text)
{
    ScenarioConfig c = parse_config(text);
    c.validate();
    return c;
}

py::dict row_dict(const EpisodeRow& r)
{
    py::dict d;
    d["t"] = r.t;
    d["episode_kind"] = r.kind == EpisodeKind::kReal ? "real" : "simulated";
    d["real_episode_index"] = r.real_episode;
    d["total_collected"] = r.total_collected;
    d["total_reward"] = r.total_reward;
    d["epsilon"] = r.epsilon;
    d["mean_loss"] = r.mean_loss ? py::cast(*r.mean_loss) : py::none();
    d["greedy_collected"] = r.greedy_collected ? py::cast(*r.greedy_collected) : py::none();
    d["length"] = r.length;
    return d;
}

py::dict train(const std::string& config_text, const std::string& algo, const std::optional<std::string>& out)
{
    const ScenarioConfig config = config_arg(config_text);
    ExperimentLog log;
    {
        py::gil_scoped_release release;
        log = run_algorithm(algorithm_from_name(algo), config);
        if (out)
            write_run(*out, config, log);
    }
    py::list rows;
    for (const EpisodeRow& r : log.rows)
        rows.append(row_dict(r));
    py::list loc;
    for (const LocalizationRow& l : log.localization) {
        py::dict d;
        d["iteration"] = l.iteration;
        d["node_id"] = l.node;
        d["estimate"] = Xy{l.estimate.x, l.estimate.y};
        d["truth"] = Xy{l.truth.x, l.truth.y};
        d["error_m"] = l.error;
        loc.append(d);
    }
    py::dict result;
    result["algorithm"] = std::string(algorithm_name(log.algorithm));
    result["rows"] = rows;
    result["localization"] = loc;
    result["final_greedy_collected"] = log.final_greedy.total_collected;
    result["real_transitions"] = log.real_transitions;
    result["q_network"] = mlp_to_json(log.q_network).dump();
    result["channel_net"] = log.channel_net ? py::cast(channel_net_to_json(*log.channel_net).dump()) : py::none();
    return result;
}

py::dict evaluate(const std::string& config_text, const std::string& q_network, int episodes)
{
    const ScenarioConfig config = config_arg(config_text);
    const Mlp net = mlp_from_json(nlohmann::json::parse(q_network));
    const EvaluationSummary s = evaluate_policy(net, config, episodes);
    py::dict d;
    d["episodes"] = s.episodes;
    d["mean_collected"] = s.mean_collected;
    d["std_collected"] = s.std_collected;
    d["min_final_battery"] = s.min_final_battery;
    d["violations"] = s.violations;
    return d;
}

}  // namespace

PYBIND11_MODULE(_madql, m)
{
    m.doc() = "Model-aided deep Q-learning for UAV data collection.";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<InvariantViolation>(m, "InvariantViolation", PyExc_RuntimeError);
    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);

    m.def(
        "default_scenario",
        [](std::uint64_t seed, int nodes, int anchors) {
            ScenarioTemplate t;
            t.nodes = nodes;
            t.anchors = anchors;
            return emit_config(default_scenario(seed, t));
        },
        py::arg("seed"), py::arg("nodes") = 6, py::arg("anchors") = 2, "Default scenario as JSON text.");
    m.def(
        "apply_overrides",
        [](const std::string& config_text, const std::vector<std::string>& overrides) {
            return emit_config(config_from_json(apply_overrides(nlohmann::json::parse(config_text), overrides)));
        },
        py::arg("config"), py::arg("overrides"));
    m.def(
        "validate_config", [](const std::string& text) { return emit_config(config_arg(text)); }, py::arg("config"),
        "Parses and validates a config; returns its canonical text or raises ConfigError.");

    m.def(
        "is_los",
        [](const std::string& config_text, const Xyz& uav, const Xy& node) {
            const Vec2 u = vec2(node);
            return is_los(parse_config(config_text).map, vec3(uav), {u.x, u.y, 0.0});
        },
        py::arg("config"), py::arg("uav"), py::arg("node"));
    m.def(
        "true_gain_db",
        [](const std::string& config_text, const Xyz& uav, const Xy& node) {
            const ScenarioConfig c = parse_config(config_text);
            return true_gain(c.channel_truth, c.map, vec3(uav), vec2(node)).db;
        },
        py::arg("config"), py::arg("uav"), py::arg("node"));
    m.def(
        "throughput",
        [](double gain_db, double tx_power_w, double noise_power_w, int num_nodes) {
            RadioParams r;
            r.tx_power_w = tx_power_w;
            r.noise_power_w = noise_power_w;
            r.num_nodes = num_nodes;
            r.validate();
            return throughput(gain_db, r);
        },
        py::arg("gain_db"), py::arg("tx_power_w") = RadioParams{}.tx_power_w,
        py::arg("noise_power_w") = RadioParams{}.noise_power_w, py::arg("num_nodes") = RadioParams{}.num_nodes);
    m.def(
        "epsilon",
        [](long t, double eps_start, double eps_final, double eps_decay) {
            DqnSettings s;
            s.eps_start = eps_start;
            s.eps_final = eps_final;
            s.eps_decay = eps_decay;
            s.validate();
            return epsilon(t, s);
        },
        py::arg("t"), py::arg("eps_start") = DqnSettings{}.eps_start, py::arg("eps_final") = DqnSettings{}.eps_final,
        py::arg("eps_decay") = DqnSettings{}.eps_decay);

    m.def(
        "pso_minimize",
        [](const std::function<double(Xy)>& f, double width, double depth, std::uint64_t seed, int particles,
           int iterations) {
            const CityMap map(width, depth, {});
            PsoParams p;
            p.particles = particles;
            p.iterations = iterations;
            p.validate();
            const PsoResult r = pso_minimize([&](const Vec2& v) { return f({v.x, v.y}); }, map, p, seed);
            return py::make_tuple(Xy{r.position.x, r.position.y}, r.score, r.best_history);
        },
        py::arg("objective"), py::arg("width"), py::arg("depth"), py::arg("seed") = 0,
        py::arg("particles") = PsoParams{}.particles, py::arg("iterations") = PsoParams{}.iterations,
        "Global-best PSO over an empty rectangle; returns (position, score, best_history).");

    m.def("train", &train, py::arg("config"), py::arg("algorithm") = "model-aided", py::arg("out") = py::none(),
          "Runs one training pipeline; optionally writes the run directory.");
    m.def("evaluate", &evaluate, py::arg("config"), py::arg("q_network"), py::arg("episodes") = 10,
          "Greedy real-world rollouts of a checkpointed Q-network (JSON text).");
}
