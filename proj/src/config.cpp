#include "madql/config.hpp"

#include <fmt/format.h>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

namespace madql {

using nlohmann::json;

void HyperParams::validate() const
{
    dqn.validate();
    channel.validate();
    pso.validate();
    if (sim_episodes < 0)
        throw ConfigError("hyper.sim_episodes must be >= 0");
    if (real_episodes < 1)
        throw ConfigError("hyper.real_episodes must be >= 1");
    if (baseline_episodes < 1)
        throw ConfigError("hyper.baseline_episodes must be >= 1");
    if (!(penalty >= 0.0))
        throw ConfigError("hyper.penalty must be >= 0");
    if (!(sampling.spacing > 0.0) || sampling.hover_samples < 0)
        throw ConfigError("hyper.sampling: spacing must be positive and hover_samples >= 0");
    if (trajectory_log_every < 0)
        throw ConfigError("hyper.trajectory_log_every must be >= 0");
}

void ScenarioConfig::validate() const
{
    if (nodes.known.size() != nodes.positions.size())
        throw ConfigError("nodes: anchor mask and positions differ in length");
    if (nodes.anchors().empty() || nodes.unknowns().empty())
        throw ConfigError("nodes: need at least one anchor and one unknown node");
    for (int k = 0; k < nodes.size(); ++k) {
        const Vec2 u = nodes.positions[k];
        if (!map.in_bounds(u))
            throw ConfigError(fmt::format("nodes[{}]: position ({}, {}) outside the map", k, u.x, u.y));
        if (map.inside_any_footprint(u))
            throw ConfigError(fmt::format("nodes[{}]: position ({}, {}) inside a building", k, u.x, u.y));
    }

    const MissionSpec& m = mission;
    if (!(m.step > 0.0))
        throw ConfigError("mission.step must be positive");
    if (m.max_steps < 1)
        throw ConfigError("mission.max_steps must be >= 1");
    if (!(m.battery_max > 0.0))
        throw ConfigError("mission.battery_max must be positive");
    if (m.start.z != m.altitude)
        throw ConfigError("mission.start: z must equal mission.altitude");
    if (m.end.z != m.altitude)
        throw ConfigError("mission.end: z must equal mission.altitude");
    if (!(m.altitude > map.max_height()))
        throw ConfigError(fmt::format("mission.altitude: {} m is not above the tallest building ({} m)", m.altitude,
                                      map.max_height()));
    for (const auto& [name, p] : {std::pair{"mission.start", m.start}, std::pair{"mission.end", m.end}}) {
        if (!map.in_bounds(p.ground()))
            throw ConfigError(fmt::format("{}: outside the map", name));
        if (map.inside_any_footprint(p.ground()))
            throw ConfigError(fmt::format("{}: inside a building footprint", name));
    }
    if (!on_lattice(m.start, {0.0, 0.0, m.start.z}, m.step))
        throw ConfigError("mission.start: not a multiple of mission.step");
    if (!on_lattice(m.end, m.start, m.step))
        throw ConfigError("mission.end: not on the step lattice of mission.start");
    if (shortest_path_cost(m.start, m.end, m.step) > m.battery_max)
        throw ConfigError("mission.battery_max: smaller than the shortest path from start to end");

    channel_truth.validate();
    radio.validate();
    if (radio.num_nodes != nodes.size())
        throw ConfigError(fmt::format("radio.num_nodes: {} but {} nodes are defined", radio.num_nodes, nodes.size()));
    hyper.validate();
}

ScenarioConfig default_scenario(std::uint64_t seed, const ScenarioTemplate& tmpl)
{
    ScenarioConfig c;
    c.seed = seed;
    c.map = generate_city(stream_seed(seed, "city"), tmpl.width, tmpl.depth, tmpl.blocks);
    c.nodes = place_nodes(stream_seed(seed, "nodes"), c.map, tmpl.nodes, tmpl.anchors, tmpl.node_margin,
                          tmpl.node_separation);
    c.mission = {{100.0, 100.0, 60.0}, {300.0, 400.0, 60.0}, 60.0, 50.0, 20, 20.0};
    c.radio.num_nodes = tmpl.nodes;
    return c;
}

std::string_view penalty_mode_name(PenaltyMode m)
{
    return m == PenaltyMode::kOnOverride ? "on-override" : "on-tight-budget";
}

PenaltyMode penalty_mode_from_name(std::string_view name)
{
    if (name == "on-override")
        return PenaltyMode::kOnOverride;
    if (name == "on-tight-budget")
        return PenaltyMode::kOnTightBudget;
    throw ConfigError(fmt::format("hyper.penalty_mode: unknown value '{}'", name));
}

namespace {

json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

json segment_json(const SegmentParams& s) { return {{"alpha", s.alpha}, {"beta_db", s.beta_db}, {"sigma_db", s.sigma_db}}; }

// Strict reader: type-checks each field, reports missing or unknown keys with
// their full path.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            throw ConfigError(fmt::format("{}: expected an object", label()));
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    template <class T>
    T req(const std::string& key)
    {
        if (!j_.contains(key))
            throw ConfigError(fmt::format("{}: missing field", field(key)));
        seen_.insert(key);
        return convert<T>(j_.at(key), field(key));
    }

    template <class T>
    T opt(const std::string& key, T fallback)
    {
        return has(key) ? req<T>(key) : fallback;
    }

    Reader child(const std::string& key)
    {
        if (!j_.contains(key))
            throw ConfigError(fmt::format("{}: missing section", field(key)));
        seen_.insert(key);
        return {j_.at(key), field(key)};
    }

    const json& raw(const std::string& key)
    {
        if (!j_.contains(key))
            throw ConfigError(fmt::format("{}: missing field", field(key)));
        seen_.insert(key);
        return j_.at(key);
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const
    {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key))
                throw ConfigError(fmt::format("{}: unknown field", field(key)));
    }

    template <class T>
    static T convert(const json& v, const std::string& where)
    {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean())
                throw ConfigError(fmt::format("{}: expected a boolean", where));
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            if (!v.is_number_unsigned())
                throw ConfigError(fmt::format("{}: expected a non-negative integer", where));
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer())
                throw ConfigError(fmt::format("{}: expected an integer", where));
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number())
                throw ConfigError(fmt::format("{}: expected a number", where));
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string())
                throw ConfigError(fmt::format("{}: expected a string", where));
        } else if constexpr (std::is_same_v<T, Vec3>) {
            if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() || !v[2].is_number())
                throw ConfigError(fmt::format("{}: expected [x, y, z]", where));
            return Vec3{v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
        } else if constexpr (std::is_same_v<T, std::vector<int>>) {
            if (!v.is_array())
                throw ConfigError(fmt::format("{}: expected an array of integers", where));
            std::vector<int> out;
            for (std::size_t i = 0; i < v.size(); ++i)
                out.push_back(convert<int>(v[i], fmt::format("{}[{}]", where, i)));
            return out;
        }
        if constexpr (!std::is_same_v<T, Vec3> && !std::is_same_v<T, std::vector<int>>)
            return v.get<T>();
    }

private:
    std::string label() const { return path_.empty() ? "<root>" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

SegmentParams read_segment(Reader r)
{
    SegmentParams s;
    s.alpha = r.req<double>("alpha");
    s.beta_db = r.req<double>("beta_db");
    s.sigma_db = r.req<double>("sigma_db");
    r.finish();
    return s;
}

HyperParams read_hyper(Reader r)
{
    HyperParams h;
    if (r.has("dqn")) {
        Reader d = r.child("dqn");
        DqnSettings& s = h.dqn;
        s.gamma = d.opt("gamma", s.gamma);
        s.learning_rate = d.opt("learning_rate", s.learning_rate);
        s.batch_size = d.opt("batch_size", s.batch_size);
        s.target_sync_period = d.opt("target_sync_period", s.target_sync_period);
        s.eps_start = d.opt("eps_start", s.eps_start);
        s.eps_final = d.opt("eps_final", s.eps_final);
        s.eps_decay = d.opt("eps_decay", s.eps_decay);
        s.hidden = d.opt("hidden", s.hidden);
        s.replay_capacity_real = d.opt<std::uint64_t>("replay_capacity_real", s.replay_capacity_real);
        s.replay_capacity_sim = d.opt<std::uint64_t>("replay_capacity_sim", s.replay_capacity_sim);
        d.finish();
    }
    if (r.has("channel")) {
        Reader c = r.child("channel");
        ChannelTrainSettings& s = h.channel;
        s.hidden = c.opt("hidden", s.hidden);
        s.max_epochs = c.opt("max_epochs", s.max_epochs);
        s.patience = c.opt("patience", s.patience);
        s.batch_size = c.opt("batch_size", s.batch_size);
        s.learning_rate = c.opt("learning_rate", s.learning_rate);
        s.lr_decay = c.opt("lr_decay", s.lr_decay);
        s.validation_fraction = c.opt("validation_fraction", s.validation_fraction);
        c.finish();
    }
    if (r.has("pso")) {
        Reader p = r.child("pso");
        PsoParams& s = h.pso;
        s.particles = p.opt("particles", s.particles);
        s.iterations = p.opt("iterations", s.iterations);
        s.inertia = p.opt("inertia", s.inertia);
        s.cognitive = p.opt("cognitive", s.cognitive);
        s.social = p.opt("social", s.social);
        s.velocity_cap_fraction = p.opt("velocity_cap_fraction", s.velocity_cap_fraction);
        p.finish();
    }
    h.sim_episodes = r.opt("sim_episodes", h.sim_episodes);
    h.real_episodes = r.opt("real_episodes", h.real_episodes);
    h.baseline_episodes = r.opt("baseline_episodes", h.baseline_episodes);
    h.penalty = r.opt("penalty", h.penalty);
    if (r.has("penalty_mode"))
        h.penalty_mode = penalty_mode_from_name(r.req<std::string>("penalty_mode"));
    h.noisy_reward = r.opt("noisy_reward", h.noisy_reward);
    if (r.has("sampling")) {
        Reader s = r.child("sampling");
        h.sampling.spacing = s.opt("spacing", h.sampling.spacing);
        h.sampling.hover_samples = s.opt("hover_samples", h.sampling.hover_samples);
        s.finish();
    }
    h.trajectory_log_every = r.opt("trajectory_log_every", h.trajectory_log_every);
    r.finish();
    return h;
}

}  // namespace

json to_json(const ScenarioConfig& c)
{
    json buildings = json::array();
    for (const Building& b : c.map.buildings())
        buildings.push_back(
            {{"x_min", b.x_min}, {"y_min", b.y_min}, {"x_max", b.x_max}, {"y_max", b.y_max}, {"height", b.height}});
    json nodes = json::array();
    for (int k = 0; k < c.nodes.size(); ++k)
        nodes.push_back({{"x", c.nodes.positions[k].x}, {"y", c.nodes.positions[k].y}, {"anchor", c.nodes.is_anchor(k)}});
    const HyperParams& h = c.hyper;
    json j;
    j["seed"] = c.seed;
    j["map"] = {{"width", c.map.width()}, {"depth", c.map.depth()}, {"buildings", buildings}};
    j["nodes"] = nodes;
    j["mission"] = {{"start", vec3_json(c.mission.start)},  {"end", vec3_json(c.mission.end)},
                    {"altitude", c.mission.altitude},        {"step", c.mission.step},
                    {"max_steps", c.mission.max_steps},      {"battery_max", c.mission.battery_max}};
    j["channel"] = {{"los", segment_json(c.channel_truth.los)}, {"nlos", segment_json(c.channel_truth.nlos)}};
    j["radio"] = {{"tx_power_w", c.radio.tx_power_w},
                  {"noise_power_w", c.radio.noise_power_w},
                  {"num_nodes", c.radio.num_nodes}};
    j["hyper"] = {
        {"dqn",
         {{"gamma", h.dqn.gamma},
          {"learning_rate", h.dqn.learning_rate},
          {"batch_size", h.dqn.batch_size},
          {"target_sync_period", h.dqn.target_sync_period},
          {"eps_start", h.dqn.eps_start},
          {"eps_final", h.dqn.eps_final},
          {"eps_decay", h.dqn.eps_decay},
          {"hidden", h.dqn.hidden},
          {"replay_capacity_real", h.dqn.replay_capacity_real},
          {"replay_capacity_sim", h.dqn.replay_capacity_sim}}},
        {"channel",
         {{"hidden", h.channel.hidden},
          {"max_epochs", h.channel.max_epochs},
          {"patience", h.channel.patience},
          {"batch_size", h.channel.batch_size},
          {"learning_rate", h.channel.learning_rate},
          {"lr_decay", h.channel.lr_decay},
          {"validation_fraction", h.channel.validation_fraction}}},
        {"pso",
         {{"particles", h.pso.particles},
          {"iterations", h.pso.iterations},
          {"inertia", h.pso.inertia},
          {"cognitive", h.pso.cognitive},
          {"social", h.pso.social},
          {"velocity_cap_fraction", h.pso.velocity_cap_fraction}}},
        {"sim_episodes", h.sim_episodes},
        {"real_episodes", h.real_episodes},
        {"baseline_episodes", h.baseline_episodes},
        {"penalty", h.penalty},
        {"penalty_mode", penalty_mode_name(h.penalty_mode)},
        {"noisy_reward", h.noisy_reward},
        {"sampling", {{"spacing", h.sampling.spacing}, {"hover_samples", h.sampling.hover_samples}}},
        {"trajectory_log_every", h.trajectory_log_every},
    };
    return j;
}

ScenarioConfig config_from_json(const json& j)
{
    Reader root(j, "");
    ScenarioConfig c;
    c.seed = root.req<std::uint64_t>("seed");

    {
        Reader m = root.child("map");
        const double width = m.req<double>("width");
        const double depth = m.req<double>("depth");
        const json& arr = m.raw("buildings");
        if (!arr.is_array())
            throw ConfigError("map.buildings: expected an array");
        std::vector<Building> buildings;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Reader b(arr[i], fmt::format("map.buildings[{}]", i));
            buildings.push_back({b.req<double>("x_min"), b.req<double>("y_min"), b.req<double>("x_max"),
                                 b.req<double>("y_max"), b.req<double>("height")});
            b.finish();
        }
        m.finish();
        c.map = CityMap(width, depth, std::move(buildings));
    }
    {
        const json& arr = root.raw("nodes");
        if (!arr.is_array())
            throw ConfigError("nodes: expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Reader n(arr[i], fmt::format("nodes[{}]", i));
            c.nodes.positions.push_back({n.req<double>("x"), n.req<double>("y")});
            c.nodes.known.push_back(n.req<bool>("anchor"));
            n.finish();
        }
    }
    {
        Reader m = root.child("mission");
        c.mission.start = m.req<Vec3>("start");
        c.mission.end = m.req<Vec3>("end");
        c.mission.altitude = m.req<double>("altitude");
        c.mission.step = m.req<double>("step");
        c.mission.max_steps = m.req<int>("max_steps");
        c.mission.battery_max = m.req<double>("battery_max");
        m.finish();
    }
    {
        Reader ch = root.child("channel");
        c.channel_truth.los = read_segment(ch.child("los"));
        c.channel_truth.nlos = read_segment(ch.child("nlos"));
        ch.finish();
    }
    {
        Reader r = root.child("radio");
        c.radio.tx_power_w = r.req<double>("tx_power_w");
        c.radio.noise_power_w = r.req<double>("noise_power_w");
        c.radio.num_nodes = r.req<int>("num_nodes");
        r.finish();
    }
    c.hyper = root.has("hyper") ? read_hyper(root.child("hyper")) : HyperParams{};
    root.finish();
    c.validate();
    return c;
}

std::string emit_config(const ScenarioConfig& config) { return to_json(config).dump(2) + "\n"; }

ScenarioConfig parse_config(std::string_view text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("config: malformed JSON ({})", e.what()));
    }
    return config_from_json(j);
}

ScenarioConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError(fmt::format("cannot read config file '{}'", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void save_config(const std::filesystem::path& path, const ScenarioConfig& config)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError(fmt::format("cannot write '{}'", path.string()));
    out << emit_config(config);
}

json apply_overrides(json j, const std::vector<std::string>& overrides)
{
    for (const std::string& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0 || o[0] != '/')
            throw ConfigError(fmt::format("override '{}': expected /json/pointer=value", o));
        const std::string pointer = o.substr(0, eq);
        const std::string text = o.substr(eq + 1);
        json value = json::parse(text, nullptr, false);
        if (value.is_discarded())
            value = text;
        try {
            j[json::json_pointer(pointer)] = value;
        } catch (const json::exception& e) {
            throw ConfigError(fmt::format("override '{}': {}", o, e.what()));
        }
    }
    return j;
}

json mlp_to_json(const Mlp& net)
{
    json acts = json::array();
    for (Activation a : net.activations())
        acts.push_back(activation_name(a));
    return {{"layer_sizes", net.layer_sizes()},
            {"activations", acts},
            {"params", std::vector<double>(net.params().data(), net.params().data() + net.params().size())}};
}

Mlp mlp_from_json(const json& j)
{
    Reader r(j, "network");
    const std::vector<int> sizes = r.req<std::vector<int>>("layer_sizes");
    const json& acts_json = r.raw("activations");
    const json& params_json = r.raw("params");
    r.finish();
    std::vector<Activation> acts;
    for (const json& a : acts_json)
        acts.push_back(activation_from_name(Reader::convert<std::string>(a, "network.activations")));
    Mlp net(sizes, acts);
    if (!params_json.is_array() || static_cast<Eigen::Index>(params_json.size()) != net.num_params())
        throw ConfigError(fmt::format("network.params: expected {} values", net.num_params()));
    Eigen::VectorXd p(net.num_params());
    for (Eigen::Index i = 0; i < p.size(); ++i)
        p[i] = Reader::convert<double>(params_json[static_cast<std::size_t>(i)], "network.params");
    net.set_params(p);
    return net;
}

json channel_net_to_json(const ChannelNet& net)
{
    json j = mlp_to_json(net.net());
    j["distance_scale"] = net.distance_scale();
    return j;
}

ChannelNet channel_net_from_json(const json& j)
{
    json copy = j;
    if (!copy.contains("distance_scale") || !copy["distance_scale"].is_number())
        throw ConfigError("channel network: missing distance_scale");
    const double scale = copy["distance_scale"].get<double>();
    copy.erase("distance_scale");
    return {mlp_from_json(copy), scale};
}

}  // namespace madql
