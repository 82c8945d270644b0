#include "madql/radio.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numbers>
#include <sstream>
#include <string>

namespace madql {

void ChannelParams::validate() const
{
    for (const auto* s : {&los, &nlos}) {
        if (!(s->alpha > 0.0) || !(s->sigma_db > 0.0) || !std::isfinite(s->beta_db))
            throw ConfigError("channel: alpha and sigma must be positive, beta finite");
    }
    if (nlos.sigma_db < los.sigma_db)
        throw ConfigError("channel: sigma_nlos must be >= sigma_los");
}

void RadioParams::validate() const
{
    if (!(tx_power_w > 0.0) || !(noise_power_w > 0.0) || num_nodes < 1)
        throw ConfigError("radio: tx_power_w and noise_power_w must be positive, num_nodes >= 1");
}

GeometryFeatures geometry_features(const Vec3& uav, const Vec2& node, bool los)
{
    GeometryFeatures f;
    f.ground_distance = std::hypot(uav.x - node.x, uav.y - node.y);
    f.distance = std::hypot(f.ground_distance, uav.z);
    f.elevation = f.distance > 0.0 ? std::asin(std::clamp(uav.z / f.distance, 0.0, 1.0)) : std::numbers::pi / 2;
    f.los = los;
    return f;
}

namespace {

Gain expected(const ChannelParams& params, const CityMap& map, const Vec3& uav, const Vec2& node)
{
    const double d = norm(uav - Vec3{node.x, node.y, 0.0});
    if (!(d > 0.0))
        throw std::domain_error("true_gain: UAV and node coincide (d = 0)");
    const bool los = is_los(map, uav, {node.x, node.y, 0.0});
    const SegmentParams& s = params.segment(los);
    return {s.beta_db - 10.0 * s.alpha * std::log10(d), los};
}

}  // namespace

Gain true_gain(const ChannelParams& params, const CityMap& map, const Vec3& uav, const Vec2& node)
{
    return expected(params, map, uav, node);
}

Gain true_gain(const ChannelParams& params, const CityMap& map, const Vec3& uav, const Vec2& node, Rng& rng)
{
    Gain g = expected(params, map, uav, node);
    std::normal_distribution<double> shadowing(0.0, params.segment(g.los).sigma_db);
    g.db += shadowing(rng);
    return g;
}

std::vector<Vec3> sample_positions(const Vec3& from, const Vec3& to, const SamplingSettings& sampling)
{
    if (!(sampling.spacing > 0.0))
        throw ConfigError("measurement spacing must be positive");
    std::vector<Vec3> out;
    const Vec3 delta = to - from;
    const double len = norm(delta);
    if (len == 0.0) {
        out.assign(static_cast<std::size_t>(std::max(0, sampling.hover_samples)), to);
        return out;
    }
    const int full = static_cast<int>(std::floor(len / sampling.spacing + 1e-9));
    for (int i = 1; i <= full; ++i) {
        const double t = std::min(1.0, i * sampling.spacing / len);
        out.push_back({from.x + t * delta.x, from.y + t * delta.y, from.z + t * delta.z});
    }
    if (out.empty() || out.back() != to)
        out.push_back(to);
    return out;
}

std::vector<Measurement> collect_measurements(const CityMap& map, const ChannelParams& params, const Vec3& from,
                                              const Vec3& to, const NodeSet& nodes, const SamplingSettings& sampling,
                                              Rng& rng, int step_index)
{
    std::vector<Measurement> out;
    for (const Vec3& p : sample_positions(from, to, sampling)) {
        for (int k = 0; k < nodes.size(); ++k) {
            const Gain g = true_gain(params, map, p, nodes.positions[k], rng);
            out.push_back({step_index, p, k, g.db, std::nullopt});
        }
    }
    return out;
}

double throughput(double gain_db, const RadioParams& radio)
{
    // 10^(g/10) with the rounding residual of g/10 folded back in.
    const double x = gain_db / 10.0;
    const double x_lo = std::fma(-x, 10.0, gain_db) / 10.0;
    const double linear = std::pow(10.0, x) * (1.0 + std::numbers::ln10 * x_lo);
    const double snr = radio.tx_power_w * linear / radio.noise_power_w;
    return std::log1p(snr) / std::numbers::ln2 / radio.num_nodes;
}

void write_measurements_csv(std::ostream& out, const std::vector<Measurement>& measurements)
{
    out << "step,x,y,z,node_id,gain_db,los_flag\n";
    for (const Measurement& m : measurements) {
        out << fmt::format("{},{},{},{},{},{},{}\n", m.step, m.uav.x, m.uav.y, m.uav.z, m.node, m.gain_db,
                           m.los ? (*m.los ? "1" : "0") : "");
    }
}

std::vector<Measurement> read_measurements_csv(std::istream& in)
{
    std::vector<Measurement> out;
    std::string line;
    if (!std::getline(in, line) || line.rfind("step,x,y,z,node_id,gain_db", 0) != 0)
        throw ConfigError("measurements csv: missing or unexpected header");
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (line.back() == ',')
            cells.emplace_back();
        if (cells.size() < 6)
            throw ConfigError(fmt::format("measurements csv: row {} has {} columns", row, cells.size()));
        try {
            Measurement m;
            m.step = std::stoi(cells[0]);
            m.uav = {std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3])};
            m.node = std::stoi(cells[4]);
            m.gain_db = std::stod(cells[5]);
            if (cells.size() > 6 && !cells[6].empty())
                m.los = cells[6] == "1";
            out.push_back(m);
        } catch (const std::logic_error&) {
            throw ConfigError(fmt::format("measurements csv: row {} is malformed", row));
        }
    }
    return out;
}

}  // namespace madql
