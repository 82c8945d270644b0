#include "madql/localizer.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <map>
#include <spdlog/spdlog.h>
#include <tuple>

namespace madql {

void PsoParams::validate() const
{
    if (particles < 1 || iterations < 1)
        throw ConfigError("hyper.pso: particles and iterations must be >= 1");
    if (inertia < 0.0 || cognitive < 0.0 || social < 0.0 || !(velocity_cap_fraction > 0.0))
        throw ConfigError("hyper.pso: coefficients must be non-negative and the velocity cap positive");
}

namespace {

Vec2 clamp_to(const CityMap& map, Vec2 p)
{
    return {std::clamp(p.x, 0.0, map.width()), std::clamp(p.y, 0.0, map.depth())};
}

}  // namespace

PsoResult pso_minimize(const std::function<double(const Vec2&)>& objective, const CityMap& map,
                       const PsoParams& params, std::uint64_t seed, std::optional<Vec2> warm_start)
{
    params.validate();
    Rng rng(seed);
    std::uniform_real_distribution<double> ux(0.0, map.width());
    std::uniform_real_distribution<double> uy(0.0, map.depth());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double cap = params.velocity_cap_fraction * map.width();

    std::vector<Particle> swarm(static_cast<std::size_t>(params.particles));
    for (std::size_t j = 0; j < swarm.size(); ++j) {
        Particle& p = swarm[j];
        if (j == 0 && warm_start) {
            p.pos = clamp_to(map, *warm_start);
        } else {
            p.pos = {ux(rng), uy(rng)};
            for (int attempt = 0; attempt < 1000 && map.inside_any_footprint(p.pos); ++attempt)
                p.pos = {ux(rng), uy(rng)};
        }
        p.best_pos = p.pos;
        p.best_score = objective(p.pos);
    }

    std::size_t best = 0;
    for (std::size_t j = 1; j < swarm.size(); ++j)
        if (swarm[j].best_score < swarm[best].best_score)
            best = j;
    PsoResult result;
    Vec2 gbest = swarm[best].best_pos;
    double gscore = swarm[best].best_score;
    result.best_history.push_back(gscore);

    for (int it = 0; it < params.iterations; ++it) {
        for (Particle& p : swarm) {
            const double r1x = unit(rng), r1y = unit(rng), r2x = unit(rng), r2y = unit(rng);
            p.vel.x = params.inertia * p.vel.x + params.cognitive * r1x * (p.best_pos.x - p.pos.x) +
                      params.social * r2x * (gbest.x - p.pos.x);
            p.vel.y = params.inertia * p.vel.y + params.cognitive * r1y * (p.best_pos.y - p.pos.y) +
                      params.social * r2y * (gbest.y - p.pos.y);
            p.vel.x = std::clamp(p.vel.x, -cap, cap);
            p.vel.y = std::clamp(p.vel.y, -cap, cap);
            p.pos = clamp_to(map, {p.pos.x + p.vel.x, p.pos.y + p.vel.y});
            const double s = objective(p.pos);
            if (s < p.best_score) {
                p.best_score = s;
                p.best_pos = p.pos;
            }
        }
        for (const Particle& p : swarm) {
            if (p.best_score < gscore) {
                gscore = p.best_score;
                gbest = p.best_pos;
            }
        }
        result.best_history.push_back(gscore);
    }
    result.position = gbest;
    result.score = gscore;
    return result;
}

double particle_likelihood(const ChannelNet& net, std::span<const Measurement> measurements, const Vec2& candidate,
                           const CityMap& map, const Sigmas& sigmas)
{
    if (measurements.empty()) {
        spdlog::warn("particle_likelihood: no measurements, returning 0");
        return 0.0;
    }
    const int node = measurements.front().node;
    const double log_ratio = std::log(sigmas.los * sigmas.los / (sigmas.nlos * sigmas.nlos));
    double n_los = 0.0;
    double quad = 0.0;
    for (const Measurement& m : measurements) {
        if (m.node != node)
            throw UsageError("particle_likelihood: measurements from more than one node");
        const bool los = is_los(map, m.uav, {candidate.x, candidate.y, 0.0});
        const double e = m.gain_db - net.predict(geometry_features(m.uav, candidate, los));
        const double s = sigmas.of(los);
        quad += e * e / (s * s);
        n_los += los ? 1.0 : 0.0;
    }
    return log_ratio * n_los + quad;
}

GainProfile::GainProfile(const ChannelNet& net, double altitude, double max_ground_distance, double resolution)
    : altitude_(altitude), resolution_(resolution)
{
    const auto n = static_cast<Eigen::Index>(std::ceil(max_ground_distance / resolution)) + 2;
    Eigen::MatrixXd inputs(3, 2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double gd = static_cast<double>(i) * resolution;
        for (int w = 0; w < 2; ++w) {
            GeometryFeatures f;
            f.ground_distance = gd;
            f.distance = std::hypot(gd, altitude);
            f.elevation = std::asin(std::clamp(altitude / f.distance, 0.0, 1.0));
            f.los = w == 1;
            inputs.col(2 * i + w) = net.encode(f);
        }
    }
    const Eigen::VectorXd out = net.predict(inputs);
    nlos_.resize(static_cast<std::size_t>(n));
    los_.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        nlos_[static_cast<std::size_t>(i)] = out[2 * i];
        los_[static_cast<std::size_t>(i)] = out[2 * i + 1];
    }
}

double GainProfile::operator()(double ground_distance, bool los) const
{
    const std::vector<double>& t = los ? los_ : nlos_;
    const double x = std::max(0.0, ground_distance) / resolution_;
    const auto i = std::min(static_cast<std::size_t>(x), t.size() - 2);
    const double frac = x - static_cast<double>(i);
    return t[i] + frac * (t[i + 1] - t[i]);
}

NodeLikelihood::NodeLikelihood(const ChannelNet& net, std::span<const Measurement> measurements, const CityMap& map,
                               const Sigmas& sigmas)
    : net_(net), map_(map), sigmas_(sigmas),
      log_ratio_(std::log(sigmas.los * sigmas.los / (sigmas.nlos * sigmas.nlos)))
{
    std::map<std::tuple<double, double, double>, std::vector<double>> pooled;
    for (const Measurement& m : measurements) {
        if (m.node != measurements.front().node)
            throw UsageError("NodeLikelihood: measurements from more than one node");
        pooled[{m.uav.x, m.uav.y, m.uav.z}].push_back(m.gain_db);
    }
    std::vector<double> sq;
    for (auto& [key, values] : pooled) {
        Site s;
        s.uav = {std::get<0>(key), std::get<1>(key), std::get<2>(key)};
        s.count = static_cast<double>(values.size());
        s.mean = exact_sum(values) / s.count;
        sq.clear();
        for (double v : values)
            sq.push_back((v - s.mean) * (v - s.mean));
        s.spread = exact_sum(sq);
        auto it = std::find_if(profiles_.begin(), profiles_.end(),
                               [&](const GainProfile& p) { return p.altitude() == s.uav.z; });
        if (it == profiles_.end()) {
            profiles_.emplace_back(net, s.uav.z, map.diagonal() + 1.0);
            it = profiles_.end() - 1;
        }
        s.profile = static_cast<int>(it - profiles_.begin());
        sites_.push_back(s);
    }
}

double NodeLikelihood::combine(const Site& s, bool los, double predicted) const
{
    const double sigma = sigmas_.of(los);
    const double e = s.mean - predicted;
    return (los ? log_ratio_ * s.count : 0.0) + (s.count * e * e + s.spread) / (sigma * sigma);
}

double NodeLikelihood::evaluate(const Vec2& candidate) const
{
    if (sites_.empty())
        return 0.0;
    Eigen::MatrixXd inputs(3, static_cast<Eigen::Index>(sites_.size()));
    std::vector<bool> los(sites_.size());
    for (std::size_t i = 0; i < sites_.size(); ++i) {
        los[i] = is_los(map_, sites_[i].uav, {candidate.x, candidate.y, 0.0});
        inputs.col(static_cast<Eigen::Index>(i)) = net_.encode(geometry_features(sites_[i].uav, candidate, los[i]));
    }
    const Eigen::VectorXd psi = net_.predict(inputs);
    double total = 0.0;
    for (std::size_t i = 0; i < sites_.size(); ++i)
        total += combine(sites_[i], los[i], psi[static_cast<Eigen::Index>(i)]);
    return total;
}

double NodeLikelihood::evaluate_fast(const Vec2& candidate) const
{
    double total = 0.0;
    const Vec3 ground{candidate.x, candidate.y, 0.0};
    for (const Site& s : sites_) {
        const bool los = is_los(map_, s.uav, ground);
        const double gd = std::hypot(s.uav.x - candidate.x, s.uav.y - candidate.y);
        total += combine(s, los, profiles_[static_cast<std::size_t>(s.profile)](gd, los));
    }
    return total;
}

PsoResult pso_localize(const ChannelNet& net, std::span<const Measurement> measurements, const CityMap& map,
                       const Sigmas& sigmas, const PsoParams& params, std::uint64_t seed,
                       std::optional<Vec2> warm_start)
{
    const NodeLikelihood likelihood(net, measurements, map, sigmas);
    PsoResult r = pso_minimize([&](const Vec2& c) { return likelihood.evaluate_fast(c); }, map, params, seed,
                               warm_start);
    r.score = likelihood.evaluate(r.position);
    return r;
}

NodeSet localize_all(const ChannelNet& net, const std::vector<Measurement>& measurements, const CityMap& map,
                     const NodeSet& prior, bool warm, const Sigmas& sigmas, const PsoParams& params,
                     std::uint64_t seed, std::vector<NodeEstimate>* details)
{
    std::vector<std::vector<Measurement>> by_node(static_cast<std::size_t>(prior.size()));
    for (const Measurement& m : measurements) {
        if (m.node < 0 || m.node >= prior.size())
            throw UsageError(fmt::format("localize_all: measurement for unknown node id {}", m.node));
        by_node[static_cast<std::size_t>(m.node)].push_back(m);
    }
    NodeSet out = prior;
    if (details)
        details->clear();
    for (int k = 0; k < prior.size(); ++k) {
        NodeEstimate est{k, prior.positions[k], 0.0, static_cast<int>(by_node[k].size()), false};
        if (!prior.is_anchor(k)) {
            if (by_node[k].empty()) {
                spdlog::warn("localize_all: node {} has no measurements; keeping ({}, {})", k, est.position.x,
                             est.position.y);
            } else {
                const PsoResult r = pso_localize(net, by_node[k], map, sigmas, params, stream_seed(seed, "pso", k),
                                                 warm ? std::optional<Vec2>(prior.positions[k]) : std::nullopt);
                est.position = r.position;
                est.score = r.score;
                est.localized = true;
                out.positions[k] = r.position;
            }
        }
        if (details)
            details->push_back(est);
    }
    return out;
}

}  // namespace madql
