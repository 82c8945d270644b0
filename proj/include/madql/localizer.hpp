#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "madql/channel_model.hpp"
#include "madql/radio.hpp"
#include "madql/scenario.hpp"

namespace madql {

struct PsoParams {
    int particles = 300;
    int iterations = 100;
    double inertia = 0.72;
    double cognitive = 1.49;
    double social = 1.49;
    double velocity_cap_fraction = 0.1;  // of the map width, per iteration

    void validate() const;

    friend bool operator==(const PsoParams&, const PsoParams&) = default;
};

struct Particle {
    Vec2 pos;
    Vec2 vel;
    Vec2 best_pos;
    double best_score = 0.0;
};

struct PsoResult {
    Vec2 position;
    double score = 0.0;
    std::vector<double> best_history;  // global best after init and after each iteration
};

// Canonical global-best PSO over the map rectangle. Particles start uniformly on
// street area (outside footprints); `warm_start`, if given, replaces particle 0.
// The global best is refreshed after each sweep in particle-index order.
PsoResult pso_minimize(const std::function<double(const Vec2&)>& objective, const CityMap& map,
                       const PsoParams& params, std::uint64_t seed, std::optional<Vec2> warm_start = std::nullopt);

/// Reference evaluation of the per-particle negative log-likelihood for one
/// node's measurements, classifying each against the candidate position.
double particle_likelihood(const ChannelNet& net, std::span<const Measurement> measurements, const Vec2& candidate,
                           const CityMap& map, const Sigmas& sigmas);

/// Channel prediction tabulated over ground distance for one UAV altitude
/// (linear interpolation); the search loop uses it instead of the network.
class GainProfile {
public:
    GainProfile(const ChannelNet& net, double altitude, double max_ground_distance, double resolution = 0.05);

    double altitude() const { return altitude_; }
    double operator()(double ground_distance, bool los) const;

private:
    double altitude_;
    double resolution_;
    std::vector<double> los_;
    std::vector<double> nlos_;
};

/// One node's measurements pooled by UAV position.
class NodeLikelihood {
public:
    NodeLikelihood(const ChannelNet& net, std::span<const Measurement> measurements, const CityMap& map,
                   const Sigmas& sigmas);

    bool empty() const { return sites_.empty(); }
    std::size_t num_sites() const { return sites_.size(); }

    // Same value as particle_likelihood, computed from the pooled sites.
    double evaluate(const Vec2& candidate) const;
    // Same objective with tabulated channel predictions.
    double evaluate_fast(const Vec2& candidate) const;

private:
    struct Site {
        Vec3 uav;
        double count = 0.0;
        double mean = 0.0;
        double spread = 0.0;
        int profile = 0;
    };

    double combine(const Site& s, bool los, double predicted) const;

    const ChannelNet& net_;
    const CityMap& map_;
    Sigmas sigmas_;
    double log_ratio_;
    std::vector<Site> sites_;
    std::vector<GainProfile> profiles_;
};

PsoResult pso_localize(const ChannelNet& net, std::span<const Measurement> measurements, const CityMap& map,
                       const Sigmas& sigmas, const PsoParams& params, std::uint64_t seed,
                       std::optional<Vec2> warm_start = std::nullopt);

struct NodeEstimate {
    int node = 0;
    Vec2 position;
    double score = 0.0;
    int measurements = 0;
    bool localized = false;  // false: anchor, or kept the prior for lack of data
};

// Localizes every unknown node independently. `prior` carries the anchors'
// true positions and the previous estimates of unknown nodes; with `warm` set,
// each previous estimate seeds one particle. Nodes without measurements keep
// their prior position.
NodeSet localize_all(const ChannelNet& net, const std::vector<Measurement>& measurements, const CityMap& map,
                     const NodeSet& prior, bool warm, const Sigmas& sigmas, const PsoParams& params,
                     std::uint64_t seed, std::vector<NodeEstimate>* details = nullptr);

}  // namespace madql
