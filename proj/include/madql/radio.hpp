#pragma once

#include <optional>
#include <ostream>
#include <vector>

#include "madql/common.hpp"
#include "madql/scenario.hpp"

namespace madql {

/// Log-distance parameters of one propagation segment (LoS or NLoS).
struct SegmentParams {
    double alpha = 2.0;      // path-loss exponent
    double beta_db = -30.0;  // gain at the 1 m reference distance
    double sigma_db = 1.0;   // shadowing standard deviation

    friend bool operator==(const SegmentParams&, const SegmentParams&) = default;
};

struct ChannelParams {
    SegmentParams los{2.3, -35.0, 2.0};
    SegmentParams nlos{3.3, -40.0, 5.0};

    const SegmentParams& segment(bool is_los) const { return is_los ? los : nlos; }
    void validate() const;

    friend bool operator==(const ChannelParams&, const ChannelParams&) = default;
};

struct RadioParams {
    double tx_power_w = 0.1;
    double noise_power_w = 7.943282347242822e-13;  // 100 m LoS link ~ 30 dB SNR under default channel
    int num_nodes = 6;

    void validate() const;

    friend bool operator==(const RadioParams&, const RadioParams&) = default;
};

struct Measurement {
    int step = 0;
    Vec3 uav;
    int node = 0;
    double gain_db = 0.0;
    std::optional<bool> los;

    friend bool operator==(const Measurement&, const Measurement&) = default;
};

struct GeometryFeatures {
    double distance = 0.0;         // 3D distance
    double ground_distance = 0.0;  // horizontal distance
    double elevation = 0.0;        // arcsin(height difference / distance), radians
    bool los = true;
};

// Elevation uses the height-over-distance convention; see the README.
GeometryFeatures geometry_features(const Vec3& uav, const Vec2& node, bool los);

struct Gain {
    double db = 0.0;
    bool los = true;
};

/// Shadowing-free gain of the ground-truth segmented log-distance channel.
Gain true_gain(const ChannelParams& params, const CityMap& map, const Vec3& uav, const Vec2& node);

/// Gain with a fresh N(0, sigma_z^2) shadowing draw from `rng`.
Gain true_gain(const ChannelParams& params, const CityMap& map, const Vec3& uav, const Vec2& node, Rng& rng);

struct SamplingSettings {
    double spacing = 5.0;
    int hover_samples = 1;
};

// Positions sampled along one flown step: spacing, 2*spacing, ... up to and
// including `to` (start excluded); a hover yields `hover_samples` copies of `to`.
std::vector<Vec3> sample_positions(const Vec3& from, const Vec3& to, const SamplingSettings& sampling);

std::vector<Measurement> collect_measurements(const CityMap& map, const ChannelParams& params, const Vec3& from,
                                              const Vec3& to, const NodeSet& nodes, const SamplingSettings& sampling,
                                              Rng& rng, int step_index = 0);

// Per-node TDMA throughput in bits/s/Hz.
double throughput(double gain_db, const RadioParams& radio);

void write_measurements_csv(std::ostream& out, const std::vector<Measurement>& measurements);
std::vector<Measurement> read_measurements_csv(std::istream& in);

}  // namespace madql
