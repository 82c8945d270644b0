#pragma once

#include <cstdint>
#include <vector>

#include "madql/mlp.hpp"
#include "madql/radio.hpp"
#include "madql/scenario.hpp"

namespace madql {

struct ChannelTrainSettings {
    std::vector<int> hidden = {60, 30};  // tanh, then relu
    int max_epochs = 800;
    int patience = 100;
    int batch_size = 64;
    double learning_rate = 5e-3;
    double lr_decay = 0.996;  // per epoch
    double validation_fraction = 0.1;

    void validate() const;

    friend bool operator==(const ChannelTrainSettings&, const ChannelTrainSettings&) = default;
};

/// Known shadowing standard deviations per segment.
struct Sigmas {
    double los = 1.0;
    double nlos = 1.0;

    double of(bool is_los) const { return is_los ? los : nlos; }
};

/// Segmented channel function psi(d, phi, w): network input is
/// (d / distance_scale, elevation, w), output is the gain in dB.
class ChannelNet {
public:
    ChannelNet() = default;
    ChannelNet(Mlp net, double distance_scale);

    static ChannelNet make(const ChannelTrainSettings& settings, double distance_scale, Rng& rng);

    double predict(const GeometryFeatures& f) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& inputs) const;
    Eigen::Vector3d encode(const GeometryFeatures& f) const;

    const Mlp& net() const { return net_; }
    Mlp& net() { return net_; }
    double distance_scale() const { return distance_scale_; }

private:
    Mlp net_;
    double distance_scale_ = 1.0;
};

double predict_gain(const ChannelNet& net, const GeometryFeatures& features);

struct ClassifiedRecord {
    int node = 0;
    Vec3 uav;
    GeometryFeatures features;
    double gain_db = 0.0;
};

using ClassifiedDataset = std::vector<ClassifiedRecord>;

// Attaches map-derived LoS flags and geometry to anchor measurements.
// Throws UsageError if a measurement refers to a non-anchor node.
ClassifiedDataset classify_anchor_measurements(const CityMap& map, const NodeSet& nodes,
                                               const std::vector<Measurement>& raw);

struct ResidualStats {
    double rmse_los = 0.0;
    double rmse_nlos = 0.0;
    long count_los = 0;
    long count_nlos = 0;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double validation_loss = 0.0;
    double learning_rate = 0.0;
};

struct ChannelFit {
    ChannelNet net;
    std::vector<EpochStats> curve;
    ResidualStats train;
    ResidualStats validation;
    bool single_class = false;
};

// Negative log-likelihood of the anchor records under the segmented Gaussian
// model, up to the constant log(2*pi*sigma_nlos^2) per record.
double channel_nll(const ChannelNet& net, const ClassifiedDataset& data, const Sigmas& sigmas);

ResidualStats residual_stats(const ChannelNet& net, const ClassifiedDataset& data);

// Weighted least squares (1/sigma_z^2 per record) with mini-batch Adam.
// Records sharing UAV position and node are pooled into count / mean / spread,
// which leaves the objective unchanged. The learning rate decays geometrically
// per epoch; an epoch that raises the training loss is rolled back (parameters
// and optimizer state), so the recorded loss curve never increases. Early
// stopping keeps the best validation parameters.
ChannelFit train_channel(const ClassifiedDataset& data, const Sigmas& sigmas, const ChannelTrainSettings& settings,
                         double distance_scale, std::uint64_t seed);

}  // namespace madql
