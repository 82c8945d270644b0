#include <doctest.h>

#include <cmath>

#include "madql/channel_model.hpp"

using namespace madql;

namespace {

struct Synthetic {
    CityMap map = generate_city(31, 500, 500, BlockSpec{});
    NodeSet nodes = place_nodes(31, map, 4, 2, 25, 60);
    ChannelParams truth;
    Sigmas sigmas{truth.los.sigma_db, truth.nlos.sigma_db};

    // Anchor measurements from UAV positions on a grid at 60 m.
    std::vector<Measurement> flights(double spacing, Rng* noise) const
    {
        std::vector<Measurement> out;
        for (double x = 0; x <= 500; x += spacing)
            for (double y = 0; y <= 500; y += spacing)
                for (int k : nodes.anchors()) {
                    const Vec3 uav{x, y, 60};
                    const Gain g = noise ? true_gain(truth, map, uav, nodes.positions[k], *noise)
                                         : true_gain(truth, map, uav, nodes.positions[k]);
                    out.push_back({0, uav, k, g.db, std::nullopt});
                }
        return out;
    }
};

}  // namespace

TEST_CASE("classification uses the map and rejects non-anchors")
{
    const Synthetic s;
    const auto data = classify_anchor_measurements(s.map, s.nodes, s.flights(100, nullptr));
    for (const ClassifiedRecord& r : data) {
        const Vec2 u = s.nodes.positions[r.node];
        CHECK(r.features.los == is_los(s.map, r.uav, {u.x, u.y, 0}));
    }
    std::vector<Measurement> bad = {{0, {0, 0, 60}, 3, -90, std::nullopt}};
    CHECK_THROWS_AS(classify_anchor_measurements(s.map, s.nodes, bad), UsageError);
}

TEST_CASE("noiseless log-distance data is fitted within 1 dB over the sampled range")
{
    const Synthetic s;
    const auto data = classify_anchor_measurements(s.map, s.nodes, s.flights(15, nullptr));
    const ChannelFit fit = train_channel(data, s.sigmas, {}, s.map.diagonal(), 5);
    double lo[2] = {1e9, 1e9}, hi[2] = {0, 0};
    for (const ClassifiedRecord& r : data) {
        lo[r.features.los] = std::min(lo[r.features.los], r.features.distance);
        hi[r.features.los] = std::max(hi[r.features.los], r.features.distance);
    }
    double worst = 0.0;
    int probed = 0;
    for (const ClassifiedRecord& r : classify_anchor_measurements(s.map, s.nodes, s.flights(12, nullptr))) {
        const int w = r.features.los;
        if (r.features.distance < lo[w] || r.features.distance > hi[w])
            continue;
        worst = std::max(worst, std::abs(fit.net.predict(r.features) - r.gain_db));
        ++probed;
    }
    MESSAGE("max abs error (dB): " << worst << " over " << probed << " probes");
    CHECK(probed > 1000);
    CHECK(worst <= 1.0);
}

TEST_CASE("single-class noiseless law reaches sub-half-dB train RMSE")
{
    ClassifiedDataset data;
    for (double x = 0; x <= 500; x += 10)
        for (double y = 0; y <= 500; y += 10) {
            const Vec3 uav{x, y, 60};
            ClassifiedRecord r;
            r.uav = uav;
            r.features = geometry_features(uav, {250, 250}, true);
            r.gain_db = -30.0 - 20.0 * std::log10(r.features.distance);
            data.push_back(r);
        }
    const ChannelFit fit = train_channel(data, {2.0, 5.0}, {}, 500.0 * std::sqrt(2.0), 9);
    CHECK(fit.single_class);
    MESSAGE("train rmse " << fit.train.rmse_los);
    CHECK(fit.train.rmse_los < 0.5);
}

TEST_CASE("held-out per-class RMSE stays within 1.5 sigma")
{
    const Synthetic s;
    Rng noise(77);
    const auto data = classify_anchor_measurements(s.map, s.nodes, s.flights(20, &noise));
    const ChannelFit fit = train_channel(data, s.sigmas, {}, s.map.diagonal(), 6);
    REQUIRE(fit.validation.count_los > 0);
    REQUIRE(fit.validation.count_nlos > 0);
    MESSAGE("validation rmse los " << fit.validation.rmse_los << " nlos " << fit.validation.rmse_nlos);
    CHECK(fit.validation.rmse_los <= 1.5 * s.sigmas.los);
    CHECK(fit.validation.rmse_nlos <= 1.5 * s.sigmas.nlos);
}

TEST_CASE("training loss never increases and early stopping keeps the best validation point")
{
    const Synthetic s;
    Rng noise(78);
    const auto data = classify_anchor_measurements(s.map, s.nodes, s.flights(40, &noise));
    ChannelTrainSettings settings;
    settings.max_epochs = 120;
    const ChannelFit fit = train_channel(data, s.sigmas, settings, s.map.diagonal(), 1);
    REQUIRE(fit.curve.size() >= 2);
    for (std::size_t i = 1; i < fit.curve.size(); ++i)
        CHECK(fit.curve[i].train_loss <= fit.curve[i - 1].train_loss);
}

TEST_CASE("duplicated records leave the parameter trajectory unchanged")
{
    const Synthetic s;
    Rng noise(79);
    const auto meas = s.flights(50, &noise);
    auto doubled = meas;
    doubled.insert(doubled.end(), meas.begin(), meas.end());
    ChannelTrainSettings settings;
    settings.max_epochs = 30;
    const ChannelFit a = train_channel(classify_anchor_measurements(s.map, s.nodes, meas), s.sigmas, settings,
                                       s.map.diagonal(), 2);
    const ChannelFit b = train_channel(classify_anchor_measurements(s.map, s.nodes, doubled), s.sigmas, settings,
                                       s.map.diagonal(), 2);
    CHECK(a.net.net().params() == b.net.net().params());
}

TEST_CASE("single-class data trains with a warning")
{
    const CityMap empty(500, 500, {});
    const NodeSet nodes{{{100, 100}, {400, 400}}, {true, false}};
    std::vector<Measurement> meas;
    for (double x = 0; x <= 500; x += 50)
        meas.push_back({0, {x, 250, 60}, 0, true_gain({}, empty, {x, 250, 60}, {100, 100}).db, std::nullopt});
    ChannelTrainSettings settings;
    settings.max_epochs = 20;
    const ChannelFit fit = train_channel(classify_anchor_measurements(empty, nodes, meas), {2, 5}, settings, 707, 1);
    CHECK(fit.single_class);
    CHECK_THROWS_AS(train_channel({}, {2, 5}, settings, 707, 1), ConfigError);
}

TEST_CASE("channel_nll: segmented Gaussian negative log-likelihood")
{
    Rng rng(1);
    ChannelNet net = ChannelNet::make({}, 100.0, rng);
    const GeometryFeatures los = geometry_features({0, 0, 60}, {80, 0}, true);
    const GeometryFeatures nlos = geometry_features({0, 0, 60}, {80, 0}, false);
    const ClassifiedDataset data = {{0, {0, 0, 60}, los, -80.0}, {0, {0, 0, 60}, nlos, -95.0}};
    const Sigmas sig{2.0, 5.0};
    const double e1 = -80.0 - net.predict(los), e2 = -95.0 - net.predict(nlos);
    const double expected = std::log(4.0 / 25.0) + e1 * e1 / 4.0 + e2 * e2 / 25.0;
    CHECK(channel_nll(net, data, sig) == doctest::Approx(expected).epsilon(1e-12));
}
