#include <doctest.h>

#include <cmath>
#include <sstream>

#include "madql/radio.hpp"
#include "support/oracles.hpp"

using namespace madql;
using oracle::throughput_reference;

TEST_CASE("true_gain: segmented log-distance law")
{
    const ChannelParams p;
    const CityMap empty(500, 500, {});
    const Gain g = true_gain(p, empty, {100, 0, 60}, {0, 0});
    const double d = std::sqrt(100.0 * 100.0 + 60.0 * 60.0);
    CHECK(g.los);
    CHECK(g.db == doctest::Approx(-35.0 - 23.0 * std::log10(d)).epsilon(1e-14));

    const CityMap wall(500, 500, {{40, 0, 60, 100, 30}});
    const Gain n = true_gain(p, wall, {100, 10, 60}, {0, 10});
    CHECK_FALSE(n.los);
    const double dn = std::sqrt(100.0 * 100.0 + 60.0 * 60.0);
    CHECK(n.db == doctest::Approx(-40.0 - 33.0 * std::log10(dn)).epsilon(1e-14));

    CHECK_THROWS_AS(true_gain(p, empty, {10, 10, 0}, {10, 10}), std::domain_error);
}

TEST_CASE("geometry_features: distances and elevation")
{
    const GeometryFeatures f = geometry_features({30, 40, 60}, {0, 0}, true);
    CHECK(f.ground_distance == doctest::Approx(50.0));
    CHECK(f.distance == doctest::Approx(std::sqrt(50.0 * 50.0 + 3600.0)));
    CHECK(f.elevation == doctest::Approx(std::asin(60.0 / f.distance)));
    CHECK(f.distance >= f.ground_distance);
    const GeometryFeatures above = geometry_features({7, 7, 60}, {7, 7}, false);
    CHECK(above.elevation == doctest::Approx(std::acos(0.0)));
}

TEST_CASE("throughput: closed form to machine precision")
{
    RadioParams r;
    Rng rng(17);
    std::uniform_real_distribution<double> gain(-150.0, -30.0);
    for (int i = 0; i < 100; ++i) {
        const double g = gain(rng);
        const double ref = throughput_reference(g, r);
        CHECK(std::abs(throughput(g, r) - ref) <= 4 * std::numeric_limits<double>::epsilon() * ref);
    }
    r.num_nodes = 3;
    CHECK(throughput(-80.0, r) == doctest::Approx(throughput_reference(-80.0, r)).epsilon(1e-15));
}

TEST_CASE("default radio: 100 m LoS link has about 30 dB SNR")
{
    const ChannelParams p;
    const RadioParams r;
    const double gain = p.los.beta_db - 10.0 * p.los.alpha * std::log10(100.0);
    const double snr_db = 10.0 * std::log10(r.tx_power_w / r.noise_power_w) + gain;
    CHECK(snr_db == doctest::Approx(30.0).epsilon(1e-9));
}

TEST_CASE("sample_positions: start excluded, end included, one sample on hover")
{
    const auto s = sample_positions({0, 0, 60}, {50, 0, 60}, {});
    REQUIRE(s.size() == 10);
    CHECK(s.front() == Vec3{5, 0, 60});
    CHECK(s.back() == Vec3{50, 0, 60});
    CHECK(sample_positions({0, 0, 60}, {0, 0, 60}, {}).size() == 1);
    CHECK(sample_positions({0, 0, 60}, {0, 0, 60}, {5.0, 0}).empty());
    CHECK(sample_positions({0, 0, 60}, {0, 12, 60}, {5.0, 1}).size() == 3);
}

TEST_CASE("shadowing: zero-mean Gaussian with the segment sigma")
{
    const ChannelParams p;
    const CityMap empty(500, 500, {});
    Rng rng(3);
    const Vec3 uav{120, 40, 60};
    const double mean_gain = true_gain(p, empty, uav, {0, 0}).db;
    const int n = 40000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double e = true_gain(p, empty, uav, {0, 0}, rng).db - mean_gain;
        sum += e;
        sq += e * e;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    CHECK(std::abs(mean) < 4.0 * p.los.sigma_db / std::sqrt(n));
    CHECK(sd == doctest::Approx(p.los.sigma_db).epsilon(0.03));
}

TEST_CASE("collect_measurements: every sampled position measures every node")
{
    const CityMap m(500, 500, {});
    const NodeSet nodes{{{10, 10}, {200, 300}, {400, 20}}, {true, false, false}};
    Rng rng(1);
    const auto meas = collect_measurements(m, {}, {100, 100, 60}, {100, 150, 60}, nodes, {}, rng, 4);
    CHECK(meas.size() == 30);
    for (const Measurement& x : meas) {
        CHECK(x.step == 4);
        CHECK_FALSE(x.los.has_value());
    }
}

TEST_CASE("measurements csv round trip")
{
    std::vector<Measurement> v = {{0, {5, 0, 60}, 1, -87.123456789012345, std::nullopt},
                                  {3, {100, 150.5, 60}, 0, -70.25, true},
                                  {7, {0, 0, 60}, 2, -101.0, false}};
    std::stringstream ss;
    write_measurements_csv(ss, v);
    CHECK(read_measurements_csv(ss) == v);

    std::stringstream bad("step,x\n1,2\n");
    CHECK_THROWS_AS(read_measurements_csv(bad), ConfigError);
}

TEST_CASE("channel and radio validation")
{
    ChannelParams p;
    p.nlos.sigma_db = 1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    RadioParams r;
    r.noise_power_w = 0.0;
    CHECK_THROWS_AS(r.validate(), ConfigError);
}
