#include <doctest.h>

#include <array>
#include <cmath>

#include "madql/dqn.hpp"
#include "support/oracles.hpp"

using namespace madql;

using oracle::max_relative_error;

TEST_CASE("mlp: parameter count and layout")
{
    const Mlp net({3, 120, 120, 5}, {Activation::kRelu, Activation::kRelu, Activation::kIdentity});
    CHECK(net.num_params() == (3 + 1) * 120 + (120 + 1) * 120 + (120 + 1) * 5);
    CHECK_THROWS_AS(Mlp({3, 5}, {Activation::kRelu, Activation::kRelu}), ConfigError);

    Mlp small({2, 2}, {Activation::kIdentity});
    small.set_params((Eigen::VectorXd(6) << 1, 2, 3, 4, 5, 6).finished());
    // Column-major W = [[1, 3], [2, 4]], b = [5, 6].
    const Eigen::MatrixXd y = small.forward((Eigen::MatrixXd(2, 1) << 1, 1).finished());
    CHECK(y(0, 0) == 9.0);
    CHECK(y(1, 0) == 12.0);
}

TEST_CASE("mlp: fan-in initialisation")
{
    Rng rng(1);
    Mlp net({3, 120, 120, 5}, {Activation::kRelu, Activation::kRelu, Activation::kIdentity});
    net.init_fan_in(rng);
    CHECK(net.weight(1).cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(120.0));
    CHECK(net.weight(0).cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(3.0));
    CHECK(net.bias(2).isZero());
}

TEST_CASE("dqn loss: analytic gradient matches central differences")
{
    for (std::uint64_t seed : {42, 43})
        CHECK(oracle::dqn_gradient_error(seed) < 1e-4);
}

TEST_CASE("mlp backward with tanh layers matches central differences")
{
    Rng rng(8);
    Mlp net({3, 60, 30, 1}, {Activation::kTanh, Activation::kRelu, Activation::kIdentity});
    net.init_fan_in(rng);
    net.params().array() += 0.01;
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 7);
    const Eigen::MatrixXd w = Eigen::MatrixXd::Random(1, 7);
    auto loss = [&](const Mlp& n) { return (n.forward(x).array() * w.array()).sum(); };
    Mlp::Cache cache;
    net.forward(x, cache);
    const Eigen::VectorXd g = net.backward(cache, w);
    Eigen::VectorXd numeric(net.num_params());
    Mlp probe = net;
    for (Eigen::Index i = 0; i < numeric.size(); ++i) {
        const double keep = probe.params()[i];
        probe.params()[i] = keep + 1e-6;
        const double up = loss(probe);
        probe.params()[i] = keep - 1e-6;
        const double down = loss(probe);
        probe.params()[i] = keep;
        numeric[i] = (up - down) / 2e-6;
    }
    CHECK(max_relative_error(g, numeric) < 1e-4);
}

TEST_CASE("dqn: greedy policy on a 3-state MDP matches value iteration")
{
    const oracle::ToyMdpResult r = oracle::toy_mdp(3);
    CHECK(r.policies_match());
    for (int s = 0; s < 3; ++s)
        CHECK(r.learned_value[s] == doctest::Approx(r.oracle_value[s]).epsilon(0.05));
}

TEST_CASE("epsilon schedule: closed form and monotone")
{
    const DqnSettings s;
    CHECK(epsilon(0, s) == 1.0);
    double prev = 2.0;
    for (long t = 0; t < 2000; ++t) {
        const double e = epsilon(t, s);
        CHECK(e == 0.1 + 0.9 * std::exp(-0.02 * static_cast<double>(t)));
        CHECK(e <= prev);
        CHECK(e >= 0.1);
        prev = e;
    }
}

TEST_CASE("greedy ties resolve to the lowest index")
{
    CHECK(greedy_action(Eigen::VectorXd::Zero(5)) == Action::kHover);
    CHECK(greedy_action((Eigen::VectorXd(5) << 0, 2, 1, 2, 2).finished()) == Action::kRight);
}

TEST_CASE("replay buffer: FIFO eviction and uniform union sampling")
{
    ReplayBuffer b(3);
    for (int i = 0; i < 5; ++i)
        b.push({{}, Action::kHover, static_cast<double>(i), {}, false});
    CHECK(b.size() == 3);
    CHECK(b.at(0).r == 2.0);
    CHECK(b.at(2).r == 4.0);
    Transition bad;
    bad.r = std::nan("");
    CHECK_THROWS_AS(b.push(bad), InvariantViolation);

    ReplayBuffer real(10), sim(30);
    for (int i = 0; i < 10; ++i)
        real.push({{}, Action::kHover, 1.0, {}, false});
    for (int i = 0; i < 30; ++i)
        sim.push({{}, Action::kHover, 0.0, {}, false});
    Rng rng(11);
    const auto batch = sample_union(real, &sim, 40000, rng);
    double from_real = 0;
    for (const Transition* t : batch)
        from_real += t->r;
    CHECK(from_real / 40000 == doctest::Approx(0.25).epsilon(0.04));
}

TEST_CASE("train_step: empty batch leaves the network untouched; target sync")
{
    Rng rng(2);
    DqnSettings s;
    Mlp primary = make_q_network(s, rng);
    const Eigen::VectorXd before = primary.params();
    Adam adam;
    CHECK_FALSE(train_step(primary, primary, {}, {1, 1, 1}, 0.95, adam).has_value());
    CHECK(primary.params() == before);

    Mlp target = make_q_network(s, rng);
    sync_target(primary, target);
    CHECK(target.params() == primary.params());
    Mlp other({3, 4, 5}, {Activation::kRelu, Activation::kIdentity});
    CHECK_THROWS_AS(sync_target(primary, other), InvariantViolation);
}

TEST_CASE("adam: first step moves each parameter by the learning rate against the gradient")
{
    Adam adam(0.01);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(3);
    adam.step(p, (Eigen::VectorXd(3) << 2.0, -0.5, 0.0).finished());
    CHECK(p[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(p[2] == 0.0);
}

TEST_CASE("dqn settings validation")
{
    DqnSettings s;
    s.eps_final = 0.5;
    s.eps_start = 0.4;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    s.gamma = 1.5;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    s.eps_decay = 0.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
}
