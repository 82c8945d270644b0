#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "madql/env.hpp"
#include "madql/mlp.hpp"

namespace madql {

struct DqnSettings {
    double gamma = 0.95;
    double learning_rate = 1e-3;
    int batch_size = 64;
    int target_sync_period = 10;  // in episodes of the shared counter t
    double eps_start = 1.0;
    double eps_final = 0.1;
    double eps_decay = 0.02;  // kappa, per episode counter t
    std::vector<int> hidden = {120, 120};
    std::size_t replay_capacity_real = 50000;
    std::size_t replay_capacity_sim = 50000;

    void validate() const;

    friend bool operator==(const DqnSettings&, const DqnSettings&) = default;
};

/// Normalizes a state to the network input (x / width, y / depth, b / b_max).
struct StateEncoder {
    double width = 1.0;
    double depth = 1.0;
    double battery_max = 1.0;

    Eigen::Vector3d encode(const State& s) const
    {
        return {s.pos.x / width, s.pos.y / depth, s.battery / battery_max};
    }
    Eigen::MatrixXd encode(const std::vector<const State*>& states) const;
};

Mlp make_q_network(const DqnSettings& settings, Rng& rng);

Eigen::VectorXd q_values(const Mlp& net, const StateEncoder& enc, const State& s);

// argmax with ties resolved toward the lowest action index.
Action greedy_action(const Eigen::VectorXd& q);
Action greedy_action(const Mlp& net, const StateEncoder& enc, const State& s);
Action act_eps_greedy(const Mlp& net, const StateEncoder& enc, const State& s, double epsilon, Rng& rng);

double epsilon(long t, const DqnSettings& settings);

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(const Transition& tr);
    void clear();
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return data_.empty(); }

    // Oldest-first access.
    const Transition& at(std::size_t i) const;

private:
    std::size_t capacity_;
    std::size_t head_ = 0;  // index of the oldest element once full
    std::vector<Transition> data_;
};

// M draws with replacement, uniform over the multiset union of both buffers.
std::vector<const Transition*> sample_union(const ReplayBuffer& real, const ReplayBuffer* simulated, int count, Rng& rng);

struct DqnLoss {
    double loss = 0.0;
    Eigen::VectorXd grad;
};

// Mean squared temporal-difference error against targets from `target`, and
// its gradient with respect to the primary parameters.
DqnLoss dqn_loss(const Mlp& primary, const Mlp& target, const std::vector<const Transition*>& batch,
                 const StateEncoder& enc, double gamma, bool with_gradient = true);

// One optimizer step on the primary network. Returns std::nullopt (and leaves
// the network untouched) on an empty batch.
std::optional<double> train_step(Mlp& primary, const Mlp& target, const std::vector<const Transition*>& batch,
                                 const StateEncoder& enc, double gamma, Adam& optimizer);

void sync_target(const Mlp& primary, Mlp& target);

}  // namespace madql
