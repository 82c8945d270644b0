#include "madql/dqn.hpp"

#include <cmath>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace madql {

void DqnSettings::validate() const
{
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw ConfigError("hyper.dqn.gamma must lie in [0, 1]");
    if (!(0.0 <= eps_final && eps_final <= eps_start && eps_start <= 1.0))
        throw ConfigError("hyper.dqn: need 0 <= eps_final <= eps_start <= 1");
    if (!(eps_decay > 0.0))
        throw ConfigError("hyper.dqn.eps_decay must be positive");
    if (!(learning_rate > 0.0) || batch_size < 1 || target_sync_period < 1)
        throw ConfigError("hyper.dqn: learning_rate, batch_size and target_sync_period must be positive");
    if (replay_capacity_real < 1 || replay_capacity_sim < 1)
        throw ConfigError("hyper.dqn: replay capacities must be positive");
    for (int h : hidden)
        if (h < 1)
            throw ConfigError("hyper.dqn.hidden: layer sizes must be positive");
}

Eigen::MatrixXd StateEncoder::encode(const std::vector<const State*>& states) const
{
    Eigen::MatrixXd x(3, static_cast<Eigen::Index>(states.size()));
    for (std::size_t i = 0; i < states.size(); ++i)
        x.col(static_cast<Eigen::Index>(i)) = encode(*states[i]);
    return x;
}

Mlp make_q_network(const DqnSettings& settings, Rng& rng)
{
    std::vector<int> sizes = {3};
    sizes.insert(sizes.end(), settings.hidden.begin(), settings.hidden.end());
    sizes.push_back(kNumActions);
    std::vector<Activation> acts(settings.hidden.size(), Activation::kRelu);
    acts.push_back(Activation::kIdentity);
    Mlp net(sizes, acts);
    net.init_fan_in(rng);
    return net;
}

Eigen::VectorXd q_values(const Mlp& net, const StateEncoder& enc, const State& s)
{
    return net.forward(Eigen::MatrixXd(enc.encode(s))).col(0);
}

Action greedy_action(const Eigen::VectorXd& q)
{
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < q.size(); ++i)
        if (q[i] > q[best])
            best = i;
    return static_cast<Action>(best);
}

Action greedy_action(const Mlp& net, const StateEncoder& enc, const State& s)
{
    return greedy_action(q_values(net, enc, s));
}

Action act_eps_greedy(const Mlp& net, const StateEncoder& enc, const State& s, double eps, Rng& rng)
{
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < eps) {
        std::uniform_int_distribution<int> pick(0, kNumActions - 1);
        return static_cast<Action>(pick(rng));
    }
    return greedy_action(net, enc, s);
}

double epsilon(long t, const DqnSettings& settings)
{
    return settings.eps_final +
           (settings.eps_start - settings.eps_final) * std::exp(-settings.eps_decay * static_cast<double>(t));
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity)
{
    if (capacity_ == 0)
        throw ConfigError("replay buffer capacity must be positive");
    data_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
}

void ReplayBuffer::push(const Transition& tr)
{
    if (!std::isfinite(tr.r))
        throw InvariantViolation("replay: non-finite reward");
    if (data_.size() < capacity_) {
        data_.push_back(tr);
        return;
    }
    data_[head_] = tr;
    head_ = (head_ + 1) % capacity_;
}

void ReplayBuffer::clear()
{
    data_.clear();
    head_ = 0;
}

const Transition& ReplayBuffer::at(std::size_t i) const { return data_.at((head_ + i) % data_.size()); }

std::vector<const Transition*> sample_union(const ReplayBuffer& real, const ReplayBuffer* simulated, int count, Rng& rng)
{
    const std::size_t n_real = real.size();
    const std::size_t total = n_real + (simulated ? simulated->size() : 0);
    std::vector<const Transition*> batch;
    if (total == 0)
        return batch;
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    batch.reserve(static_cast<std::size_t>(count));
    for (int m = 0; m < count; ++m) {
        const std::size_t i = pick(rng);
        batch.push_back(i < n_real ? &real.at(i) : &simulated->at(i - n_real));
    }
    return batch;
}

DqnLoss dqn_loss(const Mlp& primary, const Mlp& target, const std::vector<const Transition*>& batch,
                 const StateEncoder& enc, double gamma, bool with_gradient)
{
    const auto m = static_cast<Eigen::Index>(batch.size());
    std::vector<const State*> s, s_next;
    for (const Transition* tr : batch) {
        s.push_back(&tr->s);
        s_next.push_back(&tr->next);
    }
    const Eigen::MatrixXd q_next = target.forward(enc.encode(s_next));
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Transition& tr = *batch[static_cast<std::size_t>(i)];
        y[i] = tr.terminal ? tr.r : tr.r + gamma * q_next.col(i).maxCoeff();
    }

    Mlp::Cache cache;
    const Eigen::MatrixXd q = primary.forward(enc.encode(s), cache);
    Eigen::MatrixXd grad_out = Eigen::MatrixXd::Zero(q.rows(), q.cols());
    DqnLoss out;
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto a = static_cast<Eigen::Index>(batch[static_cast<std::size_t>(i)]->a);
        const double err = y[i] - q(a, i);
        out.loss += err * err;
        grad_out(a, i) = -2.0 * err / static_cast<double>(m);
    }
    out.loss /= static_cast<double>(m);
    if (with_gradient)
        out.grad = primary.backward(cache, grad_out);
    return out;
}

std::optional<double> train_step(Mlp& primary, const Mlp& target, const std::vector<const Transition*>& batch,
                                 const StateEncoder& enc, double gamma, Adam& optimizer)
{
    if (batch.empty()) {
        spdlog::warn("train_step: replay buffers are empty, skipping");
        return std::nullopt;
    }
    DqnLoss l = dqn_loss(primary, target, batch, enc, gamma);
    optimizer.step(primary.params(), l.grad);
    return l.loss;
}

void sync_target(const Mlp& primary, Mlp& target)
{
    if (!primary.same_architecture(target))
        throw InvariantViolation("sync_target: architecture mismatch");
    target.params() = primary.params();
}

}  // namespace madql
