#include "madql/mlp.hpp"

#include <cmath>
#include <fmt/format.h>

namespace madql {

std::string_view activation_name(Activation a)
{
    switch (a) {
    case Activation::kTanh:
        return "tanh";
    case Activation::kRelu:
        return "relu";
    case Activation::kIdentity:
        return "identity";
    }
    return "?";
}

Activation activation_from_name(std::string_view name)
{
    for (Activation a : {Activation::kTanh, Activation::kRelu, Activation::kIdentity})
        if (activation_name(a) == name)
            return a;
    throw ConfigError(fmt::format("unknown activation '{}'", name));
}

Mlp::Mlp(std::vector<int> layer_sizes, std::vector<Activation> activations)
    : sizes_(std::move(layer_sizes)), activations_(std::move(activations))
{
    if (sizes_.size() < 2 || activations_.size() + 1 != sizes_.size())
        throw ConfigError("mlp: need one activation per layer and at least one layer");
    Eigen::Index total = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        if (sizes_[l] <= 0 || sizes_[l + 1] <= 0)
            throw ConfigError("mlp: layer sizes must be positive");
        offsets_.push_back(total);
        total += static_cast<Eigen::Index>(sizes_[l] + 1) * sizes_[l + 1];
    }
    params_ = Eigen::VectorXd::Zero(total);
}

void Mlp::set_params(const Eigen::VectorXd& p)
{
    if (p.size() != params_.size())
        throw ConfigError(fmt::format("mlp: expected {} parameters, got {}", params_.size(), p.size()));
    params_ = p;
}

void Mlp::init_fan_in(Rng& rng)
{
    for (int l = 0; l < num_layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
        std::uniform_real_distribution<double> u(-bound, bound);
        auto w = weight(l);
        for (Eigen::Index c = 0; c < w.cols(); ++c)
            for (Eigen::Index r = 0; r < w.rows(); ++r)
                w(r, c) = u(rng);
        bias(l).setZero();
    }
}

Eigen::Map<const Eigen::MatrixXd> Mlp::weight(int l) const
{
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
}

Eigen::Map<Eigen::MatrixXd> Mlp::weight(int l) { return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]}; }

Eigen::Map<const Eigen::VectorXd> Mlp::bias(int l) const
{
    return {params_.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1], sizes_[l + 1]};
}

Eigen::Map<Eigen::VectorXd> Mlp::bias(int l)
{
    return {params_.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1], sizes_[l + 1]};
}

namespace {

void apply(Activation a, Eigen::MatrixXd& m)
{
    switch (a) {
    case Activation::kTanh:
        m = m.array().tanh();
        break;
    case Activation::kRelu:
        m = m.cwiseMax(0.0);
        break;
    case Activation::kIdentity:
        break;
    }
}

}  // namespace

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input) const
{
    if (input.rows() != input_size())
        throw UsageError(fmt::format("mlp: expected {} input rows, got {}", input_size(), input.rows()));
    Eigen::MatrixXd x = input;
    for (int l = 0; l < num_layers(); ++l) {
        Eigen::MatrixXd z = weight(l) * x;
        z.colwise() += bias(l);
        apply(activations_[l], z);
        x = std::move(z);
    }
    return x;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, Cache& cache) const
{
    if (input.rows() != input_size())
        throw UsageError(fmt::format("mlp: expected {} input rows, got {}", input_size(), input.rows()));
    cache.pre.resize(num_layers());
    cache.post.resize(num_layers() + 1);
    cache.post[0] = input;
    for (int l = 0; l < num_layers(); ++l) {
        cache.pre[l] = weight(l) * cache.post[l];
        cache.pre[l].colwise() += bias(l);
        cache.post[l + 1] = cache.pre[l];
        apply(activations_[l], cache.post[l + 1]);
    }
    return cache.post.back();
}

Eigen::VectorXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& grad_output) const
{
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
    Eigen::MatrixXd delta = grad_output;
    for (int l = num_layers() - 1; l >= 0; --l) {
        switch (activations_[l]) {
        case Activation::kTanh:
            delta.array() *= 1.0 - cache.post[l + 1].array().square();
            break;
        case Activation::kRelu:
            delta.array() *= (cache.pre[l].array() > 0.0).cast<double>();
            break;
        case Activation::kIdentity:
            break;
        }
        const Eigen::Index in = sizes_[l], out = sizes_[l + 1];
        Eigen::Map<Eigen::MatrixXd>(grad.data() + offsets_[l], out, in).noalias() = delta * cache.post[l].transpose();
        Eigen::Map<Eigen::VectorXd>(grad.data() + offsets_[l] + in * out, out) = delta.rowwise().sum();
        if (l > 0)
            delta = weight(l).transpose() * delta;
    }
    return grad;
}

bool Mlp::same_architecture(const Mlp& other) const
{
    return sizes_ == other.sizes_ && activations_ == other.activations_;
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad)
{
    if (m_.size() != params.size()) {
        m_ = Eigen::VectorXd::Zero(params.size());
        v_ = Eigen::VectorXd::Zero(params.size());
        t_ = 0;
    }
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

void Adam::reset()
{
    m_.resize(0);
    v_.resize(0);
    t_ = 0;
}

}  // namespace madql
