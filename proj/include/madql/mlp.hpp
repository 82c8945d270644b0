#pragma once

#include <Eigen/Dense>
#include <string_view>
#include <vector>

#include "madql/common.hpp"

namespace madql {

enum class Activation { kTanh, kRelu, kIdentity };

std::string_view activation_name(Activation a);
Activation activation_from_name(std::string_view name);

/// Feed-forward network over a flat parameter vector. Layer l stores its
/// weight matrix (fan_out x fan_in, column-major) followed by its bias.
/// Inputs and outputs are column-major batches (features x samples).
class Mlp {
public:
    struct Cache {
        std::vector<Eigen::MatrixXd> pre;   // pre-activations per layer
        std::vector<Eigen::MatrixXd> post;  // post[0] = input, post[l+1] = output of layer l
    };

    Mlp() = default;
    Mlp(std::vector<int> layer_sizes, std::vector<Activation> activations);

    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    int num_layers() const { return static_cast<int>(activations_.size()); }
    Eigen::Index num_params() const { return params_.size(); }
    const std::vector<int>& layer_sizes() const { return sizes_; }
    const std::vector<Activation>& activations() const { return activations_; }

    Eigen::VectorXd& params() { return params_; }
    const Eigen::VectorXd& params() const { return params_; }
    void set_params(const Eigen::VectorXd& p);

    // Weights uniform in +-1/sqrt(fan_in), biases zero.
    void init_fan_in(Rng& rng);

    Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
    Eigen::Map<Eigen::MatrixXd> weight(int layer);
    Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
    Eigen::Map<Eigen::VectorXd> bias(int layer);

    Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const;
    Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Cache& cache) const;

    /// Gradient of a scalar loss w.r.t. the parameters, given dLoss/dOutput.
    Eigen::VectorXd backward(const Cache& cache, const Eigen::MatrixXd& grad_output) const;

    bool same_architecture(const Mlp& other) const;

private:
    std::vector<int> sizes_;
    std::vector<Activation> activations_;
    std::vector<Eigen::Index> offsets_;
    Eigen::VectorXd params_;
};

/// Adaptive-moment first-order optimizer over a flat parameter vector.
class Adam {
public:
    Adam() = default;
    explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon)
    {}

    // Descent step: params -= lr * m_hat / (sqrt(v_hat) + eps).
    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
    void reset();

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

private:
    double lr_ = 1e-3;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long t_ = 0;
    Eigen::VectorXd m_;
    Eigen::VectorXd v_;
};

}  // namespace madql
