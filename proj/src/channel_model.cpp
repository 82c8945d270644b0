#include "madql/channel_model.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <map>
#include <numeric>
#include <spdlog/spdlog.h>
#include <tuple>

namespace madql {

void ChannelTrainSettings::validate() const
{
    if (hidden.size() != 2 || hidden[0] < 1 || hidden[1] < 1)
        throw ConfigError("hyper.channel.hidden: expected two positive layer sizes");
    if (max_epochs < 1 || patience < 1 || batch_size < 1 || !(learning_rate > 0.0))
        throw ConfigError("hyper.channel: epochs, patience, batch_size and learning_rate must be positive");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0))
        throw ConfigError("hyper.channel.lr_decay: must be in (0, 1]");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        throw ConfigError("hyper.channel.validation_fraction must lie in [0, 1)");
}

ChannelNet::ChannelNet(Mlp net, double distance_scale) : net_(std::move(net)), distance_scale_(distance_scale)
{
    if (net_.input_size() != 3 || net_.output_size() != 1)
        throw ConfigError("channel net: expected 3 inputs and 1 output");
    if (!(distance_scale_ > 0.0))
        throw ConfigError("channel net: distance scale must be positive");
}

ChannelNet ChannelNet::make(const ChannelTrainSettings& settings, double distance_scale, Rng& rng)
{
    Mlp net({3, settings.hidden.at(0), settings.hidden.at(1), 1},
            {Activation::kTanh, Activation::kRelu, Activation::kIdentity});
    net.init_fan_in(rng);
    return {std::move(net), distance_scale};
}

Eigen::Vector3d ChannelNet::encode(const GeometryFeatures& f) const
{
    return {f.distance / distance_scale_, f.elevation, f.los ? 1.0 : 0.0};
}

double ChannelNet::predict(const GeometryFeatures& f) const
{
    return net_.forward(Eigen::MatrixXd(encode(f)))(0, 0);
}

Eigen::VectorXd ChannelNet::predict(const Eigen::MatrixXd& inputs) const { return net_.forward(inputs).row(0).transpose(); }

double predict_gain(const ChannelNet& net, const GeometryFeatures& features) { return net.predict(features); }

ClassifiedDataset classify_anchor_measurements(const CityMap& map, const NodeSet& nodes,
                                               const std::vector<Measurement>& raw)
{
    ClassifiedDataset out;
    out.reserve(raw.size());
    for (const Measurement& m : raw) {
        if (m.node < 0 || m.node >= nodes.size() || !nodes.is_anchor(m.node))
            throw UsageError(fmt::format("classify_anchor_measurements: node {} is not an anchor", m.node));
        const Vec2 u = nodes.positions[m.node];
        const bool los = is_los(map, m.uav, {u.x, u.y, 0.0});
        out.push_back({m.node, m.uav, geometry_features(m.uav, u, los), m.gain_db});
    }
    return out;
}

double channel_nll(const ChannelNet& net, const ClassifiedDataset& data, const Sigmas& sigmas)
{
    const double log_ratio = std::log(sigmas.los * sigmas.los / (sigmas.nlos * sigmas.nlos));
    double total = 0.0;
    for (const ClassifiedRecord& r : data) {
        const double s = sigmas.of(r.features.los);
        const double e = r.gain_db - net.predict(r.features);
        total += (r.features.los ? log_ratio : 0.0) + e * e / (s * s);
    }
    return total;
}

ResidualStats residual_stats(const ChannelNet& net, const ClassifiedDataset& data)
{
    ResidualStats st;
    double sse_los = 0.0, sse_nlos = 0.0;
    for (const ClassifiedRecord& r : data) {
        const double e = r.gain_db - net.predict(r.features);
        if (r.features.los) {
            sse_los += e * e;
            ++st.count_los;
        } else {
            sse_nlos += e * e;
            ++st.count_nlos;
        }
    }
    st.rmse_los = st.count_los ? std::sqrt(sse_los / st.count_los) : 0.0;
    st.rmse_nlos = st.count_nlos ? std::sqrt(sse_nlos / st.count_nlos) : 0.0;
    return st;
}

namespace {

// Records sharing (uav position, node): sum_i (g_i - psi)^2 = n (mean - psi)^2 + spread.
struct Group {
    Eigen::Vector3d input;
    bool los = true;
    double count = 0.0;
    double mean = 0.0;
    double spread = 0.0;
    double inv_var = 1.0;
};

std::vector<Group> pool(const ChannelNet& net, const ClassifiedDataset& data, const Sigmas& sigmas)
{
    std::map<std::tuple<double, double, double, int>, std::vector<std::size_t>> index;
    for (std::size_t i = 0; i < data.size(); ++i)
        index[{data[i].uav.x, data[i].uav.y, data[i].uav.z, data[i].node}].push_back(i);
    std::vector<Group> groups;
    groups.reserve(index.size());
    std::vector<double> values;
    for (const auto& [key, members] : index) {
        const ClassifiedRecord& first = data[members.front()];
        Group g;
        g.input = net.encode(first.features);
        g.los = first.features.los;
        g.count = static_cast<double>(members.size());
        values.clear();
        for (std::size_t i : members)
            values.push_back(data[i].gain_db);
        g.mean = exact_sum(values) / g.count;
        for (double& v : values)
            v = (v - g.mean) * (v - g.mean);
        g.spread = exact_sum(values);
        const double s = sigmas.of(g.los);
        g.inv_var = 1.0 / (s * s);
        groups.push_back(g);
    }
    return groups;
}

struct GroupBatch {
    Eigen::MatrixXd inputs;
    Eigen::VectorXd means, weights;  // weights = count / sigma^2
    double spread = 0.0;             // sum of spread / sigma^2
    double count = 0.0;
};

GroupBatch gather(const std::vector<Group>& groups, const std::vector<std::size_t>& idx, std::size_t begin,
                  std::size_t end)
{
    GroupBatch b;
    const auto n = static_cast<Eigen::Index>(end - begin);
    b.inputs.resize(3, n);
    b.means.resize(n);
    b.weights.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const Group& g = groups[idx[begin + static_cast<std::size_t>(j)]];
        b.inputs.col(j) = g.input;
        b.means[j] = g.mean;
        b.weights[j] = g.count * g.inv_var;
        b.spread += g.spread * g.inv_var;
        b.count += g.count;
    }
    return b;
}

double batch_loss(const Mlp& net, const GroupBatch& b)
{
    if (b.count == 0.0)
        return 0.0;
    const Eigen::VectorXd psi = net.forward(b.inputs).row(0).transpose();
    return ((b.means - psi).array().square() * b.weights.array()).sum() / b.count + b.spread / b.count;
}

}  // namespace

ChannelFit train_channel(const ClassifiedDataset& data, const Sigmas& sigmas, const ChannelTrainSettings& settings,
                         double distance_scale, std::uint64_t seed)
{
    if (data.empty())
        throw ConfigError("train_channel: empty anchor dataset");
    settings.validate();

    Rng init_rng = make_stream(seed, "channel-init");
    Rng split_rng = make_stream(seed, "channel-split");
    Rng batch_rng = make_stream(seed, "channel-batches");

    ChannelFit fit;
    fit.net = ChannelNet::make(settings, distance_scale, init_rng);
    const bool has_los = std::any_of(data.begin(), data.end(), [](const auto& r) { return r.features.los; });
    const bool has_nlos = std::any_of(data.begin(), data.end(), [](const auto& r) { return !r.features.los; });
    fit.single_class = !(has_los && has_nlos);
    if (fit.single_class)
        spdlog::warn("train_channel: only {} records present; the other segment is unconstrained",
                     has_los ? "LoS" : "NLoS");

    const std::vector<Group> groups = pool(fit.net, data, sigmas);
    std::vector<std::size_t> order(groups.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), split_rng);
    auto n_val = static_cast<std::size_t>(std::floor(settings.validation_fraction * static_cast<double>(groups.size())));
    if (groups.size() - n_val < 1)
        n_val = 0;
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());

    const GroupBatch train_all = gather(groups, train_idx, 0, train_idx.size());
    const GroupBatch val_all = gather(groups, val_idx, 0, val_idx.size());

    // Start the output at the weighted mean gain; the raw dB scale is far from zero.
    {
        double num = 0.0, den = 0.0;
        for (std::size_t i : train_idx) {
            num += groups[i].count * groups[i].mean;
            den += groups[i].count;
        }
        fit.net.net().bias(fit.net.net().num_layers() - 1)[0] = num / den;
    }

    Mlp& net = fit.net.net();
    Adam adam(settings.learning_rate);
    double lr = settings.learning_rate;
    double train_loss = batch_loss(net, train_all);
    const bool use_val = !val_idx.empty();
    double best_val = use_val ? batch_loss(net, val_all) : train_loss;
    Eigen::VectorXd best_params = net.params();
    int since_best = 0;

    std::vector<std::size_t> shuffled = train_idx;
    for (int epoch = 1; epoch <= settings.max_epochs; ++epoch) {
        const Eigen::VectorXd snapshot = net.params();
        const Adam adam_snapshot = adam;
        std::shuffle(shuffled.begin(), shuffled.end(), batch_rng);
        for (std::size_t b = 0; b < shuffled.size(); b += static_cast<std::size_t>(settings.batch_size)) {
            const GroupBatch batch =
                gather(groups, shuffled, b, std::min(shuffled.size(), b + static_cast<std::size_t>(settings.batch_size)));
            Mlp::Cache cache;
            const Eigen::MatrixXd psi = net.forward(batch.inputs, cache);
            const Eigen::VectorXd resid = batch.means - psi.row(0).transpose();
            const Eigen::MatrixXd grad_out =
                ((-2.0 / batch.count) * batch.weights.array() * resid.array()).matrix().transpose();
            adam.step(net.params(), net.backward(cache, grad_out));
        }
        double loss = batch_loss(net, train_all);
        if (!(loss <= train_loss)) {
            net.params() = snapshot;
            adam = adam_snapshot;
            loss = train_loss;
        }
        lr *= settings.lr_decay;
        adam.set_learning_rate(lr);
        train_loss = loss;
        const double val = use_val ? batch_loss(net, val_all) : train_loss;
        fit.curve.push_back({epoch, train_loss, val, lr});
        if (val < best_val) {
            best_val = val;
            best_params = net.params();
            since_best = 0;
        } else if (++since_best >= settings.patience) {
            break;
        }
    }
    net.params() = best_params;

    ClassifiedDataset train_records, val_records;
    {
        // Map pooled groups back to records for the residual report.
        std::vector<bool> in_val(groups.size(), false);
        for (std::size_t i : val_idx)
            in_val[i] = true;
        std::map<std::tuple<double, double, double, int>, std::size_t> rank;
        std::size_t next = 0;
        for (const ClassifiedRecord& r : data)
            rank.try_emplace({r.uav.x, r.uav.y, r.uav.z, r.node}, 0);
        for (auto& [key, pos] : rank)
            pos = next++;
        for (const ClassifiedRecord& r : data)
            (in_val[rank.at({r.uav.x, r.uav.y, r.uav.z, r.node})] ? val_records : train_records).push_back(r);
    }
    fit.train = residual_stats(fit.net, train_records);
    fit.validation = residual_stats(fit.net, val_records);
    return fit;
}

}  // namespace madql
