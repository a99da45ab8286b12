#include "pardec/filter.hpp"

#include "pardec/errors.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace pardec {

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::relu:
            return "relu";
        case Activation::tanh:
            return "tanh";
        case Activation::identity:
            return "identity";
    }
    return "relu";
}

Activation parse_activation(const std::string & name) {
    if (name == "relu") {
        return Activation::relu;
    }
    if (name == "tanh") {
        return Activation::tanh;
    }
    if (name == "identity") {
        return Activation::identity;
    }
    throw ConfigError("unknown activation '" + name + "'");
}

namespace {

void apply_activation(Eigen::MatrixXd & x, Activation a) {
    switch (a) {
        case Activation::relu:
            x = x.cwiseMax(0.0);
            break;
        case Activation::tanh:
            x = x.array().tanh().matrix();
            break;
        case Activation::identity:
            break;
    }
}

// Derivative expressed through the pre-activation.
Eigen::MatrixXd activation_grad(const Eigen::MatrixXd & pre, Activation a) {
    switch (a) {
        case Activation::relu:
            return (pre.array() > 0.0).cast<double>().matrix();
        case Activation::tanh: {
            Eigen::ArrayXXd t = pre.array().tanh();
            return (1.0 - t * t).matrix();
        }
        case Activation::identity:
            break;
    }
    return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
}

std::vector<DenseLayer> zeros_like(const std::vector<DenseLayer> & layers) {
    std::vector<DenseLayer> out;
    out.reserve(layers.size());
    for (const auto & l : layers) {
        out.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
    }
    return out;
}

}  // namespace

FilterModel::FilterModel(int width, int hidden, int depth, Activation act) : width_(width), act_(act) {
    if (width <= 0 || hidden <= 0 || depth <= 0) {
        throw ConfigError("filter width, hidden width and depth must be positive");
    }
    for (int l = 0; l < depth; ++l) {
        const int in  = l == 0 ? width : hidden;
        const int out = l == depth - 1 ? width : hidden;
        layers_.push_back({Eigen::MatrixXd::Zero(in, out), Eigen::VectorXd::Zero(out)});
    }
}

FilterModel FilterModel::random(int width, int hidden, int depth, Activation act, Rng & rng) {
    FilterModel m(width, hidden, depth, act);
    for (auto & l : m.layers_) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.weight.rows()));
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
            for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
                l.weight(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
            }
        }
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) {
            l.bias(i) = (2.0 * rng.uniform() - 1.0) * bound;
        }
    }
    return m;
}

std::vector<int> FilterModel::widths() const {
    std::vector<int> w;
    if (layers_.empty()) {
        return w;
    }
    w.push_back(static_cast<int>(layers_.front().weight.rows()));
    for (const auto & l : layers_) {
        w.push_back(static_cast<int>(l.weight.cols()));
    }
    return w;
}

std::size_t FilterModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto & l : layers_) {
        n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    }
    return n;
}

Eigen::MatrixXd FilterModel::forward_batch(const Eigen::MatrixXd & conf) const {
    if (conf.cols() != width_) {
        throw DimensionError("filter expects width " + std::to_string(width_) + ", got " +
                             std::to_string(conf.cols()));
    }
    Eigen::MatrixXd a = conf;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Eigen::MatrixXd pre = a * layers_[l].weight;
        pre.rowwise() += layers_[l].bias.transpose();
        if (l + 1 < layers_.size()) {
            apply_activation(pre, act_);
        }
        a = std::move(pre);
    }
    return a;
}

std::vector<double> FilterModel::forward(std::span<const double> conf) const {
    if (static_cast<int>(conf.size()) != width_) {
        throw DimensionError("filter expects width " + std::to_string(width_) + ", got " +
                             std::to_string(conf.size()));
    }
    Eigen::MatrixXd x(1, width_);
    for (int i = 0; i < width_; ++i) {
        x(0, i) = conf[i];
    }
    const Eigen::MatrixXd z = forward_batch(x);
    return std::vector<double>(z.data(), z.data() + z.size());
}

FilterModel FilterModel::quantized() const {
    FilterModel q = *this;
    auto round    = [](double v) { return static_cast<double>(static_cast<float>(v)); };
    for (auto & l : q.layers_) {
        l.weight = l.weight.unaryExpr(round);
        l.bias   = l.bias.unaryExpr(round);
    }
    return q;
}

bool FilterModel::all_finite() const {
    for (const auto & l : layers_) {
        if (!l.weight.allFinite() || !l.bias.allFinite()) {
            return false;
        }
    }
    return true;
}

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

double bce_term(double z, double y) {
    return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

void check_widths(std::size_t a, std::size_t b, std::size_t c) {
    if (a != b || a != c) {
        throw DimensionError("logits, labels and active flags differ in width");
    }
}

}  // namespace

double bce_loss(std::span<const double> logits, std::span<const std::uint8_t> labels,
                std::span<const std::uint8_t> active) {
    check_widths(logits.size(), labels.size(), active.size());
    double sum = 0.0;
    int    m   = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (active[i]) {
            sum += bce_term(logits[i], labels[i] ? 1.0 : 0.0);
            ++m;
        }
    }
    if (m == 0) {
        throw DatasetError("no active positions in the loss");
    }
    return sum / m;
}

LossAndGradients bce_backward_batch(const FilterModel & model, const Eigen::MatrixXd & conf,
                                    const Eigen::MatrixXd & labels, const Eigen::MatrixXd & active) {
    const auto & layers = model.layers();
    const auto   depth  = layers.size();
    if (conf.cols() != model.width() || labels.rows() != conf.rows() || labels.cols() != conf.cols() ||
        active.rows() != conf.rows() || active.cols() != conf.cols()) {
        throw DimensionError("batch shapes do not match the filter width");
    }

    // Forward, keeping the input of each layer and each hidden pre-activation.
    std::vector<Eigen::MatrixXd> inputs(depth);
    std::vector<Eigen::MatrixXd> pres(depth);
    Eigen::MatrixXd              a = conf;
    for (std::size_t l = 0; l < depth; ++l) {
        inputs[l]           = a;
        Eigen::MatrixXd pre = a * layers[l].weight;
        pre.rowwise() += layers[l].bias.transpose();
        pres[l] = pre;
        if (l + 1 < depth) {
            apply_activation(pre, model.activation());
        }
        a = std::move(pre);
    }
    const Eigen::MatrixXd & z = a;

    LossAndGradients out;
    out.grads.layers = zeros_like(layers);
    const double m   = active.sum();
    if (m == 0.0) {
        return out;
    }

    double          loss = 0.0;
    Eigen::MatrixXd dz(z.rows(), z.cols());
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        for (Eigen::Index r = 0; r < z.rows(); ++r) {
            if (active(r, c) != 0.0) {
                loss += bce_term(z(r, c), labels(r, c));
                dz(r, c) = (sigmoid(z(r, c)) - labels(r, c)) / m;
            } else {
                dz(r, c) = 0.0;
            }
        }
    }
    out.loss = loss / m;

    Eigen::MatrixXd delta = std::move(dz);
    for (std::size_t l = depth; l-- > 0;) {
        out.grads.layers[l].weight = inputs[l].transpose() * delta;
        out.grads.layers[l].bias   = delta.colwise().sum().transpose();
        if (l > 0) {
            Eigen::MatrixXd back = delta * layers[l].weight.transpose();
            delta                = back.cwiseProduct(activation_grad(pres[l - 1], model.activation()));
        }
    }
    return out;
}

LossAndGradients bce_backward(const FilterModel & model, std::span<const double> conf,
                              std::span<const std::uint8_t> labels, std::span<const std::uint8_t> active) {
    check_widths(conf.size(), labels.size(), active.size());
    if (static_cast<int>(conf.size()) != model.width()) {
        throw DimensionError("sample width does not match the filter");
    }
    const auto      w = static_cast<Eigen::Index>(conf.size());
    Eigen::MatrixXd x(1, w), y(1, w), act(1, w);
    bool            any = false;
    for (Eigen::Index i = 0; i < w; ++i) {
        x(0, i)   = conf[i];
        y(0, i)   = labels[i] ? 1.0 : 0.0;
        act(0, i) = active[i] ? 1.0 : 0.0;
        any       = any || active[i];
    }
    if (!any) {
        throw DatasetError("no active positions in the loss");
    }
    return bce_backward_batch(model, x, y, act);
}

void adamw_step(FilterModel & model, const FilterGradients & grads, AdamWState & state, const AdamWConfig & cfg) {
    auto & layers = model.layers();
    if (grads.layers.size() != layers.size()) {
        throw DimensionError("gradient structure does not match the model");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (grads.layers[l].weight.rows() != layers[l].weight.rows() ||
            grads.layers[l].weight.cols() != layers[l].weight.cols() ||
            grads.layers[l].bias.size() != layers[l].bias.size()) {
            throw DimensionError("gradient shape does not match layer " + std::to_string(l));
        }
        if (!grads.layers[l].weight.allFinite() || !grads.layers[l].bias.allFinite()) {
            throw OptimizerError("non-finite gradient in layer " + std::to_string(l));
        }
    }
    if (state.m.empty()) {
        state.m = zeros_like(layers);
        state.v = zeros_like(layers);
    }

    state.step += 1;
    const double t     = static_cast<double>(state.step);
    const double corr1 = 1.0 - std::pow(cfg.beta1, t);
    const double corr2 = 1.0 - std::pow(cfg.beta2, t);
    const double decay = 1.0 - cfg.lr * cfg.weight_decay;

    auto update = [&](auto & param, const auto & g, auto & m, auto & v) {
        param *= decay;
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        param.array() -= cfg.lr * (m.array() / corr1) / ((v.array() / corr2).sqrt() + cfg.eps);
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
        update(layers[l].weight, grads.layers[l].weight, state.m[l].weight, state.v[l].weight);
        update(layers[l].bias, grads.layers[l].bias, state.m[l].bias, state.v[l].bias);
    }
}

std::string TrainConfig::fingerprint() const {
    std::ostringstream os;
    os.precision(17);
    os << "lr=" << optimizer.lr << ";beta1=" << optimizer.beta1 << ";beta2=" << optimizer.beta2
       << ";eps=" << optimizer.eps << ";weight_decay=" << optimizer.weight_decay << ";epochs=" << epochs
       << ";batch_size=" << batch_size << ";val_fraction=" << val_fraction << ";seed=" << seed
       << ";hidden=" << hidden << ";depth=" << depth << ";activation=" << activation_name(activation);
    return os.str();
}

namespace {

struct Batch {
    Eigen::MatrixXd conf, labels, active;
};

Batch gather(std::span<const TrainingSample> data, std::span<const std::size_t> idx, int width) {
    Batch b;
    const auto rows = static_cast<Eigen::Index>(idx.size());
    b.conf.resize(rows, width);
    b.labels.resize(rows, width);
    b.active.resize(rows, width);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const TrainingSample & s = data[idx[r]];
        for (int c = 0; c < width; ++c) {
            b.conf(r, c)   = s.conf[c];
            b.labels(r, c) = s.labels[c] ? 1.0 : 0.0;
            b.active(r, c) = s.mask_active[c] ? 1.0 : 0.0;
        }
    }
    return b;
}

int validate_dataset(std::span<const TrainingSample> dataset) {
    if (dataset.empty()) {
        throw DatasetError("empty training dataset");
    }
    const std::size_t width = dataset.front().conf.size();
    if (width == 0) {
        throw DatasetError("zero-width training samples");
    }
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto & s = dataset[i];
        if (s.conf.size() != width || s.labels.size() != width || s.mask_active.size() != width) {
            throw DatasetError("sample " + std::to_string(i) + " has inconsistent width");
        }
    }
    return static_cast<int>(width);
}

// Pooled masked BCE over a subset, evaluated in fixed-size chunks.
double subset_loss(const FilterModel & model, std::span<const TrainingSample> data,
                   std::span<const std::size_t> idx) {
    double       sum = 0.0;
    double       m   = 0.0;
    const int    w   = model.width();
    const size_t chunk = 256;
    for (std::size_t start = 0; start < idx.size(); start += chunk) {
        const auto      part = idx.subspan(start, std::min(chunk, idx.size() - start));
        Batch           b    = gather(data, part, w);
        Eigen::MatrixXd z    = model.forward_batch(b.conf);
        for (Eigen::Index c = 0; c < z.cols(); ++c) {
            for (Eigen::Index r = 0; r < z.rows(); ++r) {
                if (b.active(r, c) != 0.0) {
                    sum += bce_term(z(r, c), b.labels(r, c));
                    m += 1.0;
                }
            }
        }
    }
    return m > 0.0 ? sum / m : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

double dataset_loss(const FilterModel & model, std::span<const TrainingSample> dataset) {
    validate_dataset(dataset);
    std::vector<std::size_t> idx(dataset.size());
    std::iota(idx.begin(), idx.end(), 0);
    return subset_loss(model, dataset, idx);
}

TrainResult train_filter(std::span<const TrainingSample> dataset, const TrainConfig & cfg,
                         const EpochCallback & on_epoch) {
    const int width = validate_dataset(dataset);
    if (!(cfg.optimizer.lr >= 0.0) || cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.val_fraction >= 0.0) ||
        cfg.val_fraction >= 1.0) {
        throw ConfigError("invalid training configuration");
    }

    Rng rng(cfg.seed);
    Rng init_rng  = rng.split();
    Rng order_rng = rng.split();

    std::vector<std::size_t> all(dataset.size());
    std::iota(all.begin(), all.end(), 0);
    shuffle(all, order_rng);
    const auto               n_val = static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(all.size()));
    std::vector<std::size_t> val(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train;
    for (std::size_t k = n_val; k < all.size(); ++k) {
        const auto & s = dataset[all[k]];
        bool         any = false;
        for (auto a : s.mask_active) {
            any = any || a;
        }
        if (any) {
            train.push_back(all[k]);
        }
    }
    if (train.empty()) {
        throw DatasetError("no training sample has an active position");
    }

    TrainResult result;
    const int   hidden = cfg.hidden > 0 ? cfg.hidden : width;
    result.model       = FilterModel::random(width, hidden, cfg.depth, cfg.activation, init_rng);
    AdamWState opt;

    result.history.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle(train, order_rng);
        double loss_sum   = 0.0;
        double active_sum = 0.0;
        for (std::size_t start = 0; start < train.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t n = std::min(static_cast<std::size_t>(cfg.batch_size), train.size() - start);
            Batch             b = gather(dataset, std::span<const std::size_t>(train).subspan(start, n), width);
            const double      m = b.active.sum();
            if (m == 0.0) {
                continue;
            }
            LossAndGradients lg = bce_backward_batch(result.model, b.conf, b.labels, b.active);
            adamw_step(result.model, lg.grads, opt, cfg.optimizer);
            loss_sum += lg.loss * m;
            active_sum += m;
        }
        EpochLoss row;
        row.epoch      = epoch;
        row.train_loss = loss_sum / active_sum;
        row.val_loss   = val.empty() ? std::numeric_limits<double>::quiet_NaN() : subset_loss(result.model, dataset, val);
        result.history.push_back(row);
        if (on_epoch) {
            on_epoch(row);
        }
    }
    if (!result.model.all_finite()) {
        throw TrainingError("training diverged to non-finite parameters");
    }
    result.model             = result.model.quantized();
    result.model.fingerprint = cfg.fingerprint();
    return result;
}

}  // namespace pardec
