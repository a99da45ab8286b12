#pragma once

#include "pardec/core.hpp"
#include "pardec/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace pardec {

enum class Activation { relu, tanh, identity };

std::string activation_name(Activation a);
Activation  parse_activation(const std::string & name);

// Row-vector convention: y = x * weight + bias, weight is (in x out).
struct DenseLayer {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;
};

// Per-position commit filter: an MLP mapping the block confidence vector
// (width s) to one logit per position. widths() is [s, h, ..., h, s].
class FilterModel {
  public:
    FilterModel() = default;
    // Zero-initialized network with `depth` dense layers (1, 2 or 4 in practice).
    FilterModel(int width, int hidden, int depth = 2, Activation act = Activation::relu);

    // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
    static FilterModel random(int width, int hidden, int depth, Activation act, Rng & rng);

    int              width() const { return width_; }
    int              depth() const { return static_cast<int>(layers_.size()); }
    std::vector<int> widths() const;
    Activation       activation() const { return act_; }

    std::size_t parameter_count() const;

    // Throws DimensionError when conf.size() != width().
    std::vector<double> forward(std::span<const double> conf) const;
    // Rows are samples.
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd & conf) const;

    std::vector<DenseLayer> &       layers() { return layers_; }
    const std::vector<DenseLayer> & layers() const { return layers_; }

    // Copy with every parameter rounded to the nearest float, the precision of
    // the weights file.
    FilterModel quantized() const;
    bool        all_finite() const;

    // Free-form provenance string persisted with the weights.
    std::string fingerprint;

  private:
    int                     width_ = 0;
    Activation              act_   = Activation::relu;
    std::vector<DenseLayer> layers_;
};

double sigmoid(double z);

// Mean binary cross-entropy with logits over active positions, in the stable
// form max(z, 0) - z*y + log1p(exp(-|z|)). Throws DimensionError on width
// mismatch and DatasetError when no position is active.
double bce_loss(std::span<const double> logits, std::span<const std::uint8_t> labels,
                std::span<const std::uint8_t> active);

struct FilterGradients {
    std::vector<DenseLayer> layers;
};

struct LossAndGradients {
    double          loss = 0.0;
    FilterGradients grads;
};

// Analytic gradient of bce_loss(model.forward(conf), labels, active).
LossAndGradients bce_backward(const FilterModel & model, std::span<const double> conf,
                              std::span<const std::uint8_t> labels, std::span<const std::uint8_t> active);

// Batched form: rows are samples; the mean runs over every active entry of the
// batch. Returns loss 0 and zero gradients when nothing is active.
LossAndGradients bce_backward_batch(const FilterModel & model, const Eigen::MatrixXd & conf,
                                    const Eigen::MatrixXd & labels, const Eigen::MatrixXd & active);

struct AdamWConfig {
    double lr           = 1e-3;
    double beta1        = 0.9;
    double beta2        = 0.999;
    double eps          = 1e-8;
    double weight_decay = 0.01;
};

struct AdamWState {
    std::vector<DenseLayer> m;
    std::vector<DenseLayer> v;
    std::int64_t            step = 0;
};

// Decoupled weight decay, then the bias-corrected Adam update. Throws
// OptimizerError without touching model or state on non-finite gradients.
void adamw_step(FilterModel & model, const FilterGradients & grads, AdamWState & state, const AdamWConfig & cfg);

struct TrainingSample {
    std::vector<double>       conf;
    std::vector<std::uint8_t> labels;       // 1 = commit, 0 = keep masked
    std::vector<std::uint8_t> mask_active;  // position was masked when sampled
};

struct TrainConfig {
    AdamWConfig  optimizer;
    int          epochs         = 5000;
    int          batch_size     = 64;
    double       val_fraction   = 0.1;
    std::uint64_t seed          = 0;
    int          hidden         = 0;  // 0 selects hidden = width
    int          depth          = 2;
    Activation   activation     = Activation::relu;

    // Canonical key=value summary stored with trained weights.
    std::string fingerprint() const;
};

struct EpochLoss {
    int    epoch      = 0;
    double train_loss = 0.0;
    double val_loss   = 0.0;  // NaN when the validation split is empty
};

struct TrainResult {
    FilterModel            model;
    std::vector<EpochLoss> history;
};

using EpochCallback = std::function<void(const EpochLoss &)>;

// Mini-batch AdamW on the masked BCE objective. The dataset is shuffled once by
// seed and split into train/validation; each epoch reshuffles the training part.
// The returned model is quantized to float precision. Throws DatasetError on an
// empty dataset or inconsistent widths.
TrainResult train_filter(std::span<const TrainingSample> dataset, const TrainConfig & cfg,
                         const EpochCallback & on_epoch = {});

// Mean masked BCE of a model over a dataset (active entries pooled).
double dataset_loss(const FilterModel & model, std::span<const TrainingSample> dataset);

}  // namespace pardec
