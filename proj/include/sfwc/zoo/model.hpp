#pragma once

#include "sfwc/numerics/rng.hpp"
#include "sfwc/numerics/tensor.hpp"

#include <span>
#include <string>
#include <vector>

namespace sfwc {

enum class LayerKind { Dense, Conv2d, BatchNormLite, ReLU, GlobalAvgPool, Flatten };
enum class ParamRole { Weight, Bias, Norm };

std::string_view layer_kind_name(LayerKind kind) noexcept;

struct Parameter {
    std::string name;
    Tensor value;
    ParamRole role = ParamRole::Weight;
    /// Weights are prunable and constrained; biases and normalisation never are.
    bool prunable = false;
};

/// Dense weights are (out, in); conv weights are (filters, channels, d, d) with
/// stride 1 and zero padding d/2, so odd kernels preserve the spatial size.
/// BatchNormLite normalises with the statistics of the batch it sees (train and
/// eval alike) and applies a per-channel affine map.
struct Layer {
    LayerKind kind = LayerKind::ReLU;
    std::size_t in = 0;     // features or channels
    std::size_t out = 0;    // features or filters
    std::size_t kernel = 0; // conv spatial size
    double eps = 1e-5;      // batchnorm
    std::vector<Parameter> params;

    bool has_weight() const noexcept { return kind == LayerKind::Dense || kind == LayerKind::Conv2d; }
    Parameter &weight() { return params.at(0); }
    const Parameter &weight() const { return params.at(0); }
    /// Bias of a dense/conv layer, or nullptr.
    const Parameter *bias() const;
    Parameter *bias();
};

Layer make_dense(std::size_t in, std::size_t out, bool bias = true);
Layer make_conv2d(std::size_t in_channels, std::size_t filters, std::size_t kernel, bool bias = false);
Layer make_batchnorm(std::size_t channels);
Layer make_relu();
Layer make_global_avg_pool();
Layer make_flatten();

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
    std::size_t correct = 0;
    Tensor logits;
    /// One gradient per model parameter, in Model::parameters() order.
    std::vector<Tensor> grads;
};

/// Ordered layer stack with a softmax cross-entropy head.
class Model {
public:
    Model() = default;
    Model(Shape input_shape, std::size_t classes, std::vector<Layer> layers);

    const Shape &input_shape() const noexcept { return input_shape_; }
    std::size_t classes() const noexcept { return classes_; }
    std::vector<Layer> &layers() noexcept { return layers_; }
    const std::vector<Layer> &layers() const noexcept { return layers_; }

    std::vector<Parameter *> parameters();
    std::vector<const Parameter *> parameters() const;
    std::size_t parameter_count() const;
    std::size_t prunable_count() const;

    /// Logits for a batch shaped (B, input_shape...).
    Tensor forward(const Tensor &x) const;
    /// Mean loss, accuracy and (optionally) gradients. Throws NonFiniteLoss.
    Evaluation evaluate(const Tensor &x, std::span<const std::size_t> labels, bool with_grads) const;

    /// Replaces layer `index` by `replacement` (used by low-rank decomposition).
    void replace_layer(std::size_t index, std::vector<Layer> replacement);

    /// Weights N(0, 2/fan_in), zero biases, unit/zero normalisation.
    void initialize(const RngStream &rng);

private:
    void check_chain() const;

    Shape input_shape_;
    std::size_t classes_ = 0;
    std::vector<Layer> layers_;
};

/// Dense stack in -> hidden... -> classes with ReLU (and optional batchnorm)
/// between layers. Inputs of rank > 1 are flattened first.
Model make_mlp(const Shape &input_shape, const std::vector<std::size_t> &hidden, std::size_t classes,
               bool batchnorm = false);

/// Conv stack over (c, h, w) images: [conv -> (bn) -> relu]* -> global average
/// pool -> dense head.
Model make_cnn(const Shape &input_shape, const std::vector<std::size_t> &channels, std::size_t kernel,
               std::size_t classes, bool batchnorm = false);

/// Rows `index` of a batch-first tensor.
Tensor gather_rows(const Tensor &x, std::span<const std::size_t> index);

} // namespace sfwc
