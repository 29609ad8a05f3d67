#include "sfwc/zoo/model.hpp"

#include "sfwc/errors.hpp"
#include "sfwc/regions/region.hpp"

#include <algorithm>
#include <cmath>

namespace sfwc {

std::string_view layer_kind_name(LayerKind kind) noexcept {
    switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::BatchNormLite: return "batchnorm";
    case LayerKind::ReLU: return "relu";
    case LayerKind::GlobalAvgPool: return "global_avg_pool";
    case LayerKind::Flatten: return "flatten";
    }
    return "unknown";
}

const Parameter *Layer::bias() const {
    if (!has_weight())
        return nullptr;
    for (const auto &p : params)
        if (p.role == ParamRole::Bias)
            return &p;
    return nullptr;
}

Parameter *Layer::bias() { return const_cast<Parameter *>(std::as_const(*this).bias()); }

Layer make_dense(std::size_t in, std::size_t out, bool bias) {
    Layer l;
    l.kind = LayerKind::Dense;
    l.in = in;
    l.out = out;
    l.params.push_back({"weight", Tensor({out, in}), ParamRole::Weight, true});
    if (bias)
        l.params.push_back({"bias", Tensor({out}), ParamRole::Bias, false});
    return l;
}

Layer make_conv2d(std::size_t in_channels, std::size_t filters, std::size_t kernel, bool bias) {
    if (kernel % 2 == 0)
        throw Error(Errc::ConfigError, "conv kernels must have odd size");
    Layer l;
    l.kind = LayerKind::Conv2d;
    l.in = in_channels;
    l.out = filters;
    l.kernel = kernel;
    l.params.push_back({"weight", Tensor({filters, in_channels, kernel, kernel}), ParamRole::Weight, true});
    if (bias)
        l.params.push_back({"bias", Tensor({filters}), ParamRole::Bias, false});
    return l;
}

Layer make_batchnorm(std::size_t channels) {
    Layer l;
    l.kind = LayerKind::BatchNormLite;
    l.in = l.out = channels;
    l.params.push_back({"gamma", Tensor({channels}, 1.0), ParamRole::Norm, false});
    l.params.push_back({"beta", Tensor({channels}), ParamRole::Norm, false});
    return l;
}

namespace {
Layer stateless(LayerKind kind) {
    Layer l;
    l.kind = kind;
    return l;
}
} // namespace

Layer make_relu() { return stateless(LayerKind::ReLU); }
Layer make_global_avg_pool() { return stateless(LayerKind::GlobalAvgPool); }
Layer make_flatten() { return stateless(LayerKind::Flatten); }

Model::Model(Shape input_shape, std::size_t classes, std::vector<Layer> layers)
    : input_shape_(std::move(input_shape)), classes_(classes), layers_(std::move(layers)) {
    check_chain();
}

void Model::check_chain() const {
    Shape s = input_shape_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Layer &l = layers_[i];
        const std::string where = "layer " + std::to_string(i) + " (" + std::string(layer_kind_name(l.kind)) + ")";
        switch (l.kind) {
        case LayerKind::Dense:
            if (s.size() != 1 || s[0] != l.in)
                throw Error(Errc::ShapeMismatch, where + " expects " + std::to_string(l.in) + " features, got " +
                                                     shape_string(s));
            s = {l.out};
            break;
        case LayerKind::Conv2d:
            if (s.size() != 3 || s[0] != l.in)
                throw Error(Errc::ShapeMismatch, where + " expects " + std::to_string(l.in) + " channels, got " +
                                                     shape_string(s));
            s[0] = l.out;
            break;
        case LayerKind::BatchNormLite:
            if (s.empty() || s[0] != l.in)
                throw Error(Errc::ShapeMismatch, where + " channel mismatch, got " + shape_string(s));
            break;
        case LayerKind::ReLU:
            break;
        case LayerKind::GlobalAvgPool:
            if (s.size() != 3)
                throw Error(Errc::ShapeMismatch, where + " needs (c,h,w) input");
            s = {s[0]};
            break;
        case LayerKind::Flatten:
            s = {shape_size(s)};
            break;
        }
    }
    if (s.size() != 1 || s[0] != classes_)
        throw Error(Errc::ShapeMismatch, "model output " + shape_string(s) + " does not match " +
                                             std::to_string(classes_) + " classes");
}

std::vector<Parameter *> Model::parameters() {
    std::vector<Parameter *> out;
    for (auto &l : layers_)
        for (auto &p : l.params)
            out.push_back(&p);
    return out;
}

std::vector<const Parameter *> Model::parameters() const {
    std::vector<const Parameter *> out;
    for (const auto &l : layers_)
        for (const auto &p : l.params)
            out.push_back(&p);
    return out;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto *p : parameters())
        n += p->value.size();
    return n;
}

std::size_t Model::prunable_count() const {
    std::size_t n = 0;
    for (const auto *p : parameters())
        if (p->prunable)
            n += p->value.size();
    return n;
}

void Model::replace_layer(std::size_t index, std::vector<Layer> replacement) {
    if (index >= layers_.size())
        throw Error(Errc::ShapeMismatch, "replace_layer: index out of range");
    layers_.erase(layers_.begin() + static_cast<std::ptrdiff_t>(index));
    layers_.insert(layers_.begin() + static_cast<std::ptrdiff_t>(index), std::make_move_iterator(replacement.begin()),
                   std::make_move_iterator(replacement.end()));
    check_chain();
}

void Model::initialize(const RngStream &rng) {
    std::uint64_t index = 0;
    for (auto &l : layers_)
        for (auto &p : l.params) {
            RngStream stream = rng.substream(index++);
            switch (p.role) {
            case ParamRole::Weight:
                p.value = init_tensor(p.value.shape(), InitScheme::FanInGaussian, stream);
                break;
            case ParamRole::Bias:
                p.value = Tensor(p.value.shape());
                break;
            case ParamRole::Norm:
                p.value = Tensor(p.value.shape(), p.name == "gamma" ? 1.0 : 0.0);
                break;
            }
        }
}

namespace {

struct Cache {
    Tensor input;
    Tensor cols;                 // conv: (B, c·d², h·w)
    Tensor xhat;                 // batchnorm
    std::vector<double> inv_std; // batchnorm
};

// Batch-first spatial extent of a (B, c, ...) tensor.
std::size_t inner_size(const Tensor &x) {
    std::size_t s = 1;
    for (std::size_t i = 2; i < x.rank(); ++i)
        s *= x.shape()[i];
    return s;
}

Tensor dense_forward(const Layer &l, const Tensor &x) {
    const std::size_t b = x.shape()[0];
    const Tensor &w = l.weight().value;
    Tensor y = matmul_nt(x.reshaped({b, l.in}), w);
    if (const Parameter *bias = l.bias())
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < l.out; ++j)
                y(i, j) += bias->value[j];
    return y;
}

Tensor conv_forward(const Layer &l, const Tensor &x, Tensor *cols_out) {
    const std::size_t b = x.shape()[0], c = l.in, h = x.shape()[2], wd = x.shape()[3];
    const std::size_t d = l.kernel, pad = d / 2, hw = h * wd, kk = c * d * d, n = l.out;
    const Tensor &w = l.weight().value;
    const Parameter *bias = l.bias();
    Tensor cols({b, kk, hw});
    Tensor y({b, n, h, wd});
    for (std::size_t s = 0; s < b; ++s) {
        double *col = cols.data().data() + s * kk * hw;
        const double *in = x.data().data() + s * c * hw;
        for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t ki = 0; ki < d; ++ki)
                for (std::size_t kj = 0; kj < d; ++kj) {
                    double *row = col + ((ci * d + ki) * d + kj) * hw;
                    for (std::size_t yy = 0; yy < h; ++yy) {
                        const long sy = static_cast<long>(yy + ki) - static_cast<long>(pad);
                        for (std::size_t xx = 0; xx < wd; ++xx) {
                            const long sx = static_cast<long>(xx + kj) - static_cast<long>(pad);
                            row[yy * wd + xx] = (sy >= 0 && sy < static_cast<long>(h) && sx >= 0 &&
                                                 sx < static_cast<long>(wd))
                                                    ? in[ci * hw + static_cast<std::size_t>(sy) * wd +
                                                         static_cast<std::size_t>(sx)]
                                                    : 0.0;
                        }
                    }
                }
        double *out = y.data().data() + s * n * hw;
        for (std::size_t f = 0; f < n; ++f) {
            double *orow = out + f * hw;
            if (bias)
                std::fill(orow, orow + hw, bias->value[f]);
            for (std::size_t k = 0; k < kk; ++k) {
                const double wv = w[f * kk + k];
                if (wv == 0.0)
                    continue;
                const double *crow = col + k * hw;
                for (std::size_t p = 0; p < hw; ++p)
                    orow[p] += wv * crow[p];
            }
        }
    }
    if (cols_out)
        *cols_out = std::move(cols);
    return y;
}

Tensor batchnorm_forward(const Layer &l, const Tensor &x, Cache *cache) {
    const std::size_t b = x.shape()[0], c = l.in, inner = inner_size(x);
    const double count = static_cast<double>(b * inner);
    const Tensor &gamma = l.params[0].value, &beta = l.params[1].value;
    Tensor y(x.shape()), xhat(x.shape());
    std::vector<double> inv_std(c);
    for (std::size_t ch = 0; ch < c; ++ch) {
        double mean = 0.0;
        for (std::size_t s = 0; s < b; ++s)
            for (std::size_t p = 0; p < inner; ++p)
                mean += x[(s * c + ch) * inner + p];
        mean /= count;
        double var = 0.0;
        for (std::size_t s = 0; s < b; ++s)
            for (std::size_t p = 0; p < inner; ++p) {
                const double dv = x[(s * c + ch) * inner + p] - mean;
                var += dv * dv;
            }
        var /= count;
        inv_std[ch] = 1.0 / std::sqrt(var + l.eps);
        for (std::size_t s = 0; s < b; ++s)
            for (std::size_t p = 0; p < inner; ++p) {
                const std::size_t i = (s * c + ch) * inner + p;
                xhat[i] = (x[i] - mean) * inv_std[ch];
                y[i] = gamma[ch] * xhat[i] + beta[ch];
            }
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

Tensor relu_forward(const Tensor &x) {
    Tensor y = x;
    for (auto &v : y.data())
        v = v > 0.0 ? v : 0.0;
    return y;
}

Tensor gap_forward(const Tensor &x) {
    const std::size_t b = x.shape()[0], c = x.shape()[1], inner = inner_size(x);
    Tensor y({b, c});
    for (std::size_t s = 0; s < b; ++s)
        for (std::size_t ch = 0; ch < c; ++ch) {
            double acc = 0.0;
            for (std::size_t p = 0; p < inner; ++p)
                acc += x[(s * c + ch) * inner + p];
            y(s, ch) = acc / static_cast<double>(inner);
        }
    return y;
}

Tensor layer_forward(const Layer &l, const Tensor &x, Cache *cache) {
    if (cache)
        cache->input = x;
    switch (l.kind) {
    case LayerKind::Dense: return dense_forward(l, x);
    case LayerKind::Conv2d: return conv_forward(l, x, cache ? &cache->cols : nullptr);
    case LayerKind::BatchNormLite: return batchnorm_forward(l, x, cache);
    case LayerKind::ReLU: return relu_forward(x);
    case LayerKind::GlobalAvgPool: return gap_forward(x);
    case LayerKind::Flatten: return x.reshaped({x.shape()[0], x.size() / x.shape()[0]});
    }
    return x;
}

// Returns the gradient w.r.t. the layer input; parameter gradients go to `grads`.
Tensor layer_backward(const Layer &l, const Cache &cache, const Tensor &dy, std::span<Tensor> grads) {
    const Tensor &x = cache.input;
    switch (l.kind) {
    case LayerKind::Dense: {
        const std::size_t b = x.shape()[0];
        const Tensor x2 = x.reshaped({b, l.in});
        grads[0] = matmul_tn(dy, x2);
        if (l.bias()) {
            Tensor db({l.out});
            for (std::size_t i = 0; i < b; ++i)
                for (std::size_t j = 0; j < l.out; ++j)
                    db[j] += dy(i, j);
            grads[1] = std::move(db);
        }
        return matmul(dy, l.weight().value).reshaped(x.shape());
    }
    case LayerKind::Conv2d: {
        const std::size_t b = x.shape()[0], c = l.in, h = x.shape()[2], wd = x.shape()[3];
        const std::size_t d = l.kernel, pad = d / 2, hw = h * wd, kk = c * d * d, n = l.out;
        const Tensor &w = l.weight().value;
        Tensor dw({n, c, d, d});
        Tensor db({n});
        Tensor dx(x.shape());
        std::vector<double> dcol(kk * hw);
        for (std::size_t s = 0; s < b; ++s) {
            const double *col = cache.cols.data().data() + s * kk * hw;
            const double *g = dy.data().data() + s * n * hw;
            std::fill(dcol.begin(), dcol.end(), 0.0);
            for (std::size_t f = 0; f < n; ++f) {
                const double *grow = g + f * hw;
                for (std::size_t p = 0; p < hw; ++p)
                    db[f] += grow[p];
                for (std::size_t k = 0; k < kk; ++k) {
                    const double *crow = col + k * hw;
                    double acc = 0.0;
                    for (std::size_t p = 0; p < hw; ++p)
                        acc += grow[p] * crow[p];
                    dw[f * kk + k] += acc;
                    const double wv = w[f * kk + k];
                    if (wv == 0.0)
                        continue;
                    double *drow = dcol.data() + k * hw;
                    for (std::size_t p = 0; p < hw; ++p)
                        drow[p] += wv * grow[p];
                }
            }
            double *din = dx.data().data() + s * c * hw;
            for (std::size_t ci = 0; ci < c; ++ci)
                for (std::size_t ki = 0; ki < d; ++ki)
                    for (std::size_t kj = 0; kj < d; ++kj) {
                        const double *drow = dcol.data() + ((ci * d + ki) * d + kj) * hw;
                        for (std::size_t yy = 0; yy < h; ++yy) {
                            const long sy = static_cast<long>(yy + ki) - static_cast<long>(pad);
                            if (sy < 0 || sy >= static_cast<long>(h))
                                continue;
                            for (std::size_t xx = 0; xx < wd; ++xx) {
                                const long sx = static_cast<long>(xx + kj) - static_cast<long>(pad);
                                if (sx < 0 || sx >= static_cast<long>(wd))
                                    continue;
                                din[ci * hw + static_cast<std::size_t>(sy) * wd + static_cast<std::size_t>(sx)] +=
                                    drow[yy * wd + xx];
                            }
                        }
                    }
        }
        grads[0] = std::move(dw);
        if (l.bias())
            grads[1] = std::move(db);
        return dx;
    }
    case LayerKind::BatchNormLite: {
        const std::size_t b = x.shape()[0], c = l.in, inner = inner_size(x);
        const double count = static_cast<double>(b * inner);
        const Tensor &gamma = l.params[0].value;
        Tensor dgamma({c}), dbeta({c}), dx(x.shape());
        for (std::size_t ch = 0; ch < c; ++ch) {
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (std::size_t s = 0; s < b; ++s)
                for (std::size_t p = 0; p < inner; ++p) {
                    const std::size_t i = (s * c + ch) * inner + p;
                    dgamma[ch] += dy[i] * cache.xhat[i];
                    dbeta[ch] += dy[i];
                    const double dxhat = dy[i] * gamma[ch];
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * cache.xhat[i];
                }
            const double scale = cache.inv_std[ch] / count;
            for (std::size_t s = 0; s < b; ++s)
                for (std::size_t p = 0; p < inner; ++p) {
                    const std::size_t i = (s * c + ch) * inner + p;
                    const double dxhat = dy[i] * gamma[ch];
                    dx[i] = scale * (count * dxhat - sum_dxhat - cache.xhat[i] * sum_dxhat_xhat);
                }
        }
        grads[0] = std::move(dgamma);
        grads[1] = std::move(dbeta);
        return dx;
    }
    case LayerKind::ReLU: {
        Tensor dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (!(x[i] > 0.0))
                dx[i] = 0.0;
        return dx;
    }
    case LayerKind::GlobalAvgPool: {
        const std::size_t b = x.shape()[0], c = x.shape()[1], inner = inner_size(x);
        Tensor dx(x.shape());
        const double scale = 1.0 / static_cast<double>(inner);
        for (std::size_t s = 0; s < b; ++s)
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t p = 0; p < inner; ++p)
                    dx[(s * c + ch) * inner + p] = dy(s, ch) * scale;
        return dx;
    }
    case LayerKind::Flatten:
        return dy.reshaped(x.shape());
    }
    return dy;
}

} // namespace

Tensor Model::forward(const Tensor &x) const {
    Tensor h = x;
    for (const auto &l : layers_)
        h = layer_forward(l, h, nullptr);
    return h;
}

Evaluation Model::evaluate(const Tensor &x, std::span<const std::size_t> labels, bool with_grads) const {
    const std::size_t b = x.shape().empty() ? 0 : x.shape()[0];
    if (labels.size() != b)
        throw Error(Errc::ShapeMismatch, "evaluate: labels and inputs differ in length");
    std::vector<Cache> caches(with_grads ? layers_.size() : 0);
    Tensor h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i)
        h = layer_forward(layers_[i], h, with_grads ? &caches[i] : nullptr);

    Evaluation ev;
    Tensor dlogits({b, classes_});
    double loss = 0.0;
    for (std::size_t s = 0; s < b; ++s) {
        double mx = h(s, 0);
        std::size_t arg = 0;
        for (std::size_t j = 1; j < classes_; ++j)
            if (h(s, j) > mx) {
                mx = h(s, j);
                arg = j;
            }
        double z = 0.0;
        for (std::size_t j = 0; j < classes_; ++j)
            z += std::exp(h(s, j) - mx);
        const double lse = mx + std::log(z);
        loss += lse - h(s, labels[s]);
        if (arg == labels[s])
            ++ev.correct;
        for (std::size_t j = 0; j < classes_; ++j)
            dlogits(s, j) = (std::exp(h(s, j) - lse) - (j == labels[s] ? 1.0 : 0.0)) / static_cast<double>(b);
    }
    ev.loss = b ? loss / static_cast<double>(b) : 0.0;
    if (!std::isfinite(ev.loss))
        throw Error(Errc::NonFiniteLoss, "loss evaluated to " + std::to_string(ev.loss));
    ev.accuracy = b ? static_cast<double>(ev.correct) / static_cast<double>(b) : 0.0;
    ev.logits = std::move(h);
    if (!with_grads)
        return ev;

    std::vector<std::size_t> offset(layers_.size() + 1, 0);
    for (std::size_t i = 0; i < layers_.size(); ++i)
        offset[i + 1] = offset[i] + layers_[i].params.size();
    ev.grads.resize(offset.back());
    Tensor g = std::move(dlogits);
    for (std::size_t i = layers_.size(); i-- > 0;) {
        std::span<Tensor> slot(ev.grads.data() + offset[i], layers_[i].params.size());
        g = layer_backward(layers_[i], caches[i], g, slot);
    }
    return ev;
}

Model make_mlp(const Shape &input_shape, const std::vector<std::size_t> &hidden, std::size_t classes,
               bool batchnorm) {
    std::vector<Layer> layers;
    if (input_shape.size() > 1)
        layers.push_back(make_flatten());
    std::size_t width = shape_size(input_shape);
    for (auto h : hidden) {
        layers.push_back(make_dense(width, h));
        if (batchnorm)
            layers.push_back(make_batchnorm(h));
        layers.push_back(make_relu());
        width = h;
    }
    layers.push_back(make_dense(width, classes));
    return Model(input_shape, classes, std::move(layers));
}

Model make_cnn(const Shape &input_shape, const std::vector<std::size_t> &channels, std::size_t kernel,
               std::size_t classes, bool batchnorm) {
    if (input_shape.size() != 3)
        throw Error(Errc::ShapeMismatch, "make_cnn expects (c, h, w) inputs");
    std::vector<Layer> layers;
    std::size_t c = input_shape[0];
    for (auto n : channels) {
        layers.push_back(make_conv2d(c, n, kernel));
        if (batchnorm)
            layers.push_back(make_batchnorm(n));
        layers.push_back(make_relu());
        c = n;
    }
    layers.push_back(make_global_avg_pool());
    layers.push_back(make_dense(c, classes));
    return Model(input_shape, classes, std::move(layers));
}

Tensor gather_rows(const Tensor &x, std::span<const std::size_t> index) {
    Shape shape = x.shape();
    const std::size_t row = x.size() / shape[0];
    shape[0] = index.size();
    Tensor out(shape);
    for (std::size_t i = 0; i < index.size(); ++i)
        std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(index[i] * row), row,
                    out.data().begin() + static_cast<std::ptrdiff_t>(i * row));
    return out;
}

} // namespace sfwc
