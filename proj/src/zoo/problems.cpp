#include "sfwc/zoo/problems.hpp"

#include "sfwc/errors.hpp"
#include "sfwc/numerics/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace sfwc {

LeastSquaresProblem::LeastSquaresProblem(Tensor features, std::vector<double> targets)
    : features_(std::move(features)), targets_(std::move(targets)) {
    if (features_.rows() != targets_.size() || targets_.empty())
        throw Error(Errc::ShapeMismatch, "least squares: features and targets differ in length");
}

double LeastSquaresProblem::sample_loss(const Tensor &theta, std::size_t i) const {
    double r = -targets_[i];
    for (std::size_t j = 0; j < dim(); ++j)
        r += features_(i, j) * theta[j];
    return 0.5 * r * r;
}

double LeastSquaresProblem::loss(const Tensor &theta) const {
    double s = 0.0;
    for (std::size_t i = 0; i < samples(); ++i)
        s += sample_loss(theta, i);
    return s / static_cast<double>(samples());
}

Tensor LeastSquaresProblem::sample_gradient(const Tensor &theta, std::size_t i) const {
    double r = -targets_[i];
    for (std::size_t j = 0; j < dim(); ++j)
        r += features_(i, j) * theta[j];
    Tensor g({dim()});
    for (std::size_t j = 0; j < dim(); ++j)
        g[j] = r * features_(i, j);
    return g;
}

Tensor LeastSquaresProblem::batch_gradient(const Tensor &theta, std::span<const std::size_t> batch) const {
    Tensor g({dim()});
    for (auto i : batch) {
        double r = -targets_[i];
        for (std::size_t j = 0; j < dim(); ++j)
            r += features_(i, j) * theta[j];
        for (std::size_t j = 0; j < dim(); ++j)
            g[j] += r * features_(i, j);
    }
    g *= 1.0 / static_cast<double>(batch.size());
    return g;
}

Tensor LeastSquaresProblem::gradient(const Tensor &theta) const {
    std::vector<std::size_t> all(samples());
    for (std::size_t i = 0; i < all.size(); ++i)
        all[i] = i;
    return batch_gradient(theta, all);
}

double LeastSquaresProblem::smoothness() const {
    const auto f = svd_full(features_);
    return f.sigma[0] * f.sigma[0] / static_cast<double>(samples());
}

double LeastSquaresProblem::lipschitz_bound(double radius) const {
    double g = 0.0;
    for (std::size_t i = 0; i < samples(); ++i) {
        double xn = 0.0;
        for (std::size_t j = 0; j < dim(); ++j)
            xn += features_(i, j) * features_(i, j);
        xn = std::sqrt(xn);
        g = std::max(g, xn * (xn * radius + std::abs(targets_[i])));
    }
    return g;
}

LeastSquaresProblem LeastSquaresProblem::scaled(double alpha) const {
    std::vector<double> y = targets_;
    for (auto &v : y)
        v *= alpha;
    return LeastSquaresProblem(alpha * features_, std::move(y));
}

LeastSquaresProblem least_squares_problem(std::uint64_t seed, std::size_t samples, std::size_t dim) {
    if (samples < 1 || dim < 1)
        throw Error(Errc::ConfigError, "least squares needs m, n >= 1");
    RngStream rng(seed, RngPurpose::Data);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    Tensor x({samples, dim});
    for (auto &v : x.data())
        v = scale * rng.normal();
    Tensor theta_star({dim});
    for (auto &v : theta_star.data())
        v = rng.normal();
    std::vector<double> y(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < dim; ++j)
            s += x(i, j) * theta_star[j];
        y[i] = s + 0.1 * rng.normal();
    }
    return LeastSquaresProblem(std::move(x), std::move(y));
}

LeastSquaresProblem aligned_least_squares_problem(std::uint64_t seed, std::size_t samples, std::size_t dim,
                                                  double spread, double target_noise) {
    if (samples < 1 || dim < 1)
        throw Error(Errc::ConfigError, "least squares needs m, n >= 1");
    RngStream rng(seed, RngPurpose::Data);
    const double scale = spread / std::sqrt(static_cast<double>(dim));
    Tensor x({samples, dim});
    std::vector<double> y(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        for (std::size_t j = 0; j < dim; ++j)
            x(i, j) = (j == 0 ? 1.0 : 0.0) + scale * rng.normal();
        y[i] = 1.0 + target_noise * rng.normal();
    }
    return LeastSquaresProblem(std::move(x), std::move(y));
}

double finite_diff_check(const std::function<double(const Tensor &)> &loss, const Tensor &theta,
                         const Tensor &analytic, const GradCheckOptions &options) {
    require_same_shape(theta, analytic, "finite_diff_check");
    std::vector<std::size_t> coords;
    if (theta.size() <= options.min_coords) {
        for (std::size_t i = 0; i < theta.size(); ++i)
            coords.push_back(i);
    } else {
        RngStream rng(options.seed, RngPurpose::Noise);
        auto perm = rng.permutation(theta.size());
        coords.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(options.min_coords));
        std::sort(coords.begin(), coords.end());
    }
    double worst = 0.0;
    Tensor probe = theta;
    for (auto i : coords) {
        const double orig = probe[i];
        probe[i] = orig + options.eps;
        const double up = loss(probe);
        probe[i] = orig - options.eps;
        const double down = loss(probe);
        probe[i] = orig;
        const double numeric = (up - down) / (2.0 * options.eps);
        const double a = analytic[i];
        const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
        worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    return worst;
}

double model_gradcheck(const Model &model, const Tensor &inputs, std::span<const std::size_t> labels,
                       const GradCheckOptions &options) {
    const Evaluation ev = model.evaluate(inputs, labels, true);
    std::size_t total = 0;
    for (const auto &g : ev.grads)
        total += g.size();
    Tensor flat({total}), grad({total});
    {
        std::size_t off = 0;
        const auto params = model.parameters();
        for (std::size_t p = 0; p < params.size(); ++p) {
            std::copy(params[p]->value.data().begin(), params[p]->value.data().end(), flat.data().begin() + off);
            std::copy(ev.grads[p].data().begin(), ev.grads[p].data().end(), grad.data().begin() + off);
            off += params[p]->value.size();
        }
    }
    Model work = model;
    auto loss = [&](const Tensor &theta) {
        std::size_t off = 0;
        for (auto *p : work.parameters()) {
            std::copy_n(theta.data().begin() + static_cast<std::ptrdiff_t>(off), p->value.size(),
                        p->value.data().begin());
            off += p->value.size();
        }
        return work.evaluate(inputs, labels, false).loss;
    };
    return finite_diff_check(loss, flat, grad, options);
}

} // namespace sfwc
