#include "sfwc/harness/gradcheck.hpp"

#include "sfwc/harness/experiment.hpp"
#include "sfwc/zoo/problems.hpp"

#include <algorithm>
#include <numeric>

namespace sfwc {

GradcheckReport gradcheck_quadratic(std::uint64_t seed) {
    const LeastSquaresProblem problem = least_squares_problem(seed, 40, 12);
    RngStream rng(seed, RngPurpose::Noise, 7);
    Tensor theta({problem.dim()});
    for (auto &v : theta.data())
        v = rng.normal();
    GradCheckOptions options;
    options.seed = seed;
    const double err = finite_diff_check([&](const Tensor &t) { return problem.loss(t); }, theta,
                                         problem.gradient(theta), options);
    return {"quadratic", err, kQuadraticGradTolerance, err <= kQuadraticGradTolerance};
}

GradcheckReport gradcheck_model(const std::string &name, const Model &model, const Dataset &data, std::uint64_t seed,
                                std::size_t batch) {
    std::vector<std::size_t> index(std::min(batch, data.size()));
    std::iota(index.begin(), index.end(), 0);
    const Tensor x = gather_rows(data.inputs, index);
    std::vector<std::size_t> labels;
    for (std::size_t i : index)
        labels.push_back(data.labels[i]);
    GradCheckOptions options;
    options.seed = seed;
    options.min_coords = 1000;
    const double err = model_gradcheck(model, x, labels, options);
    return {name, err, kModelGradTolerance, err <= kModelGradTolerance};
}

GradcheckReport gradcheck_config(const ExperimentConfig &config, std::uint64_t seed) {
    const DataSplits data = build_datasets(config.dataset);
    Model model = build_model(config.model, data.train);
    model.initialize(RngStream(seed, RngPurpose::Init));
    return gradcheck_model(config.id, model, data.train, seed);
}

std::vector<GradcheckReport> builtin_gradchecks(std::uint64_t seed) {
    std::vector<GradcheckReport> out;
    out.push_back(gradcheck_quadratic(seed));
    const Dataset moons = make_two_moons(seed, 32, 0.1);
    const Dataset bars = make_bars(seed, 16, 4, 6, 0.3);
    for (bool bn : {false, true}) {
        Model mlp = make_mlp(moons.sample_shape(), {16, 16}, moons.classes, bn);
        mlp.initialize(RngStream(seed, RngPurpose::Init));
        out.push_back(gradcheck_model(bn ? "mlp_bn" : "mlp", mlp, moons, seed));
        Model cnn = make_cnn(bars.sample_shape(), {4, 6}, 3, bars.classes, bn);
        cnn.initialize(RngStream(seed, RngPurpose::Init));
        out.push_back(gradcheck_model(bn ? "cnn_bn" : "cnn", cnn, bars, seed, 8));
    }
    return out;
}

} // namespace sfwc
