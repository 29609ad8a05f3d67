#include "sfwc/harness/verify.hpp"

#include "sfwc/errors.hpp"
#include "sfwc/numerics/rng.hpp"
#include "sfwc/zoo/problems.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

namespace sfwc {

namespace {

/// Calls f(mask) for every subset of [0, n) with at most k members.
template <class F> void for_each_subset(std::size_t n, std::size_t k, F &&f) {
    if (n > 24)
        throw Error(Errc::BudgetExceedsDimension, "brute force enumeration limited to 24 coordinates");
    const std::uint32_t end = std::uint32_t{1} << n;
    for (std::uint32_t mask = 0; mask < end; ++mask)
        if (static_cast<std::size_t>(std::popcount(mask)) <= k)
            f(mask);
}

double min_over_polytope(const Tensor &g, std::size_t k, double tau) {
    const std::size_t n = g.size();
    double best = 0.0;
    for_each_subset(n, k, [&](std::uint32_t support) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < n; ++i)
            if (support >> i & 1U)
                idx.push_back(i);
        const std::uint32_t patterns = std::uint32_t{1} << idx.size();
        for (std::uint32_t signs = 0; signs < patterns; ++signs) {
            double value = 0.0;
            for (std::size_t j = 0; j < idx.size(); ++j)
                value += (signs >> j & 1U ? -tau : tau) * g[idx[j]];
            best = std::min(best, value);
        }
    });
    return best;
}

/// Each support S contributes the minimiser -τ·g_S/‖g_S‖ of <v, g> over unit
/// atoms supported on S, with value -τ‖g_S‖.
double min_over_supports(const Tensor &g, const GroupPartition &groups, std::size_t k, double tau) {
    double best = 0.0;
    for_each_subset(groups.size(), k, [&](std::uint32_t chosen) {
        double sq = 0.0;
        for (std::size_t gi = 0; gi < groups.size(); ++gi)
            if (chosen >> gi & 1U)
                for (auto i : groups[gi])
                    sq += g[i] * g[i];
        best = std::min(best, -tau * std::sqrt(sq));
    });
    return best;
}

} // namespace

double brute_force_lmo_value(const FeasibleRegion &region, const Tensor &g) {
    const double tau = region.tau();
    switch (region.kind()) {
    case RegionKind::L2Ball:
        return -tau * norm2(g);
    case RegionKind::KSparsePolytope:
        return min_over_polytope(g, region.k(), tau);
    case RegionKind::KSupport:
        return min_over_supports(g, contiguous_groups(g.size(), 1), region.k(), tau);
    case RegionKind::GroupKSupport:
        return min_over_supports(g, region.groups(), region.k(), tau);
    case RegionKind::SpectralKSupport: {
        const auto f = svd_full(g.reshaped({region.matrix_rows(), region.matrix_cols()}));
        double sq = 0.0;
        for (std::size_t i = 0; i < region.k(); ++i)
            sq += f.sigma[i] * f.sigma[i];
        return -tau * std::sqrt(sq);
    }
    }
    return 0.0;
}

std::string LmoReport::label() const {
    std::ostringstream os;
    os << region_kind_name(spec.kind) << " shape=" << shape_string(spec.shape) << " k=" << spec.k;
    if (spec.kind == RegionKind::GroupKSupport)
        os << " group=" << spec.group_size;
    return os.str();
}

FeasibleRegion make_case_region(const LmoCase &c, double tau) {
    switch (c.kind) {
    case RegionKind::L2Ball: return FeasibleRegion::l2_ball(c.shape, tau);
    case RegionKind::KSparsePolytope: return FeasibleRegion::k_sparse_polytope(c.shape, c.k, tau);
    case RegionKind::KSupport: return FeasibleRegion::k_support(c.shape, c.k, tau);
    case RegionKind::GroupKSupport: {
        const std::size_t n = shape_size(c.shape);
        if (c.group_size == 0 || n % c.group_size != 0)
            throw Error(Errc::InvalidPartition, "dimension must be a multiple of the group size");
        return FeasibleRegion::group_k_support(c.shape, contiguous_groups(n / c.group_size, c.group_size), c.k,
                                               tau);
    }
    case RegionKind::SpectralKSupport: return FeasibleRegion::spectral_k_support(c.shape, c.k, tau);
    }
    throw Error(Errc::ConfigError, "unknown region kind");
}

LmoReport verify_lmo(const LmoCase &c) {
    LmoReport report;
    report.spec = c;
    RngStream rng(c.seed, RngPurpose::Data, static_cast<std::uint64_t>(c.kind) << 32 | c.k);
    const bool vector_kind = c.kind != RegionKind::SpectralKSupport;
    for (std::size_t trial = 0; trial < c.trials; ++trial) {
        const double tau = rng.uniform(0.1, 5.0);
        const FeasibleRegion region = make_case_region(c, tau);
        Tensor g(c.shape);
        // Every tenth vector trial uses small integers so ties and zeros get exercised.
        const bool quantised = vector_kind && trial % 10 == 9;
        for (auto &x : g.data())
            x = quantised ? static_cast<double>(static_cast<int>(rng.index(7)) - 3) : rng.normal();
        const Tensor v = lmo(region, g);
        const double gap = dot(v, g) - brute_force_lmo_value(region, g);
        report.max_gap = std::max(report.max_gap, gap);
        report.max_infeasibility = std::max(report.max_infeasibility, gauge(region, v) / tau - 1.0);
        ++report.trials;
    }
    report.pass = report.max_gap <= kLmoGapTolerance && report.max_infeasibility <= 1e-9;
    return report;
}

std::vector<LmoCase> default_lmo_suite(std::size_t trials, std::uint64_t seed) {
    std::vector<LmoCase> cases;
    auto add = [&](RegionKind kind, Shape shape, std::size_t k, std::size_t group_size = 2) {
        cases.push_back({kind, std::move(shape), k, group_size, trials, seed});
    };
    for (std::size_t n : {1, 3, 6, 8})
        add(RegionKind::L2Ball, {n}, 1);
    for (auto kind : {RegionKind::KSparsePolytope, RegionKind::KSupport})
        for (std::size_t n : {6, 8})
            for (std::size_t k = 1; k <= 4; ++k)
                add(kind, {n}, k);
    for (std::size_t k = 1; k <= 3; ++k)
        add(RegionKind::GroupKSupport, {6}, k, 2);
    for (std::size_t k = 1; k <= 4; ++k)
        add(RegionKind::GroupKSupport, {8}, k, 2);
    for (std::size_t k = 1; k <= 2; ++k)
        add(RegionKind::GroupKSupport, {8}, k, 4);
    for (Shape s : {Shape{4, 5}, Shape{5, 4}, Shape{3, 3}, Shape{2, 4}})
        for (std::size_t k = 1; k <= std::min<std::size_t>(4, std::min(s[0], s[1])); ++k)
            add(RegionKind::SpectralKSupport, s, k);
    return cases;
}

ConvergenceReport convergence_check(const ConvergenceCheckOptions &options) {
    const ConvergenceExperimentSpec &limits = options.constants;
    if (options.horizons.empty() || options.seeds == 0)
        throw Error(Errc::ConfigError, "convergence check needs horizons and seeds");
    ConvergenceReport report;
    report.diameter = limits.diameter;
    const double radius = limits.diameter / 2.0;
    const FeasibleRegion ball = FeasibleRegion::l2_ball({options.dim}, radius);
    const Tensor theta0({options.dim});

    // Shrink the instance until its certified constants sit inside the requested ones.
    LeastSquaresProblem base = aligned_least_squares_problem(options.problem_seed, options.samples, options.dim,
                                                             options.spread, options.target_noise);
    const double m0 = base.smoothness(), g0 = base.lipschitz_bound(radius), h0 = base.loss(theta0);
    const double alpha2 = std::min({1.0, limits.smoothness / m0, limits.lipschitz / g0, limits.initial_gap / h0});
    const LeastSquaresProblem problem = base.scaled(std::sqrt(alpha2) * (1.0 - 1e-12));
    report.smoothness = problem.smoothness();
    report.lipschitz = problem.lipschitz_bound(radius);
    report.initial_gap = problem.loss(theta0);
    report.lipschitz_respected = true;

    for (std::size_t horizon : options.horizons) {
        ConvergenceExperimentSpec spec = limits;
        spec.horizon = horizon;
        const TheoremSchedule schedule = theorem_schedule(spec);
        HorizonResult hr;
        hr.horizon = horizon;
        hr.eta = schedule.eta;
        hr.bound = theorem_bound(spec);
        double sum_sampled = 0.0, sum_all = 0.0;
        for (std::size_t seed = 0; seed < options.seeds; ++seed) {
            RngStream data(seed, RngPurpose::Data, horizon);
            RngStream noise(seed, RngPurpose::Noise, horizon);
            const std::size_t pick = noise.index(horizon);
            Tensor theta = theta0;
            std::vector<std::size_t> batch(schedule.batch);
            double seed_all = 0.0;
            for (std::size_t t = 0; t < horizon; ++t) {
                const Tensor exact = problem.gradient(theta);
                const double product = fw_gap(theta, exact, ball) * norm2(exact);
                seed_all += product;
                if (t == pick)
                    sum_sampled += product;
                for (auto &i : batch) {
                    i = data.index(problem.samples());
                    hr.max_sample_grad = std::max(hr.max_sample_grad, norm2(problem.sample_gradient(theta, i)));
                }
                const Tensor g = problem.batch_gradient(theta, batch);
                const Tensor v = lmo(ball, g);
                const double step = rescale_lr(RescaleMode::GradientTheory, schedule.eta, norm2(g), 0.0, 0.0);
                theta = fw_update(theta, v, step);
            }
            sum_all += seed_all / static_cast<double>(horizon);
        }
        hr.sampled_mean = sum_sampled / static_cast<double>(options.seeds);
        hr.measured_mean = sum_all / static_cast<double>(options.seeds);
        hr.within_bound = hr.measured_mean <= hr.bound;
        report.lipschitz_respected = report.lipschitz_respected && hr.max_sample_grad <= limits.lipschitz;
        report.horizons.push_back(hr);
    }
    const double last = report.horizons.back().measured_mean;
    report.ratio = last > 0.0 ? report.horizons.front().measured_mean / last
                              : std::numeric_limits<double>::infinity();
    report.pass = report.lipschitz_respected &&
                  std::all_of(report.horizons.begin(), report.horizons.end(),
                              [](const HorizonResult &h) { return h.within_bound; }) &&
                  (report.horizons.size() < 2 || (report.ratio >= kRatioLow && report.ratio <= kRatioHigh));
    return report;
}

} // namespace sfwc
