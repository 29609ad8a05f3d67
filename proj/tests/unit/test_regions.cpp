#include "helpers.hpp"

#include "sfwc/harness/verify.hpp"
#include "sfwc/regions/region.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace sfwc;
using sfwc::test::random_tensor;

namespace {

/// k-support norm through its variational form ‖x‖² = min Σ x_i²/θ_i over
/// 0 < θ_i <= 1, Σθ_i <= k. The optimum is θ_i = min(1, |x_i|/λ) with λ found
/// by bisection so that Σθ_i = k.
double k_support_variational(std::span<const double> x, std::size_t k) {
    std::vector<double> a(x.size());
    std::transform(x.begin(), x.end(), a.begin(), [](double v) { return std::abs(v); });
    const std::size_t nonzero = static_cast<std::size_t>(std::count_if(a.begin(), a.end(), [](double v) { return v > 0; }));
    if (nonzero <= k)
        return std::sqrt(std::inner_product(a.begin(), a.end(), a.begin(), 0.0));
    auto mass = [&](double lambda) {
        double s = 0.0;
        for (double v : a)
            s += std::min(1.0, v / lambda);
        return s;
    };
    double lo = 0.0, hi = *std::max_element(a.begin(), a.end()) * static_cast<double>(a.size());
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mass(mid) > static_cast<double>(k) ? lo : hi) = mid;
    }
    const double lambda = 0.5 * (lo + hi);
    double sq = 0.0;
    for (double v : a)
        sq += v >= lambda ? v * v : v * lambda;
    return std::sqrt(sq);
}

Tensor random_atom(const FeasibleRegion &region, RngStream &rng) {
    Tensor v(region.shape());
    const double tau = region.tau();
    switch (region.kind()) {
    case RegionKind::L2Ball: {
        v = random_tensor(region.shape(), rng);
        return (tau / norm2(v)) * v;
    }
    case RegionKind::KSparsePolytope: {
        auto perm = rng.permutation(v.size());
        for (std::size_t j = 0; j < region.k(); ++j)
            v[perm[j]] = rng.uniform() < 0.5 ? -tau : tau;
        return v;
    }
    case RegionKind::KSupport: {
        auto perm = rng.permutation(v.size());
        for (std::size_t j = 0; j < region.k(); ++j)
            v[perm[j]] = rng.normal();
        return (tau / norm2(v)) * v;
    }
    case RegionKind::GroupKSupport: {
        auto perm = rng.permutation(region.groups().size());
        for (std::size_t j = 0; j < region.k(); ++j)
            for (auto i : region.groups()[perm[j]])
                v[i] = rng.normal();
        return (tau / norm2(v)) * v;
    }
    case RegionKind::SpectralKSupport: {
        const Tensor l = random_tensor({region.matrix_rows(), region.k()}, rng);
        const Tensor r = random_tensor({region.k(), region.matrix_cols()}, rng);
        Tensor w = matmul(l, r);
        w *= tau / frobenius(w);
        return w.reshaped(region.shape());
    }
    }
    return v;
}

std::vector<FeasibleRegion> sample_regions(double tau) {
    return {FeasibleRegion::l2_ball({7}, tau),
            FeasibleRegion::k_sparse_polytope({7}, 3, tau),
            FeasibleRegion::k_support({7}, 3, tau),
            FeasibleRegion::group_k_support({8}, contiguous_groups(4, 2), 2, tau),
            FeasibleRegion::spectral_k_support({4, 5}, 2, tau)};
}

std::size_t nonzeros(const Tensor &t) { return t.size() - count_zeros(t); }

} // namespace

TEST_CASE("region factories validate invariants") {
    CHECK_THROWS_AS(FeasibleRegion::l2_ball({3}, 0.0), Error);
    CHECK_THROWS_AS(FeasibleRegion::k_support({3}, 4, 1.0), Error);
    CHECK_THROWS_AS(FeasibleRegion::k_support({3}, 0, 1.0), Error);
    CHECK_THROWS_AS(FeasibleRegion::group_k_support({4}, {{0, 1}, {1, 2, 3}}, 1, 1.0), Error);
    CHECK_THROWS_AS(FeasibleRegion::group_k_support({4}, contiguous_groups(2, 2), 3, 1.0), Error);
    CHECK_THROWS_AS(FeasibleRegion::spectral_k_support({2, 3}, 3, 1.0), Error);
    const auto conv = FeasibleRegion::spectral_k_support({8, 4, 3, 3}, 2, 1.0);
    CHECK(conv.matrix_rows() == 8);
    CHECK(conv.matrix_cols() == 36);
    CHECK(parse_region_kind("k_support") == RegionKind::KSupport);
    CHECK(parse_region_kind("group") == RegionKind::GroupKSupport);
    CHECK_FALSE(parse_region_kind("nope").has_value());
}

TEST_CASE("lmo closed-form examples") {
    CHECK(lmo(FeasibleRegion::l2_ball({2}, 2.0), Tensor::vector({0, 5})) == Tensor::vector({0, -2}));
    CHECK(lmo(FeasibleRegion::k_sparse_polytope({3}, 2, 1.5), Tensor::vector({3, -1, 2})) ==
          Tensor::vector({-1.5, 0, -1.5}));
    const Tensor ks = lmo(FeasibleRegion::k_support({3}, 2, 1.0), Tensor::vector({3, -1, 2}));
    CHECK(max_abs_diff(ks, Tensor::vector({-3 / std::sqrt(13.0), 0, -2 / std::sqrt(13.0)})) < 1e-15);
    CHECK(ks[0] == doctest::Approx(-0.83205).epsilon(1e-5));
    const Tensor gk = lmo(FeasibleRegion::group_k_support({4}, {{0, 1}, {2, 3}}, 1, 1.0), Tensor::vector({3, 4, 0, 1}));
    CHECK(max_abs_diff(gk, Tensor::vector({-0.6, -0.8, 0, 0})) < 1e-15);
    const Tensor d31 = Tensor::diag(std::vector<double>{3, 1});
    CHECK(max_abs_diff(lmo(FeasibleRegion::spectral_k_support({2, 2}, 1, 2.0), d31),
                       Tensor::matrix(2, 2, {-2, 0, 0, 0})) < 1e-12);
    CHECK(max_abs_diff(lmo(FeasibleRegion::spectral_k_support({2, 2}, 2, 1.0), d31),
                       (-1.0 / std::sqrt(10.0)) * d31) < 1e-12);
}

TEST_CASE("lmo of a zero gradient is zero and shapes are checked") {
    for (const auto &region : sample_regions(1.3)) {
        CHECK(lmo(region, Tensor(region.shape())) == Tensor(region.shape()));
        try {
            lmo(region, Tensor({3}));
            FAIL("expected ShapeMismatch");
        } catch (const Error &e) {
            CHECK(e.code() == Errc::ShapeMismatch);
        }
    }
}

TEST_CASE("k-support with k = n coincides with the L2 ball") {
    RngStream rng(1, RngPurpose::Data);
    for (int trial = 0; trial < 100; ++trial) {
        const Tensor g = random_tensor({6}, rng);
        CHECK(max_abs_diff(lmo(FeasibleRegion::k_support({6}, 6, 2.0), g), lmo(FeasibleRegion::l2_ball({6}, 2.0), g)) <
              1e-15);
    }
}

TEST_CASE("lmo beats every sampled atom and every enumerated vertex") {
    RngStream rng(2, RngPurpose::Data);
    for (const auto &region : sample_regions(1.7)) {
        INFO(region_kind_name(region.kind()));
        for (int trial = 0; trial < 50; ++trial) {
            const Tensor g = random_tensor(region.shape(), rng);
            const double best = dot(lmo(region, g), g);
            CHECK(best <= brute_force_lmo_value(region, g) + 1e-10);
            for (int s = 0; s < 200; ++s)
                REQUIRE(best <= dot(random_atom(region, rng), g) + 1e-10);
        }
    }
}

TEST_CASE("lmo output structure, gauge and symmetry") {
    RngStream rng(3, RngPurpose::Data);
    for (const auto &region : sample_regions(0.8)) {
        INFO(region_kind_name(region.kind()));
        for (int trial = 0; trial < 200; ++trial) {
            const Tensor g = random_tensor(region.shape(), rng);
            const Tensor v = lmo(region, g);
            CHECK(gauge(region, v) == doctest::Approx(region.tau()).epsilon(1e-9));
            CHECK(max_abs_diff(lmo(region, 3.7 * g), v) <= 1e-9);
            CHECK(max_abs_diff(lmo(region, -g), -v) <= 1e-9);
            switch (region.kind()) {
            case RegionKind::KSupport:
            case RegionKind::KSparsePolytope:
                CHECK(nonzeros(v) <= region.k());
                break;
            case RegionKind::GroupKSupport: {
                std::size_t active = 0;
                for (double n : group_norms(v.data(), region.groups()))
                    active += n > 0.0;
                CHECK(active <= region.k());
                break;
            }
            case RegionKind::SpectralKSupport: {
                const auto f = svd_full(v.reshaped({region.matrix_rows(), region.matrix_cols()}));
                for (std::size_t i = region.k(); i < f.sigma.size(); ++i)
                    CHECK(f.sigma[i] <= 1e-9 * f.sigma[0]);
                break;
            }
            case RegionKind::L2Ball:
                break;
            }
        }
    }
}

TEST_CASE("gauge examples") {
    CHECK(gauge(FeasibleRegion::k_support({2}, 1, 1.0), Tensor::vector({1, 1})) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(gauge(FeasibleRegion::k_sparse_polytope({3}, 2, 1.0), Tensor::vector({3, -1, 2})) == 3.0);
    const Tensor sparse = Tensor::vector({0, 3, 0, -4, 0});
    for (std::size_t k = 2; k <= 5; ++k)
        CHECK(gauge(FeasibleRegion::k_support({5}, k, 1.0), sparse) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("k-support closed form matches the variational oracle") {
    RngStream rng(4, RngPurpose::Data);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.index(10);
        const std::size_t k = 1 + rng.index(n);
        Tensor x = random_tensor({n}, rng);
        if (trial % 5 == 0)
            for (auto &v : x.data())
                v = std::round(v * 2.0);
        const double closed = k_support_norm(x.data(), k);
        REQUIRE(closed == doctest::Approx(k_support_variational(x.data(), k)).epsilon(1e-9));
    }
}

TEST_CASE("gauges are norms with the right limit cases") {
    RngStream rng(5, RngPurpose::Data);
    for (const auto &region : sample_regions(1.0)) {
        INFO(region_kind_name(region.kind()));
        for (int trial = 0; trial < 1000; ++trial) {
            const Tensor x = random_tensor(region.shape(), rng), y = random_tensor(region.shape(), rng);
            const double a = rng.uniform(-3.0, 3.0);
            CHECK(gauge(region, a * x) == doctest::Approx(std::abs(a) * gauge(region, x)).epsilon(1e-9));
            CHECK(gauge(region, x + y) <= gauge(region, x) + gauge(region, y) + 1e-9);
        }
        for (int s = 0; s < 100; ++s)
            CHECK(gauge(region, random_atom(region, rng)) == doctest::Approx(region.tau()).epsilon(1e-9));
    }
    for (int trial = 0; trial < 200; ++trial) {
        const Tensor x = random_tensor({6}, rng);
        CHECK(gauge(FeasibleRegion::k_support({6}, 1, 1.0), x) == doctest::Approx(norm1(x)).epsilon(1e-9));
        CHECK(gauge(FeasibleRegion::k_support({6}, 6, 1.0), x) == doctest::Approx(norm2(x)).epsilon(1e-9));
        CHECK(gauge(FeasibleRegion::group_k_support({6}, contiguous_groups(3, 2), 3, 1.0), x) ==
              doctest::Approx(norm2(x)).epsilon(1e-9));
    }
}

TEST_CASE("radius_from_diameter examples") {
    CHECK(radius_from_diameter(RegionKind::KSparsePolytope, 6.0, 4) == 1.5);
    for (std::size_t k : {1, 3, 7})
        CHECK(radius_from_diameter(RegionKind::KSupport, 6.0, k) == 3.0);
    CHECK(radius_from_diameter(RegionKind::L2Ball, 2.0, 1) == 1.0);
}

TEST_CASE("sampled atom pairs recover the requested diameter") {
    RngStream rng(6, RngPurpose::Data);
    const double d = 6.0;
    for (auto kind : {RegionKind::KSparsePolytope, RegionKind::KSupport, RegionKind::GroupKSupport,
                      RegionKind::SpectralKSupport, RegionKind::L2Ball}) {
        const std::size_t k = 2;
        const double tau = radius_from_diameter(kind, d, k);
        const LmoCase c{kind, kind == RegionKind::SpectralKSupport ? Shape{3, 3} : Shape{4}, k, 2, 0, 0};
        const FeasibleRegion region = make_case_region(c, tau);
        double widest = 0.0;
        for (int s = 0; s < 100000; ++s) {
            const Tensor a = random_atom(region, rng);
            // Pair each atom with the opposite of a second sample to reach antipodal pairs often.
            const Tensor b = s % 2 ? -a : random_atom(region, rng);
            widest = std::max(widest, norm2(a - b));
        }
        INFO(region_kind_name(kind));
        CHECK(widest <= d * (1.0 + 1e-12));
        CHECK(widest >= d * 0.99);
    }
}

TEST_CASE("estimate_init_norm examples") {
    const RngStream rng(7, RngPurpose::Init);
    CHECK(estimate_init_norm({16}, InitScheme::Ones, 3, rng) == 4.0);
    const double est = estimate_init_norm({10, 100}, InitScheme::FanInGaussian, 20, rng);
    CHECK(std::abs(est - std::sqrt(20.0)) <= 0.05 * std::sqrt(20.0));
    RngStream single = rng.substream(0);
    CHECK(estimate_init_norm({10, 100}, InitScheme::FanInGaussian, 1, rng) ==
          norm2(init_tensor({10, 100}, InitScheme::FanInGaussian, single)));
    const RadiusSpec spec = make_radius_spec(RegionKind::KSparsePolytope, 2.0, 3.0, 4);
    CHECK(spec.diameter == 12.0);
    CHECK(spec.tau == 3.0);
}

TEST_CASE("ensure_feasible examples") {
    const auto ball = FeasibleRegion::l2_ball({2}, 1.0);
    CHECK(max_abs_diff(ensure_feasible(ball, Tensor::vector({3, 4})), Tensor::vector({0.6, 0.8})) < 1e-15);
    CHECK(ensure_feasible(ball, Tensor::vector({0.3, 0.4})) == Tensor::vector({0.3, 0.4}));
    CHECK(ensure_feasible(ball, Tensor({2})) == Tensor({2}));
    RngStream rng(8, RngPurpose::Data);
    for (const auto &region : sample_regions(0.5))
        for (int trial = 0; trial < 50; ++trial) {
            const Tensor x = ensure_feasible(region, random_tensor(region.shape(), rng, 3.0));
            CHECK(gauge(region, x) <= region.tau() * (1.0 + 1e-12));
        }
}

TEST_CASE("resolve_k rounds and clamps") {
    CHECK(resolve_k(0.1, 10) == 1);
    CHECK(resolve_k(0.25, 10) == 3);
    CHECK(resolve_k(0.01, 10) == 1);
    CHECK(resolve_k(1.0, 10) == 10);
    CHECK_THROWS_AS(resolve_k(0.0, 10), Error);
}
