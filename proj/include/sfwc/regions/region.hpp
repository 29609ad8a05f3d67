#pragma once

#include "sfwc/numerics/linalg.hpp"
#include "sfwc/numerics/rng.hpp"
#include "sfwc/numerics/tensor.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace sfwc {

enum class RegionKind { L2Ball, KSparsePolytope, KSupport, GroupKSupport, SpectralKSupport };

std::string_view region_kind_name(RegionKind kind) noexcept;
/// Accepts the names printed by region_kind_name plus short aliases
/// ("l2", "polytope", "ksupport", "group", "spectral").
std::optional<RegionKind> parse_region_kind(std::string_view name) noexcept;

/// A norm ball of radius tau over one parameter tensor. Immutable once built;
/// the factories validate every invariant.
class FeasibleRegion {
public:
    static FeasibleRegion l2_ball(Shape shape, double tau);
    static FeasibleRegion k_sparse_polytope(Shape shape, std::size_t k, double tau);
    static FeasibleRegion k_support(Shape shape, std::size_t k, double tau);
    static FeasibleRegion group_k_support(Shape shape, GroupPartition groups, std::size_t k, double tau);
    /// The tensor is viewed as a (shape[0] x rest) matrix.
    static FeasibleRegion spectral_k_support(Shape shape, std::size_t k, double tau);

    RegionKind kind() const noexcept { return kind_; }
    double tau() const noexcept { return tau_; }
    std::size_t k() const noexcept { return k_; }
    const Shape &shape() const noexcept { return shape_; }
    const GroupPartition &groups() const noexcept { return groups_; }
    std::size_t matrix_rows() const noexcept { return rows_; }
    std::size_t matrix_cols() const noexcept { return cols_; }

    /// L2 diameter: 2τ√k for the polytope, 2τ otherwise.
    double diameter() const noexcept;
    /// Copy with a different radius.
    FeasibleRegion with_tau(double tau) const;

private:
    FeasibleRegion() = default;

    RegionKind kind_ = RegionKind::L2Ball;
    double tau_ = 1.0;
    std::size_t k_ = 0;
    Shape shape_;
    GroupPartition groups_;
    std::size_t rows_ = 0, cols_ = 0;
};

/// k-support norm of a vector given through its entries (signs are ignored).
double k_support_norm(std::span<const double> x, std::size_t k);

/// argmin over the region of <v, g>. g = 0 maps to the zero tensor.
Tensor lmo(const FeasibleRegion &region, const Tensor &g, const PowerIterationOptions &svd_options = {});

/// The norm whose ball of radius tau is the region; x is inside iff gauge <= tau.
double gauge(const FeasibleRegion &region, const Tensor &x);

/// tau such that the region's L2 diameter equals D.
double radius_from_diameter(RegionKind kind, double diameter, std::size_t k);

/// k = max(1, round(fraction * dimension)), capped at dimension.
std::size_t resolve_k(double fraction, std::size_t dimension);

enum class InitScheme { FanInGaussian, Ones, Zeros };

/// Product of all dimensions but the first (the whole size for rank-1 shapes).
std::size_t fan_in(const Shape &shape) noexcept;
Tensor init_tensor(const Shape &shape, InitScheme scheme, RngStream &rng);
/// Mean of ‖θ‖₂ over `samples` independent initialisations.
double estimate_init_norm(const Shape &shape, InitScheme scheme, std::size_t samples, const RngStream &rng);

struct RadiusSpec {
    double w = 1.0;
    double init_norm = 1.0;
    double diameter = 2.0;
    double tau = 1.0;
};

/// D = 2·w·init_norm and the matching radius for `kind`.
RadiusSpec make_radius_spec(RegionKind kind, double w, double init_norm, std::size_t k);

/// Radially rescales theta into the region when it lies outside.
Tensor ensure_feasible(const FeasibleRegion &region, const Tensor &theta);

} // namespace sfwc
