#pragma once

#include "sfwc/errors.hpp"
#include "sfwc/numerics/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace sfwc {

/// Disjoint index groups, e.g. the filters of a convolution.
using GroupPartition = std::vector<std::vector<std::size_t>>;

/// Throws InvalidPartition unless `groups` is disjoint and covers [0, n).
void validate_partition(const GroupPartition &groups, std::size_t n);
/// `count` consecutive groups of `group_size` indices each.
GroupPartition contiguous_groups(std::size_t count, std::size_t group_size);

/// Indices of the k largest |x_i|, lowest index first on ties, returned ascending.
std::vector<std::size_t> topk_indices(std::span<const double> x, std::size_t k);

/// One L2 norm per group.
std::vector<double> group_norms(std::span<const double> x, const GroupPartition &groups);

struct SvdFactors {
    Tensor u;                  // n x r
    std::vector<double> sigma; // non-increasing, length r
    Tensor v;                  // m x r

    std::size_t rank_budget() const noexcept { return sigma.size(); }
    /// U diag(sigma) Vᵀ, optionally keeping only the leading `t` triples.
    Tensor reconstruct(std::size_t t) const;
    Tensor reconstruct() const { return reconstruct(sigma.size()); }
};

class PowerIterationStalled : public Error {
public:
    PowerIterationStalled(const std::string &what, SvdFactors best)
        : Error(Errc::PowerIterationStalled, what), best_(std::move(best)) {}
    const SvdFactors &best() const noexcept { return best_; }

private:
    SvdFactors best_;
};

/// Economy SVD by one-sided (Hestenes) Jacobi rotations. r = min(n, m).
SvdFactors svd_full(const Tensor &a);

struct PowerIterationOptions {
    double tol = 1e-8;
    std::size_t max_iter = 500;
    /// Extra block columns beyond k; they speed up convergence and are dropped on return.
    std::size_t oversample = 5;
    std::uint64_t seed = 0x5f3759df;
};

/// Leading k singular triples by block power (subspace) iteration on AᵀA with
/// Gram-Schmidt re-orthonormalisation, Rayleigh-Ritz extraction and locking of
/// converged leading triples. A triple counts as converged once
/// ‖Aᵀu_j - σ_j v_j‖ <= tol·σ_1.
SvdFactors svd_topk(const Tensor &a, std::size_t k, const PowerIterationOptions &options = {});

/// Sum of singular values.
double nuclear_norm(const Tensor &a);

} // namespace sfwc
