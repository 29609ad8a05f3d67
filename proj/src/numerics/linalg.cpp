#include "sfwc/numerics/linalg.hpp"

#include "sfwc/numerics/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sfwc {

void validate_partition(const GroupPartition &groups, std::size_t n) {
    std::vector<char> seen(n, 0);
    std::size_t covered = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty())
            throw Error(Errc::InvalidPartition, "group " + std::to_string(g) + " is empty");
        for (auto i : groups[g]) {
            if (i >= n)
                throw Error(Errc::InvalidPartition, "index " + std::to_string(i) + " out of range");
            if (seen[i])
                throw Error(Errc::InvalidPartition, "index " + std::to_string(i) + " appears in two groups");
            seen[i] = 1;
            ++covered;
        }
    }
    if (covered != n)
        throw Error(Errc::InvalidPartition,
                    "groups cover " + std::to_string(covered) + " of " + std::to_string(n) + " indices");
}

GroupPartition contiguous_groups(std::size_t count, std::size_t group_size) {
    GroupPartition groups(count);
    for (std::size_t g = 0; g < count; ++g) {
        groups[g].resize(group_size);
        std::iota(groups[g].begin(), groups[g].end(), g * group_size);
    }
    return groups;
}

std::vector<std::size_t> topk_indices(std::span<const double> x, std::size_t k) {
    if (k > x.size())
        throw Error(Errc::BudgetExceedsDimension,
                    "k=" + std::to_string(k) + " exceeds dimension " + std::to_string(x.size()));
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Strict total order: larger magnitude first, then lower index.
    auto before = [&](std::size_t a, std::size_t b) {
        const double fa = std::abs(x[a]), fb = std::abs(x[b]);
        return fa > fb || (fa == fb && a < b);
    };
    if (k < idx.size())
        std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), before);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

std::vector<double> group_norms(std::span<const double> x, const GroupPartition &groups) {
    validate_partition(groups, x.size());
    std::vector<double> out(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        double s = 0.0;
        for (auto i : groups[g])
            s += x[i] * x[i];
        out[g] = std::sqrt(s);
    }
    return out;
}

Tensor SvdFactors::reconstruct(std::size_t t) const {
    const std::size_t n = u.rows(), m = v.rows();
    t = std::min(t, sigma.size());
    Tensor out({n, m});
    for (std::size_t p = 0; p < t; ++p) {
        const double s = sigma[p];
        if (s == 0.0)
            continue;
        for (std::size_t i = 0; i < n; ++i) {
            const double us = u(i, p) * s;
            for (std::size_t j = 0; j < m; ++j)
                out(i, j) += us * v(j, p);
        }
    }
    return out;
}

namespace {

using Columns = std::vector<std::vector<double>>;

double col_dot(const std::vector<double> &a, const std::vector<double> &b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

// Orthogonalises `c` against `basis[0..count)` twice, returns the residual norm.
double orthogonalize(std::vector<double> &c, const Columns &basis, std::size_t count) {
    for (int pass = 0; pass < 2; ++pass)
        for (std::size_t q = 0; q < count; ++q) {
            const double proj = col_dot(basis[q], c);
            for (std::size_t i = 0; i < c.size(); ++i)
                c[i] -= proj * basis[q][i];
        }
    return std::sqrt(col_dot(c, c));
}

// Fills `c` with a unit vector orthogonal to basis[0..count). Tries the
// canonical axes in order, which keeps the completion deterministic.
void complete_basis(std::vector<double> &c, const Columns &basis, std::size_t count) {
    double best = -1.0;
    std::vector<double> best_c;
    for (std::size_t axis = 0; axis < c.size(); ++axis) {
        std::vector<double> e(c.size(), 0.0);
        e[axis] = 1.0;
        const double r = orthogonalize(e, basis, count);
        if (r > 0.5) {
            best_c = std::move(e);
            best = r;
            break;
        }
        if (r > best) {
            best = r;
            best_c = std::move(e);
        }
    }
    for (auto &x : best_c)
        x /= best;
    c = std::move(best_c);
}

SvdFactors jacobi_tall(const Tensor &w) {
    // w is p x q with p >= q.
    const std::size_t p = w.rows(), q = w.cols();
    Columns cols(q, std::vector<double>(p));
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j)
            cols[j][i] = w(i, j);
    Columns vcols(q, std::vector<double>(q, 0.0));
    for (std::size_t j = 0; j < q; ++j)
        vcols[j][j] = 1.0;

    constexpr double eps = 1e-15;
    constexpr int max_sweeps = 80;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t i = 0; i + 1 < q; ++i)
            for (std::size_t j = i + 1; j < q; ++j) {
                const double alpha = col_dot(cols[i], cols[i]);
                const double beta = col_dot(cols[j], cols[j]);
                const double gamma = col_dot(cols[i], cols[j]);
                if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta))
                    continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t r = 0; r < p; ++r) {
                    const double a = cols[i][r], b = cols[j][r];
                    cols[i][r] = c * a - s * b;
                    cols[j][r] = s * a + c * b;
                }
                for (std::size_t r = 0; r < q; ++r) {
                    const double a = vcols[i][r], b = vcols[j][r];
                    vcols[i][r] = c * a - s * b;
                    vcols[j][r] = s * a + c * b;
                }
            }
        if (!rotated)
            break;
    }

    std::vector<double> sig(q);
    for (std::size_t j = 0; j < q; ++j)
        sig[j] = std::sqrt(col_dot(cols[j], cols[j]));
    std::vector<std::size_t> order(q);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sig[a] > sig[b]; });

    SvdFactors f;
    f.sigma.resize(q);
    const double top = q ? sig[order[0]] : 0.0;
    Columns ucols(q);
    for (std::size_t r = 0; r < q; ++r) {
        const std::size_t j = order[r];
        f.sigma[r] = sig[j];
        if (sig[j] > 1e-13 * top && sig[j] > 0.0) {
            ucols[r] = cols[j];
            for (auto &x : ucols[r])
                x /= sig[j];
        } else {
            ucols[r].assign(p, 0.0);
            complete_basis(ucols[r], ucols, r);
        }
    }
    f.u = Tensor({p, q});
    f.v = Tensor({q, q});
    for (std::size_t r = 0; r < q; ++r) {
        for (std::size_t i = 0; i < p; ++i)
            f.u(i, r) = ucols[r][i];
        for (std::size_t i = 0; i < q; ++i)
            f.v(i, r) = vcols[order[r]][i];
    }
    return f;
}

} // namespace

SvdFactors svd_full(const Tensor &a) {
    if (!a.all_finite())
        throw Error(Errc::NonFiniteInput, "svd_full: input has NaN or Inf");
    const std::size_t n = a.rows(), m = a.cols();
    if (n >= m)
        return jacobi_tall(a);
    SvdFactors t = jacobi_tall(transpose(a));
    std::swap(t.u, t.v);
    return t;
}

double nuclear_norm(const Tensor &a) {
    const auto f = svd_full(a);
    return std::accumulate(f.sigma.begin(), f.sigma.end(), 0.0);
}

SvdFactors svd_topk(const Tensor &a, std::size_t k, const PowerIterationOptions &options) {
    if (!a.all_finite())
        throw Error(Errc::NonFiniteInput, "svd_topk: input has NaN or Inf");
    const std::size_t n = a.rows(), m = a.cols();
    const std::size_t r = std::min(n, m);
    if (k < 1 || k > r)
        throw Error(Errc::BudgetExceedsDimension,
                    "svd_topk: k=" + std::to_string(k) + " outside [1, " + std::to_string(r) + "]");
    const std::size_t block = std::min(k + options.oversample, r);

    RngStream rng(options.seed, RngPurpose::Noise);
    Columns vcols(block, std::vector<double>(m));
    Columns ucols(block, std::vector<double>(n, 0.0));
    std::vector<double> sigma(block, 0.0);
    for (std::size_t j = 0; j < block; ++j) {
        for (auto &x : vcols[j])
            x = rng.normal();
        const double nrm = orthogonalize(vcols[j], vcols, j);
        for (auto &x : vcols[j])
            x /= nrm;
    }

    auto apply_a = [&](const std::vector<double> &v) {
        std::vector<double> out(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j)
                s += a(i, j) * v[j];
            out[i] = s;
        }
        return out;
    };
    auto apply_at = [&](const std::vector<double> &u) {
        std::vector<double> out(m, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double ui = u[i];
            if (ui == 0.0)
                continue;
            for (std::size_t j = 0; j < m; ++j)
                out[j] += a(i, j) * ui;
        }
        return out;
    };

    auto pack = [&](std::size_t count) {
        SvdFactors f;
        f.u = Tensor({n, count});
        f.v = Tensor({m, count});
        f.sigma.assign(sigma.begin(), sigma.begin() + static_cast<std::ptrdiff_t>(count));
        for (std::size_t j = 0; j < count; ++j) {
            for (std::size_t i = 0; i < n; ++i)
                f.u(i, j) = ucols[j][i];
            for (std::size_t i = 0; i < m; ++i)
                f.v(i, j) = vcols[j][i];
        }
        return f;
    };

    std::size_t locked = 0;
    for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
        // Power step on the unlocked columns, deflated against the locked ones.
        for (std::size_t j = locked; j < block; ++j) {
            vcols[j] = apply_at(apply_a(vcols[j]));
            double nrm = orthogonalize(vcols[j], vcols, j);
            if (!(nrm > 1e-300)) {
                for (auto &x : vcols[j])
                    x = rng.normal();
                nrm = orthogonalize(vcols[j], vcols, j);
            }
            for (auto &x : vcols[j])
                x /= nrm;
        }

        // Rayleigh-Ritz on the active block.
        const std::size_t active = block - locked;
        Tensor b({n, active});
        for (std::size_t j = 0; j < active; ++j) {
            const auto av = apply_a(vcols[locked + j]);
            for (std::size_t i = 0; i < n; ++i)
                b(i, j) = av[i];
        }
        const SvdFactors small = svd_full(b);
        Columns rotated(active, std::vector<double>(m, 0.0));
        for (std::size_t j = 0; j < active; ++j)
            for (std::size_t p = 0; p < active; ++p) {
                const double w = small.v(p, j);
                for (std::size_t i = 0; i < m; ++i)
                    rotated[j][i] += w * vcols[locked + p][i];
            }
        for (std::size_t j = 0; j < active; ++j) {
            vcols[locked + j] = std::move(rotated[j]);
            sigma[locked + j] = small.sigma[j];
            for (std::size_t i = 0; i < n; ++i)
                ucols[locked + j][i] = small.u(i, j);
        }

        const double top = sigma[0];
        for (std::size_t j = locked; j < block; ++j)
            if (!(sigma[j] > 1e-13 * top))
                complete_basis(ucols[j], ucols, j);
        std::size_t converged = locked;
        while (converged < k) {
            const auto atu = apply_at(ucols[converged]);
            double res = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double d = atu[i] - sigma[converged] * vcols[converged][i];
                res += d * d;
            }
            if (std::sqrt(res) > options.tol * top)
                break;
            ++converged;
        }
        locked = converged;
        if (locked >= k)
            return pack(k);
    }
    throw PowerIterationStalled("svd_topk: no convergence after " + std::to_string(options.max_iter) +
                                    " iterations (" + std::to_string(locked) + " of " + std::to_string(k) +
                                    " triples converged)",
                                pack(k));
}

} // namespace sfwc
