#pragma once

#include "sfwc/numerics/rng.hpp"
#include "sfwc/numerics/tensor.hpp"

#include <Eigen/Dense>

namespace sfwc::test {

inline Tensor random_tensor(const Shape &shape, RngStream &rng, double scale = 1.0) {
    Tensor t(shape);
    for (auto &x : t.data())
        x = scale * rng.normal();
    return t;
}

inline Eigen::MatrixXd to_eigen(const Tensor &a) {
    Eigen::MatrixXd m(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a(i, j);
    return m;
}

/// Singular values from Eigen's divide-and-conquer SVD.
inline std::vector<double> eigen_singular_values(const Tensor &a) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(to_eigen(a));
    const auto &s = svd.singularValues();
    return {s.data(), s.data() + s.size()};
}

} // namespace sfwc::test
