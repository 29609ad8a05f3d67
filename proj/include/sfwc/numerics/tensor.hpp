#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace sfwc {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape &shape) noexcept;
std::string shape_string(const Shape &shape);

/// Dense row-major array of doubles. Rank-2 tensors double as matrices.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    /// Checks length and finiteness of `data`.
    Tensor(Shape shape, std::vector<double> data);

    static Tensor vector(std::initializer_list<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);
    static Tensor identity(std::size_t n);
    static Tensor diag(std::span<const double> values);

    const Shape &shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t rank() const noexcept { return shape_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::size_t rows() const;
    std::size_t cols() const;

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double> &values() const noexcept { return data_; }

    double &operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }
    double &operator()(std::size_t r, std::size_t c) noexcept { return data_[r * shape_[1] + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * shape_[1] + c]; }

    /// Same data, new shape of equal size.
    Tensor reshaped(Shape shape) const;
    bool all_finite() const noexcept;

    Tensor &operator+=(const Tensor &other);
    Tensor &operator-=(const Tensor &other);
    Tensor &operator*=(double alpha) noexcept;

    friend bool operator==(const Tensor &, const Tensor &) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor &b);
Tensor operator-(Tensor a, const Tensor &b);
Tensor operator*(double alpha, Tensor a);
Tensor operator-(Tensor a);

void require_same_shape(const Tensor &a, const Tensor &b, const char *where);

double dot(const Tensor &a, const Tensor &b);
double norm2(const Tensor &x) noexcept;
double norm2(std::span<const double> x) noexcept;
double norm1(const Tensor &x) noexcept;
double norm_inf(const Tensor &x) noexcept;
double max_abs_diff(const Tensor &a, const Tensor &b);
std::size_t count_zeros(const Tensor &x) noexcept;

/// (1 - eta) * a + eta * b
Tensor lerp(const Tensor &a, const Tensor &b, double eta);

// Matrix helpers (rank-2 tensors).
Tensor transpose(const Tensor &a);
Tensor matmul(const Tensor &a, const Tensor &b);
/// aᵀ · b without materialising the transpose.
Tensor matmul_tn(const Tensor &a, const Tensor &b);
/// a · bᵀ
Tensor matmul_nt(const Tensor &a, const Tensor &b);
double frobenius(const Tensor &a) noexcept;

/// Copy viewed as a (shape[0] x rest) matrix, e.g. a conv kernel as (n x c·d²).
Tensor matrix_view(const Tensor &t);

} // namespace sfwc
