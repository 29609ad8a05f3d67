#include "sfwc/numerics/tensor.hpp"

#include "sfwc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sfwc {

std::size_t shape_size(const Shape &shape) noexcept {
    std::size_t n = 1;
    for (auto d : shape)
        n *= d;
    return n;
}

std::string shape_string(const Shape &shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i)
        os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_))
        throw Error(Errc::ShapeMismatch, "data length " + std::to_string(data_.size()) +
                                             " does not match shape " + shape_string(shape_));
    if (!all_finite())
        throw Error(Errc::NonFiniteInput, "tensor data contains NaN or Inf");
}

Tensor Tensor::vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
    return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i)
        t(i, i) = 1.0;
    return t;
}

Tensor Tensor::diag(std::span<const double> values) {
    Tensor t({values.size(), values.size()});
    for (std::size_t i = 0; i < values.size(); ++i)
        t(i, i) = values[i];
    return t;
}

std::size_t Tensor::rows() const {
    if (rank() != 2)
        throw Error(Errc::ShapeMismatch, "expected a matrix, got shape " + shape_string(shape_));
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2)
        throw Error(Errc::ShapeMismatch, "expected a matrix, got shape " + shape_string(shape_));
    return shape_[1];
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != size())
        throw Error(Errc::ShapeMismatch, "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    Tensor out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor &Tensor::operator+=(const Tensor &other) {
    require_same_shape(*this, other, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i)
        data_[i] += other.data_[i];
    return *this;
}

Tensor &Tensor::operator-=(const Tensor &other) {
    require_same_shape(*this, other, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i)
        data_[i] -= other.data_[i];
    return *this;
}

Tensor &Tensor::operator*=(double alpha) noexcept {
    for (auto &v : data_)
        v *= alpha;
    return *this;
}

Tensor operator+(Tensor a, const Tensor &b) { return a += b; }
Tensor operator-(Tensor a, const Tensor &b) { return a -= b; }
Tensor operator*(double alpha, Tensor a) { return a *= alpha; }
Tensor operator-(Tensor a) { return a *= -1.0; }

void require_same_shape(const Tensor &a, const Tensor &b, const char *where) {
    if (a.shape() != b.shape())
        throw Error(Errc::ShapeMismatch,
                    std::string(where) + ": " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

double dot(const Tensor &a, const Tensor &b) {
    if (a.size() != b.size())
        throw Error(Errc::ShapeMismatch, "dot: sizes differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> x) noexcept {
    double s = 0.0;
    for (double v : x)
        s += v * v;
    return std::sqrt(s);
}

double norm2(const Tensor &x) noexcept { return norm2(x.data()); }

double norm1(const Tensor &x) noexcept {
    double s = 0.0;
    for (double v : x.data())
        s += std::abs(v);
    return s;
}

double norm_inf(const Tensor &x) noexcept {
    double m = 0.0;
    for (double v : x.data())
        m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const Tensor &a, const Tensor &b) {
    if (a.size() != b.size())
        throw Error(Errc::ShapeMismatch, "max_abs_diff: sizes differ");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

std::size_t count_zeros(const Tensor &x) noexcept {
    return static_cast<std::size_t>(std::count(x.data().begin(), x.data().end(), 0.0));
}

Tensor lerp(const Tensor &a, const Tensor &b, double eta) {
    require_same_shape(a, b, "lerp");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i] = (1.0 - eta) * a[i] + eta * b[i];
    return out;
}

Tensor transpose(const Tensor &a) {
    const std::size_t r = a.rows(), c = a.cols();
    Tensor t({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            t(j, i) = a(i, j);
    return t;
}

Tensor matmul(const Tensor &a, const Tensor &b) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    if (b.rows() != k)
        throw Error(Errc::ShapeMismatch, "matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    Tensor c({n, m});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a(i, p);
            if (aip == 0.0)
                continue;
            for (std::size_t j = 0; j < m; ++j)
                c(i, j) += aip * b(p, j);
        }
    return c;
}

Tensor matmul_tn(const Tensor &a, const Tensor &b) {
    const std::size_t k = a.rows(), n = a.cols(), m = b.cols();
    if (b.rows() != k)
        throw Error(Errc::ShapeMismatch, "matmul_tn: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    Tensor c({n, m});
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t i = 0; i < n; ++i) {
            const double api = a(p, i);
            if (api == 0.0)
                continue;
            for (std::size_t j = 0; j < m; ++j)
                c(i, j) += api * b(p, j);
        }
    return c;
}

Tensor matmul_nt(const Tensor &a, const Tensor &b) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
    if (b.cols() != k)
        throw Error(Errc::ShapeMismatch, "matmul_nt: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    Tensor c({n, m});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p)
                s += a(i, p) * b(j, p);
            c(i, j) = s;
        }
    return c;
}

double frobenius(const Tensor &a) noexcept { return norm2(a); }

Tensor matrix_view(const Tensor &t) {
    if (t.rank() == 0 || t.size() == 0)
        throw Error(Errc::ShapeMismatch, "matrix_view of an empty tensor");
    return t.reshaped({t.shape()[0], t.size() / t.shape()[0]});
}

} // namespace sfwc
